"""Benchmark the numba kernels against the pure-numpy fallback.

Times the hot kernels (conv2d forward/backward, depthwise conv, the
separable window filter, bilinear warp) and one full pose-network
training step on both backends.

Run:  python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import time

import numpy as np

from duvio import backend, kernels


def timed(fn, repeat):
    fn()  # warm (jit compile on the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rng):
    x = rng.normal(size=(4, 16, 64, 32))
    w = rng.normal(size=(32, 16, 3, 3))
    y = kernels.conv2d_fwd(x, w, (2, 2), (1, 1))
    dw = rng.normal(size=(16, 3, 3))
    img = rng.normal(size=(256, 512))
    taps = np.exp(-0.5 * (np.arange(-5, 6) / 1.5) ** 2)
    taps /= taps.sum()
    yy, xx = np.meshgrid(np.arange(256.0), np.arange(512.0), indexing="ij")
    return {
        "conv2d_fwd 4x16x64x32 k3s2": lambda: kernels.conv2d_fwd(x, w, (2, 2), (1, 1)),
        "conv2d_gx  (same shape)": lambda: kernels.conv2d_gx(y, w, (2, 2), (1, 1), 64, 32),
        "conv2d_gw  (same shape)": lambda: kernels.conv2d_gw(x, y, (2, 2), (1, 1), 3, 3),
        "depthwise_fwd 4x16x64x32": lambda: kernels.depthwise2d_fwd(x, dw, (1, 1), (1, 1)),
        "gauss window 256x512 (2 passes)": lambda: kernels.correlate1d(
            kernels.correlate1d(img, taps, 0), taps, 1),
        "bilinear warp 256x512": lambda: kernels.warp_bilinear(img, yy * 0.97, xx * 1.01),
    }


def train_step_case():
    from duvio import dataio
    from duvio.disturb import SynthSpec, synthesize_sequence
    from duvio.nn.optim import Adam
    from duvio.vionet import VioNet, desk_config, pose_loss_t, windows_to_arrays

    cfg = desk_config(seed=0)
    model = VioNet(cfg)
    spec = SynthSpec(sequence_id="bench", duration=0.3, image_height=32,
                     image_width=64, trajectory="circle")
    wins = dataio.build_windows(synthesize_sequence(spec))[:4]
    frames, imu, targets = windows_to_arrays(wins, cfg)
    opt = Adam(model.parameters(), lr=1e-4)

    def step():
        preds, _ = model.forward_windows(frames[None], imu[None])
        loss = pose_loss_t(preds, targets[None], cfg.alpha)
        opt.zero_grad()
        loss.backward()
        opt.step()

    return step


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    results = {}
    for name in ("numpy", "numba"):
        try:
            backend.set_backend(name)
        except RuntimeError as e:
            print(f"skipping {name}: {e}")
            continue
        rng = np.random.default_rng(0)
        cases = kernel_cases(rng)
        cases["vio train step (4x6 windows)"] = train_step_case()
        for case, fn in cases.items():
            results.setdefault(case, {})[name] = timed(fn, args.repeat)

    width = max(len(c) for c in results)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  speedup")
    print("-" * (width + 34))
    for case, times in results.items():
        np_t = times.get("numpy", float("nan"))
        nb_t = times.get("numba", float("nan"))
        ratio = np_t / nb_t if nb_t and np.isfinite(nb_t) else float("nan")
        print(f"{case:<{width}}  {np_t * 1e3:>8.2f}ms  {nb_t * 1e3:>8.2f}ms  {ratio:>6.2f}x")


if __name__ == "__main__":
    main()

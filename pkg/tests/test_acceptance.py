"""Acceptance criteria, one test per criterion.

Each test enforces the stated tolerance and runtime budget and prints a
single PASS line (run with ``pytest tests/test_acceptance.py -v -s``).
Budgets are measured after the session-wide kernel warmup fixture, so
they time computation rather than jit compilation.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from duvio import dataio, eval as evalmod
from duvio.dataio import PoseDelta
from duvio.dehaze import (DehazeTrainConfig, DiscriminatorConfig,
                          GeneratorConfig, REFERENCE_ABLATION, image_metrics,
                          train_dehazer)
from duvio.disturb import SynthSpec, TurbidityParams, synthesize_sequence
from duvio.experiment import config_from_kv, run_pipeline
from duvio.nn import autograd as ag
from duvio.vionet import VioNet, desk_config, pose_loss_t, train_vio, windows_to_arrays


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def report(criterion, budget_s, watch, detail):
    assert watch.elapsed < budget_s, \
        f"criterion {criterion} exceeded budget: {watch.elapsed:.1f}s >= {budget_s}s"
    print(f"\nPASS criterion {criterion}: {detail} [{watch.elapsed:.1f}s "
          f"< {budget_s}s]")


# --------------------------------------------------------------------------
# criterion 1: metric oracles agree within 1e-9 relative; published-row
# rmse = sqrt(mse) within 0.001; runtime < 10 s

def brute_rmse(preds, refs):
    v_acc = p_acc = 0.0
    for p, r in zip(preds, refs):
        for k in range(3):
            v_acc += (p.v[k] - r.v[k]) ** 2
            p_acc += (p.phi[k] - r.phi[k]) ** 2
    n = len(preds)
    return math.sqrt(v_acc / (3 * n)), math.sqrt(p_acc / (3 * n))


def brute_mse_psnr(ref, cand):
    acc = 0.0
    h, w = ref.shape
    for y in range(h):
        for x in range(w):
            d = (ref[y, x] - cand[y, x]) * 255.0
            acc += d * d
    mse = acc / (h * w)
    psnr = math.inf if mse == 0 else 10.0 * math.log10(255.0 ** 2 / mse)
    return mse, psnr


def brute_ssim(ref, cand, window=11, sigma=1.5, k1=0.01, k2=0.03):
    """Direct per-window evaluation (gathered windows, no separable pass)."""
    r = window // 2
    xs = np.arange(-r, r + 1, dtype=float)
    taps = np.exp(-0.5 * (xs / sigma) ** 2)
    taps /= taps.sum()
    kern = np.outer(taps, taps).reshape(-1)
    h, w = ref.shape

    def reflect(i, n):
        period = 2 * n - 2 if n > 1 else 1
        i = np.mod(i, period)
        return np.where(i >= n, period - i, i)

    ys = reflect(np.arange(h)[:, None] + np.arange(-r, r + 1)[None, :], h)
    xs_idx = reflect(np.arange(w)[:, None] + np.arange(-r, r + 1)[None, :], w)
    # windows[y, x, :] = the 121 pixels around (y, x)
    win_ref = ref[ys[:, None, :, None], xs_idx[None, :, None, :]].reshape(h, w, -1)
    win_cand = cand[ys[:, None, :, None], xs_idx[None, :, None, :]].reshape(h, w, -1)
    mx = win_ref @ kern
    my = win_cand @ kern
    sxx = (win_ref * win_ref) @ kern - mx * mx
    syy = (win_cand * win_cand) @ kern - my * my
    sxy = (win_ref * win_cand) @ kern - mx * my
    c1, c2 = k1 ** 2, k2 ** 2
    ssim_map = ((2 * mx * my + c1) * (2 * sxy + c2)) / \
               ((mx * mx + my * my + c1) * (sxx + syy + c2))
    return float(np.mean(ssim_map))


def test_criterion_1_metric_oracles():
    rng = np.random.default_rng(2024)
    with Stopwatch() as watch:
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(1, 40))
            preds = [PoseDelta(v=rng.normal(size=3), phi=rng.normal(size=3))
                     for _ in range(n)]
            refs = [PoseDelta(v=rng.normal(size=3), phi=rng.normal(size=3))
                    for _ in range(n)]
            got = evalmod.compute_rmse(preds, refs)
            want = brute_rmse(preds, refs)
            for g, w in zip(got, want):
                worst = max(worst, abs(g - w) / max(abs(w), 1e-300))
        for i in range(200):
            ref = rng.uniform(size=(8, 8))
            cand = np.clip(ref + rng.normal(0, 0.1, size=(8, 8)), 0, 1)
            rep = image_metrics(ref, cand)
            mse, psnr = brute_mse_psnr(ref, cand)
            ssim_ref = brute_ssim(ref, cand)
            worst = max(worst,
                        abs(rep.mse - mse) / max(abs(mse), 1e-300),
                        abs(rep.psnr - psnr) / max(abs(psnr), 1e-300),
                        abs(rep.rmse - math.sqrt(mse)) / max(math.sqrt(mse), 1e-300),
                        abs(rep.ssim - ssim_ref) / max(abs(ssim_ref), 1e-300))
        assert worst < 1e-9, f"worst relative error {worst:.3e}"
        # published ablation rows: rmse = sqrt(mse) within 0.001
        assert abs(math.sqrt(158.47) - 12.588) <= 1e-3
        assert abs(math.sqrt(203.29) - 14.258) <= 1e-3
        for row in REFERENCE_ABLATION.values():
            assert abs(math.sqrt(row["mse"]) - row["rmse"]) <= 1e-3
    report(1, 10.0, watch,
           f"metric oracle equivalence, worst rel err {worst:.2e}; "
           f"published rmse=sqrt(mse) rows hold within 0.001")


# --------------------------------------------------------------------------
# criterion 2: windowing invariants on 50 jittered synthetic sequences;
# runtime < 30 s

def test_criterion_2_windowing_invariants():
    with Stopwatch() as watch:
        rng = np.random.default_rng(55)
        total_windows = 0
        for seed in range(50):
            n_frames = int(rng.integers(4, 13))
            spec = SynthSpec(
                sequence_id=f"w{seed:02d}", duration=(n_frames - 1) / 20.0,
                image_height=8, image_width=8, texture_seed=seed,
                noise_seed=seed, timing_jitter=0.35,
                trajectory="circle", angular_rate=0.3 + 0.01 * seed)
            ds = synthesize_sequence(spec)
            wins = dataio.build_windows(ds)
            assert len(wins) == len(ds.frames) - 1
            for w in wins:
                assert len(w.imu) == 11
            total_windows += len(wins)
    report(2, 30.0, watch,
           f"50 jittered sequences, {total_windows} windows, all 11-sample, "
           f"N frames -> N-1 windows")


# --------------------------------------------------------------------------
# criterion 3: window targets integrate back to the generating trajectory
# within 1e-6 m / 1e-6 rad on line, circle and square; runtime < 10 s

def test_criterion_3_round_trip_trajectory():
    from duvio import geometry as geo

    with Stopwatch() as watch:
        worst_t = worst_r = 0.0
        cases = [("line", dict(speed=0.8, yaw_rate=0.4)),
                 ("circle", dict(angular_rate=0.7, radius=1.8)),
                 ("square", dict(speed=1.5, radius=1.2, corner_radius=0.3))]
        for traj, kw in cases:
            spec = SynthSpec(sequence_id=f"rt-{traj}", trajectory=traj,
                             duration=2.5, image_height=8, image_width=8, **kw)
            ds = synthesize_sequence(spec)
            wins = dataio.build_windows(ds)
            ref = dataio.interpolate_reference(ds.reference_poses,
                                               ds.frame_times())
            poses = evalmod.integrate_trajectory(ref[0],
                                                 [w.target for w in wins],
                                                 timestamps=ds.frame_times())
            for got, want in zip(poses, ref):
                worst_t = max(worst_t, float(np.max(np.abs(
                    got.translation - want.translation))))
                r_err = geo.quat_to_mat(got.rotation).T @ geo.quat_to_mat(want.rotation)
                worst_r = max(worst_r, geo.rotation_angle(r_err))
        assert worst_t < 1e-6, f"translation error {worst_t:.2e}"
        assert worst_r < 1e-6, f"rotation error {worst_r:.2e}"
    report(3, 10.0, watch,
           f"line/circle/square reconstruction, worst {worst_t:.2e} m / "
           f"{worst_r:.2e} rad")


# --------------------------------------------------------------------------
# criterion 4: analytic gradients of the pose loss through the full
# scaled-down network match central differences (rel err < 1e-3 on >= 95%
# of sampled parameters); runtime < 5 min

def test_criterion_4_gradient_checks():
    with Stopwatch() as watch:
        cfg = desk_config(image_height=16, image_width=32,
                          visual_channels=(4, 6, 6, 6, 8, 8, 8, 8, 12),
                          visual_feature=12, inertial_channels=(8, 12, 12),
                          inertial_feature=12, lstm_hidden=16, mlp_hidden=12,
                          seed=3)
        model = VioNet(cfg)
        spec = SynthSpec(sequence_id="gc", duration=0.2, image_height=16,
                         image_width=32, trajectory="circle", angular_rate=0.5,
                         imu_noise_gyro=0.01, imu_noise_accel=0.05)
        wins = dataio.build_windows(synthesize_sequence(spec))[:4]
        frames, imu, targets = windows_to_arrays(wins, cfg)

        def loss_value():
            preds, _ = model.forward_windows(frames[None], imu[None])
            return pose_loss_t(preds, targets[None], cfg.alpha)

        loss = loss_value()
        loss.backward()
        rng = np.random.default_rng(11)
        checked = passed = 0
        h = 1e-5
        for name, p in model.named_parameters():
            flat = p.data.reshape(-1)
            for _ in range(5):
                k = int(rng.integers(flat.size))
                idx = np.unravel_index(k, p.data.shape)
                old = p.data[idx]
                p.data[idx] = old + h
                lp = loss_value().item()
                p.data[idx] = old - h
                lm = loss_value().item()
                p.data[idx] = old
                fd = (lp - lm) / (2 * h)
                an = p.grad[idx]
                denom = max(abs(fd), abs(an))
                ok = (denom < 1e-10) or (abs(fd - an) / denom < 1e-3)
                checked += 1
                passed += bool(ok)
        rate = passed / checked
        assert rate >= 0.95, f"gradient match rate {rate:.3f} on {checked} samples"
    report(4, 300.0, watch,
           f"full-network gradient check, {passed}/{checked} sampled "
           f"parameters within 1e-3")


# --------------------------------------------------------------------------
# criterion 5: overfit smoke tests; (a) pose net >= 100x on 8 windows in
# 300 epochs, (b) dehazer reconstruction >= 10x on 1 pair in 200 epochs;
# runtime < 10 min combined

def test_criterion_5_overfit_smoke():
    with Stopwatch() as watch:
        spec = SynthSpec(sequence_id="ov", duration=0.4, image_height=16,
                         image_width=32, trajectory="circle", angular_rate=0.6,
                         radius=1.5, speed=0.6)
        wins = dataio.build_windows(synthesize_sequence(spec))[:8]
        assert len(wins) == 8
        cfg = desk_config(image_height=16, image_width=32,
                          visual_channels=(4, 6, 6, 6, 8, 8, 8, 8, 12),
                          visual_feature=12, inertial_channels=(8, 12, 12),
                          inertial_feature=12, lstm_hidden=32, mlp_hidden=16,
                          epochs=300, batch=1, seq_len=8, lr=2e-3,
                          lr_decay=0.995, seed=1)
        _, log = train_vio(wins, cfg)
        vio_reduction = log[0]["train_loss"] / log[-1]["train_loss"]
        assert vio_reduction >= 100.0, f"pose-loss reduction only {vio_reduction:.1f}x"

        rng = np.random.default_rng(4)
        img = rng.uniform(size=(16, 16))
        hazy = np.clip(img * 0.25 + 0.6, 0.0, 1.0)
        dcfg = DehazeTrainConfig(epochs=200, batch=1, lr=4e-3, lr_decay=0.975,
                                 seed=0)
        _, dlog = train_dehazer([(hazy, img)],
                                GeneratorConfig(base_channels=8, depth=2, seed=0),
                                DiscriminatorConfig(base_channels=8, seed=0), dcfg)
        recon_reduction = dlog[0]["gen_recon"] / dlog[-1]["gen_recon"]
        assert recon_reduction >= 10.0, f"recon reduction only {recon_reduction:.1f}x"
    report(5, 600.0, watch,
           f"pose-loss down {vio_reduction:.0f}x in 300 epochs; dehazer "
           f"reconstruction down {recon_reduction:.0f}x in 200 epochs")


# --------------------------------------------------------------------------
# criteria 6 + 7: dehazing-benefit trend on the turbid micro-dataset and
# byte-identical reruns; runtime < 45 min

MICRO_NET = {
    "vio.image_height": "32", "vio.image_width": "64",
    "vio.epochs": "120", "vio.batch": "4", "vio.seq_len": "6",
    "vio.lr": "1e-3", "vio.lr_decay": "0.99",
    "vio.visual_channels": "8,12,16,16,24,24,32,32,48",
    "vio.visual_feature": "32", "vio.inertial_channels": "16,32,32",
    "vio.inertial_feature": "32", "vio.lstm_hidden": "64",
    "vio.mlp_hidden": "32",
    "dehaze.generator.base_channels": "8", "dehaze.generator.depth": "2",
    "dehaze.discriminator.base_channels": "8",
    "dehaze.train.epochs": "30", "dehaze.train.batch": "4",
    "dehaze.train.lr": "2e-3", "dehaze.train.lr_decay": "0.96",
    "turbidity.attenuation_beta": "1.7", "turbidity.airlight": "0.8",
    "turbidity.depth": "2.0", "turbidity.beta_jitter": "0.3",
    "turbidity.airlight_jitter": "0.05",
}


def build_trend_dataset(root):
    rates = {"t01": 0.15, "t02": 0.30, "t03": 0.45, "e01": 0.225, "e02": 0.375}
    for i, (sid, rate) in enumerate(sorted(rates.items())):
        ds = synthesize_sequence(SynthSpec(
            sequence_id=sid, trajectory="circle", angular_rate=rate, radius=2.0,
            duration=3.0, image_height=32, image_width=64, texture_seed=11,
            noise_seed=300 + i, imu_noise_gyro=0.05, imu_noise_accel=0.2))
        dataio.save_sequence(ds, os.path.join(root, sid))


def trend_config(root, out, dehaze, seed=0):
    kv = {"dataset_root": root, "output_dir": out, "scenario": "turbid",
          "split.train": "t01,t02,t03", "split.val": "", "split.test": "e01,e02",
          "dehaze.enabled": "true" if dehaze else "false",
          "seed": str(seed), "determinism": "true"}
    kv.update(MICRO_NET)
    return config_from_kv(kv)


@pytest.fixture(scope="module")
def trend_outputs(tmp_path_factory):
    base = tmp_path_factory.mktemp("trend")
    root = str(base / "data")
    build_trend_dataset(root)
    docs = {}
    with Stopwatch() as watch:
        for tag, dehaze in (("duvio", True), ("uvio", False)):
            out = str(base / f"out-{tag}")
            run_pipeline(trend_config(root, out, dehaze))
            with open(os.path.join(out, "report", "report.json")) as f:
                docs[tag] = json.load(f)
    docs["elapsed"] = watch.elapsed
    docs["base"] = str(base)
    docs["root"] = root
    return docs


def test_criterion_6_dehazing_benefit_trend(trend_outputs):
    watch = Stopwatch()
    watch.elapsed = trend_outputs["elapsed"]
    du = trend_outputs["duvio"]["reports"]
    u = trend_outputs["uvio"]["reports"]
    assert all(r["dehazed"] for r in du)
    assert not any(r["dehazed"] for r in u)
    v_du = float(np.mean([r["v_rmse"] for r in du]))
    v_u = float(np.mean([r["v_rmse"] for r in u]))
    phi_du = float(np.mean([r["phi_rmse"] for r in du]))
    phi_u = float(np.mean([r["phi_rmse"] for r in u]))
    assert v_du <= 1.0 * v_u, f"v_rmse ratio {v_du / v_u:.3f} > 1.0"
    assert phi_du <= 1.0 * phi_u, f"phi_rmse ratio {phi_du / phi_u:.3f} > 1.0"
    iq = trend_outputs["duvio"]["image_quality"]
    gain = iq["dehazed_vs_clean"]["mean_psnr"] - iq["disturbed_vs_clean"]["mean_psnr"]
    assert gain >= 3.0, f"dehazed PSNR gain only {gain:.2f} dB"
    report(6, 2700.0, watch,
           f"v_rmse ratio {v_du / v_u:.2f}, phi_rmse ratio {phi_du / phi_u:.2f} "
           f"(dehazed/turbid <= 1.0), PSNR gain {gain:+.1f} dB (>= 3)")


def test_criterion_7_run_determinism(trend_outputs):
    # rerun the dehazing pipeline with the same seed; report JSON must be
    # byte-identical
    base = trend_outputs["base"]
    root = trend_outputs["root"]
    with Stopwatch() as watch:
        out2 = os.path.join(base, "out-duvio-rerun")
        run_pipeline(trend_config(root, out2, dehaze=True))
        with open(os.path.join(base, "out-duvio", "report", "report.json"),
                  "rb") as f:
            first = f.read()
        with open(os.path.join(out2, "report", "report.json"), "rb") as f:
            second = f.read()
        assert first == second, "report JSON differs between seeded reruns"
    report(7, 2700.0, watch,
           f"rerun report.json byte-identical ({len(first)} bytes)")


# --------------------------------------------------------------------------
# criterion 8: hardware capture honesty; runtime < 5 s

def test_criterion_8_hardware_capture_honesty():
    with Stopwatch() as watch:
        bare = evalmod.capture_hardware_metrics(lambda: None)
        assert bare.power_w is None
        assert bare.gpu_util_pct is None
        assert bare.memory_mib is None
        assert bare.temperature_c is None
        table = bare.format_table()
        assert table.count("unavailable") == 4
        stub = evalmod.StubProbe(power_w=47.41, gpu_util_pct=4.0,
                                 memory_mib=923.0, temperature_c=34.0)
        echoed = evalmod.capture_hardware_metrics(lambda: None, probe=stub)
        assert echoed.power_w == 47.41
        assert echoed.gpu_util_pct == 4.0
        assert echoed.memory_mib == 923.0
        assert echoed.temperature_c == 34.0
    report(8, 5.0, watch,
           "no probe -> all fields unavailable; stub probe echoed exactly "
           "(47.41 W, 4%, 923 MiB, 34 degC)")

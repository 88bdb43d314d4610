"""Command-line interface.

Subcommands: synth, disturb, dehaze-train, dehaze-run, dehaze-eval,
vio-train, vio-infer, eval, report, run.  Global flags (--seed,
--deterministic, --config, --verbose) precede the subcommand.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import dataio, eval as evalmod
from .dehaze import (DehazeTrainConfig, DiscriminatorConfig, Generator,
                     GeneratorConfig, image_metrics, split_state, train_dehazer)
from .disturb import (DistortionParams, SynthSpec, TurbidityParams,
                      disturb_sequence, synthesize_sequence)
from .errors import ConfigError, DuvioError
from .experiment import (ExperimentConfig, load_dehazer, run_pipeline,
                         validate_config)
from .nn import load_weights, save_weights
from .vionet import VioConfig, VioNet, infer_sequence, train_vio


def _add_global_flags(p):
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--deterministic", action="store_true", default=None,
                   help="force determinism mode on")
    p.add_argument("--config", default=None, help="experiment config file")
    p.add_argument("--verbose", action="store_true", help="stage progress on stderr")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="duvio",
        description="dehazing-aided underwater visual-inertial odometry")
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic sequence directory")
    p.add_argument("--out", required=True)
    p.add_argument("--id", default="s00")
    p.add_argument("--trajectory", default="line",
                   choices=("line", "circle", "square"))
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--frame-rate", type=float, default=20.0)
    p.add_argument("--imu-rate", type=float, default=200.0)
    p.add_argument("--height", type=int, default=32, dest="image_height")
    p.add_argument("--width", type=int, default=64, dest="image_width")
    p.add_argument("--speed", type=float, default=0.5)
    p.add_argument("--heading", type=float, default=0.0)
    p.add_argument("--yaw-rate", type=float, default=0.0)
    p.add_argument("--angular-rate", type=float, default=0.4)
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--texture-seed", type=int, default=7)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--imu-noise-gyro", type=float, default=0.0)
    p.add_argument("--imu-noise-accel", type=float, default=0.0)
    p.add_argument("--scenario", default="original", choices=dataio.SCENARIOS)

    p = sub.add_parser("disturb", help="rewrite a sequence under a disturbance")
    p.add_argument("--scenario", required=True, choices=("distortion", "turbid"))
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", dest="dst", required=True)
    p.add_argument("--beta", type=float, default=1.5, help="turbidity attenuation")
    p.add_argument("--airlight", type=float, default=0.85)
    p.add_argument("--depth", type=float, default=2.0)
    p.add_argument("--k1", type=float, default=0.12)
    p.add_argument("--k2", type=float, default=0.05)
    p.add_argument("--blur-sigma", type=float, default=0.8)
    p.add_argument("--noise-sigma", type=float, default=0.02)

    p = sub.add_parser("dehaze-train", help="train the enhancement GAN on pairs")
    p.add_argument("--data", required=True,
                   help="directory with hazy/ and clean/ png pairs")
    p.add_argument("--cfg", default=None, help="experiment config for dehaze.*")
    p.add_argument("--out", required=True)

    p = sub.add_parser("dehaze-run", help="enhance every frame of a sequence")
    p.add_argument("--weights", required=True)
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", dest="dst", required=True)

    p = sub.add_parser("dehaze-eval", help="score enhancement on (hazy, clean) pairs")
    p.add_argument("--weights", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--report", required=True)

    p = sub.add_parser("vio-train", help="train the pose network")
    p.add_argument("--data", required=True, help="dataset root of sequence dirs")
    p.add_argument("--cfg", default=None, help="experiment config for vio.* keys")
    p.add_argument("--dehaze", default=None, help="dehazer weights to apply")
    p.add_argument("--out", required=True)
    p.add_argument("--train-seqs", default=None, help="comma-separated ids")
    p.add_argument("--val-seqs", default=None)

    p = sub.add_parser("vio-infer", help="run pose inference over a sequence")
    p.add_argument("--weights", required=True)
    p.add_argument("--dehaze", default=None)
    p.add_argument("--seq", required=True)
    p.add_argument("--out", required=True, help="deltas CSV path")

    p = sub.add_parser("eval", help="score predicted deltas against reference")
    p.add_argument("--pred", required=True, help="deltas CSV")
    p.add_argument("--ref", required=True, help="reference sequence directory")
    p.add_argument("--scenario", required=True, choices=dataio.SCENARIOS)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--dehazed", action="store_true")
    p.add_argument("--mode", default="pooled", choices=evalmod.RMSE_MODES)
    p.add_argument("--rotation", default="euler", choices=evalmod.ROTATION_ERRORS)

    p = sub.add_parser("report", help="merge report JSONs into tables and charts")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--charts", required=True, help="output directory")

    sub.add_parser("run", help="full pipeline from an experiment config")
    return parser


def _experiment_config(args):
    if args.config:
        cfg = validate_config(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.deterministic:
        cfg = replace(cfg, determinism=True)
    return cfg


def _load_pairs_dir(path):
    hazy_dir = os.path.join(path, "hazy")
    clean_dir = os.path.join(path, "clean")
    names = sorted(os.listdir(hazy_dir))
    pairs = []
    for name in names:
        pairs.append((dataio.load_image(os.path.join(hazy_dir, name)),
                      dataio.load_image(os.path.join(clean_dir, name))))
    return pairs, names


def cmd_synth(args):
    spec = SynthSpec(sequence_id=args.id, trajectory=args.trajectory,
                     duration=args.duration, frame_rate_hz=args.frame_rate,
                     imu_rate_hz=args.imu_rate, image_height=args.image_height,
                     image_width=args.image_width, speed=args.speed,
                     heading=args.heading, yaw_rate=args.yaw_rate,
                     angular_rate=args.angular_rate, radius=args.radius,
                     texture_seed=args.texture_seed, noise_seed=args.noise_seed,
                     imu_noise_gyro=args.imu_noise_gyro,
                     imu_noise_accel=args.imu_noise_accel,
                     scenario=args.scenario)
    ds = synthesize_sequence(spec)
    dataio.save_sequence(ds, args.out)
    print(f"wrote {len(ds.frames)} frames to {args.out}")


def cmd_disturb(args):
    ds = dataio.load_sequence(args.src)
    seed = args.seed if args.seed is not None else 0
    out = disturb_sequence(
        ds, args.scenario,
        turbidity=TurbidityParams(attenuation_beta=args.beta,
                                  airlight=args.airlight, depth=args.depth),
        distortion=DistortionParams(radial_k1=args.k1, radial_k2=args.k2,
                                    blur_sigma=args.blur_sigma,
                                    noise_sigma=args.noise_sigma, seed=seed))
    dataio.save_sequence(out, args.dst)
    print(f"wrote {args.scenario} copy of {ds.sequence_id} to {args.dst}")


def cmd_dehaze_train(args):
    cfg = _experiment_config(args)
    pairs, _ = _load_pairs_dir(args.data)
    state, log = train_dehazer(pairs, cfg.generator, cfg.discriminator,
                               cfg.dehaze_train)
    save_weights(args.out, state,
                 meta={"kind": "dehazer",
                       "generator_config": cfg.generator.as_dict(),
                       "discriminator_config": cfg.discriminator.as_dict()})
    print(f"trained on {len(pairs)} pairs; final val psnr "
          f"{log[-1]['val_psnr']:.2f} dB -> {args.out}")


def cmd_dehaze_run(args):
    gen = load_dehazer(args.weights)
    ds = dataio.load_sequence(args.src)
    frames = [dataio.Frame(timestamp=f.timestamp,
                           image=np.round(np.clip(gen.enhance(f.image), 0, 1)
                                          * 255.0) / 255.0)
              for f in ds.frames]
    ds.frames = frames
    dataio.save_sequence(ds, args.dst)
    print(f"enhanced {len(frames)} frames -> {args.dst}")


def cmd_dehaze_eval(args):
    gen = load_dehazer(args.weights)
    pairs, names = _load_pairs_dir(args.pairs)
    rows = []
    for name, (hazy, clean) in zip(names, pairs):
        rep = image_metrics(clean, gen.enhance(hazy))
        row = rep.as_dict()
        row["psnr"] = min(row["psnr"], 99.0)
        row["name"] = name
        rows.append(row)
    summary = {k: float(np.mean([r[k] for r in rows]))
               for k in ("psnr", "ssim", "mse", "rmse")}
    with open(args.report, "w", encoding="utf-8") as f:
        json.dump({"rows": rows, "mean": summary}, f, indent=1, sort_keys=True)
    print(f"psnr={summary['psnr']:.4f} ssim={summary['ssim']:.4f} "
          f"mse={summary['mse']:.2f} rmse={summary['rmse']:.3f}")


def _discover_ids(root):
    return sorted(d for d in os.listdir(root)
                  if os.path.isfile(os.path.join(root, d, "manifest")))


def cmd_vio_train(args):
    cfg = _experiment_config(args)
    ids = _discover_ids(args.data)
    if args.train_seqs:
        train_ids = args.train_seqs.split(",")
        val_ids = args.val_seqs.split(",") if args.val_seqs else []
    else:
        try:
            plan = dataio.split_dataset(ids)
            train_ids, val_ids = list(plan.train), list(plan.val)
        except DuvioError:
            train_ids, val_ids = ids, []
    dehazer = load_dehazer(args.dehaze) if args.dehaze else None
    train_wins = [dataio.build_windows(
        dataio.load_sequence(os.path.join(args.data, sid))) for sid in train_ids]
    val_wins = [dataio.build_windows(
        dataio.load_sequence(os.path.join(args.data, sid))) for sid in val_ids]
    vio_cfg = cfg.vio if args.seed is None else replace(cfg.vio, seed=args.seed)
    model, log = train_vio(train_wins, vio_cfg, val_windows=val_wins or None,
                           dehazer=dehazer)
    save_weights(args.out, model.state_dict(),
                 meta={"kind": "vionet", "vio_config": vio_cfg.as_dict()})
    print(f"trained on {sum(len(w) for w in train_wins)} windows; "
          f"final loss {log[-1]['train_loss']:.6g} -> {args.out}")


def load_vionet(path):
    state, meta = load_weights(path)
    model = VioNet(VioConfig.from_dict(meta["vio_config"]))
    model.load_state_dict(state)
    model.eval()
    return model


def cmd_vio_infer(args):
    model = load_vionet(args.weights)
    dehazer = load_dehazer(args.dehaze) if args.dehaze else None
    ds = dataio.load_sequence(args.seq)
    deltas = infer_sequence(ds, model, dehazer=dehazer)
    evalmod.deltas_to_csv(args.out, deltas)
    print(f"wrote {len(deltas)} deltas -> {args.out}")


def cmd_eval(args):
    preds = evalmod.deltas_from_csv(args.pred)
    ds = dataio.load_sequence(args.ref)
    refs = [w.target for w in dataio.build_windows(ds)]
    if len(refs) != len(preds):
        raise DuvioError(f"prediction count {len(preds)} != reference count "
                         f"{len(refs)} for {ds.sequence_id}")
    reports = evalmod.score_sequence(preds, refs, ds.sequence_id, args.scenario,
                                     dehazed=args.dehazed, mode=args.mode,
                                     rotation=args.rotation)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(evalmod.reports_to_json(reports, rmse_mode=args.mode,
                                        rotation=args.rotation))
    for r in reports:
        print(f"sub {r.sub_sequence_index}: v_rmse={r.v_rmse:.6g} "
              f"phi_rmse={r.phi_rmse:.6g}")


def cmd_report(args):
    reports = []
    for path in args.inputs:
        with open(path, "r", encoding="utf-8") as f:
            reports.extend(evalmod.reports_from_json(f.read()))
    paths = evalmod.render_reports(reports, args.charts)
    print("\n".join(paths))


def cmd_run(args):
    cfg = _experiment_config(args)
    out = run_pipeline(cfg, verbose=args.verbose)
    print(out)


_COMMANDS = {
    "synth": cmd_synth,
    "disturb": cmd_disturb,
    "dehaze-train": cmd_dehaze_train,
    "dehaze-run": cmd_dehaze_run,
    "dehaze-eval": cmd_dehaze_eval,
    "vio-train": cmd_vio_train,
    "vio-infer": cmd_vio_infer,
    "eval": cmd_eval,
    "report": cmd_report,
    "run": cmd_run,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ConfigError as e:
        for err in e.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except DuvioError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

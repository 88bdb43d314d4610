"""Experiment configuration and the end-to-end pipeline.

Config files are structured key-value text: ``dotted.key = value`` lines,
``#`` comments, comma-separated lists.  Unknown keys are errors and every
violation is reported, not just the first.  An empty file yields the
full-scale defaults (batch 16, lr 1e-6, 20 epochs, paper split).

``run_pipeline`` executes: disturb (when the scenario asks for it) ->
dehazer training (when enabled) -> dehazing quality eval -> pose-network
training (frozen dehazer in the loop) -> inference on the test split ->
RMSE scoring -> report rendering, and writes ``provenance.json`` with
config hash, seed, versions and per-stage wall-clock.
"""

import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import backend, dataio, eval as evalmod
from .dehaze import (DehazeTrainConfig, DiscriminatorConfig, Generator,
                     GeneratorConfig, image_metrics, split_state, train_dehazer)
from .disturb import DistortionParams, TurbidityParams, disturb_sequence
from .errors import ConfigError, DuvioError, LoadError
from .nn import load_weights, save_weights
from .vionet import VioConfig, VioNet, infer_sequence, train_vio

SCENARIOS = dataio.SCENARIOS


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_root: str = None
    scenario: str = "original"
    train: tuple = dataio.PAPER_SPLIT["train"]
    val: tuple = dataio.PAPER_SPLIT["val"]
    test: tuple = dataio.PAPER_SPLIT["test"]
    dehaze_enabled: bool = True
    dehaze_weights: str = None
    generator: GeneratorConfig = GeneratorConfig()
    discriminator: DiscriminatorConfig = DiscriminatorConfig()
    dehaze_train: DehazeTrainConfig = DehazeTrainConfig()
    vio: VioConfig = VioConfig()
    turbidity: TurbidityParams = TurbidityParams()
    distortion: DistortionParams = DistortionParams()
    data_fraction: float = 1.0
    fraction_mode: str = "prefix"
    rmse_mode: str = "pooled"
    rotation_error: str = "euler"
    seed: int = 0
    determinism: bool = True
    output_dir: str = "duvio-out"

    def as_dict(self):
        return {
            "dataset_root": self.dataset_root, "scenario": self.scenario,
            "split": {"train": list(self.train), "val": list(self.val),
                      "test": list(self.test)},
            "dehaze": {"enabled": self.dehaze_enabled,
                       "weights": self.dehaze_weights,
                       "generator": self.generator.as_dict(),
                       "discriminator": self.discriminator.as_dict(),
                       "train": self.dehaze_train.as_dict()},
            "vio": self.vio.as_dict(),
            "turbidity": {"attenuation_beta": self.turbidity.attenuation_beta,
                          "airlight": self.turbidity.airlight,
                          "depth": self.turbidity.depth,
                          "depth_gradient": self.turbidity.depth_gradient,
                          "beta_jitter": self.turbidity.beta_jitter,
                          "airlight_jitter": self.turbidity.airlight_jitter},
            "distortion": {"radial_k1": self.distortion.radial_k1,
                           "radial_k2": self.distortion.radial_k2,
                           "blur_sigma": self.distortion.blur_sigma,
                           "noise_sigma": self.distortion.noise_sigma,
                           "seed": self.distortion.seed},
            "data_fraction": self.data_fraction,
            "fraction_mode": self.fraction_mode,
            "rmse_mode": self.rmse_mode, "rotation_error": self.rotation_error,
            "seed": self.seed, "determinism": self.determinism,
            "output_dir": self.output_dir,
        }

    def config_hash(self):
        # identifies the experiment (inputs + parameters); where outputs
        # land is not part of the identity
        doc = self.as_dict()
        doc.pop("output_dir")
        text = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_kv_text(text, source="<config>"):
    """Parse ``key = value`` lines into a flat dict; duplicate keys error."""
    out = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value', got {line!r}")
            continue
        key, val = (part.strip() for part in line.split("=", 1))
        if key in out:
            errors.append(f"{source}:{lineno}: duplicate key {key!r}")
            continue
        out[key] = val
    return out, errors


def _parse_bool(val):
    low = val.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {val!r}")


def _parse_tuple(val, cast):
    if not val:
        return ()
    return tuple(cast(part.strip()) for part in val.split(","))


# key -> (target dataclass attribute path, parser)
_SCHEMA = {
    "dataset_root": ("dataset_root", str),
    "scenario": ("scenario", str),
    "split.train": ("train", lambda v: _parse_tuple(v, str)),
    "split.val": ("val", lambda v: _parse_tuple(v, str)),
    "split.test": ("test", lambda v: _parse_tuple(v, str)),
    "dehaze.enabled": ("dehaze_enabled", _parse_bool),
    "dehaze.weights": ("dehaze_weights", lambda v: v or None),
    "dehaze.generator.backbone": ("generator.backbone", str),
    "dehaze.generator.base_channels": ("generator.base_channels", int),
    "dehaze.generator.depth": ("generator.depth", int),
    "dehaze.generator.skip_connections": ("generator.skip_connections", _parse_bool),
    "dehaze.generator.seed": ("generator.seed", int),
    "dehaze.discriminator.layers": ("discriminator.layers", int),
    "dehaze.discriminator.base_channels": ("discriminator.base_channels", int),
    "dehaze.discriminator.norm": ("discriminator.norm", _parse_bool),
    "dehaze.discriminator.slope": ("discriminator.slope", float),
    "dehaze.discriminator.seed": ("discriminator.seed", int),
    "dehaze.train.epochs": ("dehaze_train.epochs", int),
    "dehaze.train.data_fraction": ("dehaze_train.data_fraction", float),
    "dehaze.train.batch": ("dehaze_train.batch", int),
    "dehaze.train.lr": ("dehaze_train.lr", float),
    "dehaze.train.lr_decay": ("dehaze_train.lr_decay", float),
    "dehaze.train.recon_weight": ("dehaze_train.recon_weight", float),
    "dehaze.train.seed": ("dehaze_train.seed", int),
    "turbidity.attenuation_beta": ("turbidity.attenuation_beta", float),
    "turbidity.airlight": ("turbidity.airlight", float),
    "turbidity.depth": ("turbidity.depth", float),
    "turbidity.depth_gradient": ("turbidity.depth_gradient", float),
    "turbidity.beta_jitter": ("turbidity.beta_jitter", float),
    "turbidity.airlight_jitter": ("turbidity.airlight_jitter", float),
    "distortion.radial_k1": ("distortion.radial_k1", float),
    "distortion.radial_k2": ("distortion.radial_k2", float),
    "distortion.blur_sigma": ("distortion.blur_sigma", float),
    "distortion.noise_sigma": ("distortion.noise_sigma", float),
    "distortion.seed": ("distortion.seed", int),
    "data_fraction": ("data_fraction", float),
    "fraction_mode": ("fraction_mode", str),
    "rmse_mode": ("rmse_mode", str),
    "rotation_error": ("rotation_error", str),
    "seed": ("seed", int),
    "determinism": ("determinism", _parse_bool),
    "output_dir": ("output_dir", str),
}

_VIO_FIELDS = {
    "image_height": int, "image_width": int, "imu_window": int,
    "visual_feature": int,
    "visual_channels": lambda v: _parse_tuple(v, int),
    "visual_kernels": lambda v: _parse_tuple(v, int),
    "visual_strides": lambda v: _parse_tuple(v, int),
    "inertial_channels": lambda v: _parse_tuple(v, int),
    "inertial_feature": int, "inertial_flatten": _parse_bool,
    "lstm_layers": int, "lstm_hidden": int, "mlp_hidden": int,
    "alpha": float, "lr": float, "lr_decay": float, "batch": int,
    "epochs": int, "adam_betas": lambda v: _parse_tuple(v, float),
    "seq_len": int, "leaky_slope": float, "grad_clip": float, "seed": int,
}
for _name, _cast in _VIO_FIELDS.items():
    _SCHEMA[f"vio.{_name}"] = (f"vio.{_name}", _cast)

_ENUMS = {
    "scenario": SCENARIOS,
    "fraction_mode": ("prefix", "stride"),
    "rmse_mode": evalmod.RMSE_MODES,
    "rotation_error": evalmod.ROTATION_ERRORS,
}


def config_from_kv(kv, source="<config>"):
    """Build an ExperimentConfig from a flat key-value dict.

    Collects every violation (unknown keys, parse failures, enum misses,
    dataclass invariant breaks) into one ConfigError.
    """
    errors = []
    top = {}
    nested = {"generator": {}, "discriminator": {}, "dehaze_train": {},
              "vio": {}, "turbidity": {}, "distortion": {}}
    for key, raw in kv.items():
        spec = _SCHEMA.get(key)
        if spec is None:
            errors.append(f"{source}: unknown key {key!r}")
            continue
        target, cast = spec
        try:
            value = cast(raw)
        except (ValueError, TypeError) as e:
            errors.append(f"{source}: key {key!r}: {e}")
            continue
        if "." in target:
            section, attr = target.split(".", 1)
            nested[section][attr] = value
        else:
            top[target] = value
    for name, allowed in _ENUMS.items():
        if name in top and top[name] not in allowed:
            errors.append(f"{source}: {name} must be one of {tuple(allowed)}, "
                          f"got {top[name]!r}")
            top.pop(name)
    builders = {
        "generator": GeneratorConfig, "discriminator": DiscriminatorConfig,
        "dehaze_train": DehazeTrainConfig, "vio": VioConfig,
        "turbidity": TurbidityParams, "distortion": DistortionParams,
    }
    for section, cls in builders.items():
        try:
            top_key = {"generator": "generator", "discriminator": "discriminator",
                       "dehaze_train": "dehaze_train", "vio": "vio",
                       "turbidity": "turbidity", "distortion": "distortion"}[section]
            top[top_key] = cls(**nested[section])
        except DuvioError as e:
            errors.append(f"{source}: section {section}: {e}")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**top)


def validate_config(path):
    """Parse + validate a config file; raises ConfigError with all issues."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise LoadError(f"cannot read config {path}: {e}") from e
    kv, parse_errors = parse_kv_text(text, source=str(path))
    try:
        cfg = config_from_kv(kv, source=str(path))
    except ConfigError as e:
        raise ConfigError(parse_errors + e.errors) from None
    if parse_errors:
        raise ConfigError(parse_errors)
    return cfg


# ---------------------------------------------------------------------------
# pipeline

class _Stages:
    def __init__(self, verbose=False):
        self.timings = {}
        self.verbose = verbose
        self.current = None

    def run(self, name, fn):
        self.current = name
        if self.verbose:
            print(f"[duvio] stage {name} ...", file=sys.stderr)
        start = time.perf_counter()
        try:
            result = fn()
        except BaseException as e:
            self.timings[name] = time.perf_counter() - start
            raise DuvioError(f"stage {name!r} failed: {e}") from e
        self.timings[name] = time.perf_counter() - start
        if self.verbose:
            print(f"[duvio] stage {name} done in {self.timings[name]:.2f}s",
                  file=sys.stderr)
        return result


def _load_split_sequences(config):
    ids = sorted(set(config.train) | set(config.val) | set(config.test))
    out = {}
    for sid in ids:
        path = os.path.join(config.dataset_root, sid)
        out[sid] = dataio.load_sequence(path)
    return out


def _dehazer_from_state(state, meta=None):
    gen_state, _ = split_state(state) if any(k.startswith("gen.") for k in state) \
        else (state, {})
    cfg = GeneratorConfig(**meta["generator_config"]) if meta and \
        "generator_config" in meta else None
    if cfg is None:
        raise LoadError("dehazer weights missing generator_config metadata")
    gen = Generator(cfg)
    gen.load_state_dict(gen_state)
    gen.eval()
    return gen


def load_dehazer(path):
    state, meta = load_weights(path)
    return _dehazer_from_state(state, meta)


def run_pipeline(config, verbose=False):
    """Execute the full experiment; returns the output directory path."""
    if config.dataset_root is None or not os.path.isdir(config.dataset_root):
        raise LoadError(f"dataset_root {config.dataset_root!r} does not exist")
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    stages = _Stages(verbose=verbose)
    seed = config.seed
    if not config.determinism:
        seed = int(np.random.SeedSequence().entropy % (2 ** 31))

    originals = stages.run("load", lambda: _load_split_sequences(config))

    def do_disturb():
        if config.scenario == "original":
            return dict(originals)
        disturbed = {}
        for sid, ds in originals.items():
            disturbed[sid] = disturb_sequence(ds, config.scenario,
                                              turbidity=config.turbidity,
                                              distortion=config.distortion)
            dataio.save_sequence(disturbed[sid],
                                 os.path.join(out_dir, "data", sid))
        return disturbed

    working = stages.run("disturb", do_disturb)

    dehazer = None
    if config.dehaze_enabled:
        def do_dehaze_train():
            if config.dehaze_weights:
                return load_dehazer(config.dehaze_weights)
            pairs = []
            for sid in tuple(config.train) + tuple(config.val):
                for fd, fo in zip(working[sid].frames, originals[sid].frames):
                    pairs.append((fd.image, fo.image))
            tcfg = replace(config.dehaze_train,
                           seed=config.dehaze_train.seed + seed)
            state, log = train_dehazer(pairs, config.generator,
                                       config.discriminator, tcfg)
            save_weights(os.path.join(out_dir, "dehazer.bin"), state,
                         meta={"kind": "dehazer",
                               "generator_config": config.generator.as_dict(),
                               "discriminator_config": config.discriminator.as_dict()})
            with open(os.path.join(out_dir, "dehaze_log.json"), "w",
                      encoding="utf-8") as f:
                json.dump(log, f, indent=1, sort_keys=True)
            gen = Generator(config.generator)
            gen.load_state_dict(split_state(state)[0])
            gen.eval()
            return gen

        dehazer = stages.run("dehaze-train", do_dehaze_train)

    def do_dehaze_eval():
        if not config.dehaze_enabled:
            return None
        rows = {"disturbed_vs_clean": [], "dehazed_vs_clean": []}
        for sid in config.test:
            for fd, fo in zip(working[sid].frames, originals[sid].frames):
                rows["disturbed_vs_clean"].append(
                    image_metrics(fo.image, fd.image).as_dict())
                rows["dehazed_vs_clean"].append(
                    image_metrics(fo.image, dehazer.enhance(fd.image)).as_dict())
        summary = {}
        for key, items in rows.items():
            caps = [min(r["psnr"], 99.0) for r in items]
            summary[key] = {
                "mean_psnr": float(np.mean(caps)),
                "mean_ssim": float(np.mean([r["ssim"] for r in items])),
                "mean_mse": float(np.mean([r["mse"] for r in items])),
                "mean_rmse": float(np.mean([r["rmse"] for r in items])),
                "count": len(items),
            }
        return summary

    image_quality = stages.run("dehaze-eval", do_dehaze_eval)

    def windows_for(ids):
        seqs = []
        for sid in ids:
            wins = dataio.build_windows(working[sid])
            if config.data_fraction < 1.0:
                wins = dataio.take_fraction(wins, config.data_fraction,
                                            mode=config.fraction_mode)
            seqs.append(wins)
        return seqs

    def do_vio_train():
        vio_cfg = replace(config.vio, seed=config.vio.seed + seed)
        model, log = train_vio(windows_for(config.train), vio_cfg,
                               val_windows=windows_for(config.val) or None,
                               dehazer=dehazer)
        save_weights(os.path.join(out_dir, "vio.bin"), model.state_dict(),
                     meta={"kind": "vionet", "vio_config": vio_cfg.as_dict()})
        with open(os.path.join(out_dir, "vio_log.json"), "w",
                  encoding="utf-8") as f:
            json.dump(log, f, indent=1, sort_keys=True)
        return model

    model = stages.run("vio-train", do_vio_train)

    hardware = {}

    def do_infer():
        os.makedirs(os.path.join(out_dir, "preds"), exist_ok=True)
        preds = {}

        def workload():
            for sid in config.test:
                preds[sid] = infer_sequence(working[sid], model, dehazer=dehazer)

        metrics = evalmod.capture_hardware_metrics(workload)
        hardware["metrics"] = metrics
        for sid, deltas in preds.items():
            evalmod.deltas_to_csv(os.path.join(out_dir, "preds", f"{sid}.csv"),
                                  deltas)
        return preds

    predictions = stages.run("vio-infer", do_infer)

    def do_eval():
        reports = []
        for sid in config.test:
            refs = [w.target for w in dataio.build_windows(working[sid])]
            reports.extend(evalmod.score_sequence(
                predictions[sid], refs, sid, config.scenario,
                dehazed=config.dehaze_enabled, mode=config.rmse_mode,
                rotation=config.rotation_error))
        return reports

    reports = stages.run("eval", do_eval)

    def do_report():
        # wall-clock metrics go to provenance.json only, so report.json is
        # byte-identical across reruns with the same seed
        return evalmod.render_reports(
            reports, os.path.join(out_dir, "report"),
            rmse_mode=config.rmse_mode, rotation=config.rotation_error,
            image_quality=image_quality,
            extra={"config_hash": config.config_hash(), "seed": seed,
                   "scenario": config.scenario,
                   "dehaze_enabled": config.dehaze_enabled})

    stages.run("report", do_report)

    provenance = {
        "config": config.as_dict(),
        "config_hash": config.config_hash(),
        "seed": seed,
        "determinism": config.determinism,
        "backend": backend.active_backend(),
        "versions": _versions(),
        "stage_seconds": stages.timings,
        "hardware": hardware["metrics"].as_dict() if hardware else None,
    }
    with open(os.path.join(out_dir, "provenance.json"), "w", encoding="utf-8") as f:
        json.dump(provenance, f, indent=1, sort_keys=True)
    return out_dir


def _versions():
    import numpy
    import PIL

    versions = {"python": sys.version.split()[0], "numpy": numpy.__version__,
                "pillow": PIL.__version__, "duvio": _pkg_version()}
    try:
        import numba
        versions["numba"] = numba.__version__
    except ImportError:
        versions["numba"] = None
    return versions


def _pkg_version():
    from . import __version__
    return __version__

"""Trajectory scoring: RMSE, sub-sequence reports, integration, hardware.

RMSE definition (default "pooled"): per-axis RMSE aggregated over the 3
axes, sqrt(sum_t ||e_t||^2 / (3 T)), computed separately for translation
and rotation residuals.  The "norm" variant sqrt(sum_t ||e_t||^2 / T) is
available by flag, as is geodesic-angle rotation error; report headers
name the convention used.
"""

import json
import math
import os
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .dataio import AbsolutePose, PoseDelta
from .errors import ValidationError

RMSE_MODES = ("pooled", "norm")
ROTATION_ERRORS = ("euler", "geodesic")

# Published translation-RMSE reference values for the harbor test
# sequences (reference values, not reproduced by this package).
REFERENCE_BASELINES = {
    "OKVIS": {"h01": 0.0406, "h07": 0.1171},
    "ORB-SLAM3": {"h01": 0.0198, "h07": 0.0212},
    "VINet": {"h01": 0.0497, "h07": 0.1495},
    "DU-VIO": {"h01": 0.0111, "h07": 0.0188},
}


@dataclass(frozen=True)
class RmseReport:
    sequence_id: str
    scenario: str
    sub_sequence_index: int  # 1..3
    v_rmse: float            # meters
    phi_rmse: float          # radians
    dehazed: bool

    def as_dict(self):
        return {"sequence_id": self.sequence_id, "scenario": self.scenario,
                "sub_sequence_index": self.sub_sequence_index,
                "v_rmse": self.v_rmse, "phi_rmse": self.phi_rmse,
                "dehazed": self.dehazed}


def _delta_array(deltas):
    if isinstance(deltas, np.ndarray):
        return np.asarray(deltas, dtype=np.float64)
    return np.stack([d.as_array() for d in deltas])


def compute_rmse(predictions, references, mode="pooled", rotation="euler"):
    """Translation and rotation RMSE between aligned delta lists.

    Returns ``(v_rmse, phi_rmse)``.  ``mode`` picks the pooled-per-axis
    or the per-step-norm convention; ``rotation='geodesic'`` measures the
    per-step geodesic angle instead of the Euler residual norm.
    """
    if mode not in RMSE_MODES:
        raise ValidationError(f"mode {mode!r} not in {RMSE_MODES}")
    if rotation not in ROTATION_ERRORS:
        raise ValidationError(f"rotation {rotation!r} not in {ROTATION_ERRORS}")
    p = _delta_array(predictions)
    r = _delta_array(references)
    if p.shape != r.shape or p.ndim != 2 or p.shape[0] < 1:
        raise ValidationError(
            f"predictions {p.shape} and references {r.shape} must match, length >= 1")
    n = p.shape[0]
    err = p - r
    divisor = 3.0 * n if mode == "pooled" else float(n)
    v_rmse = math.sqrt(float(np.sum(err[:, :3] ** 2)) / divisor)
    if rotation == "euler":
        phi_rmse = math.sqrt(float(np.sum(err[:, 3:] ** 2)) / divisor)
    else:
        angles = [geo.rotation_angle(geo.euler_xyz_to_mat(pr[3:]).T
                                     @ geo.euler_xyz_to_mat(rf[3:]))
                  for pr, rf in zip(p, r)]
        phi_rmse = math.sqrt(float(np.sum(np.square(angles))) / n)
    return v_rmse, phi_rmse


def split_three(items):
    """Contiguous thirds; the earliest thirds absorb the remainder."""
    n = len(items)
    if n < 3:
        raise ValidationError(f"need at least 3 items to split, got {n}")
    base, rem = divmod(n, 3)
    sizes = [base + (1 if i < rem else 0) for i in range(3)]
    out = []
    start = 0
    for s in sizes:
        out.append(list(items[start:start + s]))
        start += s
    return out


def integrate_trajectory(start, deltas, timestamps=None):
    """Left-compose body-frame deltas from a start pose.

    Returns ``len(deltas) + 1`` absolute poses, the first being ``start``.
    Timestamps come from the argument (length len(deltas)+1) or count up
    in unit steps from the start pose.
    """
    poses = [start]
    q, t = start.rotation, start.translation
    for k, d in enumerate(deltas):
        if not (np.all(np.isfinite(d.v)) and np.all(np.isfinite(d.phi))):
            raise ValidationError(f"delta {k} is not finite")
        q, t = geo.compose_pose(q, t, d.v, d.phi)
        ts = timestamps[k + 1] if timestamps is not None else start.timestamp + k + 1
        poses.append(AbsolutePose(timestamp=float(ts), translation=t, rotation=q))
    return poses


def deltas_from_csv(path):
    """Read a deltas CSV (index, vx, vy, vz, phix, phiy, phiz)."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return [PoseDelta(v=row[1:4].copy(), phi=row[4:7].copy()) for row in rows]


def deltas_to_csv(path, deltas):
    with open(path, "w", encoding="utf-8") as f:
        f.write("index,vx,vy,vz,phix,phiy,phiz\n")
        for i, d in enumerate(deltas):
            vals = ",".join(format(v, ".17g") for v in d.as_array())
            f.write(f"{i},{vals}\n")


def score_sequence(predictions, references, sequence_id, scenario,
                   dehazed, mode="pooled", rotation="euler"):
    """Three per-sub-sequence RmseReports for one sequence."""
    reports = []
    for idx, (pred, ref) in enumerate(zip(split_three(predictions),
                                          split_three(references)), start=1):
        v_rmse, phi_rmse = compute_rmse(pred, ref, mode=mode, rotation=rotation)
        reports.append(RmseReport(sequence_id=sequence_id, scenario=scenario,
                                  sub_sequence_index=idx, v_rmse=v_rmse,
                                  phi_rmse=phi_rmse, dehazed=dehazed))
    return reports


# ---------------------------------------------------------------------------
# hardware metrics

@dataclass(frozen=True)
class HardwareMetrics:
    inference_time_s: float
    power_w: float = None
    gpu_util_pct: float = None
    memory_mib: float = None
    temperature_c: float = None

    def as_dict(self):
        return {"inference_time_s": self.inference_time_s,
                "power_w": self.power_w, "gpu_util_pct": self.gpu_util_pct,
                "memory_mib": self.memory_mib,
                "temperature_c": self.temperature_c}

    def format_table(self):
        def fmt(v, unit):
            return "unavailable" if v is None else f"{v:g} {unit}"

        return "\n".join([
            f"inference time   {self.inference_time_s:.3f} s",
            f"power            {fmt(self.power_w, 'W')}",
            f"gpu utilization  {fmt(self.gpu_util_pct, '%')}",
            f"gpu memory       {fmt(self.memory_mib, 'MiB')}",
            f"gpu temperature  {fmt(self.temperature_c, 'degC')}",
        ])


class NullProbe:
    """Probe for hosts without GPU telemetry: everything unavailable."""

    def read_power_w(self):
        return None

    def read_gpu_util_pct(self):
        return None

    def read_memory_mib(self):
        return None

    def read_temperature_c(self):
        return None


class StubProbe:
    """Fixed-value probe, mainly for tests and dry runs."""

    def __init__(self, power_w=None, gpu_util_pct=None, memory_mib=None,
                 temperature_c=None):
        self._values = (power_w, gpu_util_pct, memory_mib, temperature_c)

    def read_power_w(self):
        return self._values[0]

    def read_gpu_util_pct(self):
        return self._values[1]

    def read_memory_mib(self):
        return self._values[2]

    def read_temperature_c(self):
        return self._values[3]


class CommandProbe:
    """Runs user-supplied shell commands, each printing one number.

    Commands map metric name -> command string for any subset of
    {power, util, memory, temperature}; missing or failing commands
    leave the field unavailable.
    """

    def __init__(self, commands):
        self.commands = dict(commands)

    def _run(self, key):
        cmd = self.commands.get(key)
        if not cmd:
            return None
        try:
            out = subprocess.run(cmd, shell=True, capture_output=True,
                                 text=True, timeout=10)
            return float(out.stdout.strip().splitlines()[0])
        except (ValueError, IndexError, subprocess.SubprocessError, OSError):
            return None

    def read_power_w(self):
        return self._run("power")

    def read_gpu_util_pct(self):
        return self._run("util")

    def read_memory_mib(self):
        return self._run("memory")

    def read_temperature_c(self):
        return self._run("temperature")


def capture_hardware_metrics(workload, probe=None):
    """Time a workload and read the probe; never fabricates readings.

    If the workload raises, the exception propagates with the elapsed
    time attached as ``duvio_elapsed_s``.
    """
    probe = probe or NullProbe()
    start = time.perf_counter()
    try:
        workload()
    except BaseException as e:
        e.duvio_elapsed_s = time.perf_counter() - start
        raise
    elapsed = time.perf_counter() - start
    return HardwareMetrics(inference_time_s=elapsed,
                           power_w=probe.read_power_w(),
                           gpu_util_pct=probe.read_gpu_util_pct(),
                           memory_mib=probe.read_memory_mib(),
                           temperature_c=probe.read_temperature_c())


# ---------------------------------------------------------------------------
# report rendering

def reports_to_json(reports, rmse_mode="pooled", rotation="euler",
                    hardware=None, image_quality=None, extra=None):
    """Machine-readable report document (deterministic serialization)."""
    doc = {
        "rmse_definition": {
            "mode": rmse_mode,
            "rotation_error": rotation,
            "pooled": "sqrt(sum_t |e_t|^2 / (3 T)) per axis-pooled residual",
            "norm": "sqrt(sum_t |e_t|^2 / T) per-step norm",
            "phi_units": "radians",
        },
        "reports": [r.as_dict() for r in reports],
        "baselines": {
            "note": "published reference values, not reproduced by this run",
            "metric": "translation RMSE (m)",
            "values": REFERENCE_BASELINES,
        },
    }
    if hardware is not None:
        doc["hardware"] = hardware.as_dict()
    if image_quality is not None:
        doc["image_quality"] = image_quality
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1, sort_keys=True)


def reports_from_json(text):
    doc = json.loads(text)
    return [RmseReport(**r) for r in doc["reports"]]


def format_report_table(reports):
    lines = ["sequence  scenario    sub  dehazed  v_rmse (m)    phi_rmse (rad)",
             "-" * 66]
    for r in sorted(reports, key=lambda r: (r.sequence_id, r.scenario,
                                            r.dehazed, r.sub_sequence_index)):
        lines.append(f"{r.sequence_id:<9s} {r.scenario:<11s} {r.sub_sequence_index:<4d} "
                     f"{str(r.dehazed):<8s} {r.v_rmse:<13.6g} {r.phi_rmse:.6g}")
    lines.append("")
    lines.append("reference translation RMSE (published values, not reproduced):")
    for name, vals in REFERENCE_BASELINES.items():
        row = "  ".join(f"{k}={v:g}" for k, v in vals.items())
        lines.append(f"  {name:<10s} {row}")
    return "\n".join(lines) + "\n"


def render_charts(reports, out_dir):
    """Grouped bar charts per (sequence, metric): scenario x sub-sequence,
    one panel without dehazing and one with."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    sequences = sorted({r.sequence_id for r in reports})
    scenarios = sorted({r.scenario for r in reports})
    colors = {s: c for s, c in zip(scenarios, ("#4878d0", "#ee854a", "#6acc64"))}
    for seq in sequences:
        for metric, label in (("v_rmse", "translation RMSE (m)"),
                              ("phi_rmse", "rotation RMSE (rad)")):
            fig, axes = plt.subplots(1, 2, figsize=(9, 3.2), sharey=True)
            for ax, dehazed in zip(axes, (False, True)):
                sel = [r for r in reports
                       if r.sequence_id == seq and r.dehazed == dehazed]
                width = 0.8 / max(len(scenarios), 1)
                for si, scen in enumerate(scenarios):
                    xs, ys = [], []
                    for r in sel:
                        if r.scenario == scen:
                            xs.append(r.sub_sequence_index + (si - 1) * width)
                            ys.append(getattr(r, metric))
                    if xs:
                        ax.bar(xs, ys, width=width, label=scen,
                               color=colors.get(scen))
                ax.set_title(f"{seq} {'with' if dehazed else 'without'} dehazing")
                ax.set_xlabel("sub-sequence")
                ax.set_xticks([1, 2, 3])
            axes[0].set_ylabel(label)
            handles, labels = axes[0].get_legend_handles_labels()
            if not handles:
                handles, labels = axes[1].get_legend_handles_labels()
            if handles:
                fig.legend(handles, labels, loc="upper right", fontsize=8)
            fig.tight_layout()
            path = os.path.join(out_dir, f"{seq}_{metric}.png")
            fig.savefig(path, dpi=110)
            plt.close(fig)
            paths.append(path)
    return paths


def render_reports(reports, out_dir, rmse_mode="pooled", rotation="euler",
                   hardware=None, image_quality=None, extra=None, charts=True):
    """Write report.json, report.txt and chart PNGs; returns file paths."""
    if not reports:
        raise ValidationError("render_reports needs at least one report")
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w", encoding="utf-8") as f:
        f.write(reports_to_json(reports, rmse_mode=rmse_mode, rotation=rotation,
                                hardware=hardware, image_quality=image_quality,
                                extra=extra))
    txt_path = os.path.join(out_dir, "report.txt")
    with open(txt_path, "w", encoding="utf-8") as f:
        f.write(format_report_table(reports))
    paths = [json_path, txt_path]
    if charts:
        paths += render_charts(reports, os.path.join(out_dir, "charts"))
    return paths

"""Sequence ingestion, reference interpolation, and window assembly.

A sequence lives in one directory:

::

    <seq>/
      manifest           key = value text (id, scenario, rates, tolerance)
      imu.csv            t, gx, gy, gz, ax, ay, az
      gt.csv             t, tx, ty, tz, qw, qx, qy, qz
      frame_times.csv    index, t
      frames/000000.png  8-bit grayscale, one per frame index

Timestamps are seconds from the sequence's own epoch (declared in the
manifest; no absolute wall-clock base is assumed).  The relative-pose
convention is written into every manifest header: target = inv(T_a)*T_b
in frame_a body coordinates, rotation as intrinsic XYZ Euler angles.
"""

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import geometry as geo
from .errors import (CoverageError, InterpolationRangeError, LoadError,
                     ValidationError)

SCENARIOS = ("original", "distortion", "turbid")

POSE_CONVENTION = ("target = inv(T_a) * T_b in frame_a body coordinates; "
                   "rotation = intrinsic XYZ Euler (R = Rx@Ry@Rz); "
                   "quaternion order w,x,y,z (body-to-world); "
                   "timestamps = seconds from sequence epoch")

PAPER_SPLIT = {
    "train": ("h02", "h04", "h06"),
    "val": ("h03", "h05"),
    "test": ("h01", "h07"),
}


@dataclass(frozen=True)
class ImuSample:
    timestamp: float
    angular_velocity: np.ndarray   # (3,) rad/s
    linear_acceleration: np.ndarray  # (3,) m/s^2


@dataclass(frozen=True)
class Frame:
    timestamp: float
    image: np.ndarray  # (H, W) float in [0, 1]


@dataclass(frozen=True)
class AbsolutePose:
    timestamp: float
    translation: np.ndarray  # (3,) m
    rotation: np.ndarray     # unit quaternion (w, x, y, z)


@dataclass(frozen=True)
class PoseDelta:
    v: np.ndarray    # (3,) m, relative translation
    phi: np.ndarray  # (3,) rad, relative rotation as XYZ Euler

    @staticmethod
    def zero():
        return PoseDelta(np.zeros(3), np.zeros(3))

    def as_array(self):
        return np.concatenate([self.v, self.phi])


@dataclass(frozen=True)
class SampleWindow:
    frame_a: Frame
    frame_b: Frame
    imu: tuple        # exactly 11 ImuSample, time-ordered
    target: PoseDelta  # may be a zero placeholder when built without reference

    def imu_array(self):
        """IMU window as (6, 11): rows gx,gy,gz,ax,ay,az."""
        g = np.stack([s.angular_velocity for s in self.imu], axis=1)
        a = np.stack([s.linear_acceleration for s in self.imu], axis=1)
        return np.concatenate([g, a], axis=0)


@dataclass
class SequenceDataset:
    sequence_id: str
    frames: list
    imu_stream: list
    reference_poses: list
    scenario: str = "original"
    frame_rate_hz: float = 20.0
    imu_rate_hz: float = 200.0
    rate_tolerance: float = 0.25

    def frame_times(self):
        return np.array([f.timestamp for f in self.frames])

    def imu_times(self):
        return np.array([s.timestamp for s in self.imu_stream])

    def validate(self):
        """Check structural invariants; raises ValidationError."""
        if not self.frames:
            raise ValidationError(f"{self.sequence_id}: no frames")
        if self.scenario not in SCENARIOS:
            raise ValidationError(
                f"{self.sequence_id}: scenario {self.scenario!r} not in {SCENARIOS}")
        for name, times in (("frame", self.frame_times()), ("imu", self.imu_times())):
            if times.size and not np.all(np.isfinite(times)):
                raise ValidationError(f"{self.sequence_id}: non-finite {name} timestamp")
            bad = np.nonzero(np.diff(times) <= 0)[0]
            if bad.size:
                raise ValidationError(
                    f"{self.sequence_id}: {name} timestamps not strictly increasing "
                    f"at row {bad[0] + 1}")
        gt_times = np.array([p.timestamp for p in self.reference_poses])
        bad = np.nonzero(np.diff(gt_times) <= 0)[0]
        if bad.size:
            raise ValidationError(
                f"{self.sequence_id}: gt timestamps not strictly increasing "
                f"at row {bad[0] + 1}")
        for i, p in enumerate(self.reference_poses):
            n = np.linalg.norm(p.rotation)
            if abs(n - 1.0) > 1e-6:
                raise ValidationError(
                    f"{self.sequence_id}: gt row {i} quaternion norm {n:.9f}")
        for name, times, nominal in (("frame", self.frame_times(), self.frame_rate_hz),
                                     ("imu", self.imu_times(), self.imu_rate_hz)):
            if times.size >= 2:
                rate = (times.size - 1) / (times[-1] - times[0])
                if abs(rate - nominal) > self.rate_tolerance * nominal:
                    raise ValidationError(
                        f"{self.sequence_id}: {name} rate {rate:.3f} Hz outside "
                        f"{nominal} Hz +/- {self.rate_tolerance * 100:.0f}%")
        for f in self.frames:
            lo, hi = float(f.image.min()), float(f.image.max())
            if lo < 0.0 or hi > 1.0:
                raise ValidationError(
                    f"{self.sequence_id}: frame intensities outside [0,1] "
                    f"({lo:.4f}..{hi:.4f})")
        return self


# ---------------------------------------------------------------------------
# manifest directory IO

def _read_csv(path, ncols):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as e:
        raise LoadError(f"missing file: {path}") from e
    if data.size == 0:
        return np.zeros((0, ncols))
    if data.shape[1] != ncols:
        raise ValidationError(f"{path}: expected {ncols} columns, got {data.shape[1]}")
    return data


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_image(path):
    """8-bit grayscale PNG -> float64 raster in [0, 1]."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except OSError as e:
        raise LoadError(f"missing file: {path}") from e


def save_image(path, raster):
    arr = np.clip(np.asarray(raster), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)


def _parse_manifest(path):
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValidationError(f"{path}: bad manifest line {line!r}")
                key, val = line.split("=", 1)
                out[key.strip()] = val.strip()
    except OSError as e:
        raise LoadError(f"missing file: {path}") from e
    return out


def load_sequence(manifest_path):
    """Load a sequence directory (or its manifest file) into a dataset."""
    path = str(manifest_path)
    if os.path.isdir(path):
        root = path
    else:
        root = os.path.dirname(path) or "."
    manifest = _parse_manifest(os.path.join(root, "manifest"))
    imu_rows = _read_csv(os.path.join(root, "imu.csv"), 7)
    gt_rows = _read_csv(os.path.join(root, "gt.csv"), 8)
    ft_rows = _read_csv(os.path.join(root, "frame_times.csv"), 2)

    frames = []
    for idx, t in ft_rows:
        img_path = os.path.join(root, "frames", f"{int(idx):06d}.png")
        frames.append(Frame(timestamp=float(t), image=load_image(img_path)))
    imu = [ImuSample(timestamp=row[0], angular_velocity=row[1:4].copy(),
                     linear_acceleration=row[4:7].copy()) for row in imu_rows]
    poses = [AbsolutePose(timestamp=row[0], translation=row[1:4].copy(),
                          rotation=geo.quat_normalize(row[4:8]))
             for row in gt_rows]
    ds = SequenceDataset(
        sequence_id=manifest.get("sequence_id", os.path.basename(root)),
        frames=frames,
        imu_stream=imu,
        reference_poses=poses,
        scenario=manifest.get("scenario", "original"),
        frame_rate_hz=float(manifest.get("frame_rate_hz", 20.0)),
        imu_rate_hz=float(manifest.get("imu_rate_hz", 200.0)),
        rate_tolerance=float(manifest.get("rate_tolerance", 0.25)),
    )
    return ds.validate()


def save_sequence(dataset, out_dir):
    """Write a dataset in the manifest directory layout."""
    os.makedirs(os.path.join(out_dir, "frames"), exist_ok=True)
    with open(os.path.join(out_dir, "manifest"), "w", encoding="utf-8") as f:
        f.write(f"# duvio sequence\n# {POSE_CONVENTION}\n")
        f.write(f"sequence_id = {dataset.sequence_id}\n")
        f.write(f"scenario = {dataset.scenario}\n")
        f.write(f"frame_rate_hz = {dataset.frame_rate_hz:.17g}\n")
        f.write(f"imu_rate_hz = {dataset.imu_rate_hz:.17g}\n")
        f.write(f"rate_tolerance = {dataset.rate_tolerance:.17g}\n")
        f.write(f"frame_count = {len(dataset.frames)}\n")
        f.write(f"imu_count = {len(dataset.imu_stream)}\n")
        f.write(f"pose_count = {len(dataset.reference_poses)}\n")
    _write_csv(os.path.join(out_dir, "frame_times.csv"), "index,t",
               [(i, f.timestamp) for i, f in enumerate(dataset.frames)])
    _write_csv(os.path.join(out_dir, "imu.csv"), "t,gx,gy,gz,ax,ay,az",
               [np.concatenate([[s.timestamp], s.angular_velocity,
                                s.linear_acceleration]) for s in dataset.imu_stream])
    _write_csv(os.path.join(out_dir, "gt.csv"), "t,tx,ty,tz,qw,qx,qy,qz",
               [np.concatenate([[p.timestamp], p.translation, p.rotation])
                for p in dataset.reference_poses])
    for i, frame in enumerate(dataset.frames):
        save_image(os.path.join(out_dir, "frames", f"{i:06d}.png"), frame.image)
    return out_dir


# ---------------------------------------------------------------------------
# interpolation and windowing

def interpolate_reference(poses, query_times):
    """Interpolate sparse absolute poses at query times.

    Translation is interpolated per component, rotation by slerp between
    the bracketing quaternions.  Exact at knot timestamps; queries outside
    [first, last] raise InterpolationRangeError (no extrapolation).
    """
    if len(poses) < 2:
        raise ValidationError("interpolate_reference needs at least 2 poses")
    times = np.array([p.timestamp for p in poses])
    trans = np.stack([p.translation for p in poses])
    quats = np.stack([p.rotation for p in poses])
    out = []
    for tq in np.atleast_1d(np.asarray(query_times, dtype=np.float64)):
        if tq < times[0] or tq > times[-1]:
            raise InterpolationRangeError(
                f"query time {tq!r} outside pose range [{times[0]!r}, {times[-1]!r}]")
        k = int(np.searchsorted(times, tq, side="right")) - 1
        k = min(max(k, 0), len(poses) - 2)
        t0, t1 = times[k], times[k + 1]
        u = 0.0 if t1 == t0 else (tq - t0) / (t1 - t0)
        if u == 0.0:
            tr, q = trans[k].copy(), quats[k].copy()
        elif u == 1.0:
            tr, q = trans[k + 1].copy(), quats[k + 1].copy()
        else:
            tr = (1.0 - u) * trans[k] + u * trans[k + 1]
            q = geo.slerp(quats[k], quats[k + 1], u)
        out.append(AbsolutePose(timestamp=float(tq), translation=tr, rotation=q))
    return out


def resample_imu(imu_stream, t_a, t_b, count=11):
    """Linearly resample the IMU stream onto a uniform grid over [t_a, t_b].

    At an exact nominal-rate stream the grid coincides with raw samples and
    resampling is the identity.  Raises CoverageError when the stream does
    not bracket the interval.
    """
    times = np.array([s.timestamp for s in imu_stream])
    if times.size < 2 or times[0] > t_a or times[-1] < t_b:
        raise CoverageError(
            f"imu stream [{times[0] if times.size else '-'}, "
            f"{times[-1] if times.size else '-'}] does not cover "
            f"frame interval [{t_a}, {t_b}]")
    grid = np.linspace(t_a, t_b, count)
    gyro = np.stack([s.angular_velocity for s in imu_stream])
    acc = np.stack([s.linear_acceleration for s in imu_stream])
    cols = [np.interp(grid, times, gyro[:, i]) for i in range(3)]
    cols += [np.interp(grid, times, acc[:, i]) for i in range(3)]
    data = np.stack(cols, axis=1)  # (count, 6)
    return tuple(ImuSample(timestamp=float(t), angular_velocity=row[:3].copy(),
                           linear_acceleration=row[3:].copy())
                 for t, row in zip(grid, data))


def build_windows(dataset, with_targets=True, imu_count=11):
    """One SampleWindow per consecutive frame pair.

    The target is the relative pose of frame_b in frame_a's body frame,
    computed from the reference trajectory interpolated at the two frame
    timestamps.  With ``with_targets=False`` (inference on sequences
    without usable reference) targets are zero placeholders.
    """
    if len(dataset.frames) < 2:
        raise ValidationError(
            f"{dataset.sequence_id}: need at least 2 frames, have {len(dataset.frames)}")
    ft = dataset.frame_times()
    if with_targets:
        poses = interpolate_reference(dataset.reference_poses, ft)
    windows = []
    for i in range(len(dataset.frames) - 1):
        t_a, t_b = ft[i], ft[i + 1]
        try:
            imu = resample_imu(dataset.imu_stream, t_a, t_b, count=imu_count)
        except CoverageError as e:
            raise CoverageError(
                f"{dataset.sequence_id}: frame pair ({i}, {i + 1}): {e}") from e
        if with_targets:
            v, phi = geo.relative_pose(poses[i].rotation, poses[i].translation,
                                       poses[i + 1].rotation, poses[i + 1].translation)
            target = PoseDelta(v=v, phi=phi)
        else:
            target = PoseDelta.zero()
        windows.append(SampleWindow(frame_a=dataset.frames[i],
                                    frame_b=dataset.frames[i + 1],
                                    imu=imu, target=target))
    return windows


# ---------------------------------------------------------------------------
# splits

@dataclass(frozen=True)
class SplitPlan:
    train: tuple
    val: tuple
    test: tuple


def split_dataset(sequence_ids, train=None, val=None, test=None):
    """Partition sequence ids into train/val/test.

    Defaults to the harbor-sequence convention {h02,h04,h06} / {h03,h05} /
    {h01,h07}; explicit id lists override it.  Unknown ids are an error.
    """
    ids = list(sequence_ids)
    if train is None and val is None and test is None:
        known = set(PAPER_SPLIT["train"]) | set(PAPER_SPLIT["val"]) | set(PAPER_SPLIT["test"])
        unknown = [s for s in ids if s not in known]
        if unknown:
            raise ValidationError(
                f"unknown sequence ids {unknown}; pass explicit train/val/test lists")
        return SplitPlan(
            train=tuple(s for s in ids if s in PAPER_SPLIT["train"]),
            val=tuple(s for s in ids if s in PAPER_SPLIT["val"]),
            test=tuple(s for s in ids if s in PAPER_SPLIT["test"]))
    train, val, test = tuple(train or ()), tuple(val or ()), tuple(test or ())
    unknown = [s for s in train + val + test if s not in ids]
    if unknown:
        raise ValidationError(f"split references unknown sequence ids {unknown}")
    return SplitPlan(train=train, val=val, test=test)


def take_fraction(windows, fraction, mode="prefix"):
    """Keep a fraction of a window list: temporal prefix or uniform stride."""
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    n = len(windows)
    keep = int(round(n * fraction))
    if mode == "prefix":
        return list(windows[:keep])
    if mode == "stride":
        if keep == 0:
            return []
        idx = np.linspace(0, n - 1, keep).round().astype(int)
        return [windows[i] for i in idx]
    raise ValidationError(f"unknown fraction mode {mode!r}")


# ---------------------------------------------------------------------------
# window export (binary blob + JSON index)

def export_windows(windows, out_prefix):
    """Dump windows to ``<prefix>.bin`` plus ``<prefix>.json`` index."""
    import json

    index = {"format": 1, "count": len(windows), "records": []}
    offset = 0
    with open(out_prefix + ".bin", "wb") as f:
        for win in windows:
            rec = {}
            for name, arr in (("frame_a", win.frame_a.image),
                              ("frame_b", win.frame_b.image),
                              ("imu", win.imu_array()),
                              ("imu_times", np.array([s.timestamp for s in win.imu])),
                              ("frame_times", np.array([win.frame_a.timestamp,
                                                        win.frame_b.timestamp])),
                              ("target", win.target.as_array())):
                blob = np.ascontiguousarray(arr, dtype=np.float64).tobytes()
                rec[name] = {"offset": offset, "shape": list(np.shape(arr)),
                             "dtype": "float64"}
                f.write(blob)
                offset += len(blob)
            index["records"].append(rec)
    with open(out_prefix + ".json", "w", encoding="utf-8") as f:
        json.dump(index, f, indent=1, sort_keys=True)
    return out_prefix + ".bin", out_prefix + ".json"


def import_windows(prefix):
    """Inverse of export_windows; returns SampleWindow list."""
    import json

    with open(prefix + ".json", "r", encoding="utf-8") as f:
        index = json.load(f)
    with open(prefix + ".bin", "rb") as f:
        payload = f.read()

    def grab(rec, name):
        meta = rec[name]
        n = int(np.prod(meta["shape"])) if meta["shape"] else 1
        arr = np.frombuffer(payload, dtype=np.float64,
                            count=n, offset=meta["offset"])
        return arr.reshape(meta["shape"]).copy()

    out = []
    for rec in index["records"]:
        ft = grab(rec, "frame_times")
        imu_t = grab(rec, "imu_times")
        imu_arr = grab(rec, "imu")
        imu = tuple(ImuSample(timestamp=float(imu_t[i]),
                              angular_velocity=imu_arr[:3, i].copy(),
                              linear_acceleration=imu_arr[3:, i].copy())
                    for i in range(imu_arr.shape[1]))
        tgt = grab(rec, "target")
        out.append(SampleWindow(
            frame_a=Frame(timestamp=float(ft[0]), image=grab(rec, "frame_a")),
            frame_b=Frame(timestamp=float(ft[1]), image=grab(rec, "frame_b")),
            imu=imu, target=PoseDelta(v=tgt[:3], phi=tgt[3:])))
    return out

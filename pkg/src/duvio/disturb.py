"""Visual-disturbance synthesis and fully synthetic test sequences.

Turbidity follows the standard haze formation model
``I = J * t + A * (1 - t)`` with transmission ``t = exp(-beta * d)``;
distortion is a seeded radial warp + Gaussian blur + additive Gaussian
noise.  Both operators preserve raster shape and the [0, 1] value range
and are deterministic functions of (image, params, seed).

The synthetic generator renders a camera translating/yawing above an
infinite textured plane (procedural band-limited texture evaluated
analytically at world coordinates), so frames, IMU and ground truth all
derive from one closed-form trajectory.
"""

import math
import zlib
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .dataio import (AbsolutePose, Frame, ImuSample, SequenceDataset)
from .errors import ValidationError


@dataclass(frozen=True)
class TurbidityParams:
    attenuation_beta: float = 1.5   # 1/m equivalent
    airlight: float = 0.85          # scattered-light intensity
    depth: float = 2.0              # constant scene depth proxy (m)
    depth_gradient: float = 0.0     # optional top-to-bottom depth ramp (m)
    beta_jitter: float = 0.0        # per-frame +/- range (drifting particle density)
    airlight_jitter: float = 0.0    # per-frame +/- range

    def __post_init__(self):
        if self.attenuation_beta < 0:
            raise ValidationError(f"attenuation_beta must be >= 0, got {self.attenuation_beta}")
        if not 0.0 <= self.airlight <= 1.0:
            raise ValidationError(f"airlight must be in [0,1], got {self.airlight}")
        if self.beta_jitter < 0 or self.airlight_jitter < 0:
            raise ValidationError("jitter ranges must be >= 0")


@dataclass(frozen=True)
class DistortionParams:
    radial_k1: float = 0.12
    radial_k2: float = 0.05
    blur_sigma: float = 0.8    # px
    noise_sigma: float = 0.02  # intensity
    seed: int = 0

    def __post_init__(self):
        if self.blur_sigma < 0 or self.noise_sigma < 0:
            raise ValidationError("blur_sigma and noise_sigma must be >= 0")


def apply_turbidity(image, params):
    """Haze the raster; beta=0 is the identity, beta->inf gives flat airlight."""
    img = np.asarray(image, dtype=np.float64)
    if params.attenuation_beta == 0.0:
        return img.copy()
    depth = params.depth
    if params.depth_gradient != 0.0:
        ramp = np.linspace(0.0, params.depth_gradient, img.shape[0])[:, None]
        depth = depth + ramp
    t = np.exp(-params.attenuation_beta * depth)
    out = img * t + params.airlight * (1.0 - t)
    return np.clip(out, 0.0, 1.0)


def gaussian_taps(sigma, radius=None):
    """Normalized symmetric Gaussian taps (odd length)."""
    if radius is None:
        radius = max(1, int(round(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (xs / sigma) ** 2)
    return taps / taps.sum()


def gaussian_blur(image, sigma):
    """Separable Gaussian blur with reflect boundaries."""
    if sigma <= 0:
        return np.asarray(image, dtype=np.float64).copy()
    taps = gaussian_taps(sigma)
    out = kernels.correlate1d(np.asarray(image, dtype=np.float64), taps, 0)
    return kernels.correlate1d(out, taps, 1)


def radial_warp(image, k1, k2):
    """Inverse-mapped radial distortion (r normalized so r=1 at the corner)."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    ny = (yy - cy) / math.hypot(cy, cx)
    nx = (xx - cx) / math.hypot(cy, cx)
    r2 = ny * ny + nx * nx
    f = 1.0 + k1 * r2 + k2 * r2 * r2
    return kernels.warp_bilinear(img, cy + (yy - cy) * f, cx + (xx - cx) * f)


def apply_distortion(image, params):
    """Radial warp + blur + seeded Gaussian noise; exact identity at zeros."""
    img = np.asarray(image, dtype=np.float64)
    if (params.radial_k1 == 0.0 and params.radial_k2 == 0.0
            and params.blur_sigma == 0.0 and params.noise_sigma == 0.0):
        return img.copy()
    out = img
    if params.radial_k1 != 0.0 or params.radial_k2 != 0.0:
        out = radial_warp(out, params.radial_k1, params.radial_k2)
    if params.blur_sigma > 0.0:
        out = gaussian_blur(out, params.blur_sigma)
    if params.noise_sigma > 0.0:
        rng = np.random.default_rng(params.seed)
        out = out + rng.normal(0.0, params.noise_sigma, size=out.shape)
    return np.clip(out, 0.0, 1.0)


def sequence_frame_seed(sequence_id, index):
    """Stable per-(sequence, frame) seed for frame-varying disturbances."""
    return (zlib.crc32(str(sequence_id).encode("utf-8")) * 100003 + index) % (2 ** 31)


def apply_scenario(image, scenario, turbidity=None, distortion=None, frame_seed=0):
    """Dispatch one frame through its scenario's disturbance.

    frame_seed keys the per-frame variation (turbidity drift, distortion
    noise) so sequences disturb deterministically frame by frame.
    """
    if scenario == "original":
        return np.asarray(image, dtype=np.float64).copy()
    if scenario == "turbid":
        params = turbidity or TurbidityParams()
        if params.beta_jitter > 0 or params.airlight_jitter > 0:
            rng = np.random.default_rng(frame_seed)
            beta = max(0.0, params.attenuation_beta
                       + rng.uniform(-params.beta_jitter, params.beta_jitter))
            air = float(np.clip(params.airlight
                                + rng.uniform(-params.airlight_jitter,
                                              params.airlight_jitter), 0.0, 1.0))
            params = replace(params, attenuation_beta=beta, airlight=air,
                             beta_jitter=0.0, airlight_jitter=0.0)
        return apply_turbidity(image, params)
    if scenario == "distortion":
        params = distortion or DistortionParams()
        return apply_distortion(image, replace(params, seed=params.seed + frame_seed))
    raise ValidationError(f"unknown scenario {scenario!r}")


# ---------------------------------------------------------------------------
# synthetic sequences

@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic sequence.

    trajectory: 'line' (constant velocity, optional yaw rate), 'circle'
    (constant angular rate, heading tangent) or 'square' (rounded-corner
    perimeter at constant speed).
    """
    sequence_id: str = "s00"
    trajectory: str = "line"
    duration: float = 3.0
    frame_rate_hz: float = 20.0
    imu_rate_hz: float = 200.0
    image_height: int = 32
    image_width: int = 64
    texture_seed: int = 7
    scenario: str = "original"
    turbidity: TurbidityParams = TurbidityParams()
    distortion: DistortionParams = DistortionParams()
    speed: float = 0.5              # m/s (line, square)
    heading: float = 0.0            # initial yaw (rad)
    yaw_rate: float = 0.0           # rad/s (line only)
    angular_rate: float = 0.4       # rad/s (circle)
    radius: float = 2.0             # m (circle); half side length (square)
    corner_radius: float = 0.3      # m (square)
    height: float = 2.0             # camera altitude above the plane (m)
    gsd: float = 0.01               # ground sample distance (m/px)
    imu_noise_gyro: float = 0.0     # rad/s std
    imu_noise_accel: float = 0.0    # m/s^2 std
    noise_seed: int = 0
    timing_jitter: float = 0.0      # fraction of the nominal sample period
    gt_stride: int = 1              # keep every n-th reference pose
    gt_drop: tuple = ()             # extra reference indices to drop


class _Texture:
    """Band-limited procedural plane texture, analytic at any world point."""

    def __init__(self, seed, n_waves=24, freq_lo=1.0, freq_hi=8.0):
        rng = np.random.default_rng(seed)
        freqs = np.exp(rng.uniform(np.log(freq_lo), np.log(freq_hi), n_waves))
        angles = rng.uniform(0.0, 2.0 * np.pi, n_waves)
        self.kx = freqs * np.cos(angles) * 2.0 * np.pi
        self.ky = freqs * np.sin(angles) * 2.0 * np.pi
        self.phase = rng.uniform(0.0, 2.0 * np.pi, n_waves)
        self.amp = (1.0 / freqs)
        self.amp *= 0.5 / np.sum(self.amp)  # bound sum to +/- 0.5

    def sample(self, wx, wy):
        acc = np.zeros_like(wx)
        for kx, ky, ph, a in zip(self.kx, self.ky, self.phase, self.amp):
            acc += a * np.sin(kx * wx + ky * wy + ph)
        return 0.5 + acc  # in [0, 1] by amplitude bound


def _trajectory_fns(spec):
    """Return pos(t)->(3,), yaw(t), accel_world(t)->(3,), yaw_rate(t)."""
    if spec.trajectory == "line":
        u = np.array([math.cos(spec.heading), math.sin(spec.heading), 0.0])

        def pos(t):
            return u * (spec.speed * t)

        return (pos,
                lambda t: spec.heading + spec.yaw_rate * t,
                lambda t: np.zeros(3),
                lambda t: spec.yaw_rate)

    if spec.trajectory == "circle":
        w, r = spec.angular_rate, spec.radius

        def pos(t):
            a = w * t
            return np.array([r * math.cos(a), r * math.sin(a), 0.0])

        def yaw(t):
            return w * t + math.pi / 2.0  # tangent heading

        def accel(t):
            a = w * t
            return np.array([-r * w * w * math.cos(a), -r * w * w * math.sin(a), 0.0])

        return pos, yaw, accel, lambda t: w

    if spec.trajectory == "square":
        return _square_fns(spec)
    raise ValidationError(f"unknown trajectory {spec.trajectory!r}")


def _square_fns(spec):
    """Rounded-corner square perimeter traversed at constant speed."""
    half, rc, s = spec.radius, spec.corner_radius, spec.speed
    if rc <= 0 or rc >= half:
        raise ValidationError("square needs 0 < corner_radius < radius")
    straight = 2.0 * (half - rc)
    arc = 0.5 * math.pi * rc
    leg = straight + arc
    perimeter = 4.0 * leg
    # segment starts at the middle of the bottom edge heading +x
    corners = np.array([[half - rc, -half + rc], [half - rc, half - rc],
                        [-half + rc, half - rc], [-half + rc, -half + rc]])

    def state(t):
        d = (s * t) % perimeter
        k = int(d // leg)
        local = d - k * leg
        base_yaw = k * 0.5 * math.pi
        ca, sa = math.cos(base_yaw), math.sin(base_yaw)
        rot = np.array([[ca, -sa], [sa, ca]])
        if local <= straight:
            # straight run in segment frame: from (-(half-rc), -half) heading +x
            p_seg = np.array([-(half - rc) + local, -half])
            yaw = base_yaw
            acc_seg = np.array([0.0, 0.0])
            yr = 0.0
        else:
            a = (local - straight) / rc  # turned angle in [0, pi/2]
            centre = np.array([half - rc, -half + rc])
            p_seg = centre + rc * np.array([math.sin(a), -math.cos(a)])
            yaw = base_yaw + a
            acc_seg = -(s * s / rc) * np.array([math.sin(a), -math.cos(a)])
            yr = s / rc
        p = rot @ p_seg
        acc = rot @ acc_seg
        return p, yaw, acc, yr

    return (lambda t: np.append(state(t)[0], 0.0),
            lambda t: state(t)[1],
            lambda t: np.append(state(t)[2], 0.0),
            lambda t: state(t)[3])


def _yaw_quat(yaw):
    return np.array([math.cos(yaw / 2.0), 0.0, 0.0, math.sin(yaw / 2.0)])


def _render_frame(texture, pos, yaw, spec):
    h, w = spec.image_height, spec.image_width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64),
                             np.arange(w, dtype=np.float64), indexing="ij")
    # body x = forward (up in the image), body y = left (left in the image)
    fwd = (cy - rows) * spec.gsd
    left = (cx - cols) * spec.gsd
    ca, sa = math.cos(yaw), math.sin(yaw)
    wx = pos[0] + ca * fwd - sa * left
    wy = pos[1] + sa * fwd + ca * left
    img = texture.sample(wx, wy)
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0  # 8-bit grid


def _jitter_times(times, jitter_frac, rng):
    if jitter_frac <= 0.0 or times.size < 3:
        return times
    dt = np.min(np.diff(times))
    jit = rng.uniform(-0.49 * jitter_frac * dt, 0.49 * jitter_frac * dt,
                      size=times.size)
    jit[0] = jit[-1] = 0.0  # keep endpoints (coverage)
    return times + jit


def synthesize_sequence(spec):
    """Render a full synthetic SequenceDataset from an analytic trajectory."""
    if spec.duration <= 0:
        raise ValidationError(f"duration must be positive, got {spec.duration}")
    if spec.frame_rate_hz <= 0 or spec.imu_rate_hz <= 0:
        raise ValidationError("rates must be positive")
    pos, yaw, accel_world, yaw_rate = _trajectory_fns(spec)
    rng = np.random.default_rng(spec.noise_seed)

    n_frames = int(math.floor(spec.duration * spec.frame_rate_hz)) + 1
    frame_t = np.arange(n_frames) / spec.frame_rate_hz
    n_imu = int(math.ceil(frame_t[-1] * spec.imu_rate_hz)) + 1
    imu_t = np.arange(n_imu) / spec.imu_rate_hz
    if imu_t[-1] < frame_t[-1]:
        imu_t = np.append(imu_t, frame_t[-1])
    frame_t = _jitter_times(frame_t, spec.timing_jitter, rng)
    imu_t = _jitter_times(imu_t, spec.timing_jitter, rng)

    texture = _Texture(spec.texture_seed)
    frames = []
    for i, t in enumerate(frame_t):
        img = _render_frame(texture, pos(t), yaw(t), spec)
        img = apply_scenario(img, spec.scenario, spec.turbidity, spec.distortion,
                             frame_seed=sequence_frame_seed(spec.sequence_id, i))
        img = np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0
        frames.append(Frame(timestamp=float(t), image=img))

    imu = []
    for t in imu_t:
        yw = yaw(t)
        ca, sa = math.cos(yw), math.sin(yw)
        r_t = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
        acc_body = r_t.T @ accel_world(t)
        gyro = np.array([0.0, 0.0, yaw_rate(t)])
        if spec.imu_noise_gyro > 0:
            gyro = gyro + rng.normal(0.0, spec.imu_noise_gyro, 3)
        if spec.imu_noise_accel > 0:
            acc_body = acc_body + rng.normal(0.0, spec.imu_noise_accel, 3)
        imu.append(ImuSample(timestamp=float(t), angular_velocity=gyro,
                             linear_acceleration=acc_body))

    keep = set(range(0, n_frames, max(1, spec.gt_stride))) - set(spec.gt_drop)
    keep |= {0, n_frames - 1}  # reference must span the frame range
    poses = [AbsolutePose(timestamp=float(frame_t[i]),
                          translation=np.append(pos(frame_t[i])[:2], spec.height),
                          rotation=_yaw_quat(yaw(frame_t[i])))
             for i in sorted(keep)]

    ds = SequenceDataset(
        sequence_id=spec.sequence_id,
        frames=frames,
        imu_stream=imu,
        reference_poses=poses,
        scenario=spec.scenario,
        frame_rate_hz=spec.frame_rate_hz,
        imu_rate_hz=spec.imu_rate_hz,
    )
    return ds.validate()


def disturb_sequence(dataset, scenario, turbidity=None, distortion=None):
    """Re-render every frame of a dataset under a disturbance scenario."""
    frames = [Frame(timestamp=f.timestamp,
                    image=np.round(
                        apply_scenario(f.image, scenario, turbidity, distortion,
                                       frame_seed=sequence_frame_seed(
                                           dataset.sequence_id, i))
                        * 255.0) / 255.0)
              for i, f in enumerate(dataset.frames)]
    return SequenceDataset(
        sequence_id=dataset.sequence_id,
        frames=frames,
        imu_stream=dataset.imu_stream,
        reference_poses=dataset.reference_poses,
        scenario=scenario,
        frame_rate_hz=dataset.frame_rate_hz,
        imu_rate_hz=dataset.imu_rate_hz,
        rate_tolerance=dataset.rate_tolerance,
    )

"""Pose network: visual encoder, inertial encoder, fusion, LSTM + regressor.

The visual encoder stacks two consecutive frames on the channel axis and
runs a nine-layer conv stack (receptive fields 7 -> 5 -> 3, stride 2 on
the first six layers) followed by a fully connected projection.  The
inertial encoder runs three 1-D convolutions over the 6x11 IMU window
and projects the flattened feature map.  Features are fused by plain
concatenation and rolled through a stacked LSTM whose top hidden state
feeds a two-layer MLP emitting (v, phi) per step.
"""

import numpy as np

from ..dataio import PoseDelta
from ..errors import ShapeError, ValidationError
from ..nn import autograd as ag
from ..nn.layers import LSTM, Conv1d, Conv2d, Linear, Module
from .config import VioConfig


class VisualEncoder(Module):
    def __init__(self, cfg, rng):
        super().__init__()
        self.cfg = cfg
        self.convs = []
        c_in = 2
        h, w = cfg.image_height, cfg.image_width
        for c_out, k, s in zip(cfg.visual_channels, cfg.visual_kernels,
                               cfg.visual_strides):
            self.convs.append(Conv2d(c_in, c_out, k, stride=s, pad=k // 2,
                                     rng=rng, slope=cfg.leaky_slope))
            h = (h + 2 * (k // 2) - k) // s + 1
            w = (w + 2 * (k // 2) - k) // s + 1
            c_in = c_out
        self.flat_size = c_in * h * w
        self.fc = Linear(self.flat_size, cfg.visual_feature, rng=rng,
                         slope=cfg.leaky_slope)

    def forward(self, x):
        b = x.shape[0]
        if x.shape[1:] != (2, self.cfg.image_height, self.cfg.image_width):
            raise ShapeError((b, 2, self.cfg.image_height, self.cfg.image_width),
                             x.shape, what="visual input")
        y = x
        for conv in self.convs:
            y = ag.leaky_relu(conv(y), self.cfg.leaky_slope)
        return self.fc(ag.reshape(y, (b, self.flat_size)))


class InertialEncoder(Module):
    def __init__(self, cfg, rng):
        super().__init__()
        self.cfg = cfg
        self.convs = []
        c_in = 6
        for c_out in cfg.inertial_channels:
            self.convs.append(Conv1d(c_in, c_out, 3, stride=1, pad=1,
                                     rng=rng, slope=cfg.leaky_slope))
            c_in = c_out
        self.flat_size = c_in * cfg.imu_window
        if not cfg.inertial_flatten:
            self.fc = Linear(self.flat_size, cfg.inertial_feature, rng=rng,
                             slope=cfg.leaky_slope)

    def feature_map(self, x):
        """Conv feature map (B, channels, imu_window) before flatten/projection."""
        b = x.shape[0]
        if x.shape[1:] != (6, self.cfg.imu_window):
            raise ShapeError((b, 6, self.cfg.imu_window), x.shape,
                             what="inertial input")
        y = x
        for conv in self.convs:
            y = ag.leaky_relu(conv(y), self.cfg.leaky_slope)
        return y

    def forward(self, x):
        y = self.feature_map(x)
        flat = ag.reshape(y, (x.shape[0], self.flat_size))
        if self.cfg.inertial_flatten:
            return flat
        return self.fc(flat)


def fuse_features(x_v, x_i):
    """Concatenate visual and inertial features: z = [x_v | x_i].

    The first |x_v| entries of z are the visual feature unchanged.
    Accepts Tensors or arrays (1-D single samples or 2-D batches).
    """
    if isinstance(x_v, ag.Tensor) or isinstance(x_i, ag.Tensor):
        return ag.concat([ag.as_tensor(x_v), ag.as_tensor(x_i)], axis=-1)
    return np.concatenate([np.asarray(x_v), np.asarray(x_i)], axis=-1)


class VioNet(Module):
    def __init__(self, cfg=None):
        super().__init__()
        self.cfg = cfg or VioConfig()
        self.ablate_visual = False  # zero the visual feature (IMU-only ablation)
        rng = np.random.default_rng(self.cfg.seed)
        self.visual = VisualEncoder(self.cfg, rng)
        self.inertial = InertialEncoder(self.cfg, rng)
        self.lstm = LSTM(self.cfg.fused_size, self.cfg.lstm_hidden,
                         self.cfg.lstm_layers, rng=rng)
        self.mlp1 = Linear(self.cfg.lstm_hidden, self.cfg.mlp_hidden, rng=rng,
                           slope=self.cfg.leaky_slope)
        # near-zero head keeps initial pose estimates close to the origin
        self.mlp2 = Linear(self.cfg.mlp_hidden, 6, rng=rng, std=1e-3)

    def init_state(self, batch=1):
        return self.lstm.init_state(batch)

    def step(self, z, state):
        """One temporal step from a fused feature (B, fused) -> ((B, 6), state)."""
        h, new_state = self.lstm.step(z, state)
        out = self.mlp2(ag.leaky_relu(self.mlp1(h), self.cfg.leaky_slope))
        return out, new_state

    def forward_windows(self, frames, imu, state=None):
        """Rollout over stacked windows.

        frames: (B, T, 2, H, W) consecutive-pair stacks; imu: (B, T, 6, K).
        Returns (predictions Tensor (B, T, 6), final state).
        """
        b, t = frames.shape[0], frames.shape[1]
        state = state or self.init_state(b)
        outs = []
        for k in range(t):
            x_v = self.visual(frames[:, k] if isinstance(frames, ag.Tensor)
                              else ag.Tensor(frames[:, k]))
            if self.ablate_visual:
                x_v = ag.mul(x_v, 0.0)
            x_i = self.inertial(imu[:, k] if isinstance(imu, ag.Tensor)
                                else ag.Tensor(imu[:, k]))
            z = fuse_features(x_v, x_i)
            out, state = self.step(z, state)
            outs.append(ag.reshape(out, (b, 1, 6)))
        return ag.concat(outs, axis=1), state


# ------------------------------------------------------------ functional ops

def _as_batch_frames(frame_a, frame_b):
    pair = np.stack([np.asarray(frame_a, dtype=np.float64),
                     np.asarray(frame_b, dtype=np.float64)])
    return ag.Tensor(pair[None])


def extract_visual_features(frame_a, frame_b, model):
    """Visual feature vector for one stacked frame pair."""
    if hasattr(frame_a, "image"):
        frame_a = frame_a.image
    if hasattr(frame_b, "image"):
        frame_b = frame_b.image
    return model.visual(_as_batch_frames(frame_a, frame_b)).data[0]


def _imu_window_array(imu, expected):
    if hasattr(imu, "imu_array"):
        arr = imu.imu_array()
    elif isinstance(imu, (list, tuple)) and imu and hasattr(imu[0], "angular_velocity"):
        g = np.stack([s.angular_velocity for s in imu], axis=1)
        a = np.stack([s.linear_acceleration for s in imu], axis=1)
        arr = np.concatenate([g, a], axis=0)
    else:
        arr = np.asarray(imu, dtype=np.float64)
    if arr.shape != (6, expected):
        raise ShapeError((6, expected), arr.shape, what="imu window")
    return arr


def extract_inertial_features(imu, model, return_map=False):
    """Inertial feature for one 11-sample window (channels gx..gz, ax..az)."""
    arr = _imu_window_array(imu, model.cfg.imu_window)
    x = ag.Tensor(arr[None])
    if return_map:
        return model.inertial.feature_map(x).data[0]
    return model.inertial(x).data[0]


def step_temporal(z, state, model):
    """Advance the temporal model one step: returns (PoseDelta, new state)."""
    z = ag.as_tensor(np.atleast_2d(np.asarray(z.data if isinstance(z, ag.Tensor)
                                              else z, dtype=np.float64)))
    if z.shape[1] != model.cfg.fused_size:
        raise ShapeError((z.shape[0], model.cfg.fused_size), z.shape,
                         what="fused feature")
    for h, c in state:
        if h.shape != (z.shape[0], model.cfg.lstm_hidden):
            raise ShapeError((z.shape[0], model.cfg.lstm_hidden), h.shape,
                             what="recurrent state")
    out, new_state = model.step(z, state)
    est = out.data[0]
    return PoseDelta(v=est[:3].copy(), phi=est[3:].copy()), new_state


def infer_sequence(dataset, model, dehazer=None):
    """Stateful rollout over a dataset -> one PoseDelta per frame pair."""
    from ..dataio import build_windows

    if len(dataset.frames) < 2:
        raise ValidationError(
            f"{dataset.sequence_id}: inference needs at least 2 frames")
    windows = build_windows(dataset, with_targets=bool(dataset.reference_poses))
    frames, imu, _ = windows_to_arrays(windows, model.cfg, dehazer=dehazer)
    preds, _ = model.forward_windows(frames[None], imu[None])
    return [PoseDelta(v=row[:3].copy(), phi=row[3:].copy())
            for row in preds.data[0]]


def _fit_raster(img, cfg):
    if img.shape != (cfg.image_height, cfg.image_width):
        raise ShapeError((cfg.image_height, cfg.image_width), img.shape,
                         what="frame raster")
    return img


def windows_to_arrays(windows, cfg, dehazer=None):
    """Stack SampleWindows into network arrays (T,2,H,W), (T,6,K), (T,6).

    With a dehazer given, each distinct frame is enhanced once (frozen
    generator, inference mode) before stacking.
    """
    cache = {}

    def prep(frame):
        key = id(frame)
        if key not in cache:
            img = _fit_raster(np.asarray(frame.image, dtype=np.float64), cfg)
            if dehazer is not None:
                img = dehazer.enhance(img)
            cache[key] = img
        return cache[key]

    frames = np.stack([np.stack([prep(w.frame_a), prep(w.frame_b)])
                       for w in windows])
    imu = np.stack([_imu_window_array(w, cfg.imu_window) for w in windows])
    targets = np.stack([w.target.as_array() for w in windows])
    return frames, imu, targets

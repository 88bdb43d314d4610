"""Pose-network configuration.

Defaults follow the full-scale training recipe: 512x256 mono frames,
11-sample IMU windows, 512-d visual features, a 256x11 inertial feature
map projected to 256, a 2x1024 LSTM, batch 16, lr 1e-6 over 20 epochs
with Adam betas (0.9, 0.999).  Every architectural dimension is derived
from this config so desk-scale tests can shrink the network uniformly.
"""

from dataclasses import dataclass, field

from ..errors import ValidationError


@dataclass(frozen=True)
class VioConfig:
    image_height: int = 256
    image_width: int = 512
    imu_window: int = 11
    visual_feature: int = 512
    visual_channels: tuple = (64, 128, 256, 256, 512, 512, 512, 512, 1024)
    visual_kernels: tuple = (7, 5, 5, 3, 3, 3, 3, 3, 3)
    visual_strides: tuple = (2, 2, 2, 2, 2, 2, 1, 1, 1)
    inertial_channels: tuple = (128, 256, 256)
    inertial_feature: int = 256      # projected x_i size fed to fusion
    inertial_flatten: bool = False   # True: skip projection, fuse the raw flatten
    lstm_layers: int = 2
    lstm_hidden: int = 1024
    mlp_hidden: int = 128
    alpha: float = 100.0             # rotation weight in the pose loss
    lr: float = 1e-6
    lr_decay: float = 1.0
    batch: int = 16
    epochs: int = 20
    adam_betas: tuple = (0.9, 0.999)
    seq_len: int = 10                # windows per training subsequence
    leaky_slope: float = 0.1
    grad_clip: float = 0.0           # 0 disables clipping
    seed: int = 0

    def __post_init__(self):
        positive = {
            "image_height": self.image_height, "image_width": self.image_width,
            "imu_window": self.imu_window, "visual_feature": self.visual_feature,
            "inertial_feature": self.inertial_feature,
            "lstm_layers": self.lstm_layers, "lstm_hidden": self.lstm_hidden,
            "mlp_hidden": self.mlp_hidden, "lr": self.lr, "batch": self.batch,
            "epochs": self.epochs, "seq_len": self.seq_len,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValidationError(f"{name} must be positive, got {value}")
        if self.alpha < 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if len(self.visual_channels) != len(self.visual_kernels) or \
                len(self.visual_channels) != len(self.visual_strides):
            raise ValidationError("visual channel/kernel/stride lists must align")

    @property
    def fused_size(self):
        if self.inertial_flatten:
            return self.visual_feature + self.inertial_channels[-1] * self.imu_window
        return self.visual_feature + self.inertial_feature

    def as_dict(self):
        return {
            "image_height": self.image_height, "image_width": self.image_width,
            "imu_window": self.imu_window, "visual_feature": self.visual_feature,
            "visual_channels": list(self.visual_channels),
            "visual_kernels": list(self.visual_kernels),
            "visual_strides": list(self.visual_strides),
            "inertial_channels": list(self.inertial_channels),
            "inertial_feature": self.inertial_feature,
            "inertial_flatten": self.inertial_flatten,
            "lstm_layers": self.lstm_layers, "lstm_hidden": self.lstm_hidden,
            "mlp_hidden": self.mlp_hidden, "alpha": self.alpha,
            "lr": self.lr, "lr_decay": self.lr_decay, "batch": self.batch,
            "epochs": self.epochs, "adam_betas": list(self.adam_betas),
            "seq_len": self.seq_len, "leaky_slope": self.leaky_slope,
            "grad_clip": self.grad_clip, "seed": self.seed,
        }

    @staticmethod
    def from_dict(d):
        d = dict(d)
        for key in ("visual_channels", "visual_kernels", "visual_strides",
                    "inertial_channels", "adam_betas"):
            if key in d:
                d[key] = tuple(d[key])
        return VioConfig(**d)


# a small configuration for tests and micro-experiments
def desk_config(**overrides):
    base = dict(
        image_height=32, image_width=64,
        visual_feature=32,
        visual_channels=(8, 12, 16, 16, 24, 24, 32, 32, 48),
        inertial_channels=(16, 32, 32),
        inertial_feature=32,
        lstm_hidden=64, mlp_hidden=32,
        lr=1e-3, batch=4, epochs=60, seq_len=6,
    )
    base.update(overrides)
    return VioConfig(**base)

from .config import VioConfig, desk_config
from .loss import pose_loss, pose_loss_t
from .model import (InertialEncoder, VioNet, VisualEncoder,
                    extract_inertial_features, extract_visual_features,
                    fuse_features, infer_sequence, step_temporal,
                    windows_to_arrays)
from .train import train_vio

__all__ = ["VioConfig", "desk_config", "pose_loss", "pose_loss_t",
           "InertialEncoder", "VioNet", "VisualEncoder",
           "extract_inertial_features", "extract_visual_features",
           "fuse_features", "infer_sequence", "step_temporal",
           "windows_to_arrays", "train_vio"]

from .metrics import (REFERENCE_ABLATION, REFERENCE_DEHAZE_BENCHMARK,
                      ImageQualityReport, image_metrics, mse_255,
                      psnr_from_mse, ssim)
from .models import (BACKBONES, Discriminator, DiscriminatorConfig, Generator,
                     GeneratorConfig, discriminate, generate)
from .train import DehazeTrainConfig, split_state, train_dehazer

__all__ = [
    "BACKBONES", "REFERENCE_ABLATION", "REFERENCE_DEHAZE_BENCHMARK",
    "ImageQualityReport", "image_metrics", "mse_255", "psnr_from_mse", "ssim",
    "Discriminator", "DiscriminatorConfig", "Generator", "GeneratorConfig",
    "discriminate", "generate", "DehazeTrainConfig", "split_state",
    "train_dehazer",
]

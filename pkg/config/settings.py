"""
Application settings and configuration
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Tuple
from pathlib import Path


class Settings(BaseSettings):
    """Pipeline settings loaded from environment variables (RELDET_*)"""

    model_config = SettingsConfigDict(
        # Always load the .env that belongs to this project, regardless of where
        # the process is launched from.
        env_file=str(Path(__file__).resolve().parents[1] / ".env"),
        env_prefix="RELDET_",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Settings
    log_level: str = "INFO"
    default_seed: int = 1234

    # Synthetic world
    feature_dim: int = 64
    synth_images: int = 2000
    synth_objects_per_image: int = 4

    # Semantic prior
    freq_alpha_baseline: float = 0.0
    freq_alpha_fusion: float = 1.0
    logit_eps: float = 1e-8

    # Model shapes
    spatial_hidden: Tuple[int, ...] = (64, 64)
    visual_hidden: Tuple[int, ...] = (256, 256)
    attribute_hidden: int = 64

    # Training
    train_epochs: int = 8
    rel_neg_pos_ratio: float = 3.0
    attr_neg_pos_ratio: float = 1.0
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64

    # Ranking / evaluation
    iou_threshold: float = 0.5
    recall_k: int = 50
    top_k: int = 200


# Global settings instance
settings = Settings()

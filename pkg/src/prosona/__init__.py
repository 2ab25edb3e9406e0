"""Prompt-guided multi-rater segmentation: a probabilistic U-Net latent space
over annotator styles (stage 1) navigated by natural-language prompts through
similarity-weighted latent fusion (stage 2), with a multi-rater metric suite
and a synthetic annotator-style data generator."""

from .backbone import BackboneConfig, ProbabilityMap, ProbUNet
from .data import Case, DatasetConfig, DatasetManifest, GenerationConfig, StyleSpec
from .latent import LatentCode, LatentGaussian, sample
from .losses import ContrastiveBatch, EnsemblePrediction, ExpertBounds, LossConfig
from .metrics import MetricsReport, evaluate
from .prompt import PersonaModel, ProjectionMlp, SimilarityProfile
from .text import HashedBowEncoder, load_text_encoder
from .train import TrainConfig, train_stage1, train_stage2

__version__ = "0.1.0"

__all__ = [
    "BackboneConfig", "ProbabilityMap", "ProbUNet",
    "Case", "DatasetConfig", "DatasetManifest", "GenerationConfig", "StyleSpec",
    "LatentCode", "LatentGaussian", "sample",
    "ContrastiveBatch", "EnsemblePrediction", "ExpertBounds", "LossConfig",
    "MetricsReport", "evaluate",
    "PersonaModel", "ProjectionMlp", "SimilarityProfile",
    "HashedBowEncoder", "load_text_encoder",
    "TrainConfig", "train_stage1", "train_stage2",
    "__version__",
]

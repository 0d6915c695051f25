"""Emotion-aware face super-resolution toolkit."""

__version__ = "0.1.0"

from .bicubic import bicubic_resize
from .dataio import LandmarkSet, PairDataset, SamplePair, load_sample, make_split
from .facegraph import FaceGraph, canonical_edges, canonical_graph, normalize_adjacency
from .fer import ToyFerClassifier, classify, resolve_plugin
from .losses import LossWeights, pixel_l1, style_loss, total_loss
from .metrics import EcmReport, ecm, ecm_report, entropy, histogram_loss, psnr, ssim
from .model import AffectSRNet, ModelConfig, build_model
from .training import TrainConfig, evaluate, fit, init_params, run_ablation, train_step

__all__ = [
    "__version__",
    "bicubic_resize",
    "LandmarkSet", "PairDataset", "SamplePair", "load_sample", "make_split",
    "FaceGraph", "canonical_edges", "canonical_graph", "normalize_adjacency",
    "ToyFerClassifier", "classify", "resolve_plugin",
    "LossWeights", "pixel_l1", "style_loss", "total_loss",
    "EcmReport", "ecm", "ecm_report", "entropy", "histogram_loss", "psnr", "ssim",
    "AffectSRNet", "ModelConfig", "build_model",
    "TrainConfig", "evaluate", "fit", "init_params", "run_ablation", "train_step",
]

"""Desk-scale sparse voxel engine for two-stage semantic scene completion."""

from .autodiff import ParameterStore, Tape, Var, backward, poly_lr, sgd_step
from .config import ExperimentConfig, load_config, parse_config, toy_config
from .grid import DenseVoxelTensor, GridShape, SparseVoxelTensor, densify, sparsify
from .model import SceneCompletionModel, build_model
from .train import evaluate, robustness_report, train

__version__ = "0.1.0"

__all__ = [
    "DenseVoxelTensor",
    "ExperimentConfig",
    "GridShape",
    "ParameterStore",
    "SceneCompletionModel",
    "SparseVoxelTensor",
    "Tape",
    "Var",
    "backward",
    "build_model",
    "densify",
    "evaluate",
    "load_config",
    "parse_config",
    "poly_lr",
    "robustness_report",
    "sgd_step",
    "sparsify",
    "toy_config",
    "train",
    "__version__",
]

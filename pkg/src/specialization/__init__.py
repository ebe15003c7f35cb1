"""Specialization: episodic memory, learned Gaussian parameter models and the specialized reasoner"""

from .memory import EpisodicMemory, load_episodes, read_episodes
from .gaussian import (
    CombinedDistribution,
    FitConfig,
    GaussianModel,
    combine,
    fit,
    fit_all,
    load_models,
    model_filename,
    sample,
    save_models,
    specialize
)
from .reasoner import MODES, SpecializedReasoner, build_reasoner

__all__ = [
    "EpisodicMemory",
    "load_episodes",
    "read_episodes",
    "CombinedDistribution",
    "FitConfig",
    "GaussianModel",
    "combine",
    "fit",
    "fit_all",
    "load_models",
    "model_filename",
    "sample",
    "save_models",
    "specialize",
    "MODES",
    "SpecializedReasoner",
    "build_reasoner"
]

"""Dependent stochastic block models for index-ordered sequences of categorical networks."""

from .core import (
    BlockSuffStats,
    Covariates,
    DataError,
    Hyperparameters,
    NetworkSequence,
    PartitionSequence,
    build_suff_stats,
    canonicalize,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BlockSuffStats",
    "Covariates",
    "DataError",
    "Hyperparameters",
    "NetworkSequence",
    "PartitionSequence",
    "build_suff_stats",
    "canonicalize",
]

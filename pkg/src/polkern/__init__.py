"""Region-based PolSAR classification with stochastic distances between
scaled complex Wishart models: minimum-distance and kernel SVM classifiers."""

from . import _backend
from .distances import (
    ALL_KINDS,
    BHATTACHARYYA,
    CHI_SQUARE,
    HELLINGER,
    KULLBACK_LEIBLER,
    DistanceKind,
    distance,
    distance_matrix,
    renyi,
)
from .errors import PolkernError
from .hermitian import HermitianMatrix
from .wishart import WishartModel

__version__ = "0.1.0"
BACKEND = _backend.NAME

__all__ = [
    "ALL_KINDS",
    "BACKEND",
    "BHATTACHARYYA",
    "CHI_SQUARE",
    "HELLINGER",
    "KULLBACK_LEIBLER",
    "DistanceKind",
    "HermitianMatrix",
    "PolkernError",
    "WishartModel",
    "distance",
    "distance_matrix",
    "renyi",
]

"""Compression-based distances, kernels and classifiers."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .compression import CompressorHandle, Kind, LengthCache, compressed_length
from .distance import MetricSpec, Policy, PolicyMisuseError, distance_matrix, ncd

__all__ = [
    "BACKEND",
    "CompressorHandle",
    "Kind",
    "LengthCache",
    "MetricSpec",
    "Policy",
    "PolicyMisuseError",
    "compressed_length",
    "distance_matrix",
    "ncd",
]

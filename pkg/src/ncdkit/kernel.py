"""Kernel matrices built from distances, kernel distances and PSD diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distance import DistanceMatrix, MetricKind, hamming


@dataclass
class KernelMatrix:
    values: np.ndarray
    row_ids: list
    col_ids: list
    kind: str
    lam: float
    source: DistanceMatrix | None = None
    psd_min_eig: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def submatrix(self, rows, cols) -> "KernelMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        return KernelMatrix(
            self.values[np.ix_(rows, cols)],
            [self.row_ids[i] for i in rows],
            [self.col_ids[j] for j in cols],
            self.kind,
            self.lam,
            None,
            None,
            dict(self.provenance()),
        )

    def provenance(self) -> dict:
        if self.meta:
            return dict(self.meta)
        src = self.source.provenance() if self.source is not None else None
        return {"type": "kernel", "kernel": self.kind, "lambda": self.lam, "source": src}


def _check_lambda(lam):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")


def rbf_from_distances(D: DistanceMatrix, lam: float) -> KernelMatrix:
    """``exp(-d**2 / lam)`` entry-wise; the sign of negative distances is lost."""
    _check_lambda(lam)
    values = np.exp(-np.square(D.values) / lam)
    return KernelMatrix(values, list(D.row_ids), list(D.col_ids), "rbf", lam, D)


def hamming_kernel(x: str, y: str, lam: float) -> float:
    """``1 - lam * hamming(x, y) / max(len(x), len(y))``; two empty strings give 1."""
    _check_lambda(lam)
    n = max(len(x), len(y))
    if n == 0:
        return 1.0
    return 1.0 - lam * (hamming(x, y) / n)


def hamming_from_ratio(D: DistanceMatrix, lam: float) -> KernelMatrix:
    """Hamming kernel from a precomputed Hamming-ratio distance matrix."""
    _check_lambda(lam)
    if D.metric is not None and D.metric.kind is not MetricKind.HAMMING_RATIO:
        raise ValueError("the Hamming kernel is only defined over Hamming-ratio distances")
    return KernelMatrix(1.0 - lam * D.values, list(D.row_ids), list(D.col_ids), "hamming", lam, D)


def kernel_from_distances(D: DistanceMatrix, kind: str, lam: float) -> KernelMatrix:
    if kind == "rbf":
        return rbf_from_distances(D, lam)
    if kind == "hamming":
        return hamming_from_ratio(D, lam)
    raise ValueError(f"unknown kernel {kind!r}")


def kernel_distance(K: KernelMatrix) -> DistanceMatrix:
    """Squared feature-space distance ``2 - 2k`` for kernels with unit self-similarity."""
    src = K.source
    D = DistanceMatrix(
        2.0 - 2.0 * K.values,
        list(K.row_ids),
        list(K.col_ids),
        src.metric if src is not None else None,
        src.policy if src is not None else None,
    )
    D.meta = {"kernel_distance": {"kernel": K.kind, "lambda": K.lam}}
    return D


def _require_symmetric(values, atol=0.0):
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(values, values.T, rtol=0.0, atol=atol):
        raise ValueError("matrix must be symmetric")


def psd_diagnostic(K) -> float:
    """Smallest eigenvalue of a symmetric kernel matrix; negative means indefinite."""
    values = K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=np.float64)
    _require_symmetric(values)
    lo = float(np.linalg.eigvalsh(values)[0])
    if isinstance(K, KernelMatrix):
        K.psd_min_eig = lo
    return lo


def clip_to_psd(K: KernelMatrix) -> KernelMatrix:
    """Reassemble ``K`` with negative eigenvalues set to zero.

    Off by default everywhere; it changes the Gram matrix the models see.
    """
    _require_symmetric(K.values)
    w, V = np.linalg.eigh(K.values)
    values = (V * np.clip(w, 0.0, None)) @ V.T
    values = 0.5 * (values + values.T)
    out = KernelMatrix(values, list(K.row_ids), list(K.col_ids), K.kind, K.lam, K.source)
    out.meta = {**K.provenance(), "repair": "eigenvalue_clip"}
    return out

"""NCD, baseline string metrics, symmetrisation policies and distance matrices."""

from __future__ import annotations

import csv
import enum
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from .compression import CompressorHandle, LengthCache, as_bytes, compressed_length, concat_length


class PolicyMisuseError(ValueError):
    """A symmetrisation policy was requested where it is undefined."""


class MetricKind(str, enum.Enum):
    NCD = "ncd"
    LEVENSHTEIN = "levenshtein"
    HAMMING = "hamming"
    HAMMING_RATIO = "hamming_ratio"


class Policy(str, enum.Enum):
    VANILLA = "vanilla"
    ASSUMED = "assumed"
    ENFORCED = "enforced"
    AVERAGE = "average"


@dataclass(frozen=True)
class MetricSpec:
    kind: MetricKind
    compressor: CompressorHandle | None = None
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.kind is MetricKind.NCD and self.compressor is None:
            object.__setattr__(self, "compressor", CompressorHandle("gzip"))
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")

    @classmethod
    def parse(cls, text: str, level: int | None = None, epsilon: float = 0.0) -> "MetricSpec":
        """``"ncd_gzip"``, ``"ncd:bz2:9"``, ``"levenshtein"``, ``"hamming"``, ``"ratio"``..."""
        t = text.strip().lower()
        if t in ("ratio", "hamming_ratio"):
            return cls(MetricKind.HAMMING_RATIO)
        if t in ("levenshtein", "hamming"):
            return cls(MetricKind(t))
        for sep in ("_", ":"):
            if t.startswith("ncd" + sep):
                comp = CompressorHandle.parse(t[4:].replace("_", ":"))
                if level is not None:
                    comp = CompressorHandle(comp.kind, level)
                return cls(MetricKind.NCD, comp, epsilon)
        if t == "ncd":
            return cls(MetricKind.NCD, CompressorHandle("gzip", level), epsilon)
        raise ValueError(f"unknown metric {text!r}")

    @property
    def name(self) -> str:
        if self.kind is MetricKind.NCD:
            return f"ncd_{self.compressor.name}"
        return self.kind.value

    @property
    def intrinsically_symmetric(self) -> bool:
        return self.kind is not MetricKind.NCD

    def to_dict(self):
        d = {"kind": self.kind.value, "epsilon": self.epsilon}
        if self.compressor is not None:
            d["compressor"] = self.compressor.name
            d["level"] = self.compressor.level
        return d

    @classmethod
    def from_dict(cls, d):
        comp = CompressorHandle(d["compressor"], d["level"]) if "compressor" in d else None
        return cls(MetricKind(d["kind"]), comp, d.get("epsilon", 0.0))


def _ncd_from_lengths(cxy, cx, cy, eps):
    lo, hi = (cx, cy) if cx <= cy else (cy, cx)
    return (cxy - lo) / hi + eps


def _ncd_avg_from_lengths(cxy, cyx, cx, cy, eps):
    lo, hi = (cx, cy) if cx <= cy else (cy, cx)
    return ((cxy + cyx) / 2 - lo) / hi + eps


def ncd(x, y, c: CompressorHandle, eps: float = 0.0, cache: LengthCache | None = None,
        shortcut: bool = True) -> float:
    """Normalised compression distance of ``x`` to ``y``.

    Byte-identical inputs return 0 without compressing unless ``shortcut`` is
    off.  The result is asymmetric in general and may be negative.
    """
    bx, by = as_bytes(x), as_bytes(y)
    if shortcut and bx == by:
        return 0.0
    cx = compressed_length(bx, c, cache)
    cy = compressed_length(by, c, cache)
    return _ncd_from_lengths(concat_length(bx, by, c, cache), cx, cy, eps)


def ncd_average(x, y, c: CompressorHandle, eps: float = 0.0, cache: LengthCache | None = None,
                shortcut: bool = True) -> float:
    """NCD with both concatenation orders averaged; symmetric in its arguments."""
    bx, by = as_bytes(x), as_bytes(y)
    if shortcut and bx == by:
        return 0.0
    cx = compressed_length(bx, c, cache)
    cy = compressed_length(by, c, cache)
    cxy = concat_length(bx, by, c, cache)
    cyx = concat_length(by, bx, c, cache)
    return _ncd_avg_from_lengths(cxy, cyx, cx, cy, eps)


def levenshtein(x: str, y: str) -> int:
    return int(kernels.levenshtein(x, y))


def hamming(x: str, y: str) -> int:
    """Mismatches over the common prefix length plus the length difference."""
    return int(kernels.hamming(x, y))


def hamming_ratio(x: str, y: str) -> float:
    n = max(len(x), len(y))
    if n == 0:
        return 0.0
    return hamming(x, y) / n


def pair_distance(x, y, m: MetricSpec, average: bool = False, cache=None, shortcut=True) -> float:
    """Evaluate one ordered pair under ``m``."""
    if m.kind is MetricKind.NCD:
        fn = ncd_average if average else ncd
        return fn(x, y, m.compressor, m.epsilon, cache, shortcut)
    if m.kind is MetricKind.LEVENSHTEIN:
        return float(levenshtein(x, y))
    if m.kind is MetricKind.HAMMING:
        return float(hamming(x, y))
    return hamming_ratio(x, y)


def canonical_pair(x, y):
    """Order a pair by the byte-lexicographic order of its UTF-8 encodings."""
    return (x, y) if as_bytes(x) <= as_bytes(y) else (y, x)


@dataclass
class DistanceMatrix:
    values: np.ndarray
    row_ids: list
    col_ids: list
    metric: MetricSpec | None = None
    policy: Policy | None = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def is_square_self(self) -> bool:
        return self.values.shape[0] == self.values.shape[1] and list(self.row_ids) == list(self.col_ids)

    def submatrix(self, rows, cols) -> "DistanceMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        return DistanceMatrix(
            self.values[np.ix_(rows, cols)],
            [self.row_ids[i] for i in rows],
            [self.col_ids[j] for j in cols],
            self.metric,
            self.policy,
            dict(self.meta),
        )

    def provenance(self) -> dict:
        return {
            "type": "distance",
            "metric": self.metric.to_dict() if self.metric else None,
            "policy": self.policy.value if self.policy else None,
            **self.meta,
        }


def _same_samples(X, Xp) -> bool:
    if Xp is None or Xp is X:
        return True
    return len(X) == len(Xp) and all(as_bytes(a) == as_bytes(b) for a, b in zip(X, Xp))


def _chunks(n, workers):
    if n == 0:
        return []
    k = max(1, min(workers * 4, n))
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [(bounds[t], bounds[t + 1]) for t in range(k) if bounds[t] < bounds[t + 1]]


def distance_matrix(
    X: Sequence[str],
    Xp: Sequence[str] | None = None,
    metric: MetricSpec | str = "ncd_gzip",
    policy: Policy | str = Policy.VANILLA,
    cache: LengthCache | None = None,
    *,
    workers: int = 1,
    shortcut: bool = True,
    row_ids=None,
    col_ids=None,
) -> DistanceMatrix:
    """Pairwise distances between the samples of ``X`` (rows) and ``Xp`` (columns).

    ``Xp=None`` requests the self-matrix of ``X``.  On self-matrices the
    ASSUMED, ENFORCED and AVERAGE policies evaluate only the strict lower
    triangle and mirror it; VANILLA evaluates every off-diagonal entry.  On
    rectangular requests ENFORCED and AVERAGE evaluate every entry and ASSUMED
    raises :class:`PolicyMisuseError`.

    Singleton compressed lengths are pre-computed into ``cache`` when it is
    enabled; a disabled cache makes every entry recompress both singletons.
    The result does not depend on ``workers``.
    """
    m = MetricSpec.parse(metric) if isinstance(metric, str) else metric
    p = Policy(policy)
    square = _same_samples(X, Xp)
    if Xp is None:
        Xp = X
    if p is Policy.ASSUMED and not square:
        raise PolicyMisuseError("ASSUMED symmetrisation needs a square self-distance request")
    n, k = len(X), len(Xp)
    row_ids = list(row_ids) if row_ids is not None else [str(i) for i in range(n)]
    col_ids = list(col_ids) if col_ids is not None else (list(row_ids) if square else [str(j) for j in range(k)])
    if cache is None:
        cache = LengthCache()

    if square and p is not Policy.VANILLA:
        rows, cols = np.tril_indices(n, -1)
    elif square:
        rows, cols = np.nonzero(~np.eye(n, dtype=bool))
    else:
        rows, cols = np.indices((n, k)).reshape(2, -1)

    if m.kind is MetricKind.NCD:
        if cache.enabled:
            for s in list(X) + ([] if square else list(Xp)):
                compressed_length(s, m.compressor, cache)
        vals = _ncd_entries(X, Xp, rows, cols, m, p, cache, workers, shortcut)
    else:
        vals = _string_entries(X, Xp, rows, cols, m, workers)

    D = np.zeros((n, k), dtype=np.float64)
    D[rows, cols] = vals
    if square and p is not Policy.VANILLA:
        D[cols, rows] = vals
    elif square and not shortcut and m.kind is MetricKind.NCD:
        diag = np.arange(n)
        D[diag, diag] = _ncd_entries(X, Xp, diag, diag, m, p, cache, 1, False)
    meta = {"shortcut": shortcut, "cache": cache.enabled}
    return DistanceMatrix(D, row_ids, col_ids, m, p, meta)


def _ncd_entries(X, Xp, rows, cols, m, p, cache, workers, shortcut):
    average = p is Policy.AVERAGE
    enforce = p is Policy.ENFORCED
    bx = [as_bytes(s) for s in X]
    by = bx if Xp is X else [as_bytes(s) for s in Xp]

    def run(lo, hi):
        out = np.empty(hi - lo, dtype=np.float64)
        for t in range(lo, hi):
            x, y = bx[rows[t]], by[cols[t]]
            if enforce and y < x:
                x, y = y, x
            out[t - lo] = pair_distance(x, y, m, average, cache, shortcut)
        return out

    return _run_chunks(run, len(rows), workers)


def _string_entries(X, Xp, rows, cols, m, workers):
    xs = [str(s) for s in X]
    ys = xs if Xp is X else [str(s) for s in Xp]
    if m.kind is MetricKind.LEVENSHTEIN:
        return _run_chunks(lambda lo, hi: kernels.levenshtein_pairs(xs, ys, rows[lo:hi], cols[lo:hi]),
                           len(rows), workers)
    vals = _run_chunks(lambda lo, hi: kernels.hamming_pairs(xs, ys, rows[lo:hi], cols[lo:hi]),
                       len(rows), workers)
    if m.kind is MetricKind.HAMMING_RATIO:
        lx = np.array([len(s) for s in xs], dtype=np.float64)
        ly = lx if ys is xs else np.array([len(s) for s in ys], dtype=np.float64)
        longest = np.maximum(lx[rows], ly[cols])
        vals = np.divide(vals, longest, out=np.zeros_like(vals), where=longest > 0)
    return vals


def _run_chunks(fn, n, workers):
    parts = _chunks(n, workers)
    if workers <= 1 or len(parts) <= 1:
        return fn(0, n) if n else np.empty(0)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda b: fn(*b), parts))
    return np.concatenate(results)


# -- serialisation ---------------------------------------------------------

MAGIC = b"NCDM"
VERSION = 1
_HEADER = struct.Struct("<4sHII")


def write_csv(M, path, header_comment=None):
    """Header row ``id,<col ids>``, then one row per sample: id then values.

    An optional ``# ...`` provenance line precedes the header.
    """
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["id", *M.col_ids])
        for rid, row in zip(M.row_ids, M.values):
            w.writerow([rid, *(repr(float(v)) for v in row)])


def read_csv(path):
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            fh.seek(0)
        r = csv.reader(fh)
        header = next(r)
        row_ids, rows = [], []
        for line in r:
            row_ids.append(line[0])
            rows.append([float(v) for v in line[1:]])
    values = np.array(rows, dtype=np.float64).reshape(len(row_ids), len(header) - 1)
    return values, row_ids, header[1:]


def write_binary(M, path):
    """``NCDM`` magic, u16 version, u32 rows, u32 cols, row-major little-endian f64."""
    values = np.ascontiguousarray(M.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, values.shape[0], values.shape[1]))
        fh.write(values.tobytes(order="C"))


def read_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, n, k = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not an NCDM matrix file")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported NCDM version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * n * k:
        raise ValueError(f"{path}: truncated matrix body")
    return np.frombuffer(body, dtype="<f8").reshape(n, k).astype(np.float64)


def write_sidecar(M, path, extra=None):
    doc = {"row_ids": list(M.row_ids), "col_ids": list(M.col_ids), "provenance": M.provenance()}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)

"""Search a corpus for violations of the four metric axioms."""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .compression import CompressorHandle, LengthCache, as_bytes
from .distance import MetricSpec, MetricKind, Policy, distance_matrix, pair_distance

DEFAULT_TOL = 1e-12
WITNESS_CAP = 100

ALPHABET = "ABCJNGX"
# literal counterexamples, regardless of which compressor they were reported for
KNOWN_WITNESSES = (
    "A", "B", "G", "X", "J", "AN", "BC", "AA", "AAA", "AAAA", "BAA", "AAB", "AAAAAAA",
    "AABABAA", "BAABAAB", "CCCCBBCCC", "CBCCCBBCCC", "CAAAACAA", "CAC", "CCACCCACCC",
)


class Axiom(str, enum.Enum):
    ZERO = "zero"
    NON_NEGATIVITY = "non_negativity"
    SYMMETRY = "symmetry"
    TRIANGLE = "triangle"


@dataclass
class Witness:
    inputs: tuple
    values: tuple
    margin: float

    def to_dict(self):
        return {"inputs": list(self.inputs), "values": list(self.values), "margin": self.margin}


@dataclass
class AxiomReport:
    axiom: Axiom
    checked: int = 0
    violations: int = 0
    witnesses: list = field(default_factory=list)

    @property
    def violated(self) -> bool:
        return self.violations > 0

    def to_dict(self):
        return {
            "axiom": self.axiom.value,
            "checked": self.checked,
            "violations": self.violations,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


@dataclass
class AuditResult:
    metric: MetricSpec
    n_samples: int
    tol: float
    reports: dict

    def __getitem__(self, axiom):
        return self.reports[Axiom(axiom)]

    @property
    def all_violated(self) -> bool:
        return all(r.violated for r in self.reports.values())

    @property
    def total_violations(self) -> int:
        return sum(r.violations for r in self.reports.values())

    def to_dict(self):
        return {
            "metric": self.metric.to_dict(),
            "name": self.metric.name,
            "samples": self.n_samples,
            "tol": self.tol,
            "reports": [self.reports[a].to_dict() for a in Axiom],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _keep(heap, cap, item):
    heap.append(item)
    if len(heap) > 4 * cap:
        heap.sort(key=lambda w: w[0])
        del heap[cap:]


def audit(samples, metric: MetricSpec | str, tol: float = DEFAULT_TOL, cap: int = WITNESS_CAP,
          cache: LengthCache | None = None, workers: int = 1) -> AuditResult:
    """Check every pair and ordered triple of ``samples`` against the metric axioms.

    The zero-shortcut is off, so ``d(x, x)`` is measured as computed.  Witnesses
    are kept in descending order of margin, at most ``cap`` per axiom.
    """
    m = MetricSpec.parse(metric) if isinstance(metric, str) else metric
    samples = list(dict.fromkeys(samples))
    n = len(samples)
    if n == 0:
        raise ValueError("audit needs a non-empty corpus")
    D = distance_matrix(samples, None, m, Policy.VANILLA, cache, workers=workers, shortcut=False).values
    raw = [as_bytes(s) for s in samples]
    reports = {a: AxiomReport(a) for a in Axiom}

    # zero axiom: d(x,x) must be 0, d(x,y) must not be 0 for x != y
    rep = reports[Axiom.ZERO]
    rep.checked = n * n
    found = []
    for i in range(n):
        for j in range(n):
            d = D[i, j]
            if i == j and abs(d) > tol:
                found.append((-abs(d), (i, i), (d,), abs(d)))
            elif i != j and abs(d) <= tol and raw[i] != raw[j]:
                # identity of indiscernibles fails outright; margin is an indicator
                found.append((-1.0, (i, j), (d,), 1.0))
    _finish(rep, found, samples, cap)

    rep = reports[Axiom.NON_NEGATIVITY]
    rep.checked = n * n
    idx = np.argwhere(D < -tol)
    _finish(rep, [(D[i, j], (i, j), (D[i, j],), -D[i, j]) for i, j in idx], samples, cap)

    rep = reports[Axiom.SYMMETRY]
    rep.checked = n * (n - 1) // 2
    gap = np.abs(D - D.T)
    idx = np.argwhere(np.triu(gap > tol, 1))
    _finish(rep, [(-gap[i, j], (i, j), (D[i, j], D[j, i]), gap[i, j]) for i, j in idx], samples, cap)

    rep = reports[Axiom.TRIANGLE]
    rep.checked = n ** 3
    found, count = [], 0
    for j in range(n):
        # d(x_i, x_k) > d(x_i, x_j) + d(x_j, x_k)
        excess = D - (D[:, j][:, None] + D[j, :][None, :])
        hits = np.argwhere(excess > tol)
        count += len(hits)
        for i, k in hits:
            _keep(found, cap, (-excess[i, k], (i, j, k), (D[i, k], D[i, j], D[j, k]), excess[i, k]))
    _finish(rep, found, samples, cap, total=count)
    return AuditResult(m, n, tol, reports)


def _finish(rep, found, samples, cap, total=None):
    rep.violations = len(found) if total is None else total
    found.sort(key=lambda w: (w[0], w[1]))
    rep.witnesses = [
        Witness(tuple(samples[i] for i in ids), tuple(float(v) for v in vals), float(margin))
        for _, ids, vals, margin in found[:cap]
    ]


def recheck(witness: Witness, axiom: Axiom, metric: MetricSpec, tol: float = DEFAULT_TOL) -> bool:
    """Re-evaluate a witness with a fresh cache; True if it still violates ``axiom``."""
    cache = LengthCache()

    def d(a, b):
        return pair_distance(a, b, metric, cache=cache, shortcut=False)

    axiom = Axiom(axiom)
    ins = witness.inputs
    if axiom is Axiom.ZERO:
        x, y = ins
        v = d(x, y)
        return abs(v) > tol if as_bytes(x) == as_bytes(y) else abs(v) <= tol
    if axiom is Axiom.NON_NEGATIVITY:
        return d(*ins) < -tol
    if axiom is Axiom.SYMMETRY:
        x, y = ins
        return abs(d(x, y) - d(y, x)) > tol
    x, y, z = ins
    return d(x, z) > d(x, y) + d(y, z) + tol


def short_string_corpus(max_len: int = 10, size: int = 120, seed: int = 1) -> list:
    """Short strings over ``ABCJNGX``: every string of length <= 2, the literal
    counterexamples, then seeded low-entropy strings up to ``max_len`` characters
    until ``size`` strings are collected."""
    out = dict.fromkeys(KNOWN_WITNESSES)
    for length in (1, 2):
        for t in itertools.product(ALPHABET, repeat=length):
            out["".join(t)] = None
    rng = np.random.default_rng(seed)
    letters = np.array(list(ALPHABET))
    while len(out) < size:
        k = int(rng.integers(1, 4))
        alphabet = rng.choice(letters, size=k, replace=False)
        length = int(rng.integers(3, max_len + 1))
        out["".join(rng.choice(alphabet, size=length))] = None
    return list(out)[: max(size, len(KNOWN_WITNESSES))]


@dataclass
class SuiteResult:
    compressor: CompressorHandle
    result: AuditResult

    @property
    def passed(self) -> bool:
        return self.result.all_violated

    def to_dict(self):
        return {"compressor": str(self.compressor), "all_axioms_violated": self.passed,
                **self.result.to_dict()}


def axiom_suite(c: CompressorHandle | str, size: int = 120, tol: float = DEFAULT_TOL,
                 workers: int = 1) -> SuiteResult:
    """Audit NCD under compressor ``c`` on :func:`short_string_corpus`."""
    c = CompressorHandle.parse(c) if isinstance(c, str) else c
    res = audit(short_string_corpus(size=size), MetricSpec(MetricKind.NCD, c), tol, workers=workers)
    return SuiteResult(c, res)

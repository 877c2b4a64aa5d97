"""Timing and compressor-call accounting for distance-matrix construction."""

from __future__ import annotations

import csv
import os
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .compression import LengthCache
from .distance import MetricSpec, Policy, distance_matrix


@dataclass
class BenchRow:
    metric: str
    policy: str
    n: int
    cache: bool
    workers: int
    seconds: float
    per_sample_s: float
    single_calls: int
    concat_calls: int
    total_calls: int


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def get(self, metric, policy, cache=True):
        for r in self.rows:
            if r.metric == metric and r.policy == policy and r.cache == cache:
                return r
        raise KeyError((metric, policy, cache))

    def to_dict(self):
        return {"environment": self.environment, "rows": [asdict(r) for r in self.rows]}

    def to_csv(self, path, header_comment=None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.DictWriter(fh, fieldnames=list(BenchRow.__dataclass_fields__))
            w.writeheader()
            for r in self.rows:
                w.writerow(asdict(r))


def cpu_model() -> str:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def environment(workers: int = 1) -> dict:
    return {
        "cpu": cpu_model(),
        "cpus": os.cpu_count(),
        "workers": workers,
        "python": platform.python_version(),
        "kernel_backend": _backend.BACKEND,
    }


def time_matrix(samples, metric, policy, cache_enabled=True, workers=1) -> BenchRow:
    m = MetricSpec.parse(metric) if isinstance(metric, str) else metric
    cache = LengthCache(enabled=cache_enabled)
    t0 = time.perf_counter()
    distance_matrix(samples, None, m, policy, cache, workers=workers)
    dt = time.perf_counter() - t0
    c = cache.counters()
    n = len(samples)
    return BenchRow(m.name, Policy(policy).value, n, cache_enabled, workers, dt, dt / n,
                    c["single_calls"], c["concat_calls"], c["compressor_calls"])


def run_bench(samples, metrics=("ncd_gzip",), policies=tuple(Policy), n: int | None = None,
              cache: bool = True, workers: int = 1, warmup: int = 10) -> BenchReport:
    """Time self-matrix construction for every metric x policy on ``n`` samples.

    A small untimed warm-up matrix precedes each metric.
    """
    samples = list(samples)[: n or None]
    report = BenchReport(environment=environment(workers))
    for metric in metrics:
        if warmup:
            distance_matrix(samples[:warmup], None, metric, Policy.VANILLA, LengthCache())
        for policy in policies:
            report.rows.append(time_matrix(samples, metric, policy, cache, workers))
    return report


def compare_backends(samples, n: int = 60, svc_n: int = 200, seed: int = 0) -> list:
    """Wall-clock of each hot kernel under every importable backend.

    Also checks the backends agree exactly; returns one row per kernel and backend.
    """
    samples = [str(s) for s in samples][:n]
    rows_idx, cols_idx = np.tril_indices(len(samples), -1)
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(svc_n, 4))
    K = np.exp(-((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1) / 4.0)
    y = np.where(pts[:, 0] + 0.3 * rng.normal(size=svc_n) > 0, 1.0, -1.0)
    Q = (y[:, None] * y[None, :]) * K

    jobs = {
        "levenshtein_pairs": lambda k: k.levenshtein_pairs(samples, samples, rows_idx, cols_idx),
        "hamming_pairs": lambda k: k.hamming_pairs(samples, samples, rows_idx, cols_idx),
        "smo": lambda k: k.smo(Q, y, 1.0, 1e-3, 100 * svc_n)[0],
    }
    out = []
    backends = _backend.available()
    for name, job in jobs.items():
        results = {}
        for bname, mod in backends.items():
            t0 = time.perf_counter()
            results[bname] = job(mod)
            dt = time.perf_counter() - t0
            out.append({"kernel": name, "backend": bname, "seconds": dt, "items": len(rows_idx)
                        if name != "smo" else svc_n})
        ref = results["python"]
        for bname, res in results.items():
            if not np.array_equal(res, ref):
                raise AssertionError(f"{name}: backend {bname} disagrees with the python kernels")
    base = {r["kernel"]: r["seconds"] for r in out if r["backend"] == "python"}
    for r in out:
        r["speedup_vs_python"] = base[r["kernel"]] / r["seconds"] if r["seconds"] > 0 else float("inf")
    return out

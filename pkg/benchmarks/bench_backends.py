#!/usr/bin/env python3
"""Compiled vs pure-Python kernels, plus the per-policy matrix timings.

    python benchmarks/bench_backends.py [--n 60] [--svc-n 200] [--matrix-n 200] [--csv out.csv]

The backends must agree exactly; the script aborts if they do not.
"""

import argparse
import csv
import sys

from ncdkit import _backend
from ncdkit.bench import compare_backends, environment, run_bench
from ncdkit.data import load_sms_fixture
from ncdkit.distance import Policy


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60, help="strings for the pairwise string kernels")
    ap.add_argument("--svc-n", type=int, default=200, help="points for the SMO solve")
    ap.add_argument("--matrix-n", type=int, default=200, help="samples for the NCD matrix timings")
    ap.add_argument("--csv", help="write the backend rows here")
    args = ap.parse_args(argv)

    if "cython" not in _backend.available():
        print("compiled extension not built; only the python backend is timed", file=sys.stderr)
    samples = list(load_sms_fixture().samples)
    env = environment()
    print(f"cpu: {env['cpu']} ({env['cpus']} cores), python {env['python']}")

    rows = compare_backends(samples, n=args.n, svc_n=args.svc_n)
    print(f"\n{'kernel':18s} {'backend':8s} {'items':>7s} {'seconds':>10s} {'speedup':>8s}")
    for r in rows:
        print(f"{r['kernel']:18s} {r['backend']:8s} {r['items']:7d} {r['seconds']:10.4f} "
              f"{r['speedup_vs_python']:8.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    rep = run_bench(samples, ["ncd_gzip", "levenshtein"], list(Policy), n=args.matrix_n)
    print(f"\n{'metric':12s} {'policy':9s} {'ms/sample':>10s} {'calls':>7s}")
    for r in rep.rows:
        print(f"{r.metric:12s} {r.policy:9s} {1e3 * r.per_sample_s:10.3f} {r.total_calls:7d}")


if __name__ == "__main__":
    main()

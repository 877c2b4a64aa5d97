import random

import numpy as np
import pytest

from ncdkit.data import LabeledCorpus

# criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][1:])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def random_strings(n, seed=0, alphabet="ABCDEFGHIJ abcdefghij0123", lo=0, hi=40):
    rng = random.Random(seed)
    return ["".join(rng.choice(alphabet) for _ in range(rng.randint(lo, hi))) for _ in range(n)]


@pytest.fixture
def strings():
    return random_strings(30, seed=7, lo=1)


@pytest.fixture
def toy_corpus():
    """Two well separated classes of short strings, 60 samples."""
    rng = random.Random(3)
    pairs = []
    for i in range(60):
        if i % 2:
            s = "win cash now " + "".join(rng.choice("0123456789") for _ in range(6))
            pairs.append((s, 1))
        else:
            s = "see you at " + rng.choice(["home", "work", "the pub", "uni"]) + " " + str(rng.randint(1, 12))
            pairs.append((s, 0))
    return LabeledCorpus.from_pairs(pairs)


def psd_instance(n, seed, d=3, scale=2.0):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, d))
    sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    return pts, np.exp(-sq / scale)

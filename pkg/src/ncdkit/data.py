"""Corpora of (string, label) samples: loading, balancing and splitting."""

from __future__ import annotations

import copy
import csv
import json
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed input data; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


_INT = re.compile(r"[+-]?\d+\Z")
_FLOAT = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?\Z")


def parse_field(text: str):
    """Interpret a raw CSV cell the way a naive numeric reader would."""
    s = text.strip()
    if s == "":
        return math.nan
    if _INT.match(s):
        return int(s)
    if _FLOAT.match(s):
        return float(s)
    return text


def render_value(v) -> str:
    if isinstance(v, bool):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.integer, np.floating)):
        return render_value(v.item())
    if v is None:
        return "None"
    # quotes inside text are kept verbatim
    return "'" + str(v) + "'"


def row_to_string(record) -> str:
    """Render a record as a bracketed list: ``[1, 2.5, 'tcp']``."""
    return "[" + ", ".join(render_value(v) for v in record) + "]"


@dataclass(frozen=True)
class LabeledCorpus:
    samples: tuple
    labels: tuple
    ids: tuple
    split: tuple | None = None  # "train" / "test" per sample
    folds: tuple | None = None  # fold index for train samples, -1 for test
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("samples", "labels", "ids", "split", "folds"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, tuple):
                object.__setattr__(self, name, tuple(v))
        n = len(self.samples)
        if len(self.labels) != n or len(self.ids) != n:
            raise DataError("samples, labels and ids must have equal length")
        if len(set(self.ids)) != n:
            raise DataError("sample ids must be unique")
        for name in ("split", "folds"):
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise DataError(f"{name} must have one entry per sample")

    def __len__(self):
        return len(self.samples)

    @classmethod
    def from_pairs(cls, pairs, ids=None, provenance=None):
        pairs = list(pairs)
        ids = ids if ids is not None else [f"s{i}" for i in range(len(pairs))]
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), tuple(ids),
                   provenance=provenance or {})

    @property
    def classes(self) -> list:
        return sorted(set(self.labels))

    def class_counts(self, indices=None) -> dict:
        labels = self.labels if indices is None else [self.labels[i] for i in indices]
        return {c: labels.count(c) for c in sorted(set(labels))}

    def indices(self, part: str) -> np.ndarray:
        if self.split is None:
            raise DataError("corpus has no train/test split")
        return np.array([i for i, s in enumerate(self.split) if s == part], dtype=np.int64)

    def train_indices(self):
        return self.indices("train")

    def test_indices(self):
        return self.indices("test")

    def subset(self, indices) -> "LabeledCorpus":
        idx = [int(i) for i in indices]
        pick = lambda seq: None if seq is None else tuple(seq[i] for i in idx)  # noqa: E731
        return LabeledCorpus(pick(self.samples), pick(self.labels), pick(self.ids),
                             pick(self.split), pick(self.folds), dict(self.provenance))

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for k in range(len(self)):
                row = {"id": self.ids[k], "label": self.labels[k], "string": self.samples[k]}
                if self.split is not None:
                    row["split"] = self.split[k]
                if self.folds is not None:
                    row["fold"] = self.folds[k]
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        rows = [json.loads(line) for line in open(path) if line.strip()]
        split = tuple(r["split"] for r in rows) if rows and "split" in rows[0] else None
        folds = tuple(r["fold"] for r in rows) if rows and "fold" in rows[0] else None
        return cls(tuple(r["string"] for r in rows), tuple(r["label"] for r in rows),
                   tuple(r["id"] for r in rows), split, folds, {"source": str(path)})


def _binary_classes(corpus):
    classes = corpus.classes
    if len(classes) != 2:
        raise DataError(f"expected two classes, found {len(classes)}")
    return classes


def undersample(corpus: LabeledCorpus, seed: int = 42) -> LabeledCorpus:
    """Drop random majority-class samples until both classes have equal counts."""
    classes = _binary_classes(corpus)
    by_class = {c: [i for i, l in enumerate(corpus.labels) if l == c] for c in classes}
    target = min(len(v) for v in by_class.values())
    if target == 0:
        raise DataError("cannot undersample: a class has no samples")
    rng = np.random.default_rng(seed)
    keep = []
    for c in classes:
        idx = by_class[c]
        if len(idx) > target:
            idx = rng.choice(idx, size=target, replace=False).tolist()
        keep.extend(idx)
    out = corpus.subset(sorted(keep))
    prov = copy.deepcopy(corpus.provenance)
    prov.setdefault("recipe", []).append({"step": "undersample", "seed": seed})
    return replace(out, provenance=prov)


def _allocate(counts: dict, total: int) -> dict:
    """Split ``total`` across classes proportionally (largest remainder)."""
    n = sum(counts.values())
    exact = {c: total * k / n for c, k in counts.items()}
    out = {c: int(math.floor(v)) for c, v in exact.items()}
    rest = total - sum(out.values())
    for c in sorted(counts, key=lambda c: (-(exact[c] - out[c]), str(c)))[:rest]:
        out[c] += 1
    return out


def assign_folds(labels, folds: int, seed: int) -> np.ndarray:
    """Stratified fold index per sample; per-class fold counts differ by at most one."""
    labels = list(labels)
    counts = {c: labels.count(c) for c in sorted(set(labels))}
    if folds < 2:
        raise DataError("need at least two folds")
    if any(k < folds for k in counts.values()):
        raise DataError(f"{folds} folds exceed the smallest class count {min(counts.values())}")
    rng = np.random.default_rng(seed)
    out = np.full(len(labels), -1, dtype=np.int64)
    offset = 0
    for c in counts:
        idx = np.array([i for i, l in enumerate(labels) if l == c])
        rng.shuffle(idx)
        # rotate the start so class remainders do not pile onto fold 0
        out[idx] = (np.arange(len(idx)) + offset) % folds
        offset = (offset + len(idx)) % folds
    return out


def make_splits(corpus: LabeledCorpus, test_size: int = 200, folds: int = 5, seed: int = 42,
                train_size: int | None = None) -> LabeledCorpus:
    """Withhold a stratified test split and assign stratified CV folds to the rest.

    ``train_size`` optionally caps the training split (stratified); samples
    beyond it are dropped from the returned corpus.
    """
    n = len(corpus)
    if not 0 < test_size < n:
        raise DataError(f"test_size must be in (0, {n}), got {test_size}")
    counts = corpus.class_counts()
    test_alloc = _allocate(counts, test_size)
    rng = np.random.default_rng(seed)
    split = np.array(["train"] * n, dtype=object)
    keep = np.ones(n, dtype=bool)
    for c in counts:
        idx = np.array([i for i, l in enumerate(corpus.labels) if l == c])
        if test_alloc[c] >= len(idx):
            raise DataError(f"stratification infeasible for class {c!r}")
        chosen = rng.choice(idx, size=test_alloc[c], replace=False)
        split[chosen] = "test"
    if train_size is not None:
        train_idx = np.flatnonzero(split == "train")
        if train_size > len(train_idx):
            raise DataError(f"train_size {train_size} exceeds the {len(train_idx)} available samples")
        train_counts = {c: sum(1 for i in train_idx if corpus.labels[i] == c) for c in counts}
        alloc = _allocate(train_counts, train_size)
        for c in counts:
            idx = np.array([i for i in train_idx if corpus.labels[i] == c])
            chosen = set(rng.choice(idx, size=alloc[c], replace=False).tolist())
            for i in idx:
                if i not in chosen:
                    keep[i] = False
    train_idx = [i for i in range(n) if split[i] == "train" and keep[i]]
    fold_of = assign_folds([corpus.labels[i] for i in train_idx], folds, seed + 1)
    fold = np.full(n, -1, dtype=np.int64)
    fold[train_idx] = fold_of
    out = LabeledCorpus(corpus.samples, corpus.labels, corpus.ids, tuple(split.tolist()),
                        tuple(int(f) for f in fold), copy.deepcopy(corpus.provenance))
    out.provenance.setdefault("recipe", []).append(
        {"step": "make_splits", "test_size": test_size, "folds": folds, "seed": seed,
         "train_size": train_size})
    if not keep.all():
        out = out.subset(np.flatnonzero(keep))
    return out


def _map_label(raw, label_map, path, line):
    key = raw.strip()
    if key == "":
        raise DataError("missing label", path, line)
    if label_map is None:
        return key
    if key not in label_map:
        raise DataError(f"unmappable label {key!r}", path, line)
    return label_map[key]


def load_csv(path, label_column, feature_columns=None, label_map=None, id_column=None,
             delimiter=",") -> LabeledCorpus:
    """Load a headed CSV; each row's feature cells are rendered by :func:`row_to_string`."""
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path)
    samples, labels, ids = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file", path) from None
        if label_column not in header:
            raise DataError(f"missing label column {label_column!r}", path, 1)
        features = list(feature_columns) if feature_columns else [
            h for h in header if h not in (label_column, id_column)]
        missing = [f for f in features if f not in header]
        if missing:
            raise DataError(f"missing feature columns {missing}", path, 1)
        pos = {h: k for k, h in enumerate(header)}
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(row)}", path, line)
            labels.append(_map_label(row[pos[label_column]], label_map, path, line))
            samples.append(row_to_string([parse_field(row[pos[f]]) for f in features]))
            ids.append(row[pos[id_column]] if id_column else f"r{line}")
    return LabeledCorpus(tuple(samples), tuple(labels), tuple(ids),
                         provenance={"source": str(path), "format": "csv",
                                     "label_column": label_column, "features": features})


def load_text(path, fmt: str = "tsv", label_map=None, label_field: int = 0, text_field: int = 1,
              header: bool = False) -> LabeledCorpus:
    """Load (label, message) records verbatim from TSV/CSV or JSON-lines.

    For ``fmt="jsonl"`` the fields are the ``label`` and ``text`` keys.
    """
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path)
    samples, labels, ids = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "jsonl":
            for line, raw in enumerate(fh, 1):
                if not raw.strip():
                    continue
                try:
                    rec = json.loads(raw)
                    text = rec["text"]
                    lab = str(rec.get("label", ""))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise DataError(f"bad record: {exc}", path, line) from None
                labels.append(_map_label(lab, label_map, path, line))
                samples.append(text)
                ids.append(str(rec.get("id", f"m{line}")))
        elif fmt in ("tsv", "csv"):
            delim = "\t" if fmt == "tsv" else ","
            reader = csv.reader(fh, delimiter=delim, quoting=csv.QUOTE_NONE if fmt == "tsv" else csv.QUOTE_MINIMAL)
            if header:
                next(reader, None)
            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) <= max(label_field, text_field):
                    raise DataError("missing label or text field", path, line)
                labels.append(_map_label(row[label_field], label_map, path, line))
                # a TSV message may itself contain tabs
                text = delim.join(row[text_field:]) if text_field > label_field else row[text_field]
                samples.append(text)
                ids.append(f"m{line}")
        else:
            raise DataError(f"unknown text format {fmt!r}", path)
    return LabeledCorpus(tuple(samples), tuple(labels), tuple(ids),
                         provenance={"source": str(path), "format": fmt})


SMS_LABELS = {"ham": 0, "spam": 1}


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("ncdkit") / "data" / name))


def load_sms_fixture() -> LabeledCorpus:
    """The bundled SMS-spam-style fixture (``label<TAB>message``, ham=0, spam=1)."""
    return load_text(fixture_path("sms_spam_fixture.tsv"), "tsv", SMS_LABELS)

import math
from pathlib import Path

import pytest

from ncdkit.data import (
    DataError,
    LabeledCorpus,
    assign_folds,
    load_csv,
    load_sms_fixture,
    load_text,
    make_splits,
    parse_field,
    row_to_string,
    undersample,
)

HERE = Path(__file__).parent / "data"


@pytest.mark.parametrize("record,text", [
    ([1, 2.5, "tcp"], "[1, 2.5, 'tcp']"),
    ([], "[]"),
    (["a"], "['a']"),
    ([0.1, 1e-07, -3], "[0.1, 1e-07, -3]"),
    (["it's"], "['it's']"),
    ([math.nan], "[nan]"),
])
def test_row_to_string(record, text):
    assert row_to_string(record) == text


def test_parse_field():
    assert parse_field("42") == 42 and isinstance(parse_field("42"), int)
    assert parse_field("2.50") == 2.5
    assert parse_field(" tcp") == " tcp"
    assert math.isnan(parse_field(""))


def test_row_to_string_injective_without_quotes():
    recs = [[1, "1"], ["1", 1], [1.0, 1], [1, 1], ["a, b"], ["a", "b"]]
    assert len({row_to_string(r) for r in recs}) == len(recs)


def corpus(n_a, n_b):
    pairs = [(f"a{i}", "a") for i in range(n_a)] + [(f"b{i}", "b") for i in range(n_b)]
    return LabeledCorpus.from_pairs(pairs)


def test_undersample():
    c = corpus(90, 10)
    out = undersample(c, seed=3)
    assert out.class_counts() == {"a": 10, "b": 10}
    pos = [c.ids.index(i) for i in out.ids]
    assert pos == sorted(pos)
    assert set(out.ids) == set(undersample(c, seed=3).ids)
    assert set(out.ids) != set(undersample(c, seed=4).ids)
    assert out.provenance["recipe"][-1] == {"step": "undersample", "seed": 3}
    assert "recipe" not in c.provenance


def test_undersample_balanced_is_identity():
    c = corpus(5, 5)
    assert undersample(c) == c


def test_undersample_errors():
    with pytest.raises(DataError):
        undersample(corpus(5, 0))
    with pytest.raises(DataError):
        undersample(LabeledCorpus.from_pairs([("x", 0), ("y", 1), ("z", 2)]))


def test_make_splits_arithmetic():
    c = make_splits(corpus(600, 600), test_size=200, folds=5, seed=1)
    te, tr = c.test_indices(), c.train_indices()
    assert len(te) == 200 and len(tr) == 1000
    assert c.class_counts(te) == {"a": 100, "b": 100}
    folds = [c.folds[i] for i in tr]
    assert all(folds.count(f) == 200 for f in range(5))
    assert all(c.folds[i] == -1 for i in te)
    for f in range(5):
        members = [i for i in tr if c.folds[i] == f]
        assert abs(c.class_counts(members)["a"] - 100) <= 1


def test_make_splits_stratified_unbalanced():
    c = make_splits(corpus(70, 33), test_size=20, folds=3, seed=2)
    te = c.test_indices()
    assert c.class_counts(te) == {"a": 14, "b": 6}
    tr = c.train_indices()
    ratio = 56 / 27
    for f in range(3):
        cnt = c.class_counts([i for i in tr if c.folds[i] == f])
        assert abs(cnt["a"] - cnt["b"] * ratio) <= 1 + ratio


def test_make_splits_train_size_and_determinism():
    c = make_splits(corpus(400, 400), test_size=200, train_size=500, seed=7)
    assert len(c.train_indices()) == 500 and len(c) == 700
    assert c == make_splits(corpus(400, 400), test_size=200, train_size=500, seed=7)
    with pytest.raises(DataError):
        make_splits(corpus(400, 400), test_size=200, train_size=700)


@pytest.mark.parametrize("size", [0, 20, 25])
def test_make_splits_errors(size):
    with pytest.raises(DataError):
        make_splits(corpus(20, 5), test_size=size)


def test_assign_folds_needs_members():
    with pytest.raises(DataError):
        assign_folds(["a"] * 10 + ["b"] * 2, 3, 0)


def test_corpus_validation():
    with pytest.raises(DataError):
        LabeledCorpus(("a", "b"), (0,), ("x", "y"))
    with pytest.raises(DataError):
        LabeledCorpus(("a", "b"), (0, 1), ("x", "x"))


def test_jsonl_round_trip(tmp_path):
    c = make_splits(corpus(20, 20), test_size=10, folds=3)
    c.to_jsonl(tmp_path / "c.jsonl")
    assert LabeledCorpus.from_jsonl(tmp_path / "c.jsonl") == c


def test_load_csv():
    c = load_csv(HERE / "records.csv", "label", id_column="id", label_map={"normal": 0, "attack": 1})
    assert c.samples == ("[0, 'tcp', 491]", "[2.5, 'udp', 146]", "[nan, 'icmp', 0]")
    assert c.labels == (0, 1, 0) and c.ids == ("a1", "a2", "a3")
    c2 = load_csv(HERE / "records.csv", "label", feature_columns=["protocol"])
    assert c2.samples[0] == "['tcp']" and c2.labels[1] == "attack"


@pytest.mark.parametrize("body,line", [
    ("a,label\n1,x\n2\n", 3),
    ("a,label\n1,x\n2,\n", 3),
    ("a,label\n1,x\n2,y\n", 3),
])
def test_load_csv_errors_carry_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DataError) as exc:
        load_csv(p, "label", label_map={"x": 0})
    assert exc.value.line == line and f":{line}:" in str(exc.value)


def test_load_csv_missing_column(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        load_csv(p, "label")
    with pytest.raises(DataError):
        load_csv(p, "a", feature_columns=["z"])
    with pytest.raises(DataError):
        load_csv(tmp_path / "none.csv", "a")


def test_load_text_tsv():
    c = load_text(HERE / "sms.tsv", "tsv", {"ham": 0, "spam": 1})
    assert c.labels == (0, 1, 0)
    assert c.samples[1] == "WIN a FREE prize! txt WIN to 80082"
    assert c.samples[2] == "call me later\tpls"


def test_load_text_errors(tmp_path):
    p = tmp_path / "s.tsv"
    p.write_text("ham\thi\nspamm\tx\n")
    with pytest.raises(DataError) as exc:
        load_text(p, "tsv", {"ham": 0, "spam": 1})
    assert exc.value.line == 2
    p.write_text("ham\thi\n\tno label\n")
    with pytest.raises(DataError) as exc:
        load_text(p, "tsv")
    assert exc.value.line == 2


def test_load_text_jsonl(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text('{"id": "q", "label": "spam", "text": "hi"}\n\n{"label": "ham", "text": "yo"}\nnot json\n')
    with pytest.raises(DataError) as exc:
        load_text(p, "jsonl", {"ham": 0, "spam": 1})
    assert exc.value.line == 4
    p.write_text('{"id": "q", "label": "spam", "text": "hi"}\n{"label": "ham", "text": "yo"}\n')
    c = load_text(p, "jsonl", {"ham": 0, "spam": 1})
    assert c.ids == ("q", "m2") and c.labels == (1, 0)


def test_bundled_fixture():
    c = load_sms_fixture()
    assert len(c) == 1000 and set(c.labels) == {0, 1}
    assert c.class_counts()[0] > c.class_counts()[1]

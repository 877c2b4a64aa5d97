import gzip
import os
import random
import threading

import pytest

from ncdkit.compression import (
    CompressorError,
    CompressorHandle,
    Kind,
    LengthCache,
    compressed_length,
    concat_length,
)

GZ = CompressorHandle(Kind.GZIP)
ALL = [CompressorHandle(k) for k in Kind]


def test_pinned_levels():
    assert [c.level for c in ALL] == [9, 9, 11]
    assert GZ.name == "gzip" and str(GZ) == "gzip:9"
    assert CompressorHandle.parse("bz2:4") == CompressorHandle(Kind.BZ2, 4)
    assert CompressorHandle.parse("brotli") == CompressorHandle(Kind.BROTLI, 11)


@pytest.mark.parametrize("kind,level", [("gzip", 10), ("gzip", -1), ("bz2", 0), ("brotli", 12)])
def test_bad_level_is_a_compressor_error(kind, level):
    with pytest.raises(CompressorError) as exc:
        CompressorHandle(kind, level)
    assert exc.value.kind == kind and exc.value.level == level


def test_unknown_kind():
    with pytest.raises(CompressorError):
        CompressorHandle("lzma")


def test_gzip_level_zero_stores():
    assert compressed_length(b"abc", CompressorHandle(Kind.GZIP, 0)) > 0


def test_empty_gzip_golden_length():
    # 10 byte header + 2 byte empty deflate block + 8 byte trailer
    assert compressed_length(b"", GZ) == 20


def test_gzip_matches_stdlib_container():
    for s in (b"", b"A", b"hello world" * 20):
        assert compressed_length(s, GZ) == len(gzip.compress(s, 9, mtime=0))


@pytest.mark.parametrize("c", ALL, ids=lambda c: c.name)
def test_empty_input_positive(c):
    assert compressed_length(b"", c) > 0


@pytest.mark.parametrize("c", ALL, ids=lambda c: c.name)
def test_redundancy_compresses_better(c):
    rnd = random.Random(0).randbytes(1000)
    assert compressed_length(b"A" * 1000, c) < compressed_length(rnd, c)


def test_determinism_over_random_inputs():
    rng = random.Random(11)
    blobs = [rng.randbytes(rng.randint(0, 200)) for _ in range(1000)]
    for c in ALL:
        first = [compressed_length(b, c) for b in blobs]
        assert first == [compressed_length(b, c) for b in blobs]


def test_cache_hit_leaves_call_count():
    cache = LengthCache()
    a = compressed_length("hello", GZ, cache)
    before = cache.counters()
    b = compressed_length("hello", GZ, cache)
    after = cache.counters()
    assert a == b
    assert after["hits"] == before["hits"] + 1
    assert after["compressor_calls"] == before["compressor_calls"] == 1


def test_cache_transparent_and_keyed_by_backend():
    cache = LengthCache()
    data = "the quick brown fox " * 5
    vals = [compressed_length(data, c, cache) for c in ALL]
    assert vals == [compressed_length(data, c) for c in ALL]
    assert cache.total_compressor_calls == 3
    assert compressed_length(data, CompressorHandle(Kind.GZIP, 1), cache) == compressed_length(
        data, CompressorHandle(Kind.GZIP, 1))
    assert cache.total_compressor_calls == 4


def test_disabled_cache_always_compresses():
    cache = LengthCache(enabled=False)
    for _ in range(3):
        compressed_length("x", GZ, cache)
    c = cache.counters()
    assert c["compressor_calls"] == 3 and c["hits"] == 0 and len(cache) == 0


def test_strings_are_utf8():
    assert compressed_length("é", GZ) == compressed_length("é".encode(), GZ)


def test_concat_definitions():
    for c in ALL:
        assert concat_length("AB", "CD", c) == compressed_length("ABCD", c)
        assert concat_length("hello", "", c) == compressed_length("hello", c)
    cache = LengthCache()
    concat_length("a", "b", cache=cache, c=GZ)
    assert cache.counters()["concat_calls"] == 1


def test_concat_order_matters_somewhere():
    rng = random.Random(5)
    words = ["".join(rng.choice("ABC") for _ in range(rng.randint(1, 8))) for _ in range(40)]
    assert any(concat_length(x, y, GZ) != concat_length(y, x, GZ) for x in words for y in words)


def test_cache_thread_safety():
    cache = LengthCache()
    data = [os.urandom(50) for _ in range(64)]
    expected = [compressed_length(d, GZ) for d in data]
    results = {}

    def work(t):
        results[t] = [compressed_length(d, GZ, cache) for d in data]

    threads = [threading.Thread(target=work, args=(t,)) for t in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert all(r == expected for r in results.values())
    c = cache.counters()
    assert c["lookups"] == 8 * 64
    assert c["hits"] + c["misses"] == c["lookups"]

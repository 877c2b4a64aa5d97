"""Compressor backends and a content-addressed cache of compressed lengths."""

from __future__ import annotations

import bz2
import enum
import hashlib
import threading
import zlib
from dataclasses import dataclass, field

import brotli


class CompressorError(RuntimeError):
    """A backend refused its parameters or failed to compress."""

    def __init__(self, kind, level, message):
        super().__init__(f"{kind}@{level}: {message}")
        self.kind = kind
        self.level = level


class Kind(str, enum.Enum):
    GZIP = "gzip"
    BZ2 = "bz2"
    BROTLI = "brotli"


DEFAULT_LEVELS = {Kind.GZIP: 9, Kind.BZ2: 9, Kind.BROTLI: 11}
_LEVEL_RANGES = {Kind.GZIP: (0, 9), Kind.BZ2: (1, 9), Kind.BROTLI: (0, 11)}


def _gzip(data: bytes, level: int) -> bytes:
    # wbits=31 emits an RFC 1952 container (10 byte header, mtime 0, 8 byte trailer)
    c = zlib.compressobj(level, zlib.DEFLATED, 31)
    return c.compress(data) + c.flush()


def _bz2(data: bytes, level: int) -> bytes:
    return bz2.compress(data, level)


def _brotli(data: bytes, level: int) -> bytes:
    return brotli.compress(data, quality=level)


_BACKENDS = {Kind.GZIP: _gzip, Kind.BZ2: _bz2, Kind.BROTLI: _brotli}


@dataclass(frozen=True)
class CompressorHandle:
    """A compression backend pinned to one quality level.

    ``level=None`` selects the pinned default for the kind (gzip 9, bz2 9,
    brotli 11).
    """

    kind: Kind
    level: int | None = None

    def __post_init__(self):
        try:
            kind = Kind(self.kind)
        except ValueError:
            raise CompressorError(self.kind, self.level, "unknown compressor") from None
        object.__setattr__(self, "kind", kind)
        if self.level is None:
            object.__setattr__(self, "level", DEFAULT_LEVELS[kind])
        lo, hi = _LEVEL_RANGES[kind]
        if not isinstance(self.level, int) or not lo <= self.level <= hi:
            raise CompressorError(kind.value, self.level, f"level must be an integer in [{lo}, {hi}]")

    @classmethod
    def parse(cls, text: str) -> "CompressorHandle":
        """Build a handle from ``"gzip"`` or ``"gzip:6"``."""
        name, _, level = text.partition(":")
        return cls(Kind(name.strip().lower()), int(level) if level else None)

    @property
    def name(self) -> str:
        return self.kind.value

    def __str__(self):
        return f"{self.kind.value}:{self.level}"

    def compress(self, data: bytes) -> bytes:
        try:
            return _BACKENDS[self.kind](data, self.level)
        except Exception as exc:  # backend-specific error types
            raise CompressorError(self.kind.value, self.level, str(exc)) from exc


def as_bytes(x) -> bytes:
    if isinstance(x, (bytes, bytearray, memoryview)):
        return bytes(x)
    return x.encode("utf-8")


@dataclass
class LengthCache:
    """Thread-safe store of compressed lengths keyed by content digest.

    With ``enabled=False`` every lookup compresses, which makes the counters
    usable for cost accounting of uncached workloads.  Counters only grow.
    ``calls_by_role`` splits compressor invocations into ``"single"`` and
    ``"concat"`` lookups.
    """

    enabled: bool = True
    entries: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0
    lookups: int = 0
    compressor_calls: int = 0
    calls_by_role: dict = field(default_factory=lambda: {"single": 0, "concat": 0})

    def __post_init__(self):
        self._lock = threading.Lock()

    @staticmethod
    def key(data: bytes, c: CompressorHandle):
        return (c.kind.value, c.level, hashlib.blake2b(data, digest_size=20).digest())

    def length(self, data: bytes, c: CompressorHandle, role: str = "single") -> int:
        key = self.key(data, c) if self.enabled else None
        if key is not None:
            with self._lock:
                self.lookups += 1
                n = self.entries.get(key)
                if n is not None:
                    self.hits += 1
                    return n
                self.misses += 1
        else:
            with self._lock:
                self.lookups += 1
        # compress outside the lock; duplicate concurrent misses store the same value
        n = len(c.compress(data))
        with self._lock:
            self.compressor_calls += 1
            self.calls_by_role[role] += 1
            if key is not None:
                self.entries[key] = n
        return n

    @property
    def total_compressor_calls(self) -> int:
        return self.compressor_calls

    def counters(self) -> dict:
        with self._lock:
            return {
                "lookups": self.lookups,
                "hits": self.hits,
                "misses": self.misses,
                "compressor_calls": self.compressor_calls,
                "single_calls": self.calls_by_role["single"],
                "concat_calls": self.calls_by_role["concat"],
            }

    def __len__(self):
        return len(self.entries)


def compressed_length(data, c: CompressorHandle, cache: LengthCache | None = None) -> int:
    """Byte length of ``data`` compressed with ``c``; strings are UTF-8 encoded."""
    data = as_bytes(data)
    if cache is None:
        return len(c.compress(data))
    return cache.length(data, c)


def concat_length(x, y, c: CompressorHandle, cache: LengthCache | None = None) -> int:
    """Compressed length of ``x`` immediately followed by ``y`` (no separator)."""
    data = as_bytes(x) + as_bytes(y)
    if cache is None:
        return len(c.compress(data))
    return cache.length(data, c, role="concat")

"""On-disk store for operator matrices.

One file per key ``(alpha, N, levels)``.  Layout, all little-endian::

    magic      4s   b"FSOP"
    version    u4
    kind       u4   0 = operator matrix, 1 = coefficient vector
    alpha      f8   IEEE-754 double, stored bit-exactly
    N          u4
    n_levels   u4
    levels     u4 * n_levels
    checksum   32s  sha256 of the payload
    payload         complex128, row-major

Files are written to a temporary name in the same directory and moved into
place with :func:`os.replace`, so readers never see a half-written entry.
Writers in one process are serialised by a lock.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .fourier import FourierField
from .fracderiv import DEFAULT_LEVELS, FracOpMatrix, build_operator

__all__ = [
    "FORMAT_VERSION",
    "CacheError",
    "CacheMiss",
    "ChecksumMismatch",
    "VersionMismatch",
    "KeyMismatch",
    "CacheEntry",
    "OperatorCache",
    "write_operator",
    "read_operator",
    "write_coefficients",
    "read_coefficients",
]

FORMAT_VERSION = 1
MAGIC = b"FSOP"
SUFFIX = ".fsop"

_FIXED = struct.Struct("<4sIIdII")
_DTYPE = np.dtype("<c16")
KIND_OPERATOR = 0
KIND_COEFFS = 1


class CacheError(OSError):
    """Base class for cache failures."""


class CacheMiss(CacheError, KeyError):
    def __str__(self):
        return OSError.__str__(self)


class ChecksumMismatch(CacheError):
    pass


class VersionMismatch(CacheError):
    pass


class KeyMismatch(CacheError):
    """The file holds a different key than the one requested."""


@dataclass(frozen=True)
class CacheEntry:
    path: Path
    alpha: float
    N: int
    levels: tuple[int, ...]
    checksum: str
    size: int


def _normalize_levels(levels) -> tuple[int, ...]:
    levels = tuple(int(m) for m in levels)
    if not levels:
        raise ValueError("level set must not be empty")
    return levels


def _encode(kind: int, alpha: float, N: int, levels: Sequence[int], data: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(data, dtype=_DTYPE).tobytes(order="C")
    digest = hashlib.sha256(payload).digest()
    head = _FIXED.pack(MAGIC, FORMAT_VERSION, kind, float(alpha), N, len(levels))
    head += struct.pack(f"<{len(levels)}I", *levels) + digest
    return head + payload


def _atomic_write(path: Path, blob: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=SUFFIX, dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _read_header(fh, path):
    fixed = fh.read(_FIXED.size)
    if len(fixed) != _FIXED.size:
        raise CacheError(f"{path}: truncated header")
    magic, version, kind, alpha, N, n_levels = _FIXED.unpack(fixed)
    if magic != MAGIC:
        raise CacheError(f"{path}: not an operator cache file")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    raw = fh.read(4 * n_levels + 32)
    if len(raw) != 4 * n_levels + 32:
        raise CacheError(f"{path}: truncated header")
    levels = struct.unpack(f"<{n_levels}I", raw[: 4 * n_levels])
    return kind, alpha, N, tuple(levels), raw[4 * n_levels:]


def _decode(path: Path, kind_expected: int):
    try:
        with open(path, "rb") as fh:
            kind, alpha, N, levels, digest = _read_header(fh, path)
            payload = fh.read()
    except FileNotFoundError:
        raise CacheMiss(f"no cache entry at {path}") from None
    if kind != kind_expected:
        raise CacheError(f"{path}: unexpected entry kind {kind}")
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumMismatch(f"{path}: checksum mismatch")
    count = 4 * N * N if kind == KIND_OPERATOR else 2 * N
    if len(payload) != count * _DTYPE.itemsize:
        raise CacheError(f"{path}: payload has {len(payload)} bytes, expected "
                         f"{count * _DTYPE.itemsize}")
    data = np.frombuffer(payload, dtype=_DTYPE).astype(complex)
    return alpha, N, levels, data


def write_operator(path, op: FracOpMatrix):
    _atomic_write(Path(path), _encode(KIND_OPERATOR, op.alpha, op.N, op.levels, op.entries))


def read_operator(path, alpha: float | None = None, N: int | None = None,
                  levels: Sequence[int] | None = None) -> FracOpMatrix:
    """Load a matrix; the optional key fields are checked against the header."""
    f_alpha, f_N, f_levels, data = _decode(Path(path), KIND_OPERATOR)
    want = {"alpha": alpha, "N": N, "levels": None if levels is None else tuple(levels)}
    got = {"alpha": f_alpha, "N": f_N, "levels": f_levels}
    for name, value in want.items():
        if value is not None and value != got[name]:
            raise KeyMismatch(f"{path}: stored {name}={got[name]!r}, requested {value!r}")
    return FracOpMatrix(data.reshape(2 * f_N, 2 * f_N), f_alpha, f_N, f_levels)


def write_coefficients(path, field: FourierField, alpha: float = 0.0,
                       levels: Sequence[int] = (0,)):
    """Dump a coefficient vector in the operator file format."""
    _atomic_write(Path(path), _encode(KIND_COEFFS, alpha, field.N, tuple(levels), field.coeffs))


def read_coefficients(path, is_real: bool = True) -> FourierField:
    _, N, _, data = _decode(Path(path), KIND_COEFFS)
    return FourierField(data, N, is_real)


class OperatorCache:
    """Directory of cached operators keyed by ``(alpha, N, levels)``.

    Parameters
    ----------
    root : path-like
        Cache directory; created on first write.
    """

    def __init__(self, root):
        self.root = Path(root)
        self._lock = threading.Lock()

    def path_for(self, alpha: float, N: int, levels: Sequence[int]) -> Path:
        levels = _normalize_levels(levels)
        # float.hex is exact, so distinct doubles never share a file
        tag = float(alpha).hex().replace("+", "")
        return self.root / f"op_a{tag}_N{int(N)}_m{'-'.join(map(str, levels))}{SUFFIX}"

    def store(self, op: FracOpMatrix) -> Path:
        path = self.path_for(op.alpha, op.N, op.levels)
        with self._lock:
            write_operator(path, op)
        return path

    def load(self, alpha: float, N: int, levels: Sequence[int]) -> FracOpMatrix:
        levels = _normalize_levels(levels)
        return read_operator(self.path_for(alpha, N, levels), float(alpha), int(N), levels)

    def contains(self, alpha: float, N: int, levels: Sequence[int]) -> bool:
        return self.path_for(alpha, N, levels).is_file()

    def get_or_build(self, alpha: float, N: int, levels: Sequence[int] = DEFAULT_LEVELS,
                     budget: int | None = None) -> FracOpMatrix:
        """Load the operator, assembling and storing it on a miss."""
        levels = _normalize_levels(levels)
        try:
            return self.load(alpha, N, levels)
        except CacheMiss:
            pass
        op = build_operator(float(alpha), int(N), levels, budget)
        self.store(op)
        return op

    def entries(self) -> list[CacheEntry]:
        out = []
        if not self.root.is_dir():
            return out
        for path in sorted(self.root.glob(f"op_*{SUFFIX}")):
            with open(path, "rb") as fh:
                kind, alpha, N, levels, digest = _read_header(fh, path)
            if kind == KIND_OPERATOR:
                out.append(CacheEntry(path, alpha, N, levels, digest.hex(), path.stat().st_size))
        return out

    def purge(self, alpha: float | None = None, N: int | None = None,
              levels: Sequence[int] | None = None) -> int:
        """Delete matching entries (all of them by default); returns the count."""
        removed = 0
        with self._lock:
            for entry in self.entries():
                if alpha is not None and entry.alpha != float(alpha):
                    continue
                if N is not None and entry.N != int(N):
                    continue
                if levels is not None and entry.levels != tuple(levels):
                    continue
                entry.path.unlink()
                removed += 1
        return removed

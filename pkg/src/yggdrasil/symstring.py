"""k-bit symbol strings, byte packing, file chunking and seeded randomness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import LengthMismatchError, ParamsError

ALLOWED_K = (1, 2, 4, 8, 16, 32)


def ceil_log2(n: int) -> int:
    """Bits needed to address ``n`` positions, i.e. ceil(log2(n)) for n >= 1."""
    if n < 1:
        raise ValueError("ceil_log2 needs n >= 1")
    return (n - 1).bit_length()


@dataclass(frozen=True)
class Params:
    """Protocol parameters.

    ``k`` is the symbol width in bits, ``n_o`` and ``n_b`` the original and
    base lengths in symbols, ``tau`` the cloud's per-string operation budget
    and ``s_h`` the accounting size of a chunk identifier in bits.
    """

    k: int = 8
    n_o: int = 128
    n_b: int = 120
    tau: int = 0
    s_h: int = 64

    def __post_init__(self):
        for name in ("k", "n_o", "n_b", "tau", "s_h"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ParamsError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.k not in ALLOWED_K:
            raise ParamsError(f"k must be one of {ALLOWED_K}, got {self.k}")
        if not 1 <= self.n_b <= self.n_o:
            raise ParamsError(f"need 1 <= n_b <= n_o, got n_b={self.n_b}, n_o={self.n_o}")
        if self.tau < 0:
            raise ParamsError(f"tau must be non-negative, got {self.tau}")
        if self.s_h < 1:
            raise ParamsError(f"s_h must be >= 1, got {self.s_h}")

    @property
    def n_del(self) -> int:
        """Number of 1-deletions the client performs per string."""
        return self.n_o - self.n_b

    @property
    def pos_bits(self) -> int:
        """Size of one position pointer into an original string."""
        return ceil_log2(self.n_o)

    @property
    def chunk_bits(self) -> int:
        return self.k * self.n_o

    @property
    def base_bits(self) -> int:
        return self.k * self.n_b

    def replace(self, **changes) -> "Params":
        fields = {name: getattr(self, name) for name in ("k", "n_o", "n_b", "tau", "s_h")}
        fields.update(changes)
        return Params(**fields)


class SymbolString:
    """Immutable sequence of unsigned ``k``-bit symbols."""

    __slots__ = ("symbols", "k", "_hash")

    def __init__(self, symbols: Iterable[int], k: int):
        if k not in ALLOWED_K:
            raise ParamsError(f"k must be one of {ALLOWED_K}, got {k}")
        syms = tuple(int(s) for s in symbols)
        limit = 1 << k
        for s in syms:
            if s < 0 or s >= limit:
                raise ValueError(f"symbol {s} out of range for k={k}")
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "_hash", None)

    @classmethod
    def _trusted(cls, symbols: tuple, k: int) -> "SymbolString":
        # Skips range checks; callers guarantee a tuple of valid ints.
        obj = object.__new__(cls)
        object.__setattr__(obj, "symbols", symbols)
        object.__setattr__(obj, "k", k)
        object.__setattr__(obj, "_hash", None)
        return obj

    @classmethod
    def from_array(cls, arr, k: int) -> "SymbolString":
        arr = np.asarray(arr)
        if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= (1 << k)):
            raise ValueError(f"symbols out of range for k={k}")
        return cls._trusted(tuple(int(v) for v in arr.tolist()), k)

    def __setattr__(self, name, value):
        raise AttributeError("SymbolString is immutable")

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return SymbolString._trusted(self.symbols[idx], self.k)
        return self.symbols[idx]

    def __eq__(self, other):
        if not isinstance(other, SymbolString):
            return NotImplemented
        return self.k == other.k and self.symbols == other.symbols

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.k, self.symbols))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        body = ", ".join(map(str, self.symbols[:16]))
        if len(self.symbols) > 16:
            body += ", ..."
        return f"SymbolString([{body}], k={self.k})"

    def to_array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=symbol_dtype(self.k))

    @property
    def bit_length(self) -> int:
        return self.k * len(self.symbols)


def symbol_dtype(k: int):
    """Smallest unsigned numpy dtype holding a k-bit symbol."""
    if k <= 8:
        return np.uint8
    if k == 16:
        return np.uint16
    return np.uint32


@dataclass(frozen=True)
class ChunkedFile:
    """A file split into equal-length original strings.

    Only the final chunk can carry zero padding; ``original_bit_length``
    records where the real data ends.
    """

    chunks: tuple
    original_bit_length: int
    k: int
    n_o: int

    def __len__(self):
        return len(self.chunks)


def _bits_to_symbols(bits: np.ndarray, k: int) -> np.ndarray:
    """Big-endian regroup of a 0/1 array (length divisible by k) into symbols."""
    groups = bits.reshape(-1, k).astype(np.uint64)
    weights = (np.uint64(1) << np.arange(k - 1, -1, -1, dtype=np.uint64))
    return (groups * weights).sum(axis=1, dtype=np.uint64)


def _symbols_to_bits(symbols: np.ndarray, k: int) -> np.ndarray:
    syms = np.asarray(symbols, dtype=np.uint64)
    shifts = np.arange(k - 1, -1, -1, dtype=np.uint64)
    return ((syms[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).ravel()


def pack(s: SymbolString) -> bytes:
    """Lay symbols out consecutively, most significant bit first.

    The last byte is zero-padded in its low bits.

    >>> pack(SymbolString([3, 0, 1, 2], k=2)).hex()
    'c6'
    """
    if len(s) == 0:
        return b""
    if s.k == 8:
        return bytes(s.symbols)
    bits = _symbols_to_bits(np.asarray(s.symbols, dtype=np.uint64), s.k)
    return np.packbits(bits).tobytes()


def unpack(data: bytes, k: int, count: int) -> SymbolString:
    """Inverse of :func:`pack` for ``count`` symbols of width ``k``."""
    if k not in ALLOWED_K:
        raise ParamsError(f"k must be one of {ALLOWED_K}, got {k}")
    if count < 0:
        raise ValueError("count must be non-negative")
    need = -(-k * count // 8)
    if len(data) < need:
        raise LengthMismatchError(
            f"{len(data)} bytes cannot hold {count} symbols of {k} bits")
    if count == 0:
        return SymbolString._trusted((), k)
    if k == 8:
        return SymbolString._trusted(tuple(data[:count]), k)
    bits = np.unpackbits(np.frombuffer(bytes(data[:need]), dtype=np.uint8))[: k * count]
    return SymbolString._trusted(tuple(int(v) for v in _bits_to_symbols(bits, k).tolist()), k)


def bytes_to_symbol_array(raw: bytes, k: int) -> np.ndarray:
    """All symbols of ``raw`` (zero-padded to a whole symbol) as a numpy array."""
    buf = np.frombuffer(bytes(raw), dtype=np.uint8)
    if k == 8:
        return buf.copy()
    bits = np.unpackbits(buf)
    rem = (-len(bits)) % k
    if rem:
        bits = np.concatenate([bits, np.zeros(rem, dtype=np.uint8)])
    return _bits_to_symbols(bits, k).astype(symbol_dtype(k))


def chunk(raw_bytes: bytes, params: Params) -> ChunkedFile:
    """Split ``raw_bytes`` into strings of ``params.n_o`` symbols.

    The last chunk is padded with zero symbols.
    """
    raw_bytes = bytes(raw_bytes)
    bit_length = 8 * len(raw_bytes)
    k, n_o = params.k, params.n_o
    if bit_length == 0:
        return ChunkedFile((), 0, k, n_o)
    per_chunk = k * n_o
    n_chunks = -(-bit_length // per_chunk)
    bits = np.unpackbits(np.frombuffer(raw_bytes, dtype=np.uint8))
    pad = n_chunks * per_chunk - bit_length
    if pad:
        bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    if k == 8:
        symbols = np.frombuffer(raw_bytes + bytes(pad // 8), dtype=np.uint8)
    else:
        symbols = _bits_to_symbols(bits, k)
    rows = symbols.reshape(n_chunks, n_o).tolist()
    chunks = tuple(SymbolString._trusted(tuple(row), k) for row in rows)
    return ChunkedFile(chunks, bit_length, k, n_o)


def dechunk(cf: ChunkedFile) -> bytes:
    """Exact inverse of :func:`chunk`; strips the tail padding."""
    total = sum(len(c) for c in cf.chunks) * cf.k
    if cf.original_bit_length > total:
        raise LengthMismatchError(
            f"original_bit_length {cf.original_bit_length} exceeds {total} chunk bits")
    if not cf.chunks:
        return b""
    for c in cf.chunks:
        if len(c) != cf.n_o or c.k != cf.k:
            raise LengthMismatchError("chunk length or symbol width differs from the file's")
    if cf.k == 8:
        data = b"".join(bytes(c.symbols) for c in cf.chunks)
    else:
        flat = np.fromiter((s for c in cf.chunks for s in c.symbols), dtype=np.uint64)
        data = np.packbits(_symbols_to_bits(flat, cf.k)).tobytes()
    return data[: -(-cf.original_bit_length // 8)]


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic random stream.

    Uses numpy's PCG64 bit generator (PCG XSL RR 128/64), seeded through
    ``SeedSequence(seed)``. Streams are identical across runs and platforms
    for a given seed.
    """
    if seed < 0 or seed >= 1 << 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.PCG64(seed))


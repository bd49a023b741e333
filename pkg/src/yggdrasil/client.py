"""Client side of the protocol: privacy deletions, local deviations, reconstruction."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (CorruptedDeviationError, CorruptedStoreError,
                     DuplicateIdError, LengthMismatchError, UnknownIdError)
from .policy import DeletionStrategy, Policy
from .symstring import ChunkedFile, Params, SymbolString, ceil_log2, pack, unpack

__all__ = [
    "ClientRecord", "ClientStore", "DeletionStrategy", "FileEntry",
    "LocalDeviation", "apply_deletions", "choose_deletions",
    "client_storage_bits", "decode_bases", "encode_bases", "get", "reconstruct", "upload",
]

CLIENT_MAGIC = b"YGGC"
FORMAT_VERSION = 1
_PARAMS = struct.Struct("<BIIH")


@dataclass(frozen=True)
class LocalDeviation:
    """Deleted ``(position, value)`` pairs, positions in the original string."""

    deletions: tuple = ()

    def __post_init__(self):
        dels = tuple((int(p), int(v)) for p, v in self.deletions)
        prev = -1
        for p, v in dels:
            if p <= prev:
                raise CorruptedDeviationError("deletion positions must be strictly increasing")
            if v < 0:
                raise CorruptedDeviationError(f"negative symbol value {v}")
            prev = p
        object.__setattr__(self, "deletions", dels)

    def __len__(self):
        return len(self.deletions)

    def __iter__(self):
        return iter(self.deletions)

    def bit_size(self, n_o: int, k: int) -> int:
        """Stored size: one position pointer plus one symbol per deletion."""
        return len(self.deletions) * (ceil_log2(n_o) + k)


class ClientRecord(NamedTuple):
    id: int
    deviation: LocalDeviation


class FileEntry(NamedTuple):
    chunk_ids: tuple
    original_bit_length: int


def choose_deletions(f: SymbolString, n_del: int, strategy, rng) -> list:
    """Pick ``n_del`` distinct original positions of ``f`` to delete (ascending)."""
    strategy = DeletionStrategy.parse(strategy)
    n = len(f)
    if not 0 <= n_del <= n:
        raise LengthMismatchError(f"cannot delete {n_del} of {n} symbols")
    if n_del == 0:
        return []
    if strategy is DeletionStrategy.UNIFORM:
        return sorted(int(p) for p in rng.choice(n, size=n_del, replace=False))

    # Run breaking: repeatedly delete a symbol whose removal lowers the number
    # of adjacent equal pairs the most; ties are broken uniformly.
    s = np.asarray(f.symbols, dtype=np.int64)
    orig = np.arange(n)
    chosen = []
    for _ in range(n_del):
        m = len(s)
        delta = np.zeros(m, dtype=np.int64)
        if m > 1:
            eq = s[1:] == s[:-1]
            delta[1:] -= eq
            delta[:-1] -= eq
        if m > 2:
            delta[1:-1] += s[2:] == s[:-2]
        cands = np.flatnonzero(delta == delta.min())
        pick = int(cands[rng.integers(len(cands))])
        chosen.append(int(orig[pick]))
        s = np.delete(s, pick)
        orig = np.delete(orig, pick)
    return sorted(chosen)


def apply_deletions(f: SymbolString, positions) -> tuple:
    """Delete ``positions`` (original indices) from ``f``.

    Returns ``(base, deviation)``.
    """
    positions = [int(p) for p in positions]
    pos = sorted(set(positions))
    if len(pos) != len(positions):
        raise CorruptedDeviationError("duplicate deletion position")
    if pos and (pos[0] < 0 or pos[-1] >= len(f)):
        raise CorruptedDeviationError("deletion position out of range")
    symbols = f.symbols
    dropped = set(pos)
    base = tuple(v for i, v in enumerate(symbols) if i not in dropped)
    deviation = LocalDeviation(tuple((p, symbols[p]) for p in pos))
    return SymbolString._trusted(base, f.k), deviation


def reconstruct(base: SymbolString, deviation: LocalDeviation, n_o: int | None = None) -> SymbolString:
    """Re-insert the deleted symbols at their original positions."""
    total = len(base) + len(deviation)
    if n_o is not None and total != n_o:
        raise CorruptedDeviationError(
            f"base ({len(base)}) + deviation ({len(deviation)}) != n_o ({n_o})")
    limit = 1 << base.k
    out = list(base.symbols)
    for pos, value in deviation.deletions:
        if pos >= total or pos > len(out):
            raise CorruptedDeviationError(f"deletion position {pos} out of range")
        if value >= limit:
            raise CorruptedDeviationError(f"symbol {value} too wide for k={base.k}")
        out.insert(pos, value)
    return SymbolString._trusted(tuple(out), base.k)


@dataclass
class ClientStore:
    """Client-held state: local deviations per chunk id plus a file table.

    Chunk ids are 64-bit: the top 16 bits are the client ``namespace``, the
    rest a sequence number.
    """

    params: Params
    records: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    namespace: int = 0

    def __post_init__(self):
        if not 0 <= self.namespace < 1 << 16:
            raise ValueError("namespace must fit in 16 bits")
        mine = [i for i in self.records if i >> 48 == self.namespace]
        self._next_seq = (max(mine) & ((1 << 48) - 1)) + 1 if mine else 0

    def new_id(self) -> int:
        cid = (self.namespace << 48) | self._next_seq
        self._next_seq += 1
        return cid

    def add(self, record: ClientRecord):
        if record.id in self.records:
            raise DuplicateIdError(record.id)
        self.records[record.id] = record

    def deviation(self, chunk_id: int) -> LocalDeviation:
        try:
            return self.records[chunk_id].deviation
        except KeyError:
            raise UnknownIdError(chunk_id) from None

    def add_file(self, name: str, chunk_ids, original_bit_length: int):
        missing = [c for c in chunk_ids if c not in self.records]
        if missing:
            raise UnknownIdError(missing[0])
        self.files[name] = FileEntry(tuple(chunk_ids), int(original_bit_length))

    def upload_file(self, name: str, cf: ChunkedFile, policy: Policy, rng) -> list:
        """Upload every chunk of ``cf``; returns ``[(id, base), ...]`` for the cloud."""
        out = []
        for f in cf.chunks:
            cid, base, _ = upload(policy, f, rng, self)
            out.append((cid, base))
        self.add_file(name, [cid for cid, _ in out], cf.original_bit_length)
        return out

    # persistence ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        p = self.params
        buf = io.BytesIO()
        buf.write(CLIENT_MAGIC)
        buf.write(bytes([FORMAT_VERSION]))
        buf.write(_PARAMS.pack(p.k, p.n_o, p.n_b, p.s_h))
        buf.write(struct.pack("<Q", len(self.records)))
        for rec in self.records.values():
            buf.write(struct.pack("<QI", rec.id, len(rec.deviation)))
            for pos, value in rec.deviation.deletions:
                buf.write(struct.pack("<IQ", pos, value))
        buf.write(struct.pack("<Q", len(self.files)))
        for name, entry in self.files.items():
            raw = name.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
            buf.write(struct.pack("<Q", len(entry.chunk_ids)))
            buf.write(struct.pack(f"<{len(entry.chunk_ids)}Q", *entry.chunk_ids))
            buf.write(struct.pack("<Q", entry.original_bit_length))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, tau: int = 0) -> "ClientStore":
        r = _Reader(data)
        if r.take(4) != CLIENT_MAGIC:
            raise CorruptedStoreError("bad client store magic")
        if r.take(1)[0] != FORMAT_VERSION:
            raise CorruptedStoreError("unsupported client store version")
        params = read_params(r, tau)
        records = {}
        for _ in range(r.unpack("<Q")[0]):
            cid, count = r.unpack("<QI")
            if count > params.n_o:
                raise CorruptedStoreError(f"record {cid} has {count} deletions")
            dels = tuple(r.unpack("<IQ") for _ in range(count))
            try:
                dev = LocalDeviation(dels)
            except CorruptedDeviationError as exc:
                raise CorruptedStoreError(f"record {cid}: {exc}") from exc
            if cid in records:
                raise CorruptedStoreError(f"duplicate record id {cid}")
            records[cid] = ClientRecord(cid, dev)
        files = {}
        for _ in range(r.unpack("<Q")[0]):
            (nlen,) = r.unpack("<I")
            try:
                name = r.take(nlen).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorruptedStoreError("file name is not UTF-8") from exc
            (count,) = r.unpack("<Q")
            if count > r.remaining // 8:
                raise CorruptedStoreError("truncated chunk id list")
            ids = r.unpack(f"<{count}Q") if count else ()
            (obl,) = r.unpack("<Q")
            for cid in ids:
                if cid not in records:
                    raise CorruptedStoreError(f"file {name!r} references unknown chunk {cid}")
            files[name] = FileEntry(tuple(ids), obl)
        if r.remaining:
            raise CorruptedStoreError(f"{r.remaining} trailing bytes")
        return cls(params, records, files)

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path, tau: int = 0) -> "ClientStore":
        return cls.from_bytes(Path(path).read_bytes(), tau=tau)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(bytes(data))
        self.pos = 0

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptedStoreError("unexpected end of data")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))


def write_params(buf, p: Params):
    buf.write(_PARAMS.pack(p.k, p.n_o, p.n_b, p.s_h))


def read_params(r: _Reader, tau: int = 0) -> Params:
    k, n_o, n_b, s_h = r.unpack(_PARAMS.format)
    try:
        return Params(k=k, n_o=n_o, n_b=n_b, tau=tau, s_h=s_h)
    except ValueError as exc:
        raise CorruptedStoreError(f"invalid params block: {exc}") from exc


def upload(policy: Policy, f: SymbolString, rng, store: ClientStore | None = None,
           chunk_id: int | None = None):
    """Apply ``n_o - n_b`` deletions to ``f``.

    Returns ``(id, base, deviation)``. With a ``store`` the id is allocated
    there and ``(id, deviation)`` is kept locally.
    """
    if len(f) != policy.n_o:
        raise LengthMismatchError(f"string has {len(f)} symbols, policy expects {policy.n_o}")
    if f.k != policy.k:
        raise LengthMismatchError(f"string has k={f.k}, policy expects k={policy.k}")
    positions = choose_deletions(f, policy.n_del, policy.strategy, rng)
    base, deviation = apply_deletions(f, positions)
    if chunk_id is None:
        if store is None:
            raise ValueError("need a store or an explicit chunk_id")
        chunk_id = store.new_id()
    if store is not None:
        store.add(ClientRecord(chunk_id, deviation))
    return chunk_id, base, deviation


def get(chunk_id: int, store: ClientStore, cloud_response: SymbolString) -> SymbolString:
    """Rebuild the original string from the cloud's answer and the local deviation."""
    deviation = store.deviation(chunk_id)
    if len(cloud_response) != store.params.n_b:
        raise LengthMismatchError(
            f"cloud returned {len(cloud_response)} symbols, expected n_b={store.params.n_b}")
    return reconstruct(cloud_response, deviation, store.params.n_o)


def client_storage_bits(store: ClientStore) -> int:
    """Deviation bits plus ``s_h`` per record."""
    p = store.params
    per_del = ceil_log2(p.n_o) + p.k
    return sum(len(rec.deviation) * per_del + p.s_h for rec in store.records.values())


BASES_MAGIC = b"YGGB"


def encode_bases(params: Params, pairs) -> bytes:
    """Serialize uploaded ``(id, base)`` pairs for transfer to the cloud."""
    buf = io.BytesIO()
    buf.write(BASES_MAGIC)
    buf.write(bytes([FORMAT_VERSION]))
    write_params(buf, params)
    pairs = list(pairs)
    buf.write(struct.pack("<Q", len(pairs)))
    for cid, base in pairs:
        if len(base) != params.n_b:
            raise LengthMismatchError(f"base {cid} has {len(base)} symbols, expected {params.n_b}")
        buf.write(struct.pack("<Q", cid))
        buf.write(pack(base))
    return buf.getvalue()


def decode_bases(data: bytes) -> tuple:
    """Inverse of :func:`encode_bases`: ``(params, [(id, base), ...])``."""
    r = _Reader(data)
    if r.take(4) != BASES_MAGIC:
        raise CorruptedStoreError("bad base file magic")
    if r.take(1)[0] != FORMAT_VERSION:
        raise CorruptedStoreError("unsupported base file version")
    params = read_params(r)
    width = -(-params.n_b * params.k // 8)
    (count,) = r.unpack("<Q")
    if count > r.remaining // (8 + width):
        raise CorruptedStoreError("truncated base file")
    pairs = []
    for _ in range(count):
        (cid,) = r.unpack("<Q")
        pairs.append((cid, unpack(r.take(width), params.k, params.n_b)))
    if r.remaining:
        raise CorruptedStoreError(f"{r.remaining} trailing bytes")
    return params, pairs

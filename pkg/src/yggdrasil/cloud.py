"""Cloud side of the protocol: base set, generalized deduplication, decompression."""

from __future__ import annotations

import io
import statistics
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels
from .client import _Reader, read_params, write_params
from .errors import (CorruptedStoreError, DuplicateIdError, LengthMismatchError,
                     UnknownIdError)
from .metrics import (ChangeValue, EditScript, Swap, apply_script, change_bits,
                      invert_script, swap_bits)
from .policy import DeletionStrategy, Policy
from .symstring import Params, SymbolString, ceil_log2, pack, symbol_dtype, unpack

__all__ = [
    "BaseSet", "CloudStore", "DedupRecord", "Policy", "cloud_bits_bound",
    "cloud_storage_bits", "compress", "decompress", "paper_bits_bound", "setup",
    "tau_heuristic",
]

CLOUD_MAGIC = b"YGGS"
FORMAT_VERSION = 1
TAG_SWAP = 0
TAG_CHANGE = 1


class DedupRecord(NamedTuple):
    """Chunk id, the base it points at, and the script from the upload to that base."""

    id: int
    base_id: int
    deviation: EditScript


class BaseSet:
    """Deduplicated bases with auto-incremented ids and reference counts.

    Bases are mirrored row by row into a numpy matrix (ids ascend with rows)
    for the compiled near-match search; an exact-match index keyed by the
    raw symbol bytes short-circuits identical uploads.
    """

    def __init__(self, k: int, n_b: int):
        self.k = k
        self.n_b = n_b
        self._bases: dict = {}
        self._refcount: dict = {}
        self._row_ids: list = []
        self._exact: dict = {}
        self._next_id = 0
        self._dtype = symbol_dtype(k)
        self._byte_path = self._dtype == np.uint8
        self._width = -(-n_b // 8) * 8 if self._byte_path else n_b
        self._mat = np.zeros((16, self._width), dtype=self._dtype)
        self._ws = None

    def __len__(self):
        return len(self._bases)

    def __contains__(self, base_id):
        return base_id in self._bases

    def __iter__(self):
        return iter(self._bases)

    def get(self, base_id: int) -> SymbolString:
        return self._bases[base_id]

    def refcount(self, base_id: int) -> int:
        return self._refcount[base_id]

    def items(self):
        return self._bases.items()

    @property
    def next_id(self) -> int:
        return self._next_id

    def _key(self, arr: np.ndarray) -> bytes:
        return arr.tobytes()

    def add(self, base: SymbolString, base_id: int | None = None, refcount: int = 0) -> int:
        if len(base) != self.n_b or base.k != self.k:
            raise LengthMismatchError(
                f"base of length {len(base)} (k={base.k}) in a set of length {self.n_b} (k={self.k})")
        arr = base.to_array()
        key = self._key(arr)
        if key in self._exact:
            raise ValueError("base already stored")
        if base_id is None:
            base_id = self._next_id
        elif base_id in self._bases or (self._row_ids and base_id <= self._row_ids[-1]):
            raise ValueError(f"base ids must be unique and increasing, got {base_id}")
        row = len(self._row_ids)
        if row == self._mat.shape[0]:
            grown = np.zeros((2 * row, self._width), dtype=self._dtype)
            grown[:row] = self._mat
            self._mat = grown
        self._mat[row, : self.n_b] = arr
        self._row_ids.append(base_id)
        self._bases[base_id] = base
        self._refcount[base_id] = refcount
        self._exact[key] = base_id
        self._next_id = max(self._next_id, base_id + 1)
        return base_id

    def incref(self, base_id: int):
        self._refcount[base_id] += 1

    def find_exact(self, base: SymbolString):
        return self._exact.get(self._key(base.to_array()))

    def nearest(self, f: SymbolString, tau: int, n_o: int):
        """``(base_id, distance)`` of the closest base with 0 < distance <= tau, or None."""
        nrows = len(self._row_ids)
        if tau <= 0 or nrows == 0:
            return None
        pos_bits = ceil_log2(n_o)
        if self._byte_path:
            if self._ws is None:
                self._ws = _kernels.make_workspace(self.n_b, self.k)
            fpad = np.zeros(self._width, dtype=np.uint8)
            fpad[: self.n_b] = f.symbols
            mat = self._mat[:nrows]
            row, dist = _kernels.nearest_base_u8(
                mat.view(np.uint64), mat[:, : self.n_b], nrows, fpad.view(np.uint64),
                fpad[: self.n_b], tau, self.k, pos_bits, self._ws)
        else:
            row, dist = _kernels.nearest_base(
                self._mat[:nrows], nrows, f.to_array(), tau, self.k, pos_bits)
        if row < 0:
            return None
        return self._row_ids[row], int(dist)


def script_between(f: SymbolString, target: SymbolString, n_o: int) -> EditScript:
    """Greedy script from ``f`` to ``target`` via the compiled kernel."""
    n_ops, ops = _kernels.greedy_ops_array(
        f.to_array(), target.to_array(), f.k, ceil_log2(n_o), False)
    out = []
    for kind, i, x, y in ops[:n_ops].tolist():
        out.append(Swap(i, x) if kind == _kernels.SWAP else ChangeValue(i, x, y))
    return EditScript(tuple(out))


@dataclass
class CloudStore:
    """Everything the cloud holds: parameters, the base set and dedup records."""

    params: Params
    bases: BaseSet = None
    records: dict = None
    strategy: DeletionStrategy = DeletionStrategy.UNIFORM

    def __post_init__(self):
        if self.bases is None:
            self.bases = BaseSet(self.params.k, self.params.n_b)
        if self.records is None:
            self.records = {}
        self.strategy = DeletionStrategy.parse(self.strategy)

    @property
    def n_bases(self) -> int:
        return len(self.bases)

    @property
    def n_records(self) -> int:
        return len(self.records)

    def check(self):
        """Raise :class:`CorruptedStoreError` if refcounts or pointers are inconsistent."""
        counts = {bid: 0 for bid in self.bases}
        for rec in self.records.values():
            if rec.base_id not in counts:
                raise CorruptedStoreError(f"record {rec.id} points at missing base {rec.base_id}")
            counts[rec.base_id] += 1
        for bid, c in counts.items():
            if self.bases.refcount(bid) != c:
                raise CorruptedStoreError(
                    f"base {bid} refcount {self.bases.refcount(bid)} != {c} records")

    # persistence ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        p = self.params
        buf = io.BytesIO()
        buf.write(CLOUD_MAGIC)
        buf.write(bytes([FORMAT_VERSION]))
        write_params(buf, p)
        buf.write(struct.pack("<Q", len(self.bases)))
        for bid, base in self.bases.items():
            buf.write(struct.pack("<QQ", bid, self.bases.refcount(bid)))
            buf.write(pack(base))
        buf.write(struct.pack("<Q", len(self.records)))
        for rec in self.records.values():
            buf.write(struct.pack("<QQI", rec.id, rec.base_id, len(rec.deviation)))
            for op in rec.deviation.ops:
                if isinstance(op, Swap):
                    buf.write(struct.pack("<BII", TAG_SWAP, op.i, op.j))
                else:
                    buf.write(struct.pack("<BIQQ", TAG_CHANGE, op.i, op.old, op.new))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, tau: int = 0) -> "CloudStore":
        r = _Reader(data)
        if r.take(4) != CLOUD_MAGIC:
            raise CorruptedStoreError("bad cloud store magic")
        if r.take(1)[0] != FORMAT_VERSION:
            raise CorruptedStoreError("unsupported cloud store version")
        params = read_params(r, tau)
        k, n_b = params.k, params.n_b
        base_bytes = -(-k * n_b // 8)
        bases = BaseSet(k, n_b)
        for _ in range(r.unpack("<Q")[0]):
            bid, refcount = r.unpack("<QQ")
            base = unpack(r.take(base_bytes), k, n_b)
            try:
                bases.add(base, base_id=bid, refcount=refcount)
            except ValueError as exc:
                raise CorruptedStoreError(f"base {bid}: {exc}") from exc
        records = {}
        limit = 1 << k
        for _ in range(r.unpack("<Q")[0]):
            cid, bid, n_ops = r.unpack("<QQI")
            if cid in records:
                raise CorruptedStoreError(f"duplicate record id {cid}")
            if bid not in bases:
                raise CorruptedStoreError(f"record {cid} points at missing base {bid}")
            ops = []
            for _ in range(n_ops):
                (tag,) = r.unpack("<B")
                if tag == TAG_SWAP:
                    i, j = r.unpack("<II")
                    if i >= n_b or j >= n_b or i == j:
                        raise CorruptedStoreError(f"record {cid}: invalid swap ({i}, {j})")
                    ops.append(Swap(i, j))
                elif tag == TAG_CHANGE:
                    i, old, new = r.unpack("<IQQ")
                    if i >= n_b or old >= limit or new >= limit or old == new:
                        raise CorruptedStoreError(f"record {cid}: invalid change at {i}")
                    ops.append(ChangeValue(i, old, new))
                else:
                    raise CorruptedStoreError(f"record {cid}: unknown op tag {tag}")
            records[cid] = DedupRecord(cid, bid, EditScript(tuple(ops)))
        if r.remaining:
            raise CorruptedStoreError(f"{r.remaining} trailing bytes")
        store = cls(params, bases, records)
        store.check()
        return store

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path, tau: int = 0) -> "CloudStore":
        return cls.from_bytes(Path(path).read_bytes(), tau=tau)


def setup(store: CloudStore) -> Policy:
    """Policy describing the current base set (or the configured n_b when empty)."""
    lengths = {len(b) for _, b in store.bases.items()}
    if len(lengths) > 1:
        raise CorruptedStoreError(f"bases of mixed lengths {sorted(lengths)}")
    n_b = lengths.pop() if lengths else store.params.n_b
    p = store.params
    return Policy(k=p.k, n_o=p.n_o, n_b=n_b, strategy=store.strategy)


def compress(store: CloudStore, chunk_id: int, f_prime: SymbolString) -> DedupRecord:
    """Deduplicate one uploaded base.

    Exact match first; otherwise the base with the smallest greedy distance
    in ``(0, tau]`` (lowest id on ties); otherwise ``f_prime`` becomes a new
    base.
    """
    p = store.params
    if chunk_id in store.records:
        raise DuplicateIdError(chunk_id)
    if len(f_prime) != p.n_b or f_prime.k != p.k:
        raise LengthMismatchError(
            f"upload has {len(f_prime)} symbols (k={f_prime.k}), expected {p.n_b} (k={p.k})")
    bases = store.bases
    hit = bases.find_exact(f_prime)
    if hit is not None:
        bases.incref(hit)
        rec = DedupRecord(chunk_id, hit, EditScript())
    else:
        near = bases.nearest(f_prime, p.tau, p.n_o)
        if near is not None:
            base_id, _ = near
            script = script_between(f_prime, bases.get(base_id), p.n_o)
            bases.incref(base_id)
            rec = DedupRecord(chunk_id, base_id, script)
        else:
            base_id = bases.add(f_prime, refcount=1)
            rec = DedupRecord(chunk_id, base_id, EditScript())
    store.records[chunk_id] = rec
    return rec


def decompress(store: CloudStore, chunk_id: int) -> SymbolString:
    """The uploaded base for ``chunk_id``; raises :class:`UnknownIdError` if absent."""
    rec = store.records.get(chunk_id)
    if rec is None:
        raise UnknownIdError(chunk_id)
    base = store.bases.get(rec.base_id)
    if not rec.deviation.ops:
        return base
    return apply_script(base, invert_script(rec.deviation))


def pointer_bits(n_bases: int) -> int:
    return ceil_log2(max(2, n_bases))


def cloud_storage_bits(store: CloudStore) -> int:
    """Bases plus, per record, ``s_h`` + a base pointer + the deviation's bits."""
    p = store.params
    ptr = pointer_bits(len(store.bases))
    total = len(store.bases) * p.k * p.n_b
    sw, ch = swap_bits(p.n_o), change_bits(p.k, p.n_o)
    for rec in store.records.values():
        n_sw = rec.deviation.n_swaps
        total += p.s_h + ptr + n_sw * sw + (len(rec.deviation) - n_sw) * ch
    return total


def cloud_bits_bound(store: CloudStore, tau: int | None = None) -> int:
    """Upper bound on :func:`cloud_storage_bits` with every op priced at the dearer kind.

    Assumes every base was created by one of the records, i.e. no seeded bases.
    """
    p = store.params
    tau = p.tau if tau is None else tau
    n_b, n_f = len(store.bases), len(store.records)
    per_op = max(swap_bits(p.n_o), change_bits(p.k, p.n_o))
    return (n_b * p.k * p.n_b + n_f * p.s_h + max(0, n_f - n_b) * tau * per_op
            + n_f * pointer_bits(n_b))


def paper_bits_bound(store: CloudStore, tau: int | None = None) -> int:
    """Swap-only pricing of the same bound (ignores the base pointer)."""
    p = store.params
    tau = p.tau if tau is None else tau
    n_b, n_f = len(store.bases), len(store.records)
    return n_b * p.k * p.n_b + n_f * p.s_h + max(0, n_f - n_b) * tau * swap_bits(p.n_o)


def tau_heuristic(store: CloudStore, sample: int, rng) -> int:
    """Median greedy swap distance over ``sample`` random base pairs (all pairs if fewer)."""
    ids = list(store.bases)
    nb = len(ids)
    if nb < 2:
        raise ValueError("tau_heuristic needs at least two bases")
    n_pairs = nb * (nb - 1) // 2
    if n_pairs <= sample:
        pairs = [(i, j) for i in range(nb) for j in range(i + 1, nb)]
    else:
        pairs = []
        for _ in range(sample):
            i, j = rng.choice(nb, size=2, replace=False)
            pairs.append((int(i), int(j)))
    pos_bits = ceil_log2(store.params.n_o)
    arrays = {}
    dists = []
    for i, j in pairs:
        for x in (i, j):
            if x not in arrays:
                arrays[x] = store.bases.get(ids[x]).to_array()
        d, _ = _kernels.greedy_ops_array(arrays[i], arrays[j], store.params.k, pos_bits, True)
        dists.append(int(d))
    return int(statistics.median_low(dists))

"""End-to-end experiment driver: chunk, upload, compress, measure, sweep."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from sklearn.model_selection import ParameterGrid

from ..analysis import measured_ratios, ucr_formula
from ..client import ClientStore, client_storage_bits, get
from ..cloud import CloudStore, cloud_bits_bound, cloud_storage_bits, compress, decompress, tau_heuristic
from ..errors import ParamsError, VerificationError
from ..policy import DeletionStrategy, Policy
from ..symstring import ALLOWED_K, ChunkedFile, Params, chunk, dechunk
from .corpus import SyntheticCorpusSpec, read_corpus_dir, synthesize_corpus

log = logging.getLogger(__name__)

SCHEMA = "schema=ygg-sweep-v1"
COLUMNS = ("k", "n_o_sym", "n_b_sym", "tau", "n_f", "n_b_count", "r", "ucr", "ccr", "gcr",
           "ucr_formula", "ccr_bound", "median_swap", "wall_ms")
UNITS = ("bits", "symbols")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    ``corpus`` is a directory (or file) path, a :class:`SyntheticCorpusSpec`,
    or raw bytes. ``chunk_size`` and the ``n_b_grid`` entries are read in
    ``units``: bits by default, symbols with ``units="symbols"``.
    """

    corpus: object = field(default_factory=SyntheticCorpusSpec)
    chunk_size: int = 1024
    k_grid: tuple = (8,)
    n_b_grid: tuple = (960,)
    tau_grid: tuple = (0,)
    seed: int = 0
    units: str = "bits"
    s_h: int = 64
    strategy: DeletionStrategy = DeletionStrategy.UNIFORM
    verify: bool = False
    heuristic_sample: int = 2000
    out: Path | None = None

    def __post_init__(self):
        if self.units not in UNITS:
            raise ParamsError(f"units must be one of {UNITS}, got {self.units!r}")
        for name in ("k_grid", "n_b_grid", "tau_grid"):
            grid = tuple(int(v) for v in getattr(self, name))
            if not grid:
                raise ParamsError(f"{name} is empty")
            object.__setattr__(self, name, grid)
        if any(k not in ALLOWED_K for k in self.k_grid):
            raise ParamsError(f"k values must be in {ALLOWED_K}")
        if any(t < 0 for t in self.tau_grid):
            raise ParamsError("tau values must be non-negative")
        if self.chunk_size <= 0:
            raise ParamsError("chunk size must be positive")
        object.__setattr__(self, "strategy", DeletionStrategy.parse(self.strategy))

    def geometry(self, k: int, n_b: int):
        """``(n_o, n_b)`` in symbols, or ``None`` with a logged reason when not integral."""
        if self.units == "symbols":
            n_o_sym, n_b_sym = self.chunk_size, n_b
        else:
            if self.chunk_size % k or n_b % k:
                log.warning("skipping k=%d n_b=%d: sizes are not multiples of k", k, n_b)
                return None
            n_o_sym, n_b_sym = self.chunk_size // k, n_b // k
        if not 1 <= n_b_sym <= n_o_sym:
            log.warning("skipping k=%d n_b=%d: need 1 <= n_b <= n_o (%d)", k, n_b, n_o_sym)
            return None
        return n_o_sym, n_b_sym

    def params(self, k: int, n_b: int, tau: int = 0):
        geo = self.geometry(k, n_b)
        if geo is None:
            return None
        return Params(k=k, n_o=geo[0], n_b=geo[1], tau=tau, s_h=self.s_h)


@dataclass
class SweepRow:
    k: int
    n_o: int
    n_b: int
    tau: int
    n_f: int
    n_b_count: int
    ucr: Fraction
    ccr: Fraction
    ucr_formula: Fraction
    ccr_bound: Fraction
    median_swap: int | None
    wall_ms: int
    cloud_bits: int = 0
    bound_bits: int = 0
    max_ops: int = 0

    @property
    def r(self) -> Fraction:
        return Fraction(self.n_b_count, self.n_f) if self.n_f else Fraction(0)

    @property
    def gcr(self) -> Fraction:
        return self.ucr + self.ccr

    def as_csv(self) -> list:
        def dec(x):
            return f"{float(x):.6f}"
        med = "" if self.median_swap is None else str(self.median_swap)
        return [self.k, self.n_o, self.n_b, self.tau, self.n_f, self.n_b_count, dec(self.r),
                dec(self.ucr), dec(self.ccr), dec(self.gcr), dec(self.ucr_formula),
                dec(self.ccr_bound), med, self.wall_ms]


def load_corpus(source) -> dict:
    """Named raw byte streams for a corpus source."""
    if isinstance(source, SyntheticCorpusSpec):
        return {"synthetic": synthesize_corpus(source)}
    if isinstance(source, (bytes, bytearray)):
        return {"corpus": bytes(source)}
    files = read_corpus_dir(source)
    if not files:
        raise ParamsError(f"no files under {source}")
    return files


def point_rng(seed: int, k: int, n_b: int) -> np.random.Generator:
    """Independent PCG64 stream for one (k, n_b) grid point."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k, n_b])))


@dataclass
class Upload:
    """Client-side result of uploading a corpus once, reusable across tau values."""

    params: Params
    client: ClientStore
    bases: list
    originals: dict
    files: dict


def upload_corpus(files: dict, params: Params, strategy, rng) -> Upload:
    policy = Policy(params.k, params.n_o, params.n_b, strategy)
    client = ClientStore(params)
    bases, originals = [], {}
    for name, raw in files.items():
        cf = chunk(raw, params)
        pairs = client.upload_file(name, cf, policy, rng)
        for (cid, base), f in zip(pairs, cf.chunks):
            originals[cid] = f
        bases.extend(pairs)
    return Upload(params, client, bases, originals, files)


def compress_all(up: Upload, tau: int, strategy=DeletionStrategy.UNIFORM) -> CloudStore:
    store = CloudStore(up.params.replace(tau=tau), strategy=strategy)
    for cid, base in up.bases:
        compress(store, cid, base)
    return store


def verify_roundtrip(up: Upload, cloud: CloudStore):
    """Rebuild every chunk and every file; raise :class:`VerificationError` on the first mismatch."""
    rebuilt = {}
    for cid, original in up.originals.items():
        f = get(cid, up.client, decompress(cloud, cid))
        if f != original:
            raise VerificationError(cid)
        rebuilt[cid] = f
    p = up.params
    for name, entry in up.client.files.items():
        cf = ChunkedFile(tuple(rebuilt[c] for c in entry.chunk_ids),
                         entry.original_bit_length, p.k, p.n_o)
        if dechunk(cf) != up.files[name]:
            raise VerificationError(entry.chunk_ids[0] if entry.chunk_ids else -1,
                                    f"file {name!r} differs after reconstruction")


def measure(up: Upload, cloud: CloudStore, median_swap, wall_ms: int) -> SweepRow:
    p = cloud.params
    n_f = len(cloud.records)
    db_bits = n_f * p.k * p.n_o
    cbits = cloud_storage_bits(cloud)
    report = measured_ratios(client_storage_bits(up.client), cbits, db_bits)
    bound = cloud_bits_bound(cloud)
    max_ops = max((len(r.deviation) for r in cloud.records.values()), default=0)
    return SweepRow(p.k, p.n_o, p.n_b, p.tau, n_f, len(cloud.bases), report.ucr, report.ccr,
                    ucr_formula(p), Fraction(bound, db_bits), median_swap, wall_ms,
                    cbits, bound, max_ops)


def _heuristic(up: Upload, config: ExperimentConfig, rng):
    exact_only = compress_all(up, 0)
    if len(exact_only.bases) < 2:
        return None
    return tau_heuristic(exact_only, config.heuristic_sample, rng)


def run_pipeline(config: ExperimentConfig, point: tuple, files: dict | None = None) -> SweepRow:
    """Full pipeline for one ``(k, n_b, tau)`` point (``n_b`` in config units)."""
    k, n_b, tau = point
    params = config.params(k, n_b, tau)
    if params is None:
        raise ParamsError(f"grid point k={k} n_b={n_b} has no integral geometry")
    files = load_corpus(config.corpus) if files is None else files
    t0 = time.perf_counter()
    up = upload_corpus(files, params, config.strategy, point_rng(config.seed, k, n_b))
    cloud = compress_all(up, tau, config.strategy)
    if config.verify:
        verify_roundtrip(up, cloud)
    wall = int((time.perf_counter() - t0) * 1000)
    return measure(up, cloud, None, wall)


@dataclass
class SweepResult:
    rows: list
    best: dict
    heuristics: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.rows:
            w.writerow(row.as_csv())
        for (k, n_b), tau in self.best.items():
            h = self.heuristics.get((k, n_b))
            buf.write(f"# best k={k} n_b_sym={n_b} tau={tau} tau_heuristic={'' if h is None else h}\n")
        return buf.getvalue()


def sweep(config: ExperimentConfig, files: dict | None = None) -> SweepResult:
    """Every grid point; one upload per (k, n_b) shared by all tau values.

    The tau heuristic is computed on the exact-dedup (tau = 0) store, since it
    has to be known before any tau is chosen.
    """
    files = load_corpus(config.corpus) if files is None else files
    rows, best, heur = [], {}, {}
    for pt in ParameterGrid({"k": list(config.k_grid), "n_b": list(config.n_b_grid)}):
        k, n_b = pt["k"], pt["n_b"]
        params = config.params(k, n_b)
        if params is None:
            continue
        rng = point_rng(config.seed, k, n_b)
        t0 = time.perf_counter()
        try:
            up = upload_corpus(files, params, config.strategy, rng)
            upload_ms = (time.perf_counter() - t0) * 1000
            h = _heuristic(up, config, rng)
        except Exception as exc:  # one bad point must not kill the sweep
            log.error("k=%d n_b=%d failed during upload: %s", k, n_b, exc)
            continue
        heur[(k, params.n_b)] = h
        group = []
        for tau in config.tau_grid:
            t1 = time.perf_counter()
            try:
                cloud = compress_all(up, tau, config.strategy)
                if config.verify:
                    verify_roundtrip(up, cloud)
            except VerificationError:
                raise
            except Exception as exc:
                log.error("k=%d n_b=%d tau=%d failed: %s", k, n_b, tau, exc)
                continue
            wall = int(upload_ms + (time.perf_counter() - t1) * 1000)
            row = measure(up, cloud, h, wall)
            log.info("k=%d n_b=%d tau=%d gcr=%.4f", k, params.n_b, tau, float(row.gcr))
            group.append(row)
        if group:
            best[(k, params.n_b)] = min(group, key=lambda r: (r.gcr, r.tau)).tau
            rows.extend(group)
    result = SweepResult(rows, best, heur)
    if config.out is not None:
        Path(config.out).write_text(result.to_csv())
    return result


def read_sweep_csv(text: str) -> list:
    """Parse sweep CSV text back into dicts (comment lines skipped)."""
    lines = text.splitlines()
    if not lines or lines[0] != SCHEMA:
        raise ValueError("missing sweep schema header")
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    return list(csv.DictReader(body))

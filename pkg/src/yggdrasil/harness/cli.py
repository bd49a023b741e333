"""Command line interface: ``ygg <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 store corruption.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .. import analysis
from ..client import ClientStore, decode_bases, encode_bases, get
from ..cloud import CloudStore, compress, decompress
from ..errors import (CorruptedDeviationError, CorruptedStoreError, ParamsError,
                      UnknownIdError, VerificationError, YggdrasilError)
from ..policy import DeletionStrategy, Policy
from ..symstring import ChunkedFile, Params, chunk, dechunk, pack, seeded_rng
from .corpus import SyntheticCorpusSpec, read_corpus_dir, synthesize_corpus, synthesize_to_size
from .pipeline import ExperimentConfig, sweep

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_CORRUPT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _shared() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--k", type=int, default=8, help="bits per symbol")
    p.add_argument("--chunk-bits", type=int, default=1024,
                   help="chunk size n_o (bits, or symbols with --units symbols)")
    p.add_argument("--base-bits", type=int, default=960,
                   help="base size n_b (bits, or symbols with --units symbols)")
    p.add_argument("--tau", type=int, default=0, help="max edit ops per deduplicated base")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sh-bits", type=int, default=64, help="per-chunk id/header bits")
    p.add_argument("--units", choices=("bits", "symbols"), default="bits")
    p.add_argument("--strategy", choices=[s.value for s in DeletionStrategy], default="uniform")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def params_from(args) -> Params:
    k = args.k
    n_o, n_b = args.chunk_bits, args.base_bits
    if args.units == "bits":
        if n_o % k or n_b % k:
            raise UsageError(f"--chunk-bits and --base-bits must be multiples of k={k}")
        n_o, n_b = n_o // k, n_b // k
    return Params(k=k, n_o=n_o, n_b=n_b, tau=args.tau, s_h=args.sh_bits)


def _read_input(path: Path) -> dict:
    if not path.exists():
        raise UsageError(f"{path} does not exist")
    return read_corpus_dir(path)


def _emit(args, data: bytes):
    if args.out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        args.out.write_bytes(data)


# subcommands ------------------------------------------------------------------

def cmd_gen(args):
    kw = dict(template_pool=args.template_pool, timestamp_rate=args.rate,
              block_rate=args.rate, host_rate=args.rate,
              record_width=args.record_width, seed=args.seed)
    if args.size_bytes:
        data = synthesize_to_size(args.size_bytes, **kw)
    else:
        data = synthesize_corpus(SyntheticCorpusSpec(n_lines=args.lines, **kw))
    _emit(args, data)
    return EXIT_OK


def cmd_upload(args):
    p = params_from(args)
    files = _read_input(args.input)
    client = ClientStore.load(args.client_store) if args.client_store.exists() else ClientStore(p)
    if client.params.replace(tau=p.tau) != p:
        raise UsageError("client store was created with different parameters")
    policy = Policy(p.k, p.n_o, p.n_b, args.strategy)
    rng = seeded_rng(args.seed)
    pairs = []
    for name, raw in files.items():
        if name in client.files:
            raise UsageError(f"file {name!r} already uploaded")
        pairs.extend(client.upload_file(name, chunk(raw, p), policy, rng))
    client.save(args.client_store)
    out = args.out or Path(str(args.client_store) + ".bases")
    out.write_bytes(encode_bases(p, pairs))
    print(f"uploaded {len(files)} file(s), {len(pairs)} chunk(s); bases -> {out}")
    return EXIT_OK


def cmd_compress(args):
    bp, pairs = decode_bases(args.bases.read_bytes())
    p = bp.replace(tau=args.tau)
    if args.cloud_store.exists():
        store = CloudStore.load(args.cloud_store, tau=args.tau)
        if store.params != p:
            raise UsageError("cloud store was created with different parameters")
    else:
        store = CloudStore(p, strategy=DeletionStrategy.parse(args.strategy))
    before = len(store.bases)
    for cid, base in pairs:
        compress(store, cid, base)
    store.save(args.cloud_store)
    print(f"compressed {len(pairs)} base(s); {len(store.bases) - before} new, "
          f"{len(store.bases)} stored")
    return EXIT_OK


def cmd_get(args):
    client = ClientStore.load(args.client_store)
    cloud = CloudStore.load(args.cloud_store)
    if args.file is not None:
        entry = client.files.get(args.file)
        if entry is None:
            raise UsageError(f"unknown file {args.file!r}")
        p = client.params
        chunks = tuple(get(c, client, decompress(cloud, c)) for c in entry.chunk_ids)
        _emit(args, dechunk(ChunkedFile(chunks, entry.original_bit_length, p.k, p.n_o)))
        return EXIT_OK
    if args.id is None:
        raise UsageError("give --id or --file")
    f = get(args.id, client, decompress(cloud, args.id))
    _emit(args, pack(f))
    return EXIT_OK


def cmd_ratios(args):
    p = params_from(args)
    r = Fraction(args.r)
    rep = analysis.formula_report(p, r)
    thr = rep.inputs["ccr_r_threshold"]
    print(f"k={p.k} n_o={p.n_o} n_b={p.n_b} tau={p.tau} s_h={p.s_h} r={r}")
    print(rep)
    print(f"UCR={rep.ucr} CCR={rep.ccr} GCR={rep.gcr}")
    print(f"UCR<1: {rep.inputs['ucr_below_one']}")
    if thr is not None:
        print(f"CCR<=1 for r <= {float(thr):.6g}")
    return EXIT_OK


def cmd_uncertainty(args):
    if args.table:
        rows = analysis.uncertainty_table_rows()
    else:
        p = params_from(args)
        rows = [(p.k, p.n_b, p.n_o)]
    for k, n_b, n_o in rows:
        rep = analysis.uncertainty(k, n_o, n_b)
        digits = str(rep.n_preimages)
        exact = f"{rep.n_preimages:,}" if len(digits) <= 40 else f"<{len(digits)} digits>"
        print(f"k={k} n_b={n_b} n_o={n_o} U_p = {exact} ({analysis.scientific(rep.n_preimages)}) "
              f"U = {analysis.scientific(rep.u_metric)}")
    return EXIT_OK


def cmd_sweep(args):
    if not args.k_grid or not args.base_grid or not args.tau_grid:
        raise UsageError("sweep grids must not be empty")
    if args.corpus is not None:
        if not args.corpus.exists():
            raise UsageError(f"{args.corpus} does not exist")
        corpus = args.corpus
    else:
        kw = dict(template_pool=args.template_pool, timestamp_rate=args.rate,
                  block_rate=args.rate, host_rate=args.rate,
                  record_width=args.record_width, seed=args.seed)
        corpus = synthesize_to_size(args.size_bytes, **kw)
    cfg = ExperimentConfig(corpus=corpus, chunk_size=args.chunk_bits, k_grid=args.k_grid,
                           n_b_grid=args.base_grid, tau_grid=args.tau_grid, seed=args.seed,
                           units=args.units, s_h=args.sh_bits, strategy=args.strategy,
                           verify=args.verify, out=args.out)
    result = sweep(cfg)
    if args.out is None:
        sys.stdout.write(result.to_csv())
    return EXIT_OK


def cmd_verify(args):
    client = ClientStore.load(args.client_store)
    cloud = CloudStore.load(args.cloud_store)
    originals = _read_input(args.input) if args.input is not None else None
    p = client.params
    n = 0
    for name, entry in client.files.items():
        chunks = []
        for cid in entry.chunk_ids:
            try:
                chunks.append(get(cid, client, decompress(cloud, cid)))
            except UnknownIdError:
                raise VerificationError(cid, f"chunk {cid} of {name!r} missing from cloud") from None
            n += 1
        data = dechunk(ChunkedFile(tuple(chunks), entry.original_bit_length, p.k, p.n_o))
        if originals is not None:
            if name not in originals:
                raise VerificationError(-1, f"{name!r} not found in {args.input}")
            if data != originals[name]:
                raise VerificationError(-1, f"{name!r} differs from the original")
    print(f"verified {len(client.files)} file(s), {n} chunk(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = _shared()
    parser = _Parser(prog="ygg", description="Dual-side deduplication toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def corpus_flags(sp, lines=True):
        if lines:
            sp.add_argument("--lines", type=int, default=10_000)
        sp.add_argument("--size-bytes", type=int, default=0 if lines else 1_000_000)
        sp.add_argument("--template-pool", type=int, default=8)
        sp.add_argument("--rate", type=float, default=0.3, help="field mutation rate")
        sp.add_argument("--record-width", type=int, default=128)

    sp = sub.add_parser("gen", parents=[shared], help="write a synthetic log corpus")
    corpus_flags(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("upload", parents=[shared], help="client side: raw files -> bases + client store")
    sp.add_argument("input", type=Path)
    sp.add_argument("--client-store", type=Path, required=True)
    sp.set_defaults(func=cmd_upload)

    sp = sub.add_parser("compress", parents=[shared], help="cloud side: bases -> cloud store")
    sp.add_argument("bases", type=Path)
    sp.add_argument("--cloud-store", type=Path, required=True)
    sp.set_defaults(func=cmd_compress)

    sp = sub.add_parser("get", parents=[shared], help="reconstruct a chunk or file")
    sp.add_argument("--client-store", type=Path, required=True)
    sp.add_argument("--cloud-store", type=Path, required=True)
    sp.add_argument("--id", type=int)
    sp.add_argument("--file")
    sp.set_defaults(func=cmd_get)

    sp = sub.add_parser("ratios", parents=[shared], help="closed-form UCR/CCR/GCR")
    sp.add_argument("--r", default="1", help="base fraction N_b/N_f (e.g. 0.25 or 1/4)")
    sp.set_defaults(func=cmd_ratios)

    sp = sub.add_parser("uncertainty", parents=[shared], help="preimage counts and uncertainty")
    sp.add_argument("--table", action="store_true", help="print the standard nine-row table")
    sp.set_defaults(func=cmd_uncertainty)

    sp = sub.add_parser("sweep", parents=[shared], help="parameter sweep to CSV")
    sp.add_argument("--corpus", type=Path, default=None, help="directory of input files")
    corpus_flags(sp, lines=False)
    sp.add_argument("--k-grid", type=_int_list, default=[8])
    sp.add_argument("--base-grid", type=_int_list, default=[960])
    sp.add_argument("--tau-grid", type=_int_list, default=[0, 32, 40, 48, 64, 96])
    sp.add_argument("--verify", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", parents=[shared], help="reconstruct every stored file")
    sp.add_argument("--client-store", type=Path, required=True)
    sp.add_argument("--cloud-store", type=Path, required=True)
    sp.add_argument("--input", type=Path, default=None, help="originals to compare against")
    sp.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (CorruptedStoreError, CorruptedDeviationError) as exc:
        print(f"corrupted store: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (UsageError, ParamsError, UnknownIdError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except YggdrasilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

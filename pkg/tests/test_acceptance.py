"""Acceptance checks, one test per criterion; verdicts print in the terminal summary."""

import itertools
import struct
import time
from fractions import Fraction

import numpy as np
import pytest

from yggdrasil import _kernels
from yggdrasil.analysis import (ccr_formula, gcr_formula, mantissa_exponent, measured_ratios,
                                n_preimages, supersequence_count_oracle, ucr_formula)
from yggdrasil.client import ClientStore, client_storage_bits, get, upload
from yggdrasil.cloud import CloudStore, cloud_storage_bits, compress, decompress
from yggdrasil.errors import CorruptedStoreError
from yggdrasil.harness.corpus import synthesize_to_size
from yggdrasil.harness.pipeline import ExperimentConfig, sweep
from yggdrasil.metrics import (Swap, apply_script, damerau_levenshtein, exact_distances_from,
                               hamming, swap_script)
from yggdrasil.policy import Policy
from yggdrasil.symstring import Params, SymbolString, seeded_rng

SWEEP_TAUS = (0, 32, 40, 48, 64, 96)


@pytest.fixture(scope="module")
def big_sweep():
    """The redundant 10 MB corpus swept over tau at k=8, 1024-bit chunks, 960-bit bases."""
    t0 = time.perf_counter()
    data = synthesize_to_size(10_000_000, template_pool=1, timestamp_rate=1.0, block_rate=1.0,
                              host_rate=1.0, record_width=128, seed=1)
    cfg = ExperimentConfig(corpus=data, k_grid=(8,), n_b_grid=(960,), tau_grid=SWEEP_TAUS, seed=0)
    result = sweep(cfg)
    return result, len(data), time.perf_counter() - t0


@pytest.fixture(scope="module")
def small_sweep():
    """A multi-width sweep on a small corpus, for row-level laws."""
    data = synthesize_to_size(200_000, template_pool=2, record_width=128, seed=3)
    cfg = ExperimentConfig(corpus=data, chunk_size=256, k_grid=(2, 4, 8, 16), n_b_grid=(224, 240),
                           tau_grid=(0, 4, 8, 16), seed=5, verify=True)
    return sweep(cfg)


def test_criterion_1_uncertainty_table(acceptance):
    cases = {(4, 10, 15): (2.35, 9), (8, 10, 15): (3.24, 15),
             (2, 100, 150): (1.72, 64), (8, 500, 1000): (5.05, 1502)}
    t0 = time.perf_counter()
    bad = []
    for (k, n_b, n_o), (mant, exp) in cases.items():
        got_m, got_e = mantissa_exponent(n_preimages(k, n_o, n_b), sig=6)
        if got_e != exp or abs(got_m - mant) > 0.02:
            bad.append(f"({k},{n_b},{n_o}) -> {got_m}e{got_e}")
    exact = n_preimages(2, 15, 10)
    if exact != 853_570:
        bad.append(f"(2,10,15) -> {exact}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0
    acceptance.record(1, ok, f"5 rows checked in {elapsed:.3f}s"
                      + (f"; mismatches {bad}" if bad else ""))
    assert ok


def test_criterion_2_oracle(acceptance):
    rng = seeded_rng(2)
    t0 = time.perf_counter()
    checked, mismatches = 0, []
    while checked < 120:
        k = int(rng.choice([1, 2]))
        n_o = int(rng.integers(1, 13))
        n_b = int(rng.integers(0, min(8, n_o) + 1))
        base = SymbolString(rng.integers(0, 1 << k, n_b).tolist(), k)
        if supersequence_count_oracle(base, n_o) != n_preimages(k, n_o, n_b):
            mismatches.append((k, n_o, tuple(base.symbols)))
        checked += 1
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 60
    acceptance.record(2, ok, f"{checked} instances, {len(mismatches)} mismatches, {elapsed:.1f}s")
    assert ok


def _mutate(f: SymbolString, rng, n_edits: int) -> SymbolString:
    arr = f.to_array().astype(np.int64)
    for _ in range(n_edits):
        if rng.random() < 0.5:
            i, j = rng.choice(len(arr), 2, replace=False)
            arr[i], arr[j] = arr[j], arr[i]
        else:
            arr[rng.integers(len(arr))] = rng.integers(1 << f.k)
    return SymbolString(arr.tolist(), f.k)


def test_criterion_3_roundtrip(acceptance):
    rng = seeded_rng(3)
    per_k = 2500
    failures, total = 0, 0
    for k in (2, 4, 8, 16):
        n_o, n_b = 48, 40
        params = Params(k=k, n_o=n_o, n_b=n_b, tau=6)
        policy = Policy(k, n_o, n_b)
        client, cloud = ClientStore(params), CloudStore(params)
        templates = [SymbolString(rng.integers(0, 1 << k, n_o).tolist(), k) for _ in range(20)]
        originals = {}
        for i in range(per_k):
            if i % 2:
                f = SymbolString(rng.integers(0, 1 << k, n_o).tolist(), k)
            else:
                f = _mutate(templates[int(rng.integers(len(templates)))], rng,
                            int(rng.integers(0, 4)))
            cid, base, _ = upload(policy, f, rng, client)
            compress(cloud, cid, base)
            originals[cid] = f
        for cid, f in originals.items():
            total += 1
            failures += get(cid, client, decompress(cloud, cid)) != f
    ok = failures == 0 and total == 10_000
    acceptance.record(3, ok, f"{total} chunks over k in {{2,4,8,16}}, {failures} failures")
    assert ok


def _exhaustive_bfs_vs_greedy(max_len=5):
    """Count pairs where exact BFS exceeds the greedy distance over all short strings."""
    pairs = violations = 0
    for k in (1, 2):
        radix = 1 << k
        for n in range(1, max_len + 1):
            codes = np.arange(radix ** n)
            strings = ((codes[:, None] // radix ** np.arange(n)) % radix).astype(np.uint8)
            ws = _kernels.make_workspace(n, k)
            pos_bits = max(1, (n - 1).bit_length())
            for a in strings:
                exact = exact_distances_from(SymbolString(a.tolist(), k))
                for code, b in enumerate(strings):
                    greedy = _kernels.greedy_dense(a, b, k, pos_bits, True, ws)
                    pairs += 1
                    violations += int(exact[code]) > greedy
    return pairs, violations


def test_criterion_4_metric_laws(acceptance):
    rng = seeded_rng(4)
    n = 16
    dl_bad = ham_bad = apply_bad = 0
    for k in (2, 4):
        for _ in range(1000):
            a = SymbolString(rng.integers(0, 1 << k, n).tolist(), k)
            b = _mutate(a, rng, int(rng.integers(0, 8)))
            script = swap_script(a, b)
            d = len(script)
            dl_bad += damerau_levenshtein(a, b) > d
            ham_bad += d > hamming(a, b)
            apply_bad += apply_script(a, script) != b
    pairs, bfs_bad = _exhaustive_bfs_vs_greedy()
    ok = dl_bad == ham_bad == apply_bad == bfs_bad == 0
    acceptance.record(4, ok, f"DL<=swap violated on {dl_bad}/2000 pairs; swap<=Hamming violated "
                      f"{ham_bad}; apply(swap_script) mismatches {apply_bad}; "
                      f"BFS>greedy on {bfs_bad}/{pairs} short pairs")
    assert ok


def test_criterion_5_ratio_algebra(acceptance, big_sweep, small_sweep):
    rng = seeded_rng(5)
    formula_bad = 0
    for _ in range(1000):
        k = int(rng.choice([1, 2, 4, 8, 16]))
        n_o = int(rng.integers(1, 4097))
        p = Params(k=k, n_o=n_o, n_b=int(rng.integers(1, n_o + 1)),
                   tau=int(rng.integers(0, 200)), s_h=int(rng.integers(1, 129)))
        den = int(rng.integers(1, 10_000))
        r = Fraction(int(rng.integers(0, den + 1)), den)
        formula_bad += gcr_formula(p, r) != ucr_formula(p) + ccr_formula(p, r)
    # Small pipeline runs, with every storage term recomputed from the stores.
    runs = run_bad = 0
    for k, tau in itertools.product((2, 4, 8), (0, 3, 8)):
        params = Params(k=k, n_o=32, n_b=28, tau=tau)
        policy = Policy(k, 32, 28)
        client, cloud = ClientStore(params), CloudStore(params)
        seed_str = SymbolString(rng.integers(0, 1 << k, 32).tolist(), k)
        for _ in range(200):
            cid, base, _ = upload(policy, _mutate(seed_str, rng, 2), rng, client)
            compress(cloud, cid, base)
        cb, kb = client_storage_bits(client), cloud_storage_bits(cloud)
        db = 200 * k * 32
        rep = measured_ratios(cb, kb, db)
        runs += 1
        run_bad += rep.gcr != Fraction(cb + kb, db) or rep.gcr != rep.ucr + rep.ccr
    rows = big_sweep[0].rows + small_sweep.rows
    row_bad = sum(row.gcr != row.ucr + row.ccr for row in rows)
    ok = formula_bad == run_bad == row_bad == 0 and rows
    acceptance.record(5, bool(ok), f"1000 formula draws ({formula_bad} bad), {runs} direct runs "
                      f"({run_bad} bad), {len(rows)} sweep rows ({row_bad} bad)")
    assert ok


def test_criterion_6_threshold_and_bound(acceptance, big_sweep, small_sweep):
    rows = big_sweep[0].rows + small_sweep.rows
    ops_bad = [(r.k, r.n_b, r.tau, r.max_ops) for r in rows if r.max_ops > r.tau]
    bound_bad = [(r.k, r.n_b, r.tau) for r in rows if r.cloud_bits > r.bound_bits]
    ok = bool(rows) and not ops_bad and not bound_bad
    acceptance.record(6, ok, f"{len(rows)} sweep rows; over-tau deviations {ops_bad or 'none'}; "
                      f"bound violations {bound_bad or 'none'}")
    assert ok


def test_criterion_7_trend(acceptance, big_sweep):
    result, size, elapsed = big_sweep
    rows = sorted(result.rows, key=lambda r: r.tau)
    taus = [r.tau for r in rows]
    gcr = {r.tau: r.gcr for r in rows}
    best = result.best[(8, 120)]
    h = result.heuristics[(8, 120)]
    ucr_constant = len({r.ucr for r in rows}) == 1
    interior = gcr[best] < gcr[taus[0]] and gcr[best] < gcr[taus[-1]]
    near = h is not None and abs(best - h) <= 0.5 * h
    ok = (size >= 10_000_000 and taus == list(SWEEP_TAUS) and ucr_constant and interior and near
          and elapsed < 600)
    curve = ", ".join(f"{t}:{float(g):.3f}" for t, g in gcr.items())
    acceptance.record(7, ok, f"{size} bytes; UCR constant={ucr_constant}; GCR by tau {{{curve}}}; "
                      f"argmin tau={best}, heuristic={h}; {elapsed:.0f}s")
    assert ok


def test_criterion_8_persistence(acceptance, tmp_path):
    rng = seeded_rng(8)
    params = Params(k=4, n_o=24, n_b=20, tau=5)
    policy = Policy(4, 24, 20)
    client, cloud = ClientStore(params), CloudStore(params)
    seed_str = SymbolString(rng.integers(0, 16, 24).tolist(), 4)
    for _ in range(50):
        cid, base, _ = upload(policy, _mutate(seed_str, rng, 2), rng, client)
        compress(cloud, cid, base)
    client.add_file("doc", sorted(client.records), 24 * 4 * 50)
    # A final record that is one swap away from a stored base, so it carries ops.
    b0 = cloud.bases.get(min(cloud.bases)).symbols
    j = next(t for t in range(1, len(b0)) if b0[t] != b0[0])
    swapped = (b0[j],) + b0[1:j] + (b0[0],) + b0[j + 1:]
    compress(cloud, 1 << 40, SymbolString(swapped, 4))
    identical = []
    for store, cls in ((client, ClientStore), (cloud, CloudStore)):
        path = tmp_path / cls.__name__
        store.save(path)
        first = path.read_bytes()
        cls.load(path, tau=5).save(path)
        identical.append(first == path.read_bytes())

    def rejected(cls, data):
        try:
            cls.from_bytes(data)
        except CorruptedStoreError:
            return True
        return False

    c_raw, k_raw = client.to_bytes(), cloud.to_bytes()
    # The final record's op list, cut short or over-counted.
    last = cloud.records[1 << 40]
    n_ops = len(last.deviation)
    op_bytes = sum(9 if isinstance(op, Swap) else 21 for op in last.deviation.ops)
    count_at = len(k_raw) - op_bytes - 4
    inflated = k_raw[:count_at] + struct.pack("<I", n_ops + 1) + k_raw[count_at + 4:]
    corrupt = {
        "client magic": rejected(ClientStore, b"XXXX" + c_raw[4:]),
        "cloud magic": rejected(CloudStore, b"XXXX" + k_raw[4:]),
        "cloud ops cut": rejected(CloudStore, k_raw[:-3]),
        "cloud op count": rejected(CloudStore, inflated),
        "client deletions cut": rejected(ClientStore, c_raw[:len(c_raw) // 2]),
    }
    ok = all(identical) and all(corrupt.values())
    acceptance.record(8, ok, f"save/load/save identical client={identical[0]} "
                      f"cloud={identical[1]}; corruption rejected {corrupt}")
    assert ok

from fractions import Fraction

import numpy as np
import pytest

from yggdrasil.analysis import ucr_formula
from yggdrasil.cloud import pointer_bits
from yggdrasil.errors import ParamsError, VerificationError
from yggdrasil.harness.corpus import SyntheticCorpusSpec
from yggdrasil.harness.pipeline import (COLUMNS, SCHEMA, ExperimentConfig, compress_all,
                                        load_corpus, read_sweep_csv, run_pipeline, sweep, upload_corpus,
                                        verify_roundtrip)
from yggdrasil.symstring import seeded_rng

SMALL = SyntheticCorpusSpec(n_lines=400, template_pool=1, record_width=128, seed=3)


def test_config_validation():
    with pytest.raises(ParamsError):
        ExperimentConfig(tau_grid=())
    with pytest.raises(ParamsError):
        ExperimentConfig(units="bytes")
    with pytest.raises(ParamsError):
        ExperimentConfig(k_grid=(3,))


def test_geometry_units():
    cfg = ExperimentConfig(chunk_size=1024)
    assert cfg.geometry(8, 960) == (128, 120)
    assert cfg.geometry(32, 950) is None
    assert ExperimentConfig(chunk_size=64, units="symbols").geometry(8, 60) == (64, 60)


def test_unique_random_chunks_tau0():
    data = seeded_rng(0).integers(0, 256, 64 * 50, dtype=np.uint8).tobytes()
    cfg = ExperimentConfig(corpus=data, chunk_size=512, k_grid=(8,), n_b_grid=(512,), verify=True)
    row = run_pipeline(cfg, (8, 512, 0))
    assert row.n_b_count == row.n_f == 50
    assert row.ucr == ucr_formula(cfg.params(8, 512))


def test_duplicate_only_corpus():
    data = bytes(range(16)) * 40
    cfg = ExperimentConfig(corpus=data, chunk_size=128, k_grid=(8,), n_b_grid=(128,), s_h=64)
    row = run_pipeline(cfg, (8, 128, 0))
    assert row.n_f == 40 and row.n_b_count == 1
    expected = Fraction(8 * 16 + 40 * (64 + pointer_bits(1)), 40 * 8 * 16)
    assert row.ccr == expected


def test_verify_detects_tampering():
    cfg = ExperimentConfig(corpus=SMALL, k_grid=(8,), n_b_grid=(960,))
    params = cfg.params(8, 960, 4)
    up = upload_corpus(load_corpus(SMALL), params, "uniform", seeded_rng(0))
    cloud = compress_all(up, 4)
    verify_roundtrip(up, cloud)
    cid = next(iter(up.originals))
    f = up.originals[cid]
    up.originals[cid] = type(f)(((f.symbols[0] + 1) % 256,) + f.symbols[1:], f.k)
    with pytest.raises(VerificationError) as exc:
        verify_roundtrip(up, cloud)
    assert exc.value.chunk_id == cid


def test_sweep_rows_and_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    cfg = ExperimentConfig(corpus=SMALL, k_grid=(4, 8), n_b_grid=(960,), tau_grid=(0, 24, 48),
                           verify=True, out=out)
    res = sweep(cfg)
    assert len(res.rows) == 6
    text = out.read_text()
    assert text.splitlines()[0] == SCHEMA
    assert text.splitlines()[1] == ",".join(COLUMNS)
    parsed = read_sweep_csv(text)
    assert len(parsed) == 6
    for row in res.rows:
        assert row.gcr == row.ucr + row.ccr
        assert row.cloud_bits <= row.bound_bits
        assert row.max_ops <= row.tau
    for k in (4, 8):
        ucrs = {r.ucr for r in res.rows if r.k == k}
        assert len(ucrs) == 1
    assert set(res.best) == {(4, 240), (8, 120)}
    assert "# best k=8 n_b_sym=120" in text


def test_sweep_single_point_and_determinism():
    cfg = ExperimentConfig(corpus=SMALL, k_grid=(8,), n_b_grid=(960,), tau_grid=(16,))
    a, b = sweep(cfg), sweep(cfg)
    assert len(a.rows) == 1

    def strip(res):
        return [line.rsplit(",", 1)[0] for line in res.to_csv().splitlines()]
    assert strip(a) == strip(b)


def test_sweep_skips_nonintegral_points():
    cfg = ExperimentConfig(corpus=SMALL, k_grid=(8, 32), n_b_grid=(968,), tau_grid=(0,))
    res = sweep(cfg)
    assert {r.k for r in res.rows} == {8}

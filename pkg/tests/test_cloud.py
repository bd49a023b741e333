import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yggdrasil.cloud import (BaseSet, CloudStore, cloud_bits_bound, cloud_storage_bits, compress,
                             decompress, paper_bits_bound, setup, tau_heuristic)
from yggdrasil.errors import (CorruptedStoreError, DuplicateIdError, LengthMismatchError,
                              UnknownIdError)
from yggdrasil.metrics import Swap, apply_script, swap_distance
from yggdrasil.policy import DeletionStrategy, Policy
from yggdrasil.symstring import Params, SymbolString, seeded_rng


def S(xs, k=4):
    return SymbolString(xs, k)


def store_with(bases, k=4, n_o=None, tau=0, s_h=64):
    n_b = len(bases[0]) if bases else 4
    st_ = CloudStore(Params(k=k, n_o=n_o or n_b, n_b=n_b, tau=tau, s_h=s_h))
    for i, b in enumerate(bases):
        compress(st_, 1000 + i, S(b, k))
    return st_


class TestSetup:
    def test_empty_uses_configured(self):
        store = CloudStore(Params(k=8, n_o=1024, n_b=950))
        assert setup(store) == Policy(8, 1024, 950)

    def test_reflects_bases(self):
        store = store_with([[1, 2, 3]], n_o=5)
        pol = setup(store)
        assert pol.n_b == 3 and pol.n_o == 5

    def test_strategy_hint(self):
        store = CloudStore(Params(k=4, n_o=5, n_b=3), strategy="runbreaking")
        assert setup(store).strategy is DeletionStrategy.RUNBREAKING

    def test_mixed_lengths_rejected(self):
        bs = BaseSet(4, 3)
        with pytest.raises(LengthMismatchError):
            bs.add(S([1, 2, 3, 4]))


class TestCompress:
    def test_exact_match(self):
        store = store_with([[1, 2, 3, 4]], tau=3)
        rec = compress(store, 1, S([1, 2, 3, 4]))
        assert rec.deviation.ops == () and rec.base_id == 0
        assert store.bases.refcount(0) == 2

    def test_tau_zero_inserts(self):
        store = store_with([[1, 2, 3, 4]], tau=0)
        rec = compress(store, 1, S([1, 3, 2, 4]))
        assert rec.base_id == 1 and len(store.bases) == 2

    def test_near_match_swap(self):
        store = store_with([[1, 2, 3, 4]], tau=1)
        rec = compress(store, 1, S([1, 3, 2, 4]))
        assert rec.base_id == 0
        assert rec.deviation.ops == (Swap(1, 2),)

    def test_beyond_tau_inserts(self):
        store = store_with([[1, 2, 3, 4]], tau=1)
        rec = compress(store, 1, S([4, 3, 2, 1]))  # two swaps away
        assert rec.base_id == 1

    def test_nearest_then_lowest_id(self):
        store = store_with([[0, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0]], tau=0)
        store.params = store.params.replace(tau=4)
        # Bases 1 and 2 are both one op from the upload; base 0 is three away.
        rec = compress(store, 1, S([1, 1, 1, 0]))
        assert rec.base_id == 1 and len(rec.deviation) == 1

    def test_duplicate_and_length(self):
        store = store_with([[1, 2, 3, 4]])
        with pytest.raises(DuplicateIdError):
            compress(store, 1000, S([1, 2, 3, 4]))
        with pytest.raises(LengthMismatchError):
            compress(store, 1, S([1, 2, 3]))

    def test_unknown_id_is_ignored_query(self):
        store = store_with([[1, 2, 3, 4]])
        before = store.to_bytes()
        with pytest.raises(UnknownIdError):
            decompress(store, 42)
        assert store.to_bytes() == before

    @settings(max_examples=40)
    @given(st.data())
    def test_laws(self, data):
        k = data.draw(st.sampled_from([1, 2, 4, 8, 16]))
        n_b = data.draw(st.integers(1, 24))
        tau = data.draw(st.integers(0, 8))
        alpha = min(1 << k, data.draw(st.integers(2, 6)))
        seed = data.draw(st.integers(0, 1000))
        rng = seeded_rng(seed)
        store = CloudStore(Params(k=k, n_o=n_b + 3, n_b=n_b, tau=tau))
        proto = rng.integers(0, alpha, n_b)
        uploads = {}
        for cid in range(40):
            f = proto.copy()
            hits = rng.integers(0, n_b, int(rng.integers(0, 4)))
            f[hits] = rng.integers(0, alpha, hits.size)
            uploads[cid] = SymbolString(f.tolist(), k)
            had_exact = store.bases.find_exact(uploads[cid]) is not None
            rec = compress(store, cid, uploads[cid])
            assert len(rec.deviation) <= tau
            assert apply_script(uploads[cid], rec.deviation) == store.bases.get(rec.base_id)
            if had_exact:
                assert rec.deviation.ops == ()
        for cid, f in uploads.items():
            assert decompress(store, cid) == f
        assert sum(store.bases.refcount(b) for b in store.bases) == len(store.records)
        assert cloud_storage_bits(store) <= cloud_bits_bound(store)


class TestAccounting:
    def test_single_record(self):
        store = CloudStore(Params(k=8, n_o=1024, n_b=950, s_h=64))
        compress(store, 1, SymbolString([3] * 950, 8))
        assert cloud_storage_bits(store) == 7600 + 64 + 1 == 7665

    def test_empty(self):
        assert cloud_storage_bits(CloudStore(Params())) == 0

    def test_one_swap_increment(self):
        p = Params(k=4, n_o=16, n_b=4, tau=2, s_h=32)
        store = CloudStore(p)
        compress(store, 1, S([1, 2, 3, 4]))
        compress(store, 2, S([5, 6, 7, 8]))
        before = cloud_storage_bits(store)
        rec = compress(store, 3, S([2, 1, 3, 4]))
        assert rec.deviation.ops == (Swap(0, 1),)
        assert cloud_storage_bits(store) - before == 32 + 1 + 2 * 4

    def test_paper_bound_is_swap_only(self):
        store = store_with([[1, 2, 3, 4]], tau=2)
        assert paper_bits_bound(store) <= cloud_bits_bound(store)


class TestTauHeuristic:
    def test_one_swap_apart(self):
        store = store_with([[1, 2, 3], [2, 1, 3]])
        assert tau_heuristic(store, 10, seeded_rng(0)) == 1

    def test_three_bases(self):
        store = store_with([[1, 2], [2, 1], [1, 1]])
        assert tau_heuristic(store, 10, seeded_rng(0)) == 1

    def test_needs_two(self):
        with pytest.raises(ValueError):
            tau_heuristic(store_with([[1, 2]]), 10, seeded_rng(0))

    def test_sampled_median(self):
        rng = seeded_rng(3)
        bases = [rng.integers(0, 16, 10).tolist() for _ in range(30)]
        store = store_with([list(b) for b in {tuple(b) for b in map(tuple, bases)}])
        ids = list(store.bases)
        all_d = sorted(swap_distance(store.bases.get(a), store.bases.get(b))
                       for i, a in enumerate(ids) for b in ids[i + 1:])
        h = tau_heuristic(store, 10_000, rng)
        assert h == all_d[(len(all_d) - 1) // 2]
        assert abs(tau_heuristic(store, 200, seeded_rng(1)) - h) <= 2


class TestPersistence:
    def _store(self):
        rng = seeded_rng(8)
        store = CloudStore(Params(k=4, n_o=20, n_b=16, tau=5))
        proto = rng.integers(0, 16, 16)
        for cid in range(30):
            f = proto.copy()
            idx = rng.integers(0, 16, 3)
            f[idx] = rng.integers(0, 16, 3)
            compress(store, cid, SymbolString(f.tolist(), 4))
        return store

    def test_save_load_save(self, tmp_path):
        store = self._store()
        assert any(len(r.deviation) for r in store.records.values())
        path = tmp_path / "s.ygg"
        store.save(path)
        loaded = CloudStore.load(path, tau=5)
        assert loaded.to_bytes() == path.read_bytes()
        for cid in store.records:
            assert decompress(loaded, cid) == decompress(store, cid)

    def test_loaded_store_keeps_deduplicating(self):
        store = self._store()
        loaded = CloudStore.from_bytes(store.to_bytes(), tau=5)
        f = loaded.bases.get(0)
        assert compress(loaded, 999, f).base_id == 0
        assert loaded.bases.next_id == store.bases.next_id

    @pytest.mark.parametrize("mutate", [
        lambda b: b"YGGX" + b[4:],
        lambda b: b[:4] + b"\x09" + b[5:],
        lambda b: b[:-1],
        lambda b: b[:-9],
        lambda b: b + b"\x00",
    ])
    def test_corruption(self, mutate):
        with pytest.raises(CorruptedStoreError):
            CloudStore.from_bytes(mutate(self._store().to_bytes()))

    def test_bad_refcount(self):
        store = self._store()
        store.bases._refcount[0] += 1
        with pytest.raises(CorruptedStoreError):
            CloudStore.from_bytes(store.to_bytes())

    def test_bad_op_tag(self):
        store = CloudStore(Params(k=4, n_o=4, n_b=4, tau=2))
        compress(store, 1, S([1, 2, 3, 4]))
        compress(store, 2, S([2, 1, 3, 4]))
        raw = bytearray(store.to_bytes())
        raw[-9] = 7  # tag byte of the only Swap op (tag, u32, u32)
        with pytest.raises(CorruptedStoreError):
            CloudStore.from_bytes(bytes(raw))

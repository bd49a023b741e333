"""scikit-learn style front end for running the whole protocol on a corpus."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_corpus, check_geometry
from .analysis import measured_ratios
from .client import client_storage_bits, get
from .cloud import cloud_storage_bits, decompress
from .harness.pipeline import compress_all, upload_corpus
from .policy import DeletionStrategy
from .symstring import ChunkedFile, Params, dechunk, seeded_rng


class DualDeduplicator(BaseEstimator):
    """Upload a corpus through the client transform and deduplicate it in the cloud.

    Parameters
    ----------
    k : bits per symbol.
    chunk_size, base_size : n_o and n_b, in ``units`` ("bits" or "symbols").
    tau : max edit operations per deduplicated base.
    s_h : per-chunk header bits.
    strategy : "uniform" or "runbreaking".
    seed : seed of the deletion RNG.

    After :meth:`fit`: ``client_store_``, ``cloud_store_``, ``ratios_``
    (a :class:`~yggdrasil.analysis.RatioReport`), ``n_chunks_``, ``n_bases_``.
    """

    def __init__(self, k=8, chunk_size=1024, base_size=960, tau=0, s_h=64,
                 strategy="uniform", seed=0, units="bits"):
        self.k = k
        self.chunk_size = chunk_size
        self.base_size = base_size
        self.tau = tau
        self.s_h = s_h
        self.strategy = strategy
        self.seed = seed
        self.units = units

    def _params(self) -> Params:
        n_o, n_b = check_geometry(self.k, self.chunk_size, self.base_size, self.units)
        return Params(k=self.k, n_o=n_o, n_b=n_b, tau=self.tau, s_h=self.s_h)

    def fit(self, X, y=None):
        docs = check_corpus(X)
        params = self._params()
        strategy = DeletionStrategy.parse(self.strategy)
        up = upload_corpus(docs, params, strategy, seeded_rng(self.seed))
        cloud = compress_all(up, params.tau, strategy)
        n_f = len(cloud.records)
        if n_f == 0:
            raise ValueError("corpus produced no chunks")
        self.params_ = params
        self.client_store_ = up.client
        self.cloud_store_ = cloud
        self.n_chunks_ = n_f
        self.n_bases_ = len(cloud.bases)
        self.ratios_ = measured_ratios(client_storage_bits(up.client), cloud_storage_bits(cloud),
                                       n_f * params.k * params.n_o)
        return self

    def reconstruct(self, name=None):
        """Original bytes of one document, or a dict of all of them."""
        check_is_fitted(self, "cloud_store_")
        client, cloud, p = self.client_store_, self.cloud_store_, self.params_

        def rebuild(entry):
            chunks = tuple(get(c, client, decompress(cloud, c)) for c in entry.chunk_ids)
            return dechunk(ChunkedFile(chunks, entry.original_bit_length, p.k, p.n_o))

        if name is not None:
            return rebuild(client.files[name])
        return {n: rebuild(e) for n, e in client.files.items()}

    def transform(self, X=None):
        """Reconstructed documents in fit order; ``X`` is ignored."""
        return list(self.reconstruct().values())

    def fit_transform(self, X, y=None):
        return self.fit(X).transform()

    def score(self, X=None, y=None) -> float:
        """Negative global compression ratio (higher is better), so grid
        searches over ``tau`` pick the most compact setting. Refits on ``X``
        when one is given."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "ratios_")
        return -float(self.ratios_.gcr)

"""Input checks shared by the estimator and the harness."""

from __future__ import annotations

from collections.abc import Mapping

from .errors import ParamsError
from .symstring import ALLOWED_K


def check_corpus(X) -> dict:
    """Normalize a corpus to ``{name: bytes}``.

    Accepts a single bytes-like object, a mapping of names to bytes, or a
    sequence of bytes (named ``doc0``, ``doc1``, ...). ``str`` items are
    UTF-8 encoded.
    """
    def as_bytes(x):
        if isinstance(x, str):
            return x.encode("utf-8")
        if isinstance(x, (bytes, bytearray, memoryview)):
            return bytes(x)
        raise TypeError(f"corpus items must be bytes or str, got {type(x).__name__}")

    if isinstance(X, (bytes, bytearray, memoryview, str)):
        return {"doc0": as_bytes(X)}
    if isinstance(X, Mapping):
        docs = {str(name): as_bytes(v) for name, v in X.items()}
    else:
        try:
            items = list(X)
        except TypeError:
            raise TypeError(f"cannot interpret {type(X).__name__} as a corpus") from None
        docs = {f"doc{i}": as_bytes(v) for i, v in enumerate(items)}
    if not docs:
        raise ValueError("corpus is empty")
    return docs


def check_geometry(k: int, chunk_size: int, base_size: int, units: str = "bits") -> tuple:
    """``(n_o, n_b)`` in symbols for sizes given in ``units``."""
    if k not in ALLOWED_K:
        raise ParamsError(f"k must be one of {ALLOWED_K}, got {k}")
    if units == "bits":
        if chunk_size % k or base_size % k:
            raise ParamsError(f"sizes {chunk_size}/{base_size} bits are not multiples of k={k}")
        return chunk_size // k, base_size // k
    if units == "symbols":
        return chunk_size, base_size
    raise ParamsError(f"units must be 'bits' or 'symbols', got {units!r}")

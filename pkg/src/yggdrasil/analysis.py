"""Closed-form compression ratios, preimage counting and privacy diagnostics.

Ratios are exact :class:`fractions.Fraction` values over bit counts;
decimal strings are produced only when rendering.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import NamedTuple

import numpy as np

from .errors import InstanceTooLargeError, ParamsError
from .symstring import ALLOWED_K, Params, SymbolString, ceil_log2

ORACLE_LIMIT = 10**7
BITMAP_LIMIT = 1 << 26


class FormulaInputs(NamedTuple):
    """Closed-form inputs. Unlike :class:`Params` this admits ``s_h = 0``,
    handy for isolating the deviation terms."""

    k: int
    n_o: int
    n_b: int
    tau: int = 0
    s_h: int = 0

    @property
    def n_del(self) -> int:
        return self.n_o - self.n_b

    @property
    def pos_bits(self) -> int:
        return ceil_log2(self.n_o)


def formula_inputs(k: int, n_o: int, n_b: int, tau: int = 0, s_h: int = 0) -> FormulaInputs:
    if k < 1 or not 1 <= n_b <= n_o or tau < 0 or s_h < 0:
        raise ParamsError(f"invalid formula inputs k={k} n_o={n_o} n_b={n_b} tau={tau} s_h={s_h}")
    return FormulaInputs(k, n_o, n_b, tau, s_h)


def _as_fraction(r) -> Fraction:
    r = Fraction(r)
    if not 0 <= r <= 1:
        raise ParamsError(f"base fraction r must lie in [0, 1], got {r}")
    return r


def ucr_formula(p: Params) -> Fraction:
    """Client ratio: (x*(ceil(log2 n_o) + k) + s_h) / (k*n_o) with x = n_o - n_b."""
    return Fraction(p.n_del * (p.pos_bits + p.k) + p.s_h, p.k * p.n_o)


def ucr_below_one(p: Params) -> bool:
    return p.s_h + p.n_del * (p.pos_bits + p.k) < p.k * p.n_o


def ccr_formula(p: Params, r) -> Fraction:
    """Cloud ratio with every deduplicated string charged tau swaps."""
    r = _as_fraction(r)
    ops = 2 * p.tau * p.pos_bits
    return (p.s_h + ops + r * (p.k * p.n_b - ops)) / (p.k * p.n_o)


def ccr_r_threshold(p: Params):
    """Largest r with CCR <= 1, written as 1 - (s_h - k*x) / (k*(n_o - x) - 2*tau*L).

    Returns None when the denominator vanishes.
    """
    denom = p.k * (p.n_o - p.n_del) - 2 * p.tau * p.pos_bits
    if denom == 0:
        return None
    return 1 - Fraction(p.s_h - p.k * p.n_del, denom)


def gcr_formula(p: Params, r) -> Fraction:
    return ucr_formula(p) + ccr_formula(p, r)


def gcr_closed_form(p: Params, r) -> Fraction:
    """Expanded global ratio, term by term."""
    r = _as_fraction(r)
    L, x, k = p.pos_bits, p.n_del, p.k
    num = (2 * p.s_h + k * x + (2 * p.tau + x) * L
           + r * (k * p.n_b - 2 * p.tau * L))
    return Fraction(num) / (k * p.n_o)


@dataclass(frozen=True)
class RatioReport:
    ucr: Fraction
    ccr: Fraction
    gcr: Fraction
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gcr != self.ucr + self.ccr:
            raise ValueError("gcr must equal ucr + ccr")

    def decimal(self, digits: int = 4) -> dict:
        return {name: f"{float(getattr(self, name)):.{digits}f}" for name in ("ucr", "ccr", "gcr")}

    def __str__(self):
        d = self.decimal()
        return f"UCR={d['ucr']} CCR={d['ccr']} GCR={d['gcr']}"


def formula_report(p: Params, r) -> RatioReport:
    r = _as_fraction(r)
    u, c = ucr_formula(p), ccr_formula(p, r)
    inputs = dict(k=p.k, n_o=p.n_o, n_b=p.n_b, tau=p.tau, s_h=p.s_h, r=r,
                  ucr_below_one=ucr_below_one(p), ccr_r_threshold=ccr_r_threshold(p))
    return RatioReport(u, c, u + c, inputs)


def measured_ratios(client_bits: int, cloud_bits: int, db_bits: int, **inputs) -> RatioReport:
    """Ratios of measured storage to the raw database size ``N_f * k * n_o``."""
    if db_bits <= 0:
        raise ValueError("database size must be positive")
    u = Fraction(client_bits, db_bits)
    c = Fraction(cloud_bits, db_bits)
    inputs.update(client_bits=client_bits, cloud_bits=cloud_bits, db_bits=db_bits)
    return RatioReport(u, c, u + c, inputs)


# uncertainty ------------------------------------------------------------------

def _check_sizes(k: int, n_o: int, n_b: int):
    if k < 1:
        raise ParamsError(f"k must be positive, got {k}")
    if not 0 <= n_b <= n_o:
        raise ParamsError(f"need 0 <= n_b <= n_o, got n_b={n_b}, n_o={n_o}")


def n_preimages(k: int, n_o: int, n_b: int) -> int:
    """Number of length-``n_o`` strings over 2**k symbols that contain a given
    length-``n_b`` base as a subsequence (independent of the base).

        sum_{j=0}^{n_o-n_b} C(n_o, j+n_b) * (2**k - 1)**(n_o-n_b-j)
    """
    _check_sizes(k, n_o, n_b)
    q = (1 << k) - 1
    x = n_o - n_b
    return sum(comb(n_o, j + n_b) * q ** (x - j) for j in range(x + 1))


def preimage_lower_bound(k: int, n_o: int, n_b: int) -> int:
    """First term of :func:`n_preimages`: C(n_o, n_b) * (2**k - 1)**(n_o - n_b)."""
    _check_sizes(k, n_o, n_b)
    return comb(n_o, n_b) * ((1 << k) - 1) ** (n_o - n_b)


def _digits(n: int) -> int:
    return len(str(n))


def scientific(value, sig: int = 3) -> str:
    """Render a positive int or Fraction as ``m.mme±X`` without floating point."""
    v = Fraction(value)
    if v <= 0:
        raise ValueError("scientific() needs a positive value")
    # Estimate the decimal exponent from digit counts, then correct it.
    exp = _digits(v.numerator) - _digits(v.denominator)
    while v >= Fraction(10) ** (exp + 1):
        exp += 1
    while v < Fraction(10) ** exp:
        exp -= 1
    scaled = v * Fraction(10) ** (sig - 1 - exp)
    mant = int(scaled)
    if scaled - mant >= Fraction(1, 2):
        mant += 1
    if mant >= 10**sig:
        mant //= 10
        exp += 1
    text = str(mant)
    body = text[0] + ("." + text[1:] if sig > 1 else "")
    return f"{body}e{exp:+d}"


def mantissa_exponent(value, sig: int = 3) -> tuple:
    """``(mantissa, exponent)`` as (Fraction rounded to ``sig`` digits, int)."""
    text = scientific(value, sig)
    m, e = text.split("e")
    return Fraction(m), int(e)


@dataclass(frozen=True)
class UncertaintyReport:
    k: int
    n_o: int
    n_b: int
    n_preimages: int
    lower_bound: int

    @property
    def u_metric(self) -> Fraction:
        return Fraction(1, self.n_preimages)

    def render(self, sig: int = 3) -> str:
        return (f"k={self.k} n_b={self.n_b} n_o={self.n_o} "
                f"U_p={scientific(self.n_preimages, sig)} U={scientific(self.u_metric, sig)}")


def uncertainty(k: int, n_o: int, n_b: int) -> UncertaintyReport:
    """Probability of guessing the original from its base under a uniform prior."""
    return UncertaintyReport(k, n_o, n_b, n_preimages(k, n_o, n_b),
                             preimage_lower_bound(k, n_o, n_b))


def _count_by_enumeration(base: tuple, radix: int, n_o: int) -> int:
    total = radix ** n_o
    n_b = len(base)
    target = np.asarray(base + (0,), dtype=np.int64)
    count = 0
    block = 1 << 20
    powers = radix ** np.arange(n_o - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, block):
        codes = np.arange(start, min(total, start + block), dtype=np.int64)
        ptr = np.zeros(codes.shape[0], dtype=np.int64)
        for col in range(n_o):
            digit = (codes // powers[col]) % radix
            ptr += (ptr < n_b) & (digit == target[ptr])
        count += int(np.count_nonzero(ptr == n_b))
    return count


def _count_by_insertion(base: tuple, radix: int, n_o: int) -> int:
    # Strings of one length are integer codes (most significant symbol
    # first); each round inserts every symbol at every gap and dedups
    # through a bitmap over the next length's code space.
    level = np.array([sum(s * radix ** (len(base) - 1 - t) for t, s in enumerate(base))],
                     dtype=np.int64)
    for length in range(len(base), n_o):
        seen = np.zeros(radix ** (length + 1), dtype=bool)
        for gap in range(length + 1):
            scale = radix ** (length - gap)
            high, low = np.divmod(level, scale)
            for v in range(radix):
                seen[(high * radix + v) * scale + low] = True
        level = np.flatnonzero(seen)
    return int(level.size)


def supersequence_count_oracle(base: SymbolString, n_o: int) -> int:
    """Count distinct length-``n_o`` supersequences of ``base`` by brute force.

    Enumerates all strings when there are at most 10**7 of them, otherwise
    grows the supersequence set one insertion at a time over a bitmap of
    all ``2**(k*n_o)`` strings (capped at 2**26).
    """
    n_b = len(base)
    if n_o < n_b:
        raise ParamsError("n_o must be at least the base length")
    radix = 1 << base.k
    if radix ** n_o <= ORACLE_LIMIT:
        return _count_by_enumeration(tuple(base.symbols), radix, n_o)
    if radix ** n_o > BITMAP_LIMIT:
        raise InstanceTooLargeError(f"{radix ** n_o} strings is too many for the oracle")
    return _count_by_insertion(tuple(base.symbols), radix, n_o)


# most probable string ---------------------------------------------------------

class SymbolDistribution:
    """Symbol probabilities; symbols not listed share ``default``."""

    def __init__(self, k: int, probs: dict | None = None, default=Fraction(0)):
        if k not in ALLOWED_K:
            raise ParamsError(f"k must be one of {ALLOWED_K}, got {k}")
        self.k = k
        self.probs = {int(s): Fraction(p) for s, p in (probs or {}).items()}
        self.default = Fraction(default)
        size = 1 << k
        for s, p in self.probs.items():
            if not 0 <= s < size:
                raise ValueError(f"symbol {s} out of range for k={k}")
            if p < 0:
                raise ValueError("probabilities must be non-negative")
        total = sum(self.probs.values()) + self.default * (size - len(self.probs))
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @classmethod
    def uniform(cls, k: int) -> "SymbolDistribution":
        return cls(k, {}, Fraction(1, 1 << k))

    @classmethod
    def from_counts(cls, k: int, counts) -> "SymbolDistribution":
        counts = {int(s): int(c) for s, c in dict(counts).items() if c}
        total = sum(counts.values())
        if total == 0:
            raise ValueError("no symbols counted")
        return cls(k, {s: Fraction(c, total) for s, c in counts.items()}, Fraction(0))

    @classmethod
    def from_strings(cls, strings) -> "SymbolDistribution":
        strings = list(strings)
        if not strings:
            raise ValueError("no strings given")
        counts = Counter()
        for s in strings:
            counts.update(s.symbols)
        return cls.from_counts(strings[0].k, counts)

    def p(self, symbol: int) -> Fraction:
        return self.probs.get(symbol, self.default)


def longest_runs(base: SymbolString) -> dict:
    """Longest run length of each symbol present in ``base``."""
    runs: dict = {}
    for value, grp in itertools.groupby(base.symbols):
        n = sum(1 for _ in grp)
        if n > runs.get(value, 0):
            runs[value] = n
    return runs


def most_probable_string_score(base: SymbolString, dist: SymbolDistribution, n_o: int) -> tuple:
    """``(symbol, score)`` maximizing 1/2 * p_i**x * (x+1) * (2*l_i + x), x = n_o - n_b.

    ``l_i`` is the longest run of ``i`` in ``base`` (0 if absent). The score
    is not normalized and can exceed 1. Ties go to the smallest symbol.
    """
    if len(base) == 0:
        raise ValueError("base must be non-empty")
    if dist.k != base.k:
        raise ValueError("distribution and base use different symbol widths")
    x = n_o - len(base)
    if x < 0:
        raise ParamsError("n_o must be at least the base length")
    runs = longest_runs(base)

    def score(i):
        return Fraction(1, 2) * dist.p(i) ** x * (x + 1) * (2 * runs.get(i, 0) + x)

    candidates = set(runs) | set(dist.probs)
    # One representative of the symbols that are neither listed nor present.
    size = 1 << base.k
    if len(candidates) < size:
        i = 0
        while i in candidates:
            i += 1
        candidates.add(i)
    best = min(candidates, key=lambda i: (-score(i), i))
    return best, score(best)


# policy diagnostics -----------------------------------------------------------

def adjacent_equal_pairs(base: SymbolString) -> int:
    s = base.symbols
    return sum(1 for a, b in zip(s, s[1:]) if a == b)


@dataclass(frozen=True)
class PolicyReport:
    k: int
    n_symbols: int
    histogram: dict
    tv_distance: Fraction
    adjacent_equal: tuple

    @property
    def mean_adjacent_equal(self) -> float:
        return sum(self.adjacent_equal) / len(self.adjacent_equal)


def policy_reports(bases) -> PolicyReport:
    """Symbol histogram, its total-variation distance from uniform, and the
    per-base count of adjacent equal symbols."""
    bases = list(bases)
    if not bases:
        raise ValueError("empty corpus")
    k = bases[0].k
    hist = Counter()
    for b in bases:
        hist.update(b.symbols)
    n = sum(hist.values())
    if n == 0:
        raise ValueError("corpus holds no symbols")
    size = 1 << k
    u = Fraction(1, size)
    tv = sum(abs(Fraction(c, n) - u) for c in hist.values())
    tv += u * (size - len(hist))
    return PolicyReport(k, n, dict(hist), tv / 2, tuple(adjacent_equal_pairs(b) for b in bases))


def uncertainty_table_rows():
    """The (k, n_b, n_o) grid used to tabulate preimage counts."""
    return [(k, n_b, n_o) for n_b, n_o in ((10, 15), (100, 150), (500, 1000)) for k in (2, 4, 8)]


__all__ = [
    "FormulaInputs", "PolicyReport", "RatioReport", "SymbolDistribution", "UncertaintyReport",
    "adjacent_equal_pairs", "ccr_formula", "formula_inputs", "ccr_r_threshold", "formula_report",
    "gcr_closed_form", "gcr_formula", "longest_runs", "mantissa_exponent",
    "measured_ratios", "most_probable_string_score", "n_preimages",
    "policy_reports", "preimage_lower_bound", "scientific",
    "supersequence_count_oracle", "ucr_below_one", "ucr_formula", "uncertainty",
    "uncertainty_table_rows",
]

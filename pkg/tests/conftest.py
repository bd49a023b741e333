import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from yggdrasil.symstring import SymbolString

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng_golden():
    return json.loads((FIXTURES / "rng_seed0.json").read_text())


@st.composite
def symbol_strings(draw, k=None, min_len=0, max_len=24, length=None):
    if k is None:
        k = draw(st.sampled_from([1, 2, 4, 8, 16]))
    n = length if length is not None else draw(st.integers(min_len, max_len))
    syms = draw(st.lists(st.integers(0, (1 << k) - 1), min_size=n, max_size=n))
    return SymbolString(syms, k)


@st.composite
def string_pairs(draw, ks=(1, 2, 4, 8), max_len=24, max_alpha=None):
    k = draw(st.sampled_from(ks))
    n = draw(st.integers(0, max_len))
    hi = (1 << k) - 1 if max_alpha is None else min((1 << k) - 1, max_alpha)
    a = draw(st.lists(st.integers(0, hi), min_size=n, max_size=n))
    b = draw(st.lists(st.integers(0, hi), min_size=n, max_size=n))
    return SymbolString(a, k), SymbolString(b, k)


class AcceptanceLog:
    """Collects one verdict line per acceptance criterion."""

    CRITERIA = range(1, 9)

    def __init__(self):
        self.lines = {}

    def record(self, n: int, ok: bool, detail: str):
        self.lines[n] = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}: {detail}"
        print(self.lines[n])

    def summary(self) -> list:
        return [self.lines.get(n, f"ACCEPTANCE {n}: FAIL: not run") for n in self.CRITERIA]


_ACCEPTANCE = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE.lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE.summary():
        terminalreporter.write_line(line)

"""Types shared by both protocol parties: the upload policy and deletion strategies."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ParamsError
from .symstring import ALLOWED_K


class DeletionStrategy(str, enum.Enum):
    """How the client chooses which positions to delete.

    ``UNIFORM`` deletes a uniformly random subset of positions.
    ``RUNBREAKING`` deletes inside runs of identical symbols first, so that
    emitted bases carry as few adjacent equal pairs as possible.
    """

    UNIFORM = "uniform"
    RUNBREAKING = "runbreaking"

    @classmethod
    def parse(cls, value) -> "DeletionStrategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParamsError(f"unknown deletion strategy {value!r}") from None


@dataclass(frozen=True)
class Policy:
    """What the cloud tells clients: string geometry plus a strategy hint."""

    k: int
    n_o: int
    n_b: int
    strategy: DeletionStrategy = DeletionStrategy.UNIFORM

    def __post_init__(self):
        if self.k not in ALLOWED_K:
            raise ParamsError(f"k must be one of {ALLOWED_K}, got {self.k}")
        if not 1 <= self.n_b <= self.n_o:
            raise ParamsError(f"need 1 <= n_b <= n_o, got n_b={self.n_b}, n_o={self.n_o}")
        object.__setattr__(self, "strategy", DeletionStrategy.parse(self.strategy))

    @property
    def n_del(self) -> int:
        return self.n_o - self.n_b

"""Result records shared by the check registry and the maximal module."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .grid import Cube


class Sup(NamedTuple):
    """A supremum over a cube family together with the cube attaining it."""

    value: float
    witness: Cube | None


def safe_ratio(lhs: float, rhs: float) -> float:
    """``lhs / rhs`` with ``0 / 0 = 0``; a positive ``lhs`` over zero is ``inf``."""
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


@dataclass
class CheckResult:
    """One evaluated inequality ``lhs <= rhs``; passes iff ``ratio <= 1 + tol``."""

    id: str
    lhs: float
    rhs: float
    tol: float = 0.0
    witness: Cube | None = None
    params: dict[str, Any] = field(default_factory=dict)
    ratio: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        self.ratio = safe_ratio(self.lhs, self.rhs)
        self.passed = bool(self.ratio <= 1.0 + self.tol)

    @classmethod
    def degenerate(cls, id: str, reason: str, **params) -> "CheckResult":
        """Explicit pass for the ``0 <= 0`` cases (e.g. constant weights)."""
        return cls(id, 0.0, 0.0, params={"degenerate": reason, **params})

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "lhs": _num(self.lhs),
            "rhs": _num(self.rhs),
            "ratio": _num(self.ratio),
            "pass": self.passed,
            "tol": _num(self.tol),
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
        }


def _num(x: float):
    # JSON has no infinity; null marks an unbounded value.
    return None if not math.isfinite(x) else x


def _jsonable(v):
    if isinstance(v, Cube):
        return v.to_dict()
    if isinstance(v, float):
        return _num(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return _jsonable(v.item())
    return v

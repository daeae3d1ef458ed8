"""Parametric weight families and their ``kind:key=val,...`` text form.

Cell values by kind:

* ``power:alpha=a,center=c`` -- ``|x - c|**a``.  Exact cell averages in one
  dimension; an 8x8 Gauss-Legendre rule per cell in two dimensions, which
  never samples the singular point.
* ``flat:delta=d,shape=sin|bump|saw`` -- ``1 + d*phi`` at cell centres, with
  ``phi`` of mean zero and ``|phi| <= 1`` (a product of 1-d profiles in two
  dimensions).
* ``step:ratio=r,split=s`` -- ``r`` on ``x_1 < s`` and 1 elsewhere, exact
  cell averages.
* ``random:range=R,seed=k`` -- ``log w`` i.i.d. uniform on ``[-R/2, R/2]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter
from .grid import GridSpec, Weight


class Kind(enum.Enum):
    POWER = "power"
    FLAT = "flat"
    STEP = "step"
    RANDOM = "random"


class Shape(enum.Enum):
    SIN = "sin"
    BUMP = "bump"
    SAW = "saw"


_DEFAULTS = {
    Kind.POWER: {"alpha": 0.5, "center": 0.0},
    Kind.FLAT: {"delta": 0.1, "shape": "sin"},
    Kind.STEP: {"ratio": 2.0, "split": 0.5},
    Kind.RANDOM: {"range": 3.0, "seed": 0},
}


@dataclass(frozen=True)
class WeightFamilySpec:
    kind: Kind
    grid: GridSpec
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        full = {**_DEFAULTS[self.kind], **self.params}
        unknown = set(full) - set(_DEFAULTS[self.kind])
        if unknown:
            raise InvalidParameter(f"unknown {self.kind.value} parameter(s): {sorted(unknown)}")
        object.__setattr__(self, "params", full)
        n = self.grid.n
        p = full
        if self.kind is Kind.POWER and not float(p["alpha"]) > -n:
            # local integrability of |x|^alpha in dimension n
            raise InvalidParameter(f"power weights need alpha > -{n}, got {p['alpha']}")
        if self.kind is Kind.POWER and n == 1 and not 0 <= float(p["center"]) <= 1:
            raise InvalidParameter("center must lie in [0, 1]")
        if self.kind is Kind.FLAT:
            if not abs(float(p["delta"])) < 1:
                raise InvalidParameter(f"flat weights need |delta| < 1, got {p['delta']}")
            if p["shape"] not in {sh.value for sh in Shape}:
                raise InvalidParameter(f"unknown shape {p['shape']!r}")
        if self.kind is Kind.STEP:
            if not float(p["ratio"]) > 0:
                raise InvalidParameter("step ratio must be positive")
            if not 0 <= float(p["split"]) <= 1:
                raise InvalidParameter("split must lie in [0, 1]")
        if self.kind is Kind.RANDOM and not float(p["range"]) >= 0:
            raise InvalidParameter("random log-range must be nonnegative")

    def with_params(self, **kw) -> "WeightFamilySpec":
        return WeightFamilySpec(self.kind, self.grid, {**self.params, **kw})

    def __str__(self) -> str:
        body = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind.value}:{body}"


def _coerce(key: str, val: str):
    if key == "shape":
        return Shape(val.lower()).value
    if key == "seed":
        return int(val)
    if key == "center" and "/" in val:
        return tuple(float(v) for v in val.split("/"))
    return float(val)


def parse_spec(text: str, grid: GridSpec) -> WeightFamilySpec:
    """Parse ``kind:key=val,...`` (e.g. ``flat:delta=0.05,shape=sin``)."""
    head, _, body = text.strip().partition(":")
    try:
        kind = Kind(head.strip().lower())
    except ValueError:
        raise InvalidParameter(f"unknown weight kind {head!r}") from None
    params = {}
    for item in filter(None, (b.strip() for b in body.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise InvalidParameter(f"expected key=val, got {item!r}")
        key = key.strip().lower()
        try:
            params[key] = _coerce(key, val.strip())
        except ValueError:
            raise InvalidParameter(f"bad value for {key}: {val!r}") from None
    return WeightFamilySpec(kind, grid, params)


# ---------------------------------------------------------------------------
# generators


def _profile(shape: Shape, x: np.ndarray) -> np.ndarray:
    if shape is Shape.SIN:
        return np.sin(2 * np.pi * x)
    if shape is Shape.SAW:
        return 2.0 * x - 1.0
    # (1-u^2)^2 on |u| < 1 with u = 4(x - 1/2) has mean 4/15 on [0, 1]
    u = 4.0 * (x - 0.5)
    b = np.where(np.abs(u) < 1, (1 - u**2) ** 2, 0.0)
    return (b - 4.0 / 15.0) / (11.0 / 15.0)


def _power_1d(alpha: float, c: float, grid: GridSpec) -> np.ndarray:
    edges = np.arange(grid.N + 1) * grid.h - c
    F = np.sign(edges) * np.abs(edges) ** (alpha + 1) / (alpha + 1)
    return np.diff(F) / grid.h


def _power_2d(alpha: float, c, grid: GridSpec) -> np.ndarray:
    c = np.broadcast_to(np.asarray(c, dtype=float), (2,))
    t, wt = np.polynomial.legendre.leggauss(8)
    t = (t + 1) / 2
    wt = wt / 2
    lo = np.arange(grid.N) * grid.h
    nodes = (lo[:, None] + t[None, :] * grid.h).ravel()  # (N*8,)
    dx = (nodes - c[0]) ** 2
    dy = (nodes - c[1]) ** 2
    dens = (dx[:, None] + dy[None, :]) ** (alpha / 2)
    dens = dens.reshape(grid.N, 8, grid.N, 8)
    return np.einsum("iajb,a,b->ij", dens, wt, wt)


def generate(spec: WeightFamilySpec) -> Weight:
    grid = spec.grid
    p = spec.params
    if spec.kind is Kind.POWER:
        alpha = float(p["alpha"])
        if grid.n == 1:
            vals = _power_1d(alpha, float(np.ravel(p["center"])[0]), grid)
        else:
            vals = _power_2d(alpha, p["center"], grid)
    elif spec.kind is Kind.FLAT:
        shape = Shape(p["shape"])
        prof = _profile(shape, grid.centers()[0] if grid.n == 1 else (np.arange(grid.N) + 0.5) * grid.h)
        phi = prof if grid.n == 1 else np.multiply.outer(prof, prof)
        vals = 1.0 + float(p["delta"]) * phi
    elif spec.kind is Kind.STEP:
        split = float(p["split"])
        lo = np.arange(grid.N) * grid.h
        cover = np.clip((split - lo) / grid.h, 0.0, 1.0)
        prof = 1.0 + (float(p["ratio"]) - 1.0) * cover
        vals = prof if grid.n == 1 else np.repeat(prof[:, None], grid.N, axis=1)
    else:
        rng = np.random.default_rng(int(p["seed"]))
        half = float(p["range"]) / 2.0
        vals = np.exp(rng.uniform(-half, half, grid.shape))
    return Weight(grid, vals)


def delta_grid(spec_text: str) -> list[float]:
    """``a:b:k`` gives ``k`` evenly spaced values; otherwise a comma list."""
    text = spec_text.strip()
    if ":" in text:
        a, b, k = text.split(":")
        k = int(k)
        if k < 1:
            raise InvalidParameter("need at least one point")
        if k == 1:
            return [float(a)]
        return [float(v) for v in np.linspace(float(a), float(b), k)]
    return [float(v) for v in text.split(",") if v.strip()]


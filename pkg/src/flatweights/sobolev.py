"""Gradients, Riesz potentials, Lorentz norms and Poincare-Sobolev checks."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import constants as K
from .errors import (
    AlphaOutOfRange,
    DegenerateFunction,
    DivisionDegenerate,
    ExponentBlowup,
    InvalidConstant,
    InvalidParameter,
)
from .grid import Cube, CubeFamily, GridFn, GridSpec, Weight, _same_grid
from .results import CheckResult, safe_ratio


# ---------------------------------------------------------------------------
# gradient


class Gradient(NamedTuple):
    components: tuple[GridFn, ...]

    def magnitude(self) -> GridFn:
        sq = sum(c.values**2 for c in self.components)
        return GridFn(self.components[0].grid, np.sqrt(sq))


def gradient(f: GridFn) -> Gradient:
    """Forward differences, one-sided backward in the last cell of each axis."""
    grid = f.grid
    if grid.L < 1:
        raise InvalidParameter("the gradient needs at least two cells per side")
    comps = []
    for ax in range(grid.n):
        d = np.diff(f.values, axis=ax) / grid.h
        last = np.take(d, [-1], axis=ax)
        comps.append(GridFn(grid, np.concatenate([d, last], axis=ax)))
    return Gradient(tuple(comps))


# ---------------------------------------------------------------------------
# Riesz potential

_CHUNK = 1 << 22


def _self_cell(alpha: float, grid: GridSpec) -> float:
    # integral of |y|^(alpha-n) over the cell around its centre
    h = grid.h
    if grid.n == 1:
        return 2.0 * (h / 2.0) ** alpha / alpha
    rho = h / math.sqrt(math.pi)  # disc of the same area
    return 2.0 * math.pi * rho**alpha / alpha


def _kernel_table(alpha: float, grid: GridSpec, side: int) -> np.ndarray:
    """Kernel weight by cell offset, offsets ``-(side-1)..side-1`` per axis."""
    n = grid.n
    off = np.arange(-(side - 1), side) * grid.h
    mesh = np.meshgrid(*([off] * n), indexing="ij")
    r = np.sqrt(sum(m**2 for m in mesh))
    with np.errstate(divide="ignore"):
        K_ = r ** (alpha - n) * grid.cell_volume
    K_[(side - 1,) * n] = _self_cell(alpha, grid)
    return K_


def _check_alpha(alpha: float, n: int) -> None:
    if not 0 < alpha < n:
        raise AlphaOutOfRange(f"alpha must lie in (0, {n}), got {alpha}")


def riesz(f: GridFn, alpha: float, Q: Cube) -> np.ndarray:
    """``I_alpha(f chi_Q)`` at the cell centres of ``Q`` (array of ``Q.shape``).

    Off-diagonal cells contribute ``f(y) |x - y|**(alpha - n) h**n``; the
    cell's own contribution uses the exact integral of the kernel over it
    (over the disc of equal area when ``n = 2``).
    """
    grid = f.grid
    n = grid.n
    _check_alpha(alpha, n)
    Q.check(grid)
    s = Q.side
    table = _kernel_table(alpha, grid, s)
    src = np.ascontiguousarray(f.restrict(Q)).ravel()
    idx = np.indices(Q.shape).reshape(n, -1).T
    out = np.empty(len(idx))
    rows = max(1, _CHUNK // len(idx))
    for i0 in range(0, len(idx), rows):
        tgt = idx[i0 : i0 + rows]
        diff = tgt[:, None, :] - idx[None, :, :] + (s - 1)
        Kmat = table[tuple(diff[..., d] for d in range(n))]
        out[i0 : i0 + rows] = Kmat @ src
    return out.reshape(Q.shape)


def riesz_at(f: GridFn, alpha: float, Q: Cube, point) -> float:
    """``I_alpha(f chi_Q)`` at an arbitrary point of the closed cube ``Q``.

    Cells not containing the point use the centre rule.  The cell holding the
    point is integrated exactly in one dimension; in two dimensions it uses
    the equal-area disc, which is exact only at the cell centre.  A point on a
    cell boundary belongs to the cell above it (the cell below at the top
    edge of the domain).
    """
    grid = f.grid
    n = grid.n
    _check_alpha(alpha, n)
    Q.check(grid)
    x = np.atleast_1d(np.asarray(point, dtype=float))
    if x.shape != (n,):
        raise InvalidParameter(f"point must have {n} coordinates")
    h = grid.h
    lo = np.array(Q.anchor) * h
    hi = lo + Q.side * h
    if np.any(x < lo) or np.any(x > hi):
        raise InvalidParameter("point lies outside the cube")
    home = np.minimum(np.floor(x / h).astype(int), grid.N - 1)
    home = np.clip(home, Q.anchor, np.array(Q.anchor) + Q.side - 1)
    vals = np.ascontiguousarray(f.restrict(Q)).ravel()
    idx = np.indices(Q.shape).reshape(n, -1).T + np.array(Q.anchor)
    centres = (idx + 0.5) * h
    r = np.sqrt(((centres - x) ** 2).sum(axis=1))
    mine = np.all(idx == home, axis=1)
    kern = np.empty(len(idx))
    kern[~mine] = r[~mine] ** (alpha - n) * grid.cell_volume
    if n == 1:
        a = home[0] * h
        b = a + h
        kern[mine] = ((x[0] - a) ** alpha + (b - x[0]) ** alpha) / alpha
    else:
        kern[mine] = _self_cell(alpha, grid)
    return float(kern @ vals)


# ---------------------------------------------------------------------------
# rearrangements and Lorentz norms


class NormalizedMeasure:
    """The probability measure ``w dx / w(Q)`` on the cells of ``Q``."""

    __slots__ = ("cube", "masses")

    def __init__(self, w: Weight, Q: Cube):
        Q.check(w.grid)
        sub = np.ascontiguousarray(w.restrict(Q))
        self.cube = Q
        self.masses = sub / sub.sum()

    @classmethod
    def uniform(cls, grid: GridSpec, Q: Cube) -> "NormalizedMeasure":
        return cls(Weight(grid, np.ones(grid.shape)), Q)


class Rearrangement(NamedTuple):
    """Decreasing step function: ``values`` descending, ``masses`` summing to 1."""

    values: np.ndarray
    masses: np.ndarray


def _on_cube(f, mu: NormalizedMeasure) -> np.ndarray:
    if isinstance(f, GridFn):
        return np.ascontiguousarray(f.restrict(mu.cube))
    arr = np.asarray(f, dtype=float)
    if arr.shape != mu.masses.shape:
        raise InvalidParameter(f"values of shape {arr.shape} do not match the cube")
    return arr


def rearrangement(f, mu: NormalizedMeasure) -> Rearrangement:
    """Distinct values of ``|f|`` on the cube, descending, with their masses.

    ``f`` is a :class:`GridFn` or an array of the cube's shape.
    """
    a = np.abs(_on_cube(f, mu)).ravel()
    vals, inv = np.unique(a, return_inverse=True)
    mass = np.bincount(inv, weights=mu.masses.ravel(), minlength=len(vals))
    return Rearrangement(vals[::-1].copy(), mass[::-1].copy())


@dataclass(frozen=True)
class LorentzParams:
    """``L^{q,p}``: outer exponent ``q``, inner ``p`` (``inf`` for weak)."""

    q: float
    p: float = math.inf

    def __post_init__(self):
        if not self.q > 0:
            raise InvalidParameter(f"outer exponent must be positive, got {self.q}")
        if not self.p > 0:
            raise InvalidParameter(f"inner exponent must be positive, got {self.p}")

    @property
    def weak(self) -> bool:
        return math.isinf(self.p)


def lorentz_norm(f, params: LorentzParams, mu: NormalizedMeasure) -> float:
    """Lorentz quasi-norm of ``f`` on the probability space ``mu``.

    With ``f*`` the decreasing rearrangement, the inner-``p`` norm is
    ``(int_0^1 (t**(1/q) f*(t))**p dt/t)**(1/p)``, integrated exactly on each
    step; the weak norm is ``max_k v_k T_k**(1/q)`` over the steps.
    """
    vals, mass = rearrangement(f, mu)
    T = np.cumsum(mass)
    q, p = params.q, params.p
    if params.weak:
        return float(np.max(vals * T ** (1.0 / q)))
    Tprev = np.concatenate([[0.0], T[:-1]])
    if p == q:
        # T_k - T_{k-1} is the step mass itself
        return float(np.sum(vals**p * mass) ** (1.0 / p))
    pieces = vals**p * (q / p) * (T ** (p / q) - Tprev ** (p / q))
    return float(np.sum(pieces) ** (1.0 / p))


def lq_norm(f, q: float, mu: NormalizedMeasure) -> float:
    a = np.abs(_on_cube(f, mu))
    return float(np.sum(a**q * mu.masses) ** (1.0 / q))


# ---------------------------------------------------------------------------
# exponents


def _check_fw(fw: float) -> None:
    if not fw >= 1.0:
        raise InvalidConstant(f"A_inf constant must be >= 1, got {fw}")


def classical_sobolev(p: float, n: int) -> float:
    if not p < n:
        raise ExponentBlowup(f"p={p} must be below n={n}")
    return n * p / (n - p)


def sobolev_exponent(p: float, fw: float, tau: float, n: int) -> float:
    """``p*_w`` from ``1/p - 1/p*_w = (1/n) / (1 + tau (fw - 1))``."""
    _check_fw(fw)
    if not tau > 0:
        raise InvalidParameter(f"tau must be positive, got {tau}")
    if not 1 <= p < n:
        raise InvalidParameter(f"need 1 <= p < n, got p={p}, n={n}")
    inv = 1.0 / p - (1.0 / n) / (1.0 + tau * (fw - 1.0))
    if not inv > 0:
        raise ExponentBlowup(f"1/p*_w = {inv} is not positive")
    return 1.0 / inv


class ExponentVariant(enum.Enum):
    """Gain in ``1/p - 1/q`` for ``w in A_r`` with dual constant ``[sigma]``.

    ``BASELINE``: ``(1/n) tau [sigma] / (1 + r (tau [sigma] - 1))``.
    ``FLAT``: ``(1/n) (1 + tau ([sigma] - 1)) / (1 + r tau ([sigma] - 1))``,
    which returns the classical gain ``1/n`` at ``r = 1`` as ``[sigma] -> 1``.
    Both use ``tau = 2**(n+1)``.
    """

    BASELINE = "baseline"
    FLAT = "flat"


def dual_sobolev_exponent(
    p: float, r: float, sigma_fw: float, n: int, variant: ExponentVariant
) -> float:
    _check_fw(sigma_fw)
    if not 1 <= r <= p < n:
        raise InvalidParameter(f"need 1 <= r <= p < n, got r={r}, p={p}, n={n}")
    tau = 2 ** (n + 1)
    if variant is ExponentVariant.BASELINE:
        gain = tau * sigma_fw / (1.0 + r * (tau * sigma_fw - 1.0))
    else:
        x = tau * (sigma_fw - 1.0)
        gain = (1.0 + x) / (1.0 + r * x)
    inv = 1.0 / p - gain / n
    if not inv > 0:
        raise ExponentBlowup(f"1/q = {inv} is not positive")
    return 1.0 / inv


# ---------------------------------------------------------------------------
# checks


class PSVariant(enum.Enum):
    STRONG = "strong"
    LORENTZ = "lorentz"


def check_poincare_sobolev(
    f: GridFn,
    w: Weight,
    p: float,
    Q: Cube,
    tau: float | None = None,
    variant: PSVariant = PSVariant.STRONG,
    family: CubeFamily | None = None,
    c_n: float | None = None,
    fw: float | None = None,
) -> CheckResult:
    """Weighted Poincare-Sobolev inequality on ``Q`` without its constant.

    Left side: the ``L^{p*_w}`` (or ``L^{p*_w, p}``) norm of ``f - f_Q``
    (unweighted mean) under ``w dx / w(Q)``.  Right side without ``c_n``:
    ``p* (1 + tau (fw - 1))**(1/p) l(Q) (mean_w |grad f|**p)**(1/p)``.
    ``tau`` defaults to ``2**(n+1)``; ``fw`` to the Fujii-Wilson constant
    over ``family`` (dyadic by default).  The implied ``c_n`` is the ratio;
    with ``c_n`` given the check passes iff ``lhs <= c_n * rhs``.  A function
    constant on ``Q`` gives a degenerate ``0 <= 0`` pass.
    """
    _same_grid(f, w)
    grid = f.grid
    n = grid.n
    if n < 2:
        raise InvalidParameter("the Poincare-Sobolev check needs n >= 2")
    Q.check(grid)
    tau = float(2 ** (n + 1)) if tau is None else tau
    if fw is None:
        fw = K.fujii_wilson(w, family or CubeFamily.dyadic()).value
    pw = sobolev_exponent(p, fw, tau, n)
    sub = np.ascontiguousarray(f.restrict(Q))
    centred = sub - sub.sum() / sub.size
    if not np.any(centred != 0):
        return CheckResult.degenerate(
            "poincare_sobolev", "f is constant on the cube", variant=variant.value, p=p, p_star_w=pw
        )
    mu = NormalizedMeasure(w, Q)
    if variant is PSVariant.STRONG:
        lhs = lq_norm(centred, pw, mu)
    else:
        lhs = lorentz_norm(centred, LorentzParams(pw, p), mu)
    g = np.ascontiguousarray(gradient(f).magnitude().restrict(Q))
    grad_term = float(np.sum(g**p * mu.masses) ** (1.0 / p))
    rhs = classical_sobolev(p, n) * (1.0 + tau * (fw - 1.0)) ** (1.0 / p) * Q.length(grid) * grad_term
    params = {
        "variant": variant.value,
        "p": p,
        "p_star_w": pw,
        "tau": tau,
        "fujii_wilson": fw,
        "implied_c_n": safe_ratio(lhs, rhs),
    }
    if c_n is None:
        return CheckResult("poincare_sobolev", lhs, rhs, tol=math.inf, witness=Q, params=params)
    return CheckResult("poincare_sobolev", lhs, c_n * rhs, tol=0.0, witness=Q, params={**params, "c_n": c_n})


def check_weak_riesz(
    f: GridFn,
    w: Weight,
    p: float,
    alpha: float,
    r: float,
    Q: Cube,
    family: CubeFamily,
    c_n: float | None = None,
) -> CheckResult:
    """Weak-type bound for ``I_alpha`` under ``w dx / w(Q)``, without ``c_n``.

    ``1/p - 1/q_r = alpha / (n r)``; the left side is the weak ``L^{q_r}``
    norm of ``I_alpha(f chi_Q)``, the right side
    ``(1/alpha) p*_alpha [w]_{A_r}**(1/p) l(Q)**alpha (mean_w |f|**p)**(1/p)``
    with ``p*_alpha = n p / (n - alpha p)`` and ``[w]_{A_1}`` when ``r = 1``.
    """
    _same_grid(f, w)
    grid = f.grid
    n = grid.n
    _check_alpha(alpha, n)
    if not 1 <= p < n / alpha:
        raise InvalidParameter(f"need 1 <= p < n/alpha, got p={p}")
    if not 1 <= r <= p:
        raise InvalidParameter(f"need 1 <= r <= p, got r={r}")
    inv = 1.0 / p - alpha / (n * r)
    if not inv > 0:
        raise ExponentBlowup(f"1/q_r = {inv} is not positive")
    qr = 1.0 / inv
    mu = NormalizedMeasure(w, Q)
    Iaf = riesz(f, alpha, Q)
    lhs = lorentz_norm(Iaf, LorentzParams(qr), mu)
    ar = (K.a_1(w, family) if r == 1 else K.a_p(w, r, family)).value
    sub = np.ascontiguousarray(f.restrict(Q))
    f_term = float(np.sum(np.abs(sub) ** p * mu.masses) ** (1.0 / p))
    p_alpha = n * p / (n - alpha * p)
    rhs = p_alpha / alpha * ar ** (1.0 / p) * Q.length(grid) ** alpha * f_term
    params = {"q_r": qr, "alpha": alpha, "p": p, "r": r, "a_r": ar, "implied_c_n": safe_ratio(lhs, rhs)}
    if c_n is None:
        return CheckResult("weak_riesz", lhs, rhs, tol=math.inf, witness=Q, params=params)
    return CheckResult("weak_riesz", lhs, c_n * rhs, tol=0.0, witness=Q, params={**params, "c_n": c_n})


def check_subrepresentation(f: GridFn, Q: Cube, C_n: float | None = None) -> CheckResult:
    """``|f - f_Q| <= C_n I_1(|grad f| chi_Q)`` cellwise on ``Q``.

    Reports the worst cell; cells where the potential vanishes are excluded
    and counted in ``params``.
    """
    grid = f.grid
    Q.check(grid)
    sub = np.ascontiguousarray(f.restrict(Q))
    dev = np.abs(sub - sub.sum() / sub.size)
    if not np.any(dev > 0):
        raise DegenerateFunction("f is constant on the cube")
    pot = riesz(gradient(f).magnitude(), 1.0, Q)
    ok = pot > 0
    if not np.any(ok & (dev > 0)):
        raise DivisionDegenerate("the potential vanishes wherever f deviates")
    ratio = np.where(ok, dev / np.where(ok, pot, 1.0), -np.inf)
    i = int(np.argmax(ratio))
    cell = np.unravel_index(i, Q.shape)
    lhs = float(dev[cell])
    rhs = float(pot[cell])
    params = {
        "implied_C_n": lhs / rhs,
        "cell": [int(Q.anchor[d] + cell[d]) for d in range(grid.n)],
        "excluded_cells": int(np.count_nonzero(~ok)),
    }
    if C_n is None:
        return CheckResult("subrepresentation", lhs, rhs, tol=math.inf, witness=Q, params=params)
    return CheckResult("subrepresentation", lhs, C_n * rhs, tol=0.0, witness=Q, params={**params, "C_n": C_n})

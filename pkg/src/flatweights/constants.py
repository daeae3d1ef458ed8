"""Weight constants and seminorms, each a supremum over a cube family.

Every function returns a :class:`~flatweights.results.Sup` holding the
value and the first cube (in family order) attaining it.  Weights are
normalised by their maximum before any arithmetic: all constants here are
scale invariant, and a constant weight becomes exactly all-ones, so its
constants are exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExponentOverflow, InvalidParameter, NoAdmissibleCube
from .grid import (
    Box,
    Cube,
    CubeFamily,
    DoubleMode,
    GridFn,
    Weight,
    box_sums,
    cube_blocks,
    enumerate_cubes,
    family_tables,
    side_blocks,
    window_reductions,
    _same_grid,
)
from .maximal import aligned_subcube_sweep, dyadic_running_max, local_max_array
from .results import Sup

LOG_BOUND_DEFAULT = 3.0


def logmeanexp(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """``log(mean(exp(x)))`` along ``axis`` without overflow."""
    m = np.max(x, axis=axis, keepdims=True)
    out = np.log(np.mean(np.exp(x - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


class _Tracker:
    """Running argmax (or argmin) in family order; ties keep the earliest cube."""

    def __init__(self, minimize: bool = False):
        self.minimize = minimize
        self.value = math.inf if minimize else -math.inf
        self.witness: Cube | None = None

    def update(self, values: np.ndarray, anchors: np.ndarray, side: int) -> None:
        if not len(values):
            return
        i = int(np.argmin(values) if self.minimize else np.argmax(values))
        v = float(values[i])
        better = v < self.value if self.minimize else v > self.value
        if better:
            self.value = v
            self.witness = Cube(tuple(anchors[i]), side)

    def result(self) -> Sup:
        return Sup(self.value, self.witness)


def _sup_tabled(grid, family, stat, *specs) -> Sup:
    """Supremum of ``stat(side, *reductions)`` over ``family``.

    ``specs`` are ``(array, ufunc)`` pairs; each is reduced over every family
    cube with :func:`flatweights.grid.family_tables`.
    """
    tables = [family_tables(grid, family, arr, op) for arr, op in specs]
    tr = _Tracker()
    for s in family.sides(grid):
        vals = stat(s, *(t[s].ravel() for t in tables))
        i = int(np.argmax(vals))
        if vals[i] > tr.value:
            a1 = family.anchors_1d(grid, s)
            idx = np.unravel_index(i, (len(a1),) * grid.n)
            tr.value = float(vals[i])
            tr.witness = Cube(tuple(int(a1[j]) for j in idx), s)
    return tr.result()


def _sup(w_or_f, family, stat, *arrays) -> Sup:
    grid = w_or_f.grid
    tr = _Tracker()
    for side, anchors, rows in cube_blocks(grid, family, *arrays):
        tr.update(stat(*rows), anchors, side)
    return tr.result()


# ---------------------------------------------------------------------------
# Muckenhoupt-type constants


def a_p(w: Weight, p: float, family: CubeFamily) -> Sup:
    """``[w]_{A_p} = sup_Q w_Q * (mean_Q w**(1-p'))**(p-1)``.

    When the dual weight's dynamic range fits in a double the cube sums come
    from :func:`flatweights.grid.family_tables`; otherwise the dual average
    is taken in log space per cube, so ``p`` close to 1 stays finite as long
    as the answer is.
    """
    if not p > 1:
        raise InvalidParameter(f"A_p needs p > 1, got {p}")
    grid = w.grid
    wn = w.normalized()
    lw = np.log(wn)
    expo = -1.0 / (p - 1.0)
    lmin = float(lw.min())
    if -lmin / (p - 1.0) < 600.0:
        # dual weight rescaled into (0, 1]; the factor comes back as exp(-lmin)
        sig = np.exp(expo * (lw - lmin))
        scale = math.exp(-lmin)

        def tstat(s, sw, ss):
            vol = float(s**grid.n)
            return (sw / vol) * (ss / vol) ** (p - 1.0) * scale

        return _sup_tabled(grid, family, tstat, (wn, np.add), (sig, np.add))

    def stat(wr, lr):
        return (wr.sum(axis=1) / wr.shape[1]) * np.exp((p - 1.0) * logmeanexp(expo * lr))

    with np.errstate(over="ignore"):
        res = _sup(w, family, stat, wn, lw)
    if not math.isfinite(res.value):
        raise ExponentOverflow(f"[w]_A_p overflows for p={p}")
    return res


def a_1(w: Weight, family: CubeFamily) -> Sup:
    """``[w]_{A_1} = sup_Q w_Q * max_Q (1/w)``."""
    wn = w.normalized()
    vol = lambda s: float(s**w.grid.n)  # noqa: E731
    return _sup_tabled(
        w.grid,
        family,
        lambda s, sw, mn: (sw / vol(s)) / mn,
        (wn, np.add),
        (wn, np.minimum),
    )


def hruscev(w: Weight, family: CubeFamily) -> Sup:
    """Hruscev constant ``sup_Q w_Q * exp(-(log w)_Q)``."""
    wn = w.normalized()
    n = w.grid.n

    def stat(s, sw, sl):
        vol = float(s**n)
        return (sw / vol) * np.exp(-(sl / vol))

    return _sup_tabled(w.grid, family, stat, (wn, np.add), (np.log(wn), np.add))


def log_ainfty(w: Weight, family: CubeFamily) -> Sup:
    """Logarithmic constant ``sup_Q (1/w(Q)) int_Q (1 + log+(w / w_Q)) w``."""
    wn = w.normalized()

    def stat(wr):
        tot = wr.sum(axis=1)
        wq = tot / wr.shape[1]
        excess = np.maximum(np.log(wr / wq[:, None]), 0.0) * wr
        return 1.0 + excess.sum(axis=1) / tot

    return _sup(w, family, stat, wn)


def fujii_wilson(w: Weight, family: CubeFamily) -> Sup:
    """Fujii-Wilson constant ``sup_Q (1/w(Q)) int_Q M(w chi_Q)``.

    Exact fast paths for ``DYADIC`` and ``ALIGNED(1, 1)``; other families use
    direct enumeration (cost grows like the square of the family size).
    """
    grid = w.grid
    wn = w.normalized()
    if family.is_dyadic:
        running = dyadic_running_max(wn, grid)
        tr = _Tracker()
        single = CubeFamily.dyadic()
        for lvl, R in enumerate(running):
            side = grid.N >> lvl
            for s, anchors, (mrows, wrows) in side_blocks(grid, single, side, R, wn):
                tr.update(mrows.sum(axis=1) / wrows.sum(axis=1), anchors, s)
        return tr.result()
    if family.is_full_aligned:
        per_side = {}
        for s, mrows, wrows in aligned_subcube_sweep(wn):
            per_side[s] = mrows.sum(axis=1) / wrows.sum(axis=1)
        tr = _Tracker()
        for s in family.sides(grid):
            a1 = family.anchors_1d(grid, s)
            mesh = np.meshgrid(*([a1] * grid.n), indexing="ij")
            anchors = np.stack([m.ravel() for m in mesh], axis=1)
            tr.update(per_side[s], anchors, s)
        return tr.result()
    tr = _Tracker()
    for Q in enumerate_cubes(grid, family):
        M = local_max_array(wn, grid, Q, family)
        sub = np.ascontiguousarray(wn[Q.slices()])
        tr.update(np.array([M.sum() / sub.sum()]), np.array([Q.anchor]), Q.side)
    return tr.result()


# ---------------------------------------------------------------------------
# BMO seminorms


def bmo(f: GridFn, family: CubeFamily) -> Sup:
    """``sup_Q mean_Q |f - f_Q|``."""

    def stat(fr):
        # shifting by a cell value leaves the oscillation unchanged and makes
        # it exactly 0 on cubes where f is constant
        fr = fr - fr[:, :1]
        c = fr.sum(axis=1) / fr.shape[1]
        return np.abs(fr - c[:, None]).sum(axis=1) / fr.shape[1]

    return _sup(f, family, stat, f.values)


def bmo_w(f: GridFn, w: Weight, family: CubeFamily) -> Sup:
    """``sup_Q (1/w(Q)) int_Q |f - f_{Q,w}| w``."""
    _same_grid(f, w)

    def stat(fr, wr):
        fr = fr - fr[:, :1]
        tot = wr.sum(axis=1)
        c = (fr * wr).sum(axis=1) / tot
        return (np.abs(fr - c[:, None]) * wr).sum(axis=1) / tot

    return _sup(f, family, stat, f.values, w.normalized())


# ---------------------------------------------------------------------------
# doubling


def doubling(
    w: Weight, family: CubeFamily, mode: DoubleMode = DoubleMode.REQUIRE_INSIDE
) -> Sup:
    """Observed doubling constant ``sup_Q w(2Q) / w(Q)`` over admissible ``Q``.

    ``2Q`` follows :func:`flatweights.grid.double_cube`.  Inside the domain it
    is a grid cube of side ``2s``, so both masses come from window sums;
    clipped doubles are boxes and use a summed-area table.
    """
    grid = w.grid
    wn = w.normalized()
    tr = _Tracker()
    tables = None
    if mode is DoubleMode.REQUIRE_INSIDE:
        tables = dict(window_reductions(wn))
    for s in family.sides(grid):
        a1 = family.anchors_1d(grid, s)
        mesh = np.meshgrid(*([a1] * grid.n), indexing="ij")
        lo = np.stack([m.ravel() for m in mesh], axis=1)
        lo2 = lo - (s + 1) // 2
        hi2 = lo2 + 2 * s
        if tables is not None:
            keep = np.all((lo2 >= 0) & (hi2 <= grid.N), axis=1)
            lo, lo2 = lo[keep], lo2[keep]
            if not len(lo):
                continue
            big = tables[2 * s][tuple(lo2.T)]
            ratio = big / tables[s][tuple(lo.T)]
        else:
            lo2 = np.maximum(lo2, 0)
            hi2 = np.minimum(hi2, grid.N)
            ratio = box_sums(wn, lo2, hi2) / box_sums(wn, lo, lo + s)
        tr.update(ratio, lo, s)
    if tr.witness is None:
        raise NoAdmissibleCube(f"no cube of {family} has its double inside the domain")
    return tr.result()


# ---------------------------------------------------------------------------
# exponential integrability


def exp_luxemburg(f: GridFn, Q: Cube | Box, w: Weight, rtol: float = 1e-12) -> float:
    """Luxemburg norm of ``f`` in ``exp L(Q, w dx / w(Q))``.

    The unique ``lam`` with ``(1/w(Q)) int_Q exp(|f| / lam) w = 2``, by
    bisection.  Jensen brackets it between ``mean_w |f| / log 2`` and
    ``max |f| / log 2``.
    """
    _same_grid(f, w)
    a = np.abs(np.ascontiguousarray(f.restrict(Q))).ravel()
    wr = np.ascontiguousarray(w.restrict(Q)).ravel()
    mass = wr / wr.sum()
    if not np.any(a > 0):
        return 0.0
    log2 = math.log(2.0)
    lo = float((mass * a).sum()) / log2
    hi = float(a.max()) / log2
    logm = np.log(mass)

    def too_big(lam):
        x = a / lam + logm
        m = x.max()
        return m + math.log(np.exp(x - m).sum()) > log2

    # at lo the average is >= 2, at hi it is <= 2
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if too_big(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _root_exp_average(d: np.ndarray, hi: np.ndarray, log_bound: float) -> np.ndarray:
    """Per row, the ``r`` with ``log mean exp(r d) = log_bound``.

    ``g(r) = log mean exp(r d)`` is convex and increasing, so Newton started
    at ``hi`` (where ``g >= log_bound``) decreases monotonically to the root.
    """
    r = hi.copy()
    active = np.ones(len(r), dtype=bool)
    for _ in range(100):
        if not np.any(active):
            break
        x = r[active, None] * d[active]
        m = x.max(axis=1, keepdims=True)
        e = np.exp(x - m)
        se = e.sum(axis=1)
        g = np.log(se / d.shape[1]) + m[:, 0] - log_bound
        slope = (e * d[active]).sum(axis=1) / se
        step = np.where(g > 0, g / slope, 0.0)
        r[active] -= step
        idx = np.flatnonzero(active)
        active[idx[step <= 1e-15 * r[idx]]] = False
    return r


def jn_sup_r(w: Weight, family: CubeFamily, bound: float = LOG_BOUND_DEFAULT) -> Sup:
    """Largest ``r`` with ``mean_Q exp(r |log w - (log w)_Q|) <= bound`` on every cube.

    Each cube's exponential average is increasing and convex in ``r``, so the
    answer is the smallest per-cube root.  Jensen bounds each root above by
    ``log(bound) / mean dev``; a first pass takes the smallest such bound and
    a second pass solves (by Newton) only the cubes that can still beat the
    running minimum.  Returns ``inf`` (no witness) for a constant weight.
    """
    if not bound > 1:
        raise InvalidParameter(f"bound must exceed 1, got {bound}")
    grid = w.grid
    lw = np.log(w.normalized())
    lb = math.log(bound)

    def deviations(lr):
        return np.abs(lr - (lr.sum(axis=1) / lr.shape[1])[:, None])

    upper = math.inf
    for _, _, (lr,) in cube_blocks(grid, family, lw):
        md = deviations(lr).mean(axis=1)
        md = md[md > 0]
        if len(md):
            upper = min(upper, float((lb / md).min()))
    if math.isinf(upper):
        return Sup(math.inf, None)

    tr = _Tracker(minimize=True)
    for side, anchors, (lr,) in cube_blocks(grid, family, lw):
        cur = min(upper * (1 + 1e-12), tr.value)
        d = deviations(lr)
        mx = d.max(axis=1)
        md = d.mean(axis=1)
        live = md > 0
        # exp(r t) <= 1 + (t / mx) (exp(r mx) - 1) on [0, mx] bounds each root below
        lo = np.full(len(d), math.inf)
        lo[live] = np.log1p((bound - 1) * mx[live] / md[live]) / mx[live]
        cand = lo <= cur
        if not np.any(cand):
            continue
        d, anchors = d[cand], anchors[cand]
        start = np.minimum(lb / md[cand], cur)
        keep = (start < cur) | (logmeanexp(start[:, None] * d) > lb)
        if not np.any(keep):
            continue
        tr.update(_root_exp_average(d[keep], start[keep], lb), anchors[keep], side)
    return tr.result()


# ---------------------------------------------------------------------------
# report


@dataclass
class ConstantsReport:
    """All constants of one weight over one cube family."""

    family: str
    n: int
    L: int
    mode: str
    a_p: dict[float, Sup]
    a_1: Sup
    fujii_wilson: Sup
    hruscev: Sup
    log_ainfty: Sup
    bmo_log: Sup
    bmo_w_log: Sup
    doubling: Sup | None
    jn_r_star: Sup
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def entry(s: Sup | None):
            if s is None:
                return {"value": None, "witness": None}
            val = s.value if math.isfinite(s.value) else None
            wit = s.witness.to_dict() if s.witness is not None else None
            return {"value": val, "witness": wit}

        return {
            "v": 1,
            "n": self.n,
            "L": self.L,
            "family": self.family,
            "doubling_mode": self.mode,
            "a_p": [{"p": p, **entry(s)} for p, s in self.a_p.items()],
            "a_1": entry(self.a_1),
            "fujii_wilson": entry(self.fujii_wilson),
            "hruscev": entry(self.hruscev),
            "log_ainfty": entry(self.log_ainfty),
            "bmo_log": entry(self.bmo_log),
            "bmo_w_log": entry(self.bmo_w_log),
            "doubling": entry(self.doubling),
            "jn_r_star": entry(self.jn_r_star),
        }


def constants_report(
    w: Weight,
    family: CubeFamily,
    ps=(2.0,),
    mode: DoubleMode = DoubleMode.REQUIRE_INSIDE,
    bound: float = LOG_BOUND_DEFAULT,
) -> ConstantsReport:
    try:
        dbl = doubling(w, family, mode)
    except NoAdmissibleCube:
        dbl = None
    ps = tuple(float(p) for p in ps)
    if np.all(w.values == w.values.flat[0]):
        # every average equals every cell value: the constants are exactly 1
        # (0 for the seminorms) and the first family cube attains them
        first = next(enumerate_cubes(w.grid, family))
        one, zero = Sup(1.0, first), Sup(0.0, first)
        return ConstantsReport(
            family=str(family), n=w.grid.n, L=w.grid.L, mode=mode.value,
            a_p={p: one for p in ps}, a_1=one, fujii_wilson=one, hruscev=one,
            log_ainfty=one, bmo_log=zero, bmo_w_log=zero, doubling=dbl,
            jn_r_star=Sup(math.inf, None), extra={"constant_weight": True},
        )
    logw = w.log()
    return ConstantsReport(
        family=str(family),
        n=w.grid.n,
        L=w.grid.L,
        mode=mode.value,
        a_p={p: a_p(w, p, family) for p in ps},
        a_1=a_1(w, family),
        fujii_wilson=fujii_wilson(w, family),
        hruscev=hruscev(w, family),
        log_ainfty=log_ainfty(w, family),
        bmo_log=bmo(logw, family),
        bmo_w_log=bmo_w(logw, w, family),
        doubling=dbl,
        jn_r_star=jn_sup_r(w, family, bound),
    )

"""Local Hardy-Littlewood maximal operator ``M(w chi_Q)`` on the grid.

For a cell ``x`` of ``Q``, ``M(w chi_Q)(x)`` is the largest average of
``w chi_Q`` over a family cube containing ``x`` (single cells always count).
Candidates may stick out of ``Q``, where the integrand vanishes.

Two families admit exact fast paths:

* ``DYADIC`` with a dyadic ``Q``: dyadic cubes meeting ``Q`` are either
  inside ``Q`` or ancestors of it, and an ancestor's average of ``w chi_Q``
  never beats ``w_Q``.  So ``M`` is the running maximum of dyadic averages
  from ``Q`` down to the cell, computed by a top-down sweep.
* ``ALIGNED(1, 1)``: a candidate of side ``r <= side(Q)`` can be slid inside
  ``Q`` without losing mass, and one of side ``r > side(Q)`` can be slid to
  contain ``Q``, giving at most ``w_Q``.  Hence ``M`` is the maximum over
  subcubes of ``Q``.  Every subcube of side ``r < s`` sits in one of the
  ``2**n`` corner subcubes of side ``s - 1``, which gives a recursion on the
  side length over all cubes at once.

Everything else goes through a direct enumeration of candidates.
"""

from __future__ import annotations

import itertools

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidThreshold
from .grid import (
    Cube,
    CubeFamily,
    GridSpec,
    Weight,
    box_sums,
    cube_blocks,
)
from .results import CheckResult


def dyadic_level_averages(arr: np.ndarray, grid: GridSpec) -> list[np.ndarray]:
    """Averages over the dyadic cubes of each level ``k = 0..L``.

    Entry ``k`` has shape ``(2**k,) * n``.
    """
    out = []
    for s, _, (rows,) in cube_blocks(grid, CubeFamily.dyadic(), arr, max_elems=1 << 62):
        k = grid.N // s
        out.append((rows.sum(axis=1) / rows.shape[1]).reshape((k,) * grid.n))
    return out


def _upsample(a: np.ndarray, factor: int) -> np.ndarray:
    for ax in range(a.ndim):
        a = np.repeat(a, factor, axis=ax)
    return a


def dyadic_running_max(arr: np.ndarray, grid: GridSpec) -> list[np.ndarray]:
    """For each level ``l``, the full-resolution array whose cell ``x`` holds
    the maximum dyadic average over cubes of levels ``l..L`` containing ``x``.

    Restricted to a level-``l`` cube ``Q``, entry ``l`` is ``M(w chi_Q)`` for
    the dyadic family.
    """
    levels = dyadic_level_averages(arr, grid)
    running = [None] * (grid.L + 1)
    cur = levels[grid.L]
    running[grid.L] = cur
    for k in range(grid.L - 1, -1, -1):
        cur = np.maximum(_upsample(levels[k], grid.N >> k), cur)
        running[k] = cur
    return running


def aligned_subcube_sweep(arr: np.ndarray):
    """Yield ``(side, max_rows, weight_rows)`` for every side ``1..N``.

    Rows range over all grid-aligned cubes of that side in anchor order;
    ``max_rows[i]`` holds, cell by cell, the maximum average over subcubes of
    cube ``i`` containing the cell, and ``weight_rows[i]`` its cell values.
    Both are contiguous ``(k, side**n)`` arrays.
    """
    n = arr.ndim
    N = arr.shape[0]
    prev = None
    for s in range(1, N + 1):
        A = N - s + 1
        k = A**n
        win = sliding_window_view(arr, (s,) * n)
        wrows = win.reshape(k, s**n)
        avg = wrows.sum(axis=1) / s**n
        G = np.repeat(avg[:, None], s**n, axis=1).reshape((A,) * n + (s,) * n)
        if s == 1:
            G = wrows.copy().reshape((A,) * n + (1,) * n)
        else:
            for off in itertools.product((0, 1), repeat=n):
                src = prev[tuple(slice(o, o + A) for o in off)]
                dst = G[(slice(None),) * n + tuple(slice(o, o + s - 1) for o in off)]
                np.maximum(dst, src, out=dst)
        prev = G
        yield s, G.reshape(k, s**n), wrows


def _subcube_max(sub: np.ndarray) -> np.ndarray:
    G = None
    for _, G, _ in aligned_subcube_sweep(sub):
        pass
    return G.reshape(sub.shape)


def _generic_local_max(
    arr: np.ndarray, grid: GridSpec, Q: Cube, family: CubeFamily
) -> np.ndarray:
    """Direct enumeration: every family cube meeting ``Q`` plus every cell."""
    n = grid.n
    masked = np.zeros_like(arr)
    masked[Q.slices()] = arr[Q.slices()]
    out = arr[Q.slices()].copy()
    qlo = np.array(Q.anchor)
    qhi = qlo + Q.side
    for s in family.sides(grid):
        a1 = family.anchors_1d(grid, s)
        mesh = np.meshgrid(*([a1] * n), indexing="ij")
        lo = np.stack([m.ravel() for m in mesh], axis=1)
        hi = lo + s
        meets = np.all((lo < qhi) & (hi > qlo), axis=1)
        lo, hi = lo[meets], hi[meets]
        if not len(lo):
            continue
        vals = box_sums(masked, lo, hi) / s**n
        ilo = np.maximum(lo, qlo) - qlo
        ihi = np.minimum(hi, qhi) - qlo
        for v, a, b in zip(vals, ilo, ihi):
            sl = tuple(slice(x, y) for x, y in zip(a, b))
            np.maximum(out[sl], v, out=out[sl])
    return out


def local_max_array(
    arr: np.ndarray, grid: GridSpec, Q: Cube, family: CubeFamily
) -> np.ndarray:
    """``M(arr chi_Q)`` on the cells of ``Q`` for raw positive cell values."""
    Q.check(grid)
    sub = arr[Q.slices()]
    if family.is_dyadic and Q.is_dyadic(grid):
        sub_grid = GridSpec(grid.n, Q.side.bit_length() - 1)
        return dyadic_running_max(np.ascontiguousarray(sub), sub_grid)[0]
    if family.is_full_aligned:
        return _subcube_max(np.ascontiguousarray(sub))
    return _generic_local_max(arr, grid, Q, family)


def local_maximal(w: Weight, Q: Cube, family: CubeFamily) -> np.ndarray:
    """Values of ``M(w chi_Q)`` on the cells of ``Q`` (array of shape ``Q.shape``)."""
    return local_max_array(w.values, w.grid, Q, family)


def reverse_weak_11(w: Weight, Q: Cube, t: float, family: CubeFamily) -> CheckResult:
    """Check ``(1/t) * int_{Q, w>t} w <= 2**n |{x in Q : M(w chi_Q)(x) > t}|``.

    Requires ``t > w_Q``.  The constant ``2**n`` is provable for the dyadic
    family; other families are reported as observed.
    """
    grid = w.grid
    Q.check(grid)
    sub = w.values[Q.slices()]
    wq = float(np.ascontiguousarray(sub).sum() / sub.size)
    if not t > wq:
        raise InvalidThreshold(f"threshold {t} must exceed the average {wq}")
    M = local_maximal(w, Q, family)
    cell = grid.cell_volume
    lhs = sub[sub > t].sum() * cell / t
    rhs = 2**grid.n * np.count_nonzero(M > t) * cell
    return CheckResult(
        "reverse_weak_11",
        lhs,
        rhs,
        tol=1e-9,
        witness=Q,
        params={"t": float(t), "family": str(family), "w_Q": wq},
    )


def level_thresholds(w: Weight, Q: Cube) -> list[float]:
    """Thresholds where level sets of ``w`` on ``Q`` change, above ``w_Q``.

    Midpoints between consecutive distinct values of ``w`` on ``Q`` plus one
    point above the maximum, keeping those exceeding ``w_Q``.
    """
    sub = np.ascontiguousarray(w.values[Q.slices()])
    wq = sub.sum() / sub.size
    vals = np.unique(sub)
    mids = list((vals[:-1] + vals[1:]) / 2) + [vals[-1] * 1.5]
    return [float(t) for t in mids if t > wq]

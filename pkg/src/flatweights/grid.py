"""Discrete model of weights and cubes on the half-open unit cube.

A grid of level ``L`` in dimension ``n`` splits ``[0, 1)^n`` into ``N^n``
cells of width ``h = 2**-L`` (``N = 2**L``).  Grid functions are piecewise
constant on cells, so every integral over a grid-aligned cube is a finite sum
and carries no quadrature error.  Cubes are addressed in integer cell
coordinates: an ``anchor`` (lowest corner) and a ``side`` in cells.

Everything here is immutable.  The block iterator :func:`cube_blocks` is the
workhorse behind every supremum in :mod:`flatweights.constants`: it walks a
cube family in its deterministic order (side descending, then anchor
lexicographic) and hands out the cell values of each cube as rows of a 2-D
array.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    CubeOutOfBounds,
    ExponentOverflow,
    InvalidParameter,
    NonFinite,
    NonPositiveValue,
    SizeMismatch,
)

# Upper bound on the number of floats materialised per block chunk.
MAX_BLOCK_ELEMS = 1 << 22


@dataclass(frozen=True)
class GridSpec:
    """Uniform dyadic grid of level ``L`` on ``[0, 1)^n``."""

    n: int
    L: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise InvalidParameter(f"dimension must be 1 or 2, got {self.n}")
        if not isinstance(self.L, (int, np.integer)) or self.L < 0:
            raise InvalidParameter(f"level must be a nonnegative integer, got {self.L}")

    @property
    def N(self) -> int:
        return 1 << self.L

    @property
    def h(self) -> float:
        # exact: a power of two
        return math.ldexp(1.0, -self.L)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def centers(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates, one array of shape ``self.shape`` per axis."""
        c = (np.arange(self.N) + 0.5) * self.h
        return tuple(np.meshgrid(*([c] * self.n), indexing="ij"))

    def full_cube(self) -> "Cube":
        return Cube((0,) * self.n, self.N)


class GridFn:
    """Real-valued grid function, one finite value per cell.

    ``values`` may be given flat (lexicographic / row-major cell order) or
    already shaped as ``grid.shape``.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values):
        arr = np.array(values, dtype=float)
        if arr.size != grid.size:
            raise SizeMismatch(f"expected {grid.size} values for {grid}, got {arr.size}")
        if arr.shape != grid.shape:
            arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise NonFinite("grid function values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)
        self._validate()

    def _validate(self):
        pass

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n}, L={self.grid.L})"

    def __reduce__(self):
        # rebuild through __init__ so pickles are validated and stay read-only
        return (type(self), (self.grid, np.array(self.values)))

    def restrict(self, region: "Cube | Box") -> np.ndarray:
        region.check(self.grid)
        return self.values[region.slices()]

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def map(self, fn) -> "GridFn":
        return GridFn(self.grid, fn(self.values))


class Weight(GridFn):
    """Strictly positive grid function."""

    __slots__ = ()

    def _validate(self):
        if np.any(self.values <= 0):
            raise NonPositiveValue("weights must be strictly positive on every cell")

    def log(self) -> GridFn:
        return GridFn(self.grid, np.log(self.values))

    def normalized(self) -> np.ndarray:
        """Cell values divided by their maximum.

        Every constant is scale invariant; working with ``w / max w`` makes a
        constant weight exactly all-ones, so its constants come out exactly 1.
        """
        return self.values / self.values.max()


@dataclass(frozen=True)
class Box:
    """Axis-aligned block of cells with possibly unequal extents."""

    anchor: tuple[int, ...]
    shape: tuple[int, ...]

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, a + e) for a, e in zip(self.anchor, self.shape))

    def check(self, grid: GridSpec) -> None:
        if len(self.anchor) != grid.n or len(self.shape) != grid.n:
            raise CubeOutOfBounds(f"{self} does not match dimension {grid.n}")
        for a, e in zip(self.anchor, self.shape):
            if a < 0 or e < 1 or a + e > grid.N:
                raise CubeOutOfBounds(f"{self} exits the {grid.N}-cell domain")

    @property
    def ncells(self) -> int:
        return math.prod(self.shape)

    def volume(self, grid: GridSpec) -> float:
        return self.ncells * grid.cell_volume


@dataclass(frozen=True)
class Cube:
    """Grid-aligned cube: integer ``anchor`` (lowest cell) and ``side`` in cells."""

    anchor: tuple[int, ...]
    side: int

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(int(a) for a in self.anchor))
        object.__setattr__(self, "side", int(self.side))
        if self.side < 1:
            raise CubeOutOfBounds(f"cube side must be positive, got {self.side}")

    @property
    def n(self) -> int:
        return len(self.anchor)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.n

    @property
    def ncells(self) -> int:
        return self.side**self.n

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, a + self.side) for a in self.anchor)

    def check(self, grid: GridSpec) -> None:
        if self.n != grid.n:
            raise CubeOutOfBounds(f"{self} does not match dimension {grid.n}")
        if any(a < 0 or a + self.side > grid.N for a in self.anchor):
            raise CubeOutOfBounds(f"{self} exits the {grid.N}-cell domain")

    def length(self, grid: GridSpec) -> float:
        return self.side * grid.h

    def volume(self, grid: GridSpec) -> float:
        return self.ncells * grid.cell_volume

    def contains(self, other: "Cube") -> bool:
        return all(
            a <= b and b + other.side <= a + self.side
            for a, b in zip(self.anchor, other.anchor)
        )

    def is_dyadic(self, grid: GridSpec) -> bool:
        s = self.side
        return s & (s - 1) == 0 and s <= grid.N and all(a % s == 0 for a in self.anchor)

    def to_dict(self) -> dict:
        return {"anchor": list(self.anchor), "side": self.side}


class FamilyKind(enum.Enum):
    DYADIC = "dyadic"
    ALIGNED = "aligned"


@dataclass(frozen=True)
class CubeFamily:
    """Discretisation of "all cubes": the index set of every supremum.

    ``DYADIC`` holds the dyadic cubes of every level.  ``ALIGNED(a, b)`` holds
    cubes with anchors on the stride-``a`` sublattice and sides
    ``1, 1+b, 1+2b, ...``, plus the full domain.
    """

    kind: FamilyKind = FamilyKind.DYADIC
    anchor_stride: int = 1
    side_stride: int = 1

    def __post_init__(self):
        if self.anchor_stride < 1 or self.side_stride < 1:
            raise InvalidParameter("family strides must be >= 1")

    @classmethod
    def dyadic(cls) -> "CubeFamily":
        return cls(FamilyKind.DYADIC)

    @classmethod
    def aligned(cls, a: int = 1, b: int = 1) -> "CubeFamily":
        return cls(FamilyKind.ALIGNED, a, b)

    @classmethod
    def default_aligned(cls, grid: GridSpec) -> "CubeFamily":
        """Stride 1 up to level 8, stride ``2**(L-8)`` above."""
        stride = 1 if grid.L <= 8 else 1 << (grid.L - 8)
        return cls.aligned(stride, stride)

    @classmethod
    def parse(cls, text: str) -> "CubeFamily":
        """Parse ``dyadic``, ``aligned`` or ``aligned:a,b``."""
        text = text.strip().lower()
        if text == "dyadic":
            return cls.dyadic()
        if text == "aligned":
            return cls.aligned()
        if text.startswith("aligned:"):
            parts = text.split(":", 1)[1].split(",")
            if len(parts) != 2:
                raise InvalidParameter(f"bad family {text!r}; expected aligned:a,b")
            try:
                a, b = (int(p) for p in parts)
            except ValueError as exc:
                raise InvalidParameter(f"bad family {text!r}") from exc
            return cls.aligned(a, b)
        raise InvalidParameter(f"unknown cube family {text!r}")

    def __str__(self) -> str:
        if self.kind is FamilyKind.DYADIC:
            return "dyadic"
        return f"aligned:{self.anchor_stride},{self.side_stride}"

    @property
    def is_dyadic(self) -> bool:
        return self.kind is FamilyKind.DYADIC

    @property
    def is_full_aligned(self) -> bool:
        return (
            self.kind is FamilyKind.ALIGNED
            and self.anchor_stride == 1
            and self.side_stride == 1
        )

    def sides(self, grid: GridSpec) -> list[int]:
        N = grid.N
        if self.is_dyadic:
            return [N >> k for k in range(grid.L + 1)]
        sides = set(range(1, N + 1, self.side_stride))
        sides.add(N)
        return sorted(sides, reverse=True)

    def anchors_1d(self, grid: GridSpec, side: int) -> np.ndarray:
        if self.is_dyadic:
            return np.arange(0, grid.N, side)
        return np.arange(0, grid.N - side + 1, self.anchor_stride)

    def _view_step(self, side: int) -> int:
        return side if self.is_dyadic else self.anchor_stride

    def contains(self, cube: Cube, grid: GridSpec) -> bool:
        if cube.side not in self.sides(grid):
            return False
        if self.is_dyadic:
            return all(a % cube.side == 0 for a in cube.anchor)
        return all(
            a % self.anchor_stride == 0 and a + cube.side <= grid.N for a in cube.anchor
        )

    def count(self, grid: GridSpec) -> int:
        return sum(len(self.anchors_1d(grid, s)) ** grid.n for s in self.sides(grid))


# ---------------------------------------------------------------------------
# elementary integrals


def average(f: GridFn, Q: Cube | Box) -> float:
    """Mean of ``f`` over ``Q`` (the integral average, exact on the grid)."""
    vals = np.ascontiguousarray(f.restrict(Q))
    return float(vals.sum() / vals.size)


def weighted_measure(w: Weight, Q: Cube | Box) -> float:
    """``w(Q)``: the integral of ``w`` over ``Q``."""
    return float(w.restrict(Q).sum() * w.grid.cell_volume)


def weighted_average(f: GridFn, w: Weight, Q: Cube | Box) -> float:
    """``f_{Q,w}``: the ``w``-weighted mean of ``f`` over ``Q``."""
    _same_grid(f, w)
    fw = f.restrict(Q) * w.restrict(Q)
    ww = np.ascontiguousarray(w.restrict(Q))
    return float(fw.sum() / ww.sum())


def dual_weight(w: Weight, p: float) -> Weight:
    """Dual weight ``w**(1 - p')`` with ``p' = p / (p - 1)``."""
    if not p > 1:
        raise InvalidParameter(f"dual weight needs p > 1, got {p}")
    expo = 1.0 - p / (p - 1.0)
    with np.errstate(over="ignore", under="ignore"):
        sigma = w.values**expo
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise ExponentOverflow(
            f"w**{expo:g} leaves floating range; the weight's dynamic range is too large for p={p}"
        )
    return Weight(w.grid, sigma)


def _same_grid(*fns: GridFn) -> None:
    g = fns[0].grid
    for f in fns[1:]:
        if f.grid != g:
            raise SizeMismatch("grid functions live on different grids")


# ---------------------------------------------------------------------------
# cube families


def enumerate_cubes(grid: GridSpec, family: CubeFamily) -> Iterator[Cube]:
    """All cubes of ``family`` in deterministic order.

    Order is by side descending, then by anchor lexicographically, which is
    also the row order of :func:`cube_blocks`.
    """
    for s in family.sides(grid):
        a1 = family.anchors_1d(grid, s).tolist()
        for anchor in itertools.product(a1, repeat=grid.n):
            yield Cube(anchor, s)


def cube_blocks(
    grid: GridSpec,
    family: CubeFamily,
    *arrays: np.ndarray,
    max_elems: int = MAX_BLOCK_ELEMS,
) -> Iterator[tuple[int, np.ndarray, list[np.ndarray]]]:
    """Walk ``family`` and yield ``(side, anchors, blocks)`` chunks.

    ``anchors`` is an ``(k, n)`` integer array; each entry of ``blocks`` is a
    ``(k, side**n)`` array holding the cell values (row-major inside the
    cube) of the corresponding input array on those ``k`` cubes.  Chunks keep
    at most about ``max_elems`` floats per array alive.
    """
    for s in family.sides(grid):
        yield from side_blocks(grid, family, s, *arrays, max_elems=max_elems)


def side_blocks(
    grid: GridSpec,
    family: CubeFamily,
    s: int,
    *arrays: np.ndarray,
    max_elems: int = MAX_BLOCK_ELEMS,
) -> Iterator[tuple[int, np.ndarray, list[np.ndarray]]]:
    """The chunks of :func:`cube_blocks` for the cubes of side ``s`` only."""
    n = grid.n
    a1 = family.anchors_1d(grid, s)
    step = family._view_step(s)
    views = [
        sliding_window_view(arr, (s,) * n)[(slice(None, None, step),) * n]
        for arr in arrays
    ]
    A = len(a1)
    per_row = A ** (n - 1) * s**n
    rows = max(1, max_elems // max(per_row, 1))
    for i0 in range(0, A, rows):
        i1 = min(A, i0 + rows)
        mesh = np.meshgrid(a1[i0:i1], *([a1] * (n - 1)), indexing="ij")
        anchors = np.stack([m.ravel() for m in mesh], axis=1)
        blocks = [v[i0:i1].reshape(-1, s**n) for v in views]
        yield s, anchors, blocks


def window_reductions(arr: np.ndarray, op=np.add) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(s, table)`` for ``s = 1..N``, ascending.

    ``table[a]`` is the ``op``-reduction of ``arr`` over the cube with anchor
    ``a`` and side ``s`` (all grid-aligned anchors).  Each side is built from
    the previous one by adding the new boundary strip, so sums never suffer
    the cancellation of a summed-area table.  ``op`` must be an associative,
    commutative ufunc (``np.add``, ``np.minimum``, ...).
    """
    n = arr.ndim
    N = arr.shape[0]
    if n == 1:
        T = arr.copy()
        yield 1, T
        for s in range(2, N + 1):
            T = op(T[:-1], arr[s - 1 :])
            yield s, T
        return
    # R: row windows of the current side; C: column windows of the current side
    R = arr.copy()
    C = arr.copy()
    T = arr.copy()
    yield 1, T
    for s in range(2, N + 1):
        R = op(R[:, :-1], arr[:, s - 1 :])
        T = op(op(T[:-1, :-1], R[s - 1 :, :]), C[:-1, s - 1 :])
        C = op(C[:-1], arr[s - 1 :])
        yield s, T


def family_tables(grid: GridSpec, family: CubeFamily, arr: np.ndarray, op=np.add):
    """``{side: table}`` of :func:`window_reductions` restricted to ``family``.

    Each table has one entry per family anchor, in lexicographic order.
    """
    wanted = set(family.sides(grid))
    out = {}
    if family.is_dyadic:
        for s, _, (rows,) in cube_blocks(grid, family, arr, max_elems=1 << 62):
            red = op.reduce(rows, axis=1)
            out[s] = red.reshape((grid.N // s,) * grid.n)
        return out
    for s, T in window_reductions(arr, op):
        if s in wanted:
            step = family.anchor_stride
            out[s] = T[(slice(None, None, step),) * grid.n]
    return out


class DoubleMode(enum.Enum):
    CLIP = "clip"
    REQUIRE_INSIDE = "require_inside"


def double_cube(Q: Cube, grid: GridSpec, mode: DoubleMode = DoubleMode.REQUIRE_INSIDE):
    """Concentric double ``2Q`` of side ``2 * side``, snapped to cell boundaries.

    For odd sides the anchor is rounded down (``anchor - ceil(side / 2)``).
    ``REQUIRE_INSIDE`` returns ``None`` when the double leaves the domain;
    ``CLIP`` intersects it with the domain, which gives a :class:`Box` when the
    intersection is no longer a cube.
    """
    Q.check(grid)
    s2 = 2 * Q.side
    lo = tuple(a - (Q.side + 1) // 2 for a in Q.anchor)
    if mode is DoubleMode.REQUIRE_INSIDE:
        if any(a < 0 or a + s2 > grid.N for a in lo):
            return None
        return Cube(lo, s2)
    clo = tuple(max(a, 0) for a in lo)
    chi = tuple(min(a + s2, grid.N) for a in lo)
    shape = tuple(b - a for a, b in zip(clo, chi))
    if len(set(shape)) == 1:
        return Cube(clo, shape[0])
    return Box(clo, shape)


def box_sums(arr: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Sums of ``arr`` over boxes ``[lo, hi)`` (rows of ``(k, n)`` arrays).

    Uses a summed-area table; exact for integer-valued data.
    """
    n = arr.ndim
    S = np.zeros(tuple(d + 1 for d in arr.shape))
    inner = arr
    for ax in range(n):
        inner = np.cumsum(inner, axis=ax)
    S[(slice(1, None),) * n] = inner
    total = np.zeros(len(lo))
    for corner in itertools.product((0, 1), repeat=n):
        idx = tuple(np.where(c, hi[:, d], lo[:, d]) for d, c in enumerate(corner))
        sign = (-1) ** (n - sum(corner))
        total += sign * S[idx]
    return total


def as_cube(obj: Cube | Sequence | dict) -> Cube:
    if isinstance(obj, Cube):
        return obj
    if isinstance(obj, dict):
        return Cube(tuple(obj["anchor"]), obj["side"])
    anchor, side = obj
    return Cube(tuple(anchor), side)


def make_weight(values, grid: GridSpec) -> Weight:
    """Validated :class:`Weight` from cell values in lexicographic order."""
    return Weight(grid, values)

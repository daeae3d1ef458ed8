import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatweights import io as gio
from flatweights.errors import (
    CubeOutOfBounds,
    ExponentOverflow,
    NonFinite,
    NonPositiveValue,
    SizeMismatch,
)
from flatweights.grid import (
    Box,
    Cube,
    CubeFamily,
    DoubleMode,
    GridFn,
    GridSpec,
    Weight,
    average,
    double_cube,
    dual_weight,
    enumerate_cubes,
    family_tables,
    make_weight,
    weighted_average,
    weighted_measure,
    window_reductions,
)

import oracles as O


def grid_and_values(positive=True, max_level=3):
    def build(nl):
        n, L = nl
        size = 2 ** (n * L)
        lo = 0.05 if positive else -5.0
        return st.tuples(
            st.just(GridSpec(n, L)),
            st.lists(st.floats(lo, 5.0), min_size=size, max_size=size),
        )

    return st.tuples(st.integers(1, 2), st.integers(1, max_level)).flatmap(build)


# --- construction --------------------------------------------------------


def test_make_weight_constant():
    w = make_weight([1, 1, 1, 1], GridSpec(1, 2))
    assert np.all(w.values == 1.0)


def test_make_weight_two_cell_step():
    w = make_weight([2, 1], GridSpec(1, 1))
    assert w.values.tolist() == [2.0, 1.0]


def test_make_weight_rejects_zero():
    with pytest.raises(NonPositiveValue):
        make_weight([1, 0], GridSpec(1, 1))


def test_make_weight_rejects_nonfinite_and_size():
    with pytest.raises(NonFinite):
        make_weight([1, math.inf], GridSpec(1, 1))
    with pytest.raises(SizeMismatch):
        make_weight([1, 2, 3], GridSpec(1, 1))


def test_grid_geometry():
    g = GridSpec(2, 3)
    assert g.N == 8 and g.N * g.h == 1.0 and g.shape == (8, 8)
    with pytest.raises(ValueError):
        GridSpec(3, 1)
    with pytest.raises(ValueError):
        GridSpec(1, -1)


def test_values_are_read_only():
    w = make_weight([2, 1], GridSpec(1, 1))
    with pytest.raises(ValueError):
        w.values[0] = 5.0


# --- integrals -----------------------------------------------------------


def test_average_examples():
    g = GridSpec(1, 1)
    f = GridFn(g, [2, 1])
    assert average(GridFn(GridSpec(1, 3), [4.5] * 8), Cube((2,), 4)) == 4.5
    assert average(f, Cube((0,), 2)) == 1.5
    assert average(f, Cube((0,), 1)) == 2.0
    with pytest.raises(CubeOutOfBounds):
        average(f, Cube((1,), 2))


def test_weighted_measure_examples():
    g = GridSpec(1, 1)
    assert weighted_measure(Weight(GridSpec(2, 2), np.ones(16)), GridSpec(2, 2).full_cube()) == 1.0
    w = make_weight([2, 1], g)
    assert weighted_measure(w, Cube((0,), 2)) == 1.5
    assert weighted_measure(w, Cube((1,), 1)) == 0.5


def test_weighted_average_examples():
    g = GridSpec(1, 1)
    w = make_weight([2, 1], g)
    assert weighted_average(GridFn(g, [3, 3]), w, Cube((0,), 2)) == 3.0
    assert weighted_average(w.log(), w, Cube((0,), 2)) == pytest.approx((2 / 3) * math.log(2), rel=1e-15)


def test_dual_weight_examples():
    g = GridSpec(1, 1)
    w = make_weight([2, 1], g)
    np.testing.assert_allclose(dual_weight(w, 2).values, [0.5, 1.0], rtol=1e-15)
    np.testing.assert_allclose(dual_weight(w, 3).values, [2**-0.5, 1.0], rtol=1e-15)
    with pytest.raises(ExponentOverflow):
        dual_weight(make_weight([1e-300, 1.0], g), 1.001)


@given(grid_and_values())
def test_dual_weight_is_an_involution(gv):
    g, vals = gv
    w = Weight(g, vals)
    for p in (1.5, 2.0, 3.0):
        back = dual_weight(dual_weight(w, p), p / (p - 1))
        np.testing.assert_allclose(back.values, w.values, rtol=1e-12)


@st.composite
def two_functions(draw):
    n, L = draw(st.integers(1, 2)), draw(st.integers(1, 3))
    size = 2 ** (n * L)
    vals = st.lists(st.floats(-5, 5), min_size=size, max_size=size)
    return GridSpec(n, L), draw(vals), draw(vals)


@given(two_functions(), st.floats(-3, 3), st.floats(-3, 3))
def test_average_is_linear(fns, a, b):
    g, v1, v2 = fns
    f1, f2 = GridFn(g, v1), GridFn(g, v2)
    comb = GridFn(g, a * np.asarray(v1) + b * np.asarray(v2))
    for Q in enumerate_cubes(g, CubeFamily.aligned()):
        expect = a * average(f1, Q) + b * average(f2, Q)
        assert average(comb, Q) == pytest.approx(expect, abs=1e-12)


@given(grid_and_values())
def test_measure_is_additive_over_children(gv):
    g, vals = gv
    w = Weight(g, vals)
    for Q in enumerate_cubes(g, CubeFamily.dyadic()):
        if Q.side == 1:
            continue
        h = Q.side // 2
        kids = [
            Cube(tuple(a + h * o for a, o in zip(Q.anchor, off)), h)
            for off in np.ndindex(*(2,) * g.n)
        ]
        total = sum(weighted_measure(w, K) for K in kids)
        assert weighted_measure(w, Q) == pytest.approx(total, rel=1e-13)


@given(grid_and_values(positive=False))
def test_weighted_average_with_unit_weight_is_average(gv):
    g, vals = gv
    f = GridFn(g, vals)
    one = Weight(g, np.ones(g.size))
    for Q in enumerate_cubes(g, CubeFamily.aligned()):
        assert weighted_average(f, one, Q) == average(f, Q)


# --- enumeration ---------------------------------------------------------


def test_enumeration_examples():
    assert [(c.anchor, c.side) for c in enumerate_cubes(GridSpec(1, 1), CubeFamily.dyadic())] == [
        ((0,), 2),
        ((0,), 1),
        ((1,), 1),
    ]
    assert len(list(enumerate_cubes(GridSpec(1, 2), CubeFamily.aligned()))) == 10
    assert len(list(enumerate_cubes(GridSpec(2, 1), CubeFamily.dyadic()))) == 5


@pytest.mark.parametrize("n,L", [(1, 0), (1, 3), (2, 2), (2, 3)])
@pytest.mark.parametrize("a,b", [(1, 1), (2, 3), (3, 2)])
def test_enumeration_matches_reference_order(n, L, a, b):
    g = GridSpec(n, L)
    for fam, ref in [
        (CubeFamily.dyadic(), O.family_cubes(n, L, "dyadic")),
        (CubeFamily.aligned(a, b), O.family_cubes(n, L, "aligned", a, b)),
    ]:
        got = [(c.anchor, c.side) for c in enumerate_cubes(g, fam)]
        assert got == [(tuple(x), s) for x, s in ref]
        assert fam.count(g) == len(got)
        assert got[0] == ((0,) * n, g.N)


@pytest.mark.parametrize("n,L", [(1, 4), (2, 3)])
def test_aligned_contains_dyadic(n, L):
    g = GridSpec(n, L)
    dy = set(enumerate_cubes(g, CubeFamily.dyadic()))
    al = set(enumerate_cubes(g, CubeFamily.aligned()))
    assert dy <= al
    assert sum(1 for _ in enumerate_cubes(g, CubeFamily.dyadic())) == sum(2 ** (n * k) for k in range(L + 1))


def test_family_parse_roundtrip():
    for text in ("dyadic", "aligned:1,1", "aligned:4,2"):
        assert str(CubeFamily.parse(text)) == text
    assert CubeFamily.default_aligned(GridSpec(1, 10)) == CubeFamily.aligned(4, 4)
    with pytest.raises(ValueError):
        CubeFamily.parse("hexagonal")


@pytest.mark.parametrize("n,L", [(1, 5), (2, 3)])
@pytest.mark.parametrize("op", [np.add, np.minimum, np.maximum])
def test_window_reductions_match_direct(n, L, op):
    rng = np.random.default_rng(n * 10 + L)
    arr = rng.uniform(0.1, 2.0, (2**L,) * n)
    for s, T in window_reductions(arr, op):
        for anchor in np.ndindex(*T.shape):
            direct = op.reduce(O.block(arr, anchor, s).ravel())
            assert T[anchor] == pytest.approx(direct, rel=1e-14)
    fam = CubeFamily.aligned(2, 3)
    tabs = family_tables(GridSpec(n, L), fam, arr, op)
    assert sorted(tabs) == sorted(fam.sides(GridSpec(n, L)))


# --- doubling ------------------------------------------------------------


def test_double_cube_examples():
    g = GridSpec(1, 2)
    assert double_cube(Cube((1,), 1), g, DoubleMode.REQUIRE_INSIDE) == Cube((0,), 2)
    assert double_cube(g.full_cube(), g, DoubleMode.REQUIRE_INSIDE) is None
    assert double_cube(g.full_cube(), g, DoubleMode.CLIP) == g.full_cube()


def test_double_cube_clip_gives_box_in_corner():
    g = GridSpec(2, 3)
    out = double_cube(Cube((0, 3), 2), g, DoubleMode.CLIP)
    assert isinstance(out, Box) and out.anchor == (0, 2) and out.shape == (3, 4)


@given(st.integers(0, 3), st.integers(1, 8), st.integers(0, 7))
def test_double_cube_is_concentric_twice_the_side(L, s, a):
    g = GridSpec(1, L + 2)
    if a + s > g.N:
        return
    D = double_cube(Cube((a,), s), g, DoubleMode.REQUIRE_INSIDE)
    if D is None:
        return
    assert D.side == 2 * s
    # centres differ by at most half a cell
    assert abs((D.anchor[0] + D.side / 2) - (a + s / 2)) <= 0.5


# --- files ---------------------------------------------------------------


@given(grid_and_values(max_level=2))
def test_csv_and_json_round_trip_bit_exact(gv):
    g, vals = gv
    w = Weight(g, vals)
    for text in (gio.dumps_csv(w), gio.dumps_json(w)):
        back = gio.loads(text)
        assert back.grid == g
        assert np.array_equal(back.values, w.values)


def test_file_round_trip(tmp_path):
    g = GridSpec(2, 2)
    f = GridFn(g, np.linspace(-1, 1, 16) / 3)
    for name in ("f.csv", "f.json"):
        gio.write(f, tmp_path / name)
        back = gio.read(tmp_path / name, weight=False)
        assert np.array_equal(back.values, f.values)
    assert gio.dumps_csv(f).splitlines()[0] == "2,2"


def test_file_errors():
    with pytest.raises(SizeMismatch):
        gio.loads("1,2\n1,2,3\n")
    with pytest.raises(ValueError):
        gio.loads("{bad json")
    with pytest.raises(NonPositiveValue):
        gio.loads('{"n": 1, "L": 1, "values": [1, -1]}')


def test_grid_functions_pickle():
    import pickle

    w = make_weight([2, 1, 3, 4], GridSpec(1, 2))
    back = pickle.loads(pickle.dumps(w))
    assert type(back) is Weight and back.grid == w.grid
    assert np.array_equal(back.values, w.values) and not back.values.flags.writeable

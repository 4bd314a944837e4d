import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from perfhom.grid import (
    Grid,
    GridMismatchError,
    ScalarField,
    field_from_function,
    field_from_text,
    field_to_text,
    inner_product,
    l2_norm,
    make_grid,
    restrict,
    zeros,
)


def small_grid(extents=(5, 4), spacing=0.25):
    return Grid(dim=len(extents), origin=(0.0,) * len(extents), spacing=spacing, extents=extents)


field_values = hnp.arrays(
    dtype=np.float64,
    shape=(5, 4),
    elements=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(dim=0, origin=(), spacing=0.1, extents=())
    with pytest.raises(ValueError):
        Grid(dim=2, origin=(0.0,), spacing=0.1, extents=(4, 4))
    with pytest.raises(ValueError):
        Grid(dim=1, origin=(0.0,), spacing=-1.0, extents=(4,))
    with pytest.raises(ValueError):
        Grid(dim=1, origin=(0.0,), spacing=0.1, extents=(1,))


def test_node_centers():
    g = small_grid()
    x = g.axis_coords(0)
    assert x[0] == pytest.approx(0.125)
    assert x[-1] == pytest.approx(0.0 + 4.5 * 0.25)
    assert g.cell_volume == pytest.approx(0.25**2)
    assert g.num_nodes == 20


def test_make_grid_centers_vs_faces():
    g = make_grid((0.0,), (1.0,), 0.25, align="centers")
    assert g.extents == (4,)
    assert list(g.axis_coords(0)) == pytest.approx([0.125, 0.375, 0.625, 0.875])

    g = make_grid((0.0,), (1.0,), 0.25, align="faces")
    assert g.extents == (5,)
    assert list(g.axis_coords(0)) == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])


def test_make_grid_margin_covers_support():
    # margin rounds up to whole cells on every side
    g = make_grid((0.0, 0.0), (1.0, 1.0), 0.25, margin=0.3)
    assert g.extents == (8, 8)
    assert g.axis_coords(0)[0] < 0.0 - 0.3 + 0.25
    with pytest.raises(ValueError):
        make_grid((0.0,), (1.0,), 0.25, margin=-0.1)
    with pytest.raises(ValueError):
        make_grid((0.0,), (0.0,), 0.25)
    with pytest.raises(ValueError):
        make_grid((0.0,), (1.0,), 0.25, align="corners")


def test_field_finite_check():
    g = small_grid()
    vals = np.zeros(g.shape)
    vals[0, 0] = np.nan
    with pytest.raises(ValueError):
        ScalarField(g, vals)
    with pytest.raises(GridMismatchError):
        ScalarField(g, np.zeros((3, 3)))


def test_field_values_read_only():
    f = zeros(small_grid())
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


@given(a=field_values, b=field_values)
@settings(max_examples=60, deadline=None)
def test_inner_product_symmetric(a, b):
    g = small_grid()
    fa, fb = ScalarField(g, a), ScalarField(g, b)
    # pointwise products commute exactly, so this is bitwise
    assert inner_product(fa, fb) == inner_product(fb, fa)


@given(a=field_values, b=field_values, c=field_values)
@settings(max_examples=60, deadline=None)
def test_inner_product_bilinear(a, b, c):
    g = small_grid()
    fa, fb, fc = ScalarField(g, a), ScalarField(g, b), ScalarField(g, c)
    lhs = inner_product(ScalarField(g, a + b), fc)
    rhs = inner_product(fa, fc) + inner_product(fb, fc)
    scale = max(abs(lhs), abs(rhs), 1.0)
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(a=field_values)
@settings(max_examples=60, deadline=None)
def test_l2_norm_consistent(a):
    f = ScalarField(small_grid(), a)
    assert l2_norm(f) == pytest.approx(np.sqrt(inner_product(f, f)), abs=1e-12)


def test_inner_product_grid_mismatch():
    f = zeros(small_grid())
    h = zeros(small_grid(spacing=0.5))
    with pytest.raises(GridMismatchError):
        inner_product(f, h)


def test_restrict_zeroes_and_is_idempotent(rng):
    g = small_grid()
    f = ScalarField(g, rng.standard_normal(g.shape))
    keep = rng.random(g.shape) > 0.5
    r = restrict(f, keep)
    assert np.all(r.values[~keep] == 0.0)
    assert np.array_equal(r.values[keep], f.values[keep])
    assert np.array_equal(restrict(r, keep).values, r.values)


def test_restrict_with_predicate():
    g = make_grid((0.0, 0.0), (1.0, 1.0), 0.25)
    f = field_from_function(g, lambda x, y: np.ones_like(x))
    r = restrict(f, lambda x, y: x < 0.5)
    assert r.values.sum() == pytest.approx(8.0)
    with pytest.raises(GridMismatchError):
        restrict(f, np.ones((2, 2), dtype=bool))


def test_field_from_function_broadcasts():
    g = small_grid()
    f = field_from_function(g, lambda x, y: 3.0)
    assert np.all(f.values == 3.0)


def test_field_text_round_trip(rng):
    g = Grid(dim=2, origin=(-0.5, 1.25), spacing=1.0 / 3.0, extents=(4, 6))
    f = ScalarField(g, rng.standard_normal(g.shape) * 1e3)
    back = field_from_text(field_to_text(f))
    assert back.grid == f.grid
    assert np.array_equal(back.values, f.values)  # repr round trip is exact


def test_field_text_rejects_other_formats():
    with pytest.raises(ValueError):
        field_from_text("not a dump\n")

import numpy as np
import pytest

from perfhom.experiments import (
    EQUAL_TOL_FACTOR,
    UNEQUAL_THRESHOLD,
    RadiusRegime,
    VerdictGapError,
    _classify,
    delta_localization_sweep,
    iterated_limit_dirichlet,
    iterated_limit_neumann,
    nonlocal_critical_sweep,
)
from perfhom.geometry import HoleShape, PerforationSpec, build_periodic_mask
from perfhom.grid import ScalarField, make_grid
from perfhom.kernels import Profile
from perfhom.localref import CellGeometry


def test_thresholds_leave_a_gap():
    assert EQUAL_TOL_FACTOR * 1e-10 < UNEQUAL_THRESHOLD


def test_classify_gap_zone_raises():
    grid = make_grid((0.0,), (1.0,), 0.25)
    w = ScalarField(grid, np.ones(grid.shape))
    v = ScalarField(grid, np.ones(grid.shape) * (1.0 - 0.01))  # 1% apart
    with pytest.raises(VerdictGapError) as exc:
        _classify("case", RadiusRegime.EQ_B, w, v, True, tol=1e-10)
    assert 0.0 < exc.value.distance < UNEQUAL_THRESHOLD


def test_classify_clear_cases():
    grid = make_grid((0.0,), (1.0,), 0.25)
    w = ScalarField(grid, np.ones(grid.shape))
    same = _classify("case", RadiusRegime.EQ_B, w, w, True, tol=1e-10)
    assert same.equal and same.distance == 0.0 and same.agrees_with_prediction()
    far = _classify("case", RadiusRegime.EQ_B, w, ScalarField(grid, -w.values), False, tol=1e-10)
    assert not far.equal and far.agrees_with_prediction()


def test_dirichlet_table_small():
    kw = dict(dim=3, nodes_per_axis=12, tol=1e-10)
    eq_b = iterated_limit_dirichlet(RadiusRegime.EQ_B, **kw)
    assert eq_b.equal and eq_b.predicted_equal and eq_b.distance == 0.0

    between = iterated_limit_dirichlet(RadiusRegime.BETWEEN_A_B, **kw)
    assert not between.equal and between.agrees_with_prediction()

    eq_a = iterated_limit_dirichlet(RadiusRegime.EQ_A, **kw)
    assert not eq_a.equal and eq_a.agrees_with_prediction()
    assert eq_a.distance >= UNEQUAL_THRESHOLD

    ll_a = iterated_limit_dirichlet(RadiusRegime.LL_A, **kw)
    assert ll_a.equal and ll_a.agrees_with_prediction()


def test_dirichlet_rejects_unpinned_regime():
    with pytest.raises(ValueError):
        iterated_limit_dirichlet(RadiusRegime.LL_B, nodes_per_axis=8)


def test_neumann_table_small():
    ll_b = iterated_limit_neumann(RadiusRegime.LL_B, nodes_per_axis=16)
    assert ll_b.equal and ll_b.agrees_with_prediction()
    eq_b = iterated_limit_neumann(RadiusRegime.EQ_B, nodes_per_axis=16)
    assert not eq_b.equal and eq_b.agrees_with_prediction()
    assert eq_b.distance == pytest.approx(1.0)  # one side is identically zero


def test_neumann_table_rejects_local_regimes():
    for regime in (RadiusRegime.BETWEEN_A_B, RadiusRegime.EQ_A, RadiusRegime.LL_A):
        with pytest.raises(ValueError):
            iterated_limit_neumann(regime, nodes_per_axis=8)


def test_neumann_cell_dimension_checked():
    with pytest.raises(ValueError):
        iterated_limit_neumann(
            RadiusRegime.EQ_B, nodes_per_axis=16, cell=CellGeometry((1.0, 1.0, 1.0))
        )


def unperforated_mask(h, margin):
    grid = make_grid((0.0, 0.0), (1.0, 1.0), h, margin=margin, align="faces")
    spec = PerforationSpec(
        omega_lo=(0.0, 0.0),
        omega_hi=(1.0, 1.0),
        cell_lengths=(1.0, 1.0),
        hole_shape=HoleShape.NONE,
        epsilon=1.0,
    )
    return build_periodic_mask(spec, grid)


def test_delta_sweep_errors_decrease():
    mask = unperforated_mask(1.0 / 32.0, margin=0.4)
    records = delta_localization_sweep(
        mask,
        Profile.BUMP,
        lambda x, y: 2.0 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y),
        deltas=(0.4, 0.2, 0.125),
        tol=1e-10,
    )
    errs = [r.diagnostics["error_l2"] for r in records]
    assert all(r.error is None for r in records)
    assert errs[0] > errs[1] > errs[2]


def test_delta_sweep_requires_resolved_support():
    mask = unperforated_mask(1.0 / 8.0, margin=0.4)
    with pytest.raises(ValueError, match="too coarse"):
        delta_localization_sweep(mask, Profile.BUMP, 1.0, deltas=(0.4, 0.2))


def test_delta_sweep_empty():
    mask = unperforated_mask(1.0 / 16.0, margin=0.4)
    assert delta_localization_sweep(mask, Profile.BUMP, 1.0, deltas=()) == []


def test_critical_sweep_limits_by_gamma():
    eps = (0.5, 0.25)
    common = dict(f=1.0, c0=0.25, epsilons=eps, h_over_eps=0.25, compute_eigenvalue=False)
    crit = nonlocal_critical_sweep(gamma=1.0, **common)
    assert crit.chi == pytest.approx(1.0 - np.pi / 16.0)
    assert crit.nu == pytest.approx((np.pi / 16.0) / (1.0 - np.pi / 16.0))

    full = nonlocal_critical_sweep(gamma=1.5, **common)
    assert full.chi == 1.0 and full.nu == 0.0

    vanishing = nonlocal_critical_sweep(gamma=0.75, **common)
    assert vanishing.chi == 0.0 and vanishing.nu is None
    for res in (crit, full, vanishing):
        assert [r.value for r in res.records] == list(eps)
        assert all(r.error is None for r in res.records)

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from perfhom.kernels import (
    KernelError,
    KernelSpec,
    Profile,
    RescaleMode,
    SampleMode,
    rescale,
    sample,
    second_moment_constant,
    unit_ball_volume,
    validate_kernel,
)

PROFILES = (Profile.INDICATOR, Profile.TENT, Profile.BUMP)


def test_unit_ball_volumes():
    assert unit_ball_volume(1) == pytest.approx(2.0, rel=1e-14)
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-14)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-14)


def test_second_moment_constant_closed_forms():
    # ball indicator: C = 2 (N + 2)
    assert second_moment_constant(KernelSpec(1, Profile.INDICATOR)) == pytest.approx(6.0, abs=1e-14)
    assert second_moment_constant(KernelSpec(2, Profile.INDICATOR)) == pytest.approx(8.0, abs=1e-14)
    assert second_moment_constant(KernelSpec(3, Profile.INDICATOR)) == pytest.approx(10.0, abs=1e-14)
    # tent: radial moments 1/(n(n+1)) and 1/((n+2)(n+3)), rederived here
    for n in (1, 2, 3):
        expected = float(2 * n * Fraction(1, n * (n + 1)) / Fraction(1, (n + 2) * (n + 3)))
        assert second_moment_constant(KernelSpec(n, Profile.TENT)) == pytest.approx(
            expected, rel=1e-14
        )


@pytest.mark.parametrize("profile", PROFILES)
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_second_moment_constant_against_quadrature(profile, dim):
    # The ratio 2N int j r^(N-1) / int j r^(N+1) is free of the radial shape's
    # normalization, so evaluate() can stand in for the raw profile.
    spec = KernelSpec(dim, profile)

    def shape(r):
        point = np.zeros((1, dim))
        point[0, 0] = r
        return float(spec.evaluate(point)[0])

    lower, _ = integrate.quad(lambda r: shape(r) * r ** (dim - 1), 0.0, 1.0)
    upper, _ = integrate.quad(lambda r: shape(r) * r ** (dim + 1), 0.0, 1.0)
    assert second_moment_constant(spec) == pytest.approx(2.0 * dim * lower / upper, rel=1e-8)


def test_second_moment_constant_requires_unrescaled():
    with pytest.raises(KernelError):
        second_moment_constant(KernelSpec(2, Profile.BUMP, delta=0.5))
    with pytest.raises(KernelError):
        second_moment_constant(KernelSpec(2, Profile.BUMP, mode=RescaleMode.SECOND_MOMENT))


def test_kernel_spec_validation():
    with pytest.raises(KernelError):
        KernelSpec(0, Profile.TENT)
    with pytest.raises(KernelError):
        KernelSpec(2, Profile.TENT, delta=0.0)
    with pytest.raises(KernelError):
        KernelSpec(2, Profile.TENT, delta=1.5)
    with pytest.raises(KernelError):
        KernelSpec(2, "triangle")


@pytest.mark.parametrize("profile", PROFILES)
def test_validate_kernel_passes_builtins(profile):
    for dim in (1, 2, 3):
        report = validate_kernel(KernelSpec(dim, profile, delta=0.5))
        assert report.passed, report.checks
    if profile == Profile.INDICATOR:
        assert any("discontinuous" in note for note in validate_kernel(KernelSpec(2, profile)).notes)


@pytest.mark.parametrize("profile", PROFILES)
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_renormalized_sampling_hits_analytic_mass(profile, dim):
    for delta in (1.0, 0.5):
        spec = KernelSpec(dim, profile, delta=delta)
        kern = sample(spec, spacing=delta / 6.0)
        assert abs(kern.discrete_mass() - spec.mass) <= 1e-12 * spec.mass


def test_raw_sampling_mass_converges():
    spec = KernelSpec(2, Profile.BUMP)
    errs = [
        abs(sample(spec, spacing=h, mode=SampleMode.RAW).discrete_mass() - 1.0)
        for h in (1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0)
    ]
    assert errs[2] < errs[0]
    # and renormalization removes the error entirely
    assert abs(sample(spec, 1.0 / 4.0).discrete_mass() - 1.0) <= 1e-15


def test_sample_rejects_coarse_spacing():
    with pytest.raises(KernelError):
        sample(KernelSpec(2, Profile.TENT, delta=0.25), spacing=0.25)
    with pytest.raises(KernelError):
        sample(KernelSpec(2, Profile.TENT), spacing=-0.1)


def test_sampled_stencil_symmetric():
    kern = sample(KernelSpec(2, Profile.TENT, delta=0.5), spacing=0.1)
    st_arr = kern.stencil()
    assert np.array_equal(st_arr, st_arr[::-1, ::-1])
    assert st_arr.shape == tuple(2 * m + 1 for m in kern.half_widths)


def test_rescale_composes_in_mass_mode():
    base = KernelSpec(2, Profile.BUMP)
    k1 = rescale(rescale(base, 0.5), 0.5)
    k2 = rescale(base, 0.25)
    assert k1 == k2
    r = np.linspace(0.0, 0.3, 7)
    assert np.allclose(k1.value_at_radius(r), k2.value_at_radius(r), rtol=0, atol=0)
    with pytest.raises(KernelError):
        rescale(base, 1.5)


def test_second_moment_mode_normalizes_discrete_moment():
    # sum of w * z_1^2 over the lattice should approach the fixed target 2
    for delta in (0.5, 0.25):
        spec = KernelSpec(2, Profile.BUMP, delta=delta, mode=RescaleMode.SECOND_MOMENT)
        kern = sample(spec, spacing=delta / 16.0)
        z1 = kern.offsets[:, 0] * kern.spacing
        moment = float(np.sum(kern.weights * z1 * z1) * kern.spacing**2)
        assert moment == pytest.approx(2.0, rel=5e-2)


@given(
    st.lists(
        st.floats(min_value=-1.0, max_value=1.0, allow_nan=False), min_size=2, max_size=2
    )
)
@settings(max_examples=100, deadline=None)
def test_kernel_even_and_nonnegative(z):
    spec = KernelSpec(2, Profile.BUMP, delta=0.7)
    v_pos = float(spec.evaluate([z])[0])
    v_neg = float(spec.evaluate([[-z[0], -z[1]]])[0])
    assert v_pos == v_neg  # radial evaluation, exactly even
    assert v_pos >= 0.0


def test_evaluate_checks_dimension():
    with pytest.raises(KernelError):
        KernelSpec(2, Profile.TENT).evaluate([[0.1, 0.2, 0.3]])

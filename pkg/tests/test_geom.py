import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqyamabe.errors import DegenerateInputError, DomainError, RangeError
from eqyamabe.geom import (
    ClosedModelMetric,
    ConformalTestFunction,
    RadialMetric,
    einstein_hilbert_energy,
    scalar_curvature_radial,
    yamabe_quotient,
)

SIGMA_S3 = 6 * (2 * math.pi**2) ** (2 / 3)


def test_closed_model_volumes():
    s = ClosedModelMetric.sphere()
    assert s.volume == pytest.approx(2 * math.pi**2, rel=1e-15)
    assert ClosedModelMetric.projective().volume == pytest.approx(s.volume / 2)
    assert ClosedModelMetric.lens(5).volume == pytest.approx(s.volume / 5)
    assert s.scalar_curvature == 6.0


def test_closed_model_rejects_bad_input():
    with pytest.raises(DomainError):
        ClosedModelMetric.sphere(radius=-1.0)
    with pytest.raises(DomainError):
        ClosedModelMetric("torus")


def test_flat_curvature_zero():
    assert scalar_curvature_radial(RadialMetric.flat(), 2.5) == 0.0


def test_schwarzschild_scalar_flat():
    assert abs(scalar_curvature_radial(RadialMetric.schwarzschild(2.0), 3.0)) < 1e-10


def test_round_stereographic_curvature():
    # phi^4 delta with phi = sqrt(2/(1+r^2)) is the unit round sphere
    assert scalar_curvature_radial(RadialMetric.round_stereographic(), 1.0) == pytest.approx(6.0, abs=1e-8)


def test_literal_factor_without_root_has_curvature_eight():
    # (2/(1+r^2))^4 delta is not the unit sphere; its curvature at r = 1 is 8
    m = RadialMetric.from_callable(lambda r: 2.0 / (1.0 + r * r), phi_inf=0.0)
    assert scalar_curvature_radial(m, 1.0) == pytest.approx(8.0, abs=1e-6)


def test_curvature_errors():
    m = RadialMetric.schwarzschild(2.0)
    with pytest.raises(RangeError):
        scalar_curvature_radial(m, 0.5)
    neg = RadialMetric.from_callable(lambda r: 1.0 - 2.0 / r, r_min=0.5, phi_inf=1.0)
    with pytest.raises(DomainError):
        scalar_curvature_radial(neg, 1.0)


def test_einstein_hilbert():
    assert abs(einstein_hilbert_energy(ClosedModelMetric.sphere()) - SIGMA_S3) < 1e-10
    assert einstein_hilbert_energy(ClosedModelMetric.projective()) == pytest.approx(6 * math.pi ** (4 / 3), rel=1e-14)
    assert einstein_hilbert_energy(ClosedModelMetric.projective()) == pytest.approx(SIGMA_S3 / 2 ** (2 / 3), rel=1e-14)


@given(st.floats(0.05, 20.0))
def test_einstein_hilbert_scale_invariant(c):
    for m in (ClosedModelMetric.sphere(), ClosedModelMetric.lens(3)):
        assert einstein_hilbert_energy(m.scaled(c)) == pytest.approx(einstein_hilbert_energy(m), rel=1e-13)


def test_constant_test_function_gives_energy():
    q = yamabe_quotient(ClosedModelMetric.sphere(), ConformalTestFunction.constant(1.0))
    assert q == pytest.approx(SIGMA_S3, rel=1e-8)
    qp = yamabe_quotient(ClosedModelMetric.projective(), ConformalTestFunction.constant(2.0))
    assert qp == pytest.approx(SIGMA_S3 / 2 ** (2 / 3), rel=1e-8)


def test_flat_sobolev_quotient_above_sphere_constant():
    # capped 1/r profile, cut off smoothly at large radius
    L = 1e4
    u = ConformalTestFunction(
        lambda r: np.where(r < 1, 1.0, 1.0 / np.maximum(r, 1.0)) * np.where(r < L, 1.0, np.maximum(0.0, 2.0 - r / L)),
        support_radius=2 * L,
        breakpoints=(1.0, L),
    )
    q = yamabe_quotient(RadialMetric.flat(), u, rtol=1e-8)
    assert q >= SIGMA_S3 * (1 - 1e-8)
    # Aubin-Talenti bubble attains the constant
    bub = ConformalTestFunction(lambda r: (1 + r * r) ** -0.5, lambda r: -r * (1 + r * r) ** -1.5)
    assert yamabe_quotient(RadialMetric.flat(), bub) == pytest.approx(SIGMA_S3, rel=1e-7)


def test_zero_test_function_degenerate():
    with pytest.raises(DegenerateInputError):
        yamabe_quotient(ClosedModelMetric.sphere(), ConformalTestFunction.constant(0.0))


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_quotient_scale_invariant_in_u(c):
    u = ConformalTestFunction(lambda r: (1 + r * r) ** -0.5, lambda r: -r * (1 + r * r) ** -1.5)
    base = yamabe_quotient(RadialMetric.flat(), u)
    assert yamabe_quotient(RadialMetric.flat(), u.scaled(c)) == pytest.approx(base, rel=1e-7)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.1, 100.0))
def test_affine_profiles_scalar_flat(a, b, r):
    if a == 0 and b == 0:
        return
    m = RadialMetric.potential(a + 1e-3, b, r_min=0.0)
    phi = a + 1e-3 + b / r
    # phi'' and 2 phi'/r cancel; their rounding is amplified by 1/phi^5
    scale = 8 * (2 * b / r**3) / phi**5
    assert abs(scalar_curvature_radial(m, r)) < 1e-8 + 1e-12 * scale


def test_tabulated_reproduces_affine_profile():
    r = np.geomspace(0.5, 1e3, 50)
    m = RadialMetric.tabulated(r, 1 + 0.5 / r)
    x = np.geomspace(0.6, 900, 30)
    assert np.max(np.abs(m.phi(x) - (1 + 0.5 / x))) < 1e-12
    assert np.max(np.abs(scalar_curvature_radial(m, x))) < 1e-9
    assert m.phi_inf == pytest.approx(1.0, abs=1e-12)
    assert m.mass_estimate() == pytest.approx(1.0, rel=1e-10)


def test_schwarzschild_horizon_minimal():
    m = RadialMetric.schwarzschild(2.0)
    assert abs(m.mean_curvature(1.0)) < 1e-14
    assert m.area(1.0) == pytest.approx(64 * math.pi, rel=1e-14)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqyamabe.blowup import (
    averaged_green,
    build_blowup,
    detect_horizon,
    frobenius_coefficients,
    greens_round,
    verify_af_decay,
)
from eqyamabe.errors import DecayFitError, HorizonError, SingularityError, SolverError
from eqyamabe.geom import ClosedModelMetric, RadialMetric, scalar_curvature_radial
from eqyamabe.groups import FiniteGroupAction

E1 = np.array([1.0, 0.0, 0.0, 0.0])
D = np.linspace(1e-3, math.pi - 1e-3, 2001)


def _points_at(d, rng):
    """Unit 4-vectors at geodesic distance ``d`` from E1."""
    t = rng.normal(size=(len(d), 3))
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    return np.column_stack([np.cos(d), np.sin(d)[:, None] * t])


def test_profile_examples(profile):
    assert profile(math.pi / 2) == pytest.approx(1 / math.sqrt(2), abs=1e-10)
    assert profile(math.pi) == pytest.approx(0.5, abs=1e-10)
    assert profile.normalization() == pytest.approx(1.0, abs=1e-6)
    assert np.all(profile(D) > 0)


def test_profile_matches_closed_form_and_residual(profile):
    assert np.max(np.abs(profile(D) - 1 / (2 * np.sin(D / 2)))) < 1e-8
    assert np.max(np.abs(profile.residual(D))) < 1e-6


def test_profile_on_scaled_sphere():
    p2 = greens_round(ClosedModelMetric.sphere(radius=2.0))
    # Gr scales like 1/distance: d Gr -> 1 on any radius
    assert 1e-4 * p2(1e-4) == pytest.approx(1.0, abs=1e-6)
    d = np.linspace(0.1, 6.0, 50)
    assert np.max(np.abs(p2(d) - 1 / (2 * 2 * np.sin(d / 4)))) < 1e-8


def test_shooting_failure_reports_residuals():
    with pytest.raises(SolverError) as exc:
        greens_round(max_iter=0)
    assert exc.value.residuals


def test_frobenius_series_solves_ode(profile):
    # the recursion reproduces the singular closed form near the pole
    c = frobenius_coefficients(0.75, 1.0, profile.regular_constant)
    d = 0.3
    val = sum(ck * d ** (k - 1) for k, ck in enumerate(c))
    assert val == pytest.approx(1 / (2 * math.sin(d / 2)), abs=1e-12)


def test_averaged_green_two_pole_sum(profile, rng):
    g = averaged_green(FiniteGroupAction.antipodal(), profile, E1)
    x = _points_at(D, rng)
    exact = 1 / (2 * np.sin(D / 2)) + 1 / (2 * np.cos(D / 2))
    assert np.max(np.abs(g(x) - exact)) < 1e-8
    with pytest.raises(SingularityError):
        g(-E1)


def test_averaged_green_trivial_is_profile(profile, rng):
    g = averaged_green(FiniteGroupAction.trivial(), profile, E1)
    x = _points_at(D[::50], rng)
    assert np.allclose(g(x), profile(D[::50]), rtol=0, atol=1e-14)


def test_averaged_green_lens_invariant(profile, rng):
    act = FiniteGroupAction.lens(3)
    g = averaged_green(act, profile, E1)
    x = rng.normal(size=(100, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    for gen in act.generator_matrices():
        assert np.max(np.abs(g(x @ gen.T) - g(x))) < 1e-10
    assert len(g.poles) == 3


def test_antipodal_blowup_is_schwarzschild(blow_antipodal):
    b = blow_antipodal
    assert b.k0 == 2 and b.is_transitive()
    assert b.shared_horizon
    r = np.geomspace(0.6, 5e3, 200)
    for end, h, m in zip(b.ends, b.horizon_radii, b.masses):
        assert np.max(np.abs(end.phi(r) - (1 + 0.5 / r))) < 1e-8
        assert h == pytest.approx(0.5, abs=1e-8)
        assert m == pytest.approx(1.0, abs=1e-6)
    assert max(b.scalar_flat_residual) < 1e-6
    assert b.invariance_residual < 1e-10
    assert b.end_mismatch < 1e-10


def test_trivial_blowup_is_flat(profile):
    b = build_blowup(ClosedModelMetric.sphere(), FiniteGroupAction.trivial(), profile=profile)
    assert b.k0 == 1
    assert b.horizon_radii == [None] and b.warnings
    assert abs(b.masses[0]) < 1e-8
    r = np.geomspace(1.0, 1e3, 50)
    assert np.max(np.abs(b.ends[0].phi(r) - 1.0)) < 1e-8
    assert b.decay[0].exact


def test_lens_blowup_transitive(blow_lens3):
    b = blow_lens3
    assert b.k0 == 3 and b.is_transitive()
    assert max(b.scalar_flat_residual) < 1e-6
    assert b.end_mismatch < 1e-10
    assert len(set(b.end_permutation[0])) == 3


def test_rp3_blowup_single_end(blow_rp3):
    b = blow_rp3
    assert b.k0 == 1
    assert b.horizon_radii[0] == pytest.approx(0.5, abs=1e-8)
    r = np.geomspace(0.6, 5e3, 100)
    assert np.max(np.abs(b.ends[0].phi(r) - (1 + 0.5 / r))) < 1e-8


def test_decay_examples(blow_antipodal):
    rep = verify_af_decay(RadialMetric.potential(1.0, 0.5, r_min=0.5))
    assert rep.exponent == pytest.approx(-1.0, abs=0.05) and rep.passed
    assert verify_af_decay(RadialMetric.flat()).exact
    tab = verify_af_decay(blow_antipodal.ends[0])
    assert tab.exponent == pytest.approx(-1.0, abs=0.1)


def test_decay_fit_error_on_inconsistent_limit():
    bad = RadialMetric.from_callable(lambda r: 1 + 0.5 / r, phi_inf=2.0)
    with pytest.raises(DecayFitError):
        verify_af_decay(bad)


def test_horizon_detection():
    assert detect_horizon(RadialMetric.schwarzschild(2.0).with_boundary(0.1)) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(HorizonError):
        detect_horizon(RadialMetric.flat(0.1))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_ends_scalar_flat_at_random_base_point(seed):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=4)
    p /= np.linalg.norm(p)
    b = build_blowup(ClosedModelMetric.sphere(), FiniteGroupAction.antipodal(), p, n_table=120, profile=_PROFILE)
    rr = np.asarray(b.ends[0].params["r"])[1:-1]
    assert np.max(np.abs(scalar_curvature_radial(b.ends[0], rr))) < 1e-6
    assert b.end_mismatch < 1e-10


_PROFILE = greens_round()

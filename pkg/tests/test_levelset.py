import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqyamabe.blowup import detect_horizon
from eqyamabe.errors import BoundaryError, PreconditionError, SymmetryError
from eqyamabe.geom import RadialMetric, scalar_curvature_radial
from eqyamabe.levelset import (
    CSV_COLUMNS,
    check_minimal_bound,
    check_monotonicity,
    combine_equivariant,
    minimal_bound,
    random_admissible_end,
    scan_levels,
    solve_harmonic_radial,
    write_scan_csv,
)

T = np.linspace(0.0, 5.0, 200)


def schwarzschild_w(t, card=1):
    return card * math.pi * (2 - np.exp(-t)) ** 2


def test_schwarzschild_closed_form():
    sol = solve_harmonic_radial(RadialMetric.schwarzschild(2.0))
    assert sol.provenance == "closed-form"
    assert sol.u(1.0) == pytest.approx(1.0, abs=1e-14)
    assert sol.u(3.0) == pytest.approx(0.5, abs=1e-14)
    r = np.geomspace(1.0, 1e4, 100)
    assert np.max(np.abs(sol.u(r) - 2 / (r + 1))) < 1e-13
    assert sol.C0 == pytest.approx(8 * math.pi, rel=1e-12)


def test_flux_by_direct_quadrature():
    # g-flux of u through the horizon: area * |du|/phi^2
    end = RadialMetric.schwarzschild(2.0)
    sol = solve_harmonic_radial(end)
    r = 1.0
    flux = 4 * math.pi * r * r * end.phi(r) ** 4 * abs(sol.du(r)) / end.phi(r) ** 2
    assert flux == pytest.approx(8 * math.pi, rel=1e-12)


def test_flat_end():
    sol = solve_harmonic_radial(RadialMetric.flat(1.0))
    r = np.geomspace(1, 100, 20)
    assert np.max(np.abs(sol.u(r) - 1 / r)) < 1e-14
    sc = scan_levels(sol, T)
    assert np.max(np.abs(sc.W - 4 * math.pi)) < 1e-10
    rep = check_monotonicity(sc)
    assert rep.passed and rep.near_equality == T.size
    with pytest.raises(PreconditionError):
        check_minimal_bound(sc)


def test_missing_boundary():
    with pytest.raises(BoundaryError):
        solve_harmonic_radial(RadialMetric.flat())


def test_schwarzschild_scan_equality():
    sc = scan_levels(solve_harmonic_radial(RadialMetric.schwarzschild(2.0)), T)
    assert sc.W0 == pytest.approx(math.pi, abs=1e-6)
    assert float(np.interp(1.0, sc.t, sc.W)) == pytest.approx(math.pi * (2 - math.exp(-1)) ** 2, abs=1e-3)
    exact1 = scan_levels(solve_harmonic_radial(RadialMetric.schwarzschild(2.0)), [0.0, 1.0]).W[1]
    assert exact1 == pytest.approx(8.368630, abs=1e-6)
    assert np.max(np.abs(sc.W - schwarzschild_w(sc.t))) < 1e-6
    assert sc.flux_deviation() < 1e-6
    assert np.all(sc.cauchy_schwarz_gap() >= -1e-9 * sc.flux**2)
    rep = check_monotonicity(sc)
    assert rep.passed and rep.near_equality == T.size
    mb = check_minimal_bound(sc)
    assert mb.passed and mb.near_equality == T.size


def test_ode_pipeline_schwarzschild():
    end = RadialMetric.from_callable(lambda r: 1 + 1 / r, r_min=1.0, phi_inf=1.0, horizon=1.0)
    sol = solve_harmonic_radial(end)
    assert sol.provenance == "radial-ODE"
    sc = scan_levels(sol, T)
    assert np.max(np.abs(sc.W - schwarzschild_w(sc.t))) < 1e-3
    assert sc.flux_deviation() < 1e-6


def _bumped(m, eps, r_min=None):
    end = RadialMetric.potential(1.0, m / 2, bumps=[(-eps, 1.0)], r_min=r_min or 0.0)
    return end


def test_perturbed_metric_strict_monotonicity():
    end = _bumped(2.0, 0.01, r_min=2.0)
    probe = np.geomspace(2.0, 1e3, 400)
    assert np.min(scalar_curvature_radial(end, probe)) >= -1e-10
    assert end.mean_curvature(2.0) > 0
    sc = scan_levels(solve_harmonic_radial(end), T)
    rep = check_monotonicity(sc)
    assert rep.passed
    slack = rep.max_slack
    assert slack > 1e-6
    # strict at every positive level
    from eqyamabe.levelset import monotone_bound

    assert np.all((monotone_bound(sc.t, sc.W0) - sc.W)[1:] > 0)


def test_perturbed_horizon_strict_minimal_bound():
    probe_end = _bumped(8.0, 0.01, r_min=0.5)
    h = detect_horizon(probe_end)
    assert h > 2.0
    end = probe_end.with_boundary(h, horizon=h)
    assert np.min(scalar_curvature_radial(end, np.geomspace(h, 1e3, 400))) >= -1e-10
    sc = scan_levels(solve_harmonic_radial(end), T)
    assert sc.boundary_minimal
    rep = check_minimal_bound(sc)
    assert rep.passed
    assert np.all((minimal_bound(sc.t) - sc.W)[1:] > 0)


def test_minimal_bound_limit():
    assert minimal_bound(60.0) == pytest.approx(4 * math.pi, rel=1e-15)


def test_combine_equivariant(blow_antipodal, blow_lens3):
    scans = [scan_levels(solve_harmonic_radial(e), T) for e in blow_antipodal.ends]
    G = combine_equivariant(scans)
    assert G.card == 2
    assert np.max(np.abs(G.W - schwarzschild_w(G.t, 2))) < 1e-6
    assert G.C0 == pytest.approx(sum(s.C0 for s in scans))
    assert check_minimal_bound(G).passed
    single = combine_equivariant(scans[:1])
    assert check_minimal_bound(single).passed == check_minimal_bound(scans[0]).passed
    L = combine_equivariant([scan_levels(solve_harmonic_radial(e), T) for e in blow_lens3.ends])
    assert L.card == 3 and check_minimal_bound(L).passed


def test_combine_rejects_mismatch():
    a = scan_levels(solve_harmonic_radial(RadialMetric.schwarzschild(2.0)), T)
    # W is scale invariant, so a different mass would not do; perturb the profile
    b = scan_levels(solve_harmonic_radial(_bumped(2.0, 0.01, r_min=2.0)), T)
    with pytest.raises(SymmetryError):
        combine_equivariant([a, b])


def test_csv_header(tmp_path):
    sc = scan_levels(solve_harmonic_radial(RadialMetric.schwarzschild(2.0)), T[:10])
    p = tmp_path / "scan.csv"
    write_scan_csv(sc, p)
    rows = list(csv.reader(open(p)))
    assert tuple(rows[0]) == CSV_COLUMNS == ("t", "r", "area", "flux", "W", "bound", "slack")
    assert len(rows) == 11


def test_scan_truncation_warning():
    sol = solve_harmonic_radial(RadialMetric.schwarzschild(2.0))
    sc = scan_levels(sol, np.array([0.0, 1.0, 40.0]))
    assert sc.t.size == 2 and sc.warnings


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_ends_monotone_and_flux_constant(seed):
    rng = np.random.default_rng(seed)
    end = random_admissible_end(rng)
    sc = scan_levels(solve_harmonic_radial(end), np.linspace(0, 5, 40))
    assert check_monotonicity(sc).passed
    assert sc.flux_deviation() < 1e-6
    assert np.all(sc.cauchy_schwarz_gap() >= -1e-9 * sc.flux**2)

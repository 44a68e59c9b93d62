import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from eqyamabe.errors import ConsistencyError, DataError, DomainError, IntegrabilityError, ModelConstructionError
from eqyamabe.geom import RadialMetric
from eqyamabe.levelset import scan_levels, solve_harmonic_radial
from eqyamabe.quotient import (
    SIGMA_2,
    SIGMA_S3,
    ModelProfileF,
    _model_f_exact,
    build_model_profile,
    chain_terms,
    dirichlet_energy,
    hebey_vaugon_bound,
    improved_bound,
    l6_exact,
    l6_lower_bound,
    model_quotient,
    rayleigh_model,
    sigma_constants,
    sigma_p,
)


@pytest.fixture(scope="module")
def model():
    f = build_model_profile(1.0)
    sc = scan_levels(solve_harmonic_radial(RadialMetric.schwarzschild(1.0)), f.t)
    return f, sc


def _exp_profile(T=8.0, n=161):
    t = np.linspace(0, T, n)
    return ModelProfileF.from_table(t, np.exp(-t), (-1.0, -math.exp(-T)))


def test_sigma_constants():
    c = sigma_constants(1)
    assert c["sigma_S3"] == pytest.approx(43.823, abs=5e-4)
    assert c["sigma_2"] == pytest.approx(27.607, abs=5e-4)
    assert c["sigma_p"] == c["sigma_S3"]
    assert sigma_p(2) == SIGMA_2
    with pytest.raises(DomainError):
        sigma_p(0)


def test_bound_constants():
    assert hebey_vaugon_bound(1) == pytest.approx(43.823, abs=5e-4)
    assert hebey_vaugon_bound(2) == pytest.approx(69.57, abs=5e-3)
    assert improved_bound(2) == pytest.approx(SIGMA_S3, rel=1e-15)
    for card in (1, 2, 3, 8, 17):
        assert improved_bound(card) / hebey_vaugon_bound(card) == pytest.approx(2 ** (-2 / 3), rel=1e-15)
    assert improved_bound(3) == pytest.approx(57.42, abs=5e-3)
    with pytest.raises(DomainError):
        hebey_vaugon_bound(3, n=4)
    assert hebey_vaugon_bound(4, n=4, sigma_sphere=1.0) == pytest.approx(2.0)


def test_model_profile(model):
    f, _ = model
    assert f.f0 == pytest.approx(_model_f_exact(1.0)(0.0), abs=1e-12)
    assert f.restoration_residual < 1e-6
    tt = np.linspace(0, 10, 2001)
    assert np.max(np.abs(f(tt) - _model_f_exact(1.0)(tt))) < 1e-6
    tail = f(np.array([6.0, 7.0, 8.0, 9.0])) * np.exp([6.0, 7.0, 8.0, 9.0])
    assert np.all(tail > 0) and np.ptp(tail) / tail[0] < 1e-3
    assert f.tail_rate == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(f(tt)) < 0)


def test_model_construction_error():
    with pytest.raises(ModelConstructionError):
        build_model_profile(1.0, restoration_tol=1e-14)
    with pytest.raises(DomainError):
        build_model_profile(-1.0)


def test_dirichlet_examples(model):
    t = np.linspace(0, 8, 50)
    const = ModelProfileF.from_table(t, np.ones_like(t), (0.0, 0.0), tail_rate=math.inf)
    assert dirichlet_energy(const, 3.0) == 0.0
    assert dirichlet_energy(_exp_profile(), 1.0) == pytest.approx(1.0, abs=1e-9)
    f, sc = model
    coarse = dirichlet_energy(f, sc.C0)
    fine = dirichlet_energy(build_model_profile(1.0, dt=0.025), sc.C0)
    assert fine == pytest.approx(coarse, rel=1e-6)
    slow = ModelProfileF.from_table(t, np.exp(-0.4 * t), (-0.4, -0.4 * math.exp(-3.2)))
    with pytest.raises(IntegrabilityError):
        dirichlet_energy(slow, 1.0)


def test_l6_examples():
    e = _exp_profile()
    # s = e^-t turns the integral into int_0^1 s^2 (2 - s)^-4 ds = 1/6
    oracle, _ = integrate.quad(lambda s: s * s * (2 - s) ** -4, 0, 1, epsabs=1e-14)
    assert oracle == pytest.approx(1 / 6, abs=1e-14)
    assert l6_lower_bound(e, 1.0, 1) == pytest.approx(oracle / math.pi**2, rel=1e-7)
    assert l6_lower_bound(e, 1.0, 2) == pytest.approx(l6_lower_bound(e, 1.0, 1) / 4, rel=1e-15)


def test_l6_exact_model_equality(model):
    f, sc = model
    ex = l6_exact(f, sc)
    lb = l6_lower_bound(f, sc.C0, 1)
    assert ex >= lb * (1 - 1e-6)
    assert ex == pytest.approx(lb, rel=1e-4)


def test_l6_exact_coarea_identity(model):
    _, sc = model
    T = 3.0
    keep = sc.t <= T + 1e-12
    short = dataclasses.replace(
        sc, t=sc.t[keep], r=sc.r[keep], area=sc.area[keep], flux=sc.flux[keep], W=sc.W[keep], coarea=sc.coarea[keep], grad_w=sc.grad_w[keep]
    )
    ind = ModelProfileF.from_table(short.t, np.ones(short.t.size), (0.0, 0.0), tail_rate=1e12)
    end = RadialMetric.schwarzschild(1.0)
    vol, _ = integrate.quad(lambda r: 4 * math.pi * r * r * float(end.phi(r)) ** 6, 0.5, float(short.r[-1]), epsrel=1e-12)
    assert l6_exact(ind, short) == pytest.approx(vol, rel=1e-6)


def test_l6_exact_needs_coarea(model):
    f, sc = model
    with pytest.raises(DataError):
        l6_exact(f, dataclasses.replace(sc, coarea=np.array([])))


def test_chain_per_level(blow_lens3):
    f = build_model_profile(1.0)
    from eqyamabe.levelset import combine_equivariant

    G = combine_equivariant([scan_levels(solve_harmonic_radial(e), f.t) for e in blow_lens3.ends])
    a, b, c = chain_terms(f, G)
    assert np.all(a >= b * (1 - 1e-9)) and np.all(b >= c * (1 - 1e-9))


def test_rayleigh_rp3(model):
    f, sc = model
    rep = rayleigh_model(f, sc)
    assert abs(rep.quotient_ub / SIGMA_2 - 1) < 5e-3
    assert abs(rep.quotient_exact / SIGMA_2 - 1) < 1e-4
    assert rep.verdict
    assert rep.improvement_ratio == pytest.approx(2 ** (-2 / 3), rel=1e-15)
    d = rep.to_dict()
    assert d["verdict"] == (d["quotient_ub"] <= d["bound"] * (1 + 1e-9))
    for key in ("numerator", "denominator_lb", "denominator_exact", "quotient_ub", "C0", "bound"):
        assert d[key] > 0


def test_rayleigh_inconsistent_flux(model):
    f, sc = model
    bad = dataclasses.replace(sc, flux=sc.flux * (1 + 1e-3 * np.sin(sc.t)))
    with pytest.raises(ConsistencyError):
        rayleigh_model(f, bad)


def test_quotient_mass_invariant():
    qs = []
    for m in (1.0, 2.0, 4.0):
        f = build_model_profile(m)
        sc = scan_levels(solve_harmonic_radial(RadialMetric.schwarzschild(m)), f.t)
        rep = rayleigh_model(f, sc)
        qs.append(rep.quotient_ub)
        assert rep.verdict
    assert max(qs) / min(qs) - 1 < 1e-6


@given(st.integers(1, 40))
@settings(max_examples=20, deadline=None)
def test_card_scaling_exact(card):
    f = _MODEL_F
    assert model_quotient(f, 1.0, card) == pytest.approx(card ** (2 / 3) * model_quotient(f, 1.0, 1), rel=1e-12)


_MODEL_F = build_model_profile(1.0)


def test_model_optimality_perturbations():
    f = _MODEL_F
    base = model_quotient(f)
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.uniform(0.2, 5.0)
        w = rng.uniform(0.3, 2.0)
        amp = rng.normal()
        c = a + w / 2

        def psi(t, c=c, w=w, amp=amp):
            x = (np.asarray(t, dtype=float) - c) / (w / 2)
            return amp * np.where(np.abs(x) < 1, (1 - x * x) ** 3, 0.0)

        for eps in (1e-3, -1e-3):
            q = model_quotient(f.perturbed(psi, eps))
            assert q >= base * (1 - 1e-6)

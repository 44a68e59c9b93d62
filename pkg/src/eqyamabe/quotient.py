"""Model profile, Rayleigh quotient of the equivariant test function, and bound constants.

The test function is ``f(w_G)`` with ``w_G = -log u_G``.  By the coarea
formula its Dirichlet energy is ``C0 int f'(t)^2 e^t dt`` and its L^6 mass
is ``int f(t)^6 (int_{w=t} |grad w|^-1 da) dt``, bounded below through
Cauchy-Schwarz and the minimal-boundary bound on ``W``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .blowup import GreensProfile, greens_round
from .errors import ConsistencyError, DataError, DomainError, IntegrabilityError, ModelConstructionError
from .levelset import LevelSetScan

__all__ = [
    "SIGMA_S3",
    "SIGMA_2",
    "sigma_constants",
    "sigma_p",
    "ModelProfileF",
    "RayleighReport",
    "build_model_profile",
    "dirichlet_energy",
    "l6_lower_bound",
    "l6_exact",
    "model_quotient",
    "rayleigh_model",
    "hebey_vaugon_bound",
    "improved_bound",
    "chain_terms",
]

SIGMA_S3 = 6.0 * (2.0 * math.pi**2) ** (2.0 / 3.0)
SIGMA_2 = SIGMA_S3 / 2.0 ** (2.0 / 3.0)
VERDICT_RTOL = 1e-9

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def sigma_p(p: int) -> float:
    if p < 1:
        raise DomainError("p must be a positive integer")
    return SIGMA_S3 / p ** (2.0 / 3.0)


def sigma_constants(p: Optional[int] = None) -> dict:
    """``sigma(S^3)``, ``sigma_2`` (the RP^3 value) and optionally ``sigma_p``."""
    out = {"sigma_S3": SIGMA_S3, "sigma_2": SIGMA_2, "sigma_RP3": SIGMA_2}
    if p is not None:
        out["sigma_p"] = sigma_p(p)
    return out


def hebey_vaugon_bound(card: int, n: int = 3, sigma_sphere: Optional[float] = None) -> float:
    """``sigma(S^n) card^(2/n)``; dimension 3 unless ``sigma_sphere`` is supplied."""
    if card < 1:
        raise DomainError("orbit cardinality must be >= 1")
    if sigma_sphere is None:
        if n != 3:
            raise DomainError("supply sigma(S^n) for n != 3")
        sigma_sphere = SIGMA_S3
    return sigma_sphere * card ** (2.0 / n)


def improved_bound(card: int) -> float:
    """``sigma_2 card^(2/3)``."""
    if card < 1:
        raise DomainError("orbit cardinality must be >= 1")
    return SIGMA_2 * card ** (2.0 / 3.0)


@dataclass(frozen=True, eq=False)
class ModelProfileF:
    """Positive decreasing ``f`` on ``[0, inf)``.

    Tabulated on ``t`` (clamped cubic spline) and continued past the table
    by ``f(T) exp(-k (t - T))``.
    """

    t: np.ndarray
    values: np.ndarray
    spline: CubicSpline = field(repr=False)
    tail_rate: float
    source: str = "tabulated"
    mass: Optional[float] = None
    restoration_residual: Optional[float] = None

    @classmethod
    def from_table(cls, t, values, slopes=None, tail_rate=None, source="tabulated", **kw):
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != values.shape or t.size < 4 or t[0] != 0.0:
            raise DomainError("profile table must start at t = 0 with >= 4 samples")
        if np.any(np.diff(t) <= 0):
            raise DomainError("t must be strictly increasing")
        if np.any(values < 0):
            raise DomainError("profile must be non-negative")
        bc = "not-a-knot" if slopes is None else ((1, float(slopes[0])), (1, float(slopes[1])))
        spline = CubicSpline(t, values, bc_type=bc)
        if tail_rate is None:
            fT = values[-1]
            dT = float(spline(t[-1], 1))
            tail_rate = -dT / fT if fT > 0 else math.inf
        return cls(t, values, spline, float(tail_rate), source, **kw)

    @property
    def f0(self) -> float:
        return float(self.values[0])

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = t <= self.T
        tail = self._tail(t)
        return np.where(inside, self.spline(np.minimum(t, self.T)), tail)

    def _tail(self, t):
        if math.isinf(self.tail_rate):
            return np.zeros_like(t)
        return self.values[-1] * np.exp(-self.tail_rate * (np.maximum(t, self.T) - self.T))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        inside = t <= self.T
        tail = np.zeros_like(t) if math.isinf(self.tail_rate) else -self.tail_rate * self._tail(t)
        return np.where(inside, self.spline(np.minimum(t, self.T), 1), tail)

    def perturbed(self, psi: Callable, eps: float) -> "ModelProfileF":
        """``f + eps psi`` with ``psi`` supported inside the table."""
        vals = self.values + eps * np.asarray(psi(self.t), dtype=float)
        h = 1e-6
        d0 = float(self.spline(0.0, 1)) + eps * (psi(np.array([h]))[0] - psi(np.array([0.0]))[0]) / h
        dT = float(self.spline(self.T, 1)) + eps * (psi(np.array([self.T]))[0] - psi(np.array([self.T - h]))[0]) / h
        return ModelProfileF.from_table(self.t, vals, (d0, dT), self.tail_rate, source=self.source, mass=self.mass)


def _composite_gl(fn, knots):
    a, b = knots[:-1], knots[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    return float(np.sum(half[:, None] * _GL_W[None, :] * fn(x)))


def _model_f_exact(m):
    """Closed form of the model profile, used only in tests."""

    def f(t):
        e = np.exp(np.asarray(t, dtype=float))
        y = 2 * e - 1
        return y / (math.sqrt(m) * e * np.sqrt(1 + y * y))

    return f


def build_model_profile(
    m: float = 1.0,
    t_max: float = 8.0,
    dt: float = 0.05,
    profile: Optional[GreensProfile] = None,
    restoration_tol: float = 1e-4,
) -> ModelProfileF:
    """``f(t) = u0`` on the Schwarzschild level sphere ``{u_s = e^-t}``.

    The RP^3 blow-up is Schwarzschild of mass ``m`` with the horizon
    identified antipodally; in the chart ``r = (m/2) cot(d/2)`` the round
    metric is ``u0^4 g`` with ``u0 = m^(-1/2) / Gr(d)`` and
    ``Gr(d) = G(d) + G(pi - d)`` for the shot profile ``G``.
    """
    if not m > 0:
        raise DomainError("mass must be positive")
    profile = greens_round() if profile is None else profile

    def d_of_r(r):
        return 2.0 * np.arctan(m / (2.0 * np.asarray(r, dtype=float)))

    def u0(r):
        d = d_of_r(r)
        return 1.0 / (math.sqrt(m) * (profile(d) + profile(math.pi - d)))

    def round_curvature(r):
        # R of (u0 phi_s)^4 delta by the chain rule through d(r)
        d = d_of_r(r)
        g0, g1, g2 = profile._unit(d, 2)
        h0, h1, h2 = profile._unit(math.pi - d, 2)
        S, S1, S2 = g0 + h0, g1 - h1, g2 + h2
        q = 4 * r * r + m * m
        d1 = -4 * m / q
        d2 = 32 * m * r / q**2
        sm = math.sqrt(m)
        u = 1 / (sm * S)
        u1 = -S1 * d1 / (sm * S**2)
        u2 = -(S2 * d1**2 + S1 * d2) / (sm * S**2) + 2 * S1**2 * d1**2 / (sm * S**3)
        f, f1, f2 = 1 + m / (2 * r), -m / (2 * r * r), m / r**3
        p0, p1, p2 = u * f, u1 * f + u * f1, u2 * f + 2 * u1 * f1 + u * f2
        return -8.0 * (p2 + 2 * p1 / r) / p0**5

    # the round metric must come back: R[(u0 phi_s)^4 delta] = 6
    probe = np.linspace(0.6 * m, 20.0 * m, 41)
    resid = float(np.max(np.abs(round_curvature(probe) - 6.0)))
    if resid > restoration_tol:
        raise ModelConstructionError(f"round-restoration residual {resid:.3e}")

    n = int(round(t_max / dt))
    t = np.linspace(0.0, n * dt, n + 1)
    # level sphere of u_s = m / (r + m/2)
    r = m * (np.exp(t) - 0.5)
    vals = u0(r)

    def f_of_t(tt):
        return u0(m * (np.exp(tt) - 0.5))

    h = 1e-5
    d0 = (-3 * f_of_t(0.0) + 4 * f_of_t(h) - f_of_t(2 * h)) / (2 * h)
    dT = (f_of_t(t[-1] + h) - f_of_t(t[-1] - h)) / (2 * h)
    return ModelProfileF.from_table(
        t, vals, (float(d0), float(dT)), source=f"rp3-model(m={m:g})", mass=m, restoration_residual=resid
    )


def dirichlet_energy(f: ModelProfileF, C0: float) -> float:
    """``C0 int_0^inf f'(t)^2 e^t dt``; tail from the exponential continuation."""
    k = f.tail_rate
    fT = float(f.values[-1])
    if fT != 0.0 and not 2 * k > 1:
        raise IntegrabilityError("Dirichlet tail diverges (decay rate <= 1/2)")
    body = _composite_gl(lambda x: f.derivative(x) ** 2 * np.exp(x), f.t)
    tail = 0.0 if fT == 0.0 or math.isinf(k) else k * k * fT * fT * math.exp(f.T) / (2 * k - 1)
    return C0 * (body + tail)


def _l6_integrand(f, x):
    return f(x) ** 6 * np.exp(3 * x) * (2 - np.exp(-x)) ** -4


def l6_integral(f: ModelProfileF) -> float:
    """``int_0^inf f^6 e^(3t) (2 - e^-t)^-4 dt``."""
    k = f.tail_rate
    fT = float(f.values[-1])
    if fT != 0.0 and not k > 0.5:
        raise IntegrabilityError("L6 tail diverges (decay rate <= 1/2)")
    body = _composite_gl(lambda x: _l6_integrand(f, x), f.t)
    if fT == 0.0 or math.isinf(k):
        return body
    T = f.T
    # with s = t - T the exponentials combine into exp((3 - 6k) s)
    tail, _ = integrate.quad(
        lambda x: math.exp((3 - 6 * k) * x) * (2 - math.exp(-T - x)) ** -4, 0.0, math.inf, epsrel=1e-12, epsabs=0.0
    )
    return body + fT**6 * math.exp(3 * T) * tail


def l6_lower_bound(f: ModelProfileF, C0: float, card: int = 1) -> float:
    """``card^-2 pi^-2 C0^3 int f^6 e^(3t) (2 - e^-t)^-4 dt``."""
    if card < 1:
        raise DomainError("orbit cardinality must be >= 1")
    return C0**3 * l6_integral(f) / (card**2 * math.pi**2)


def l6_exact(f: ModelProfileF, scan: LevelSetScan) -> float:
    """Coarea form ``int f(t)^6 (int_{w=t} |grad w|^-1 da) dt`` from the scan.

    Between samples ``log coarea`` is interpolated by a cubic spline; past
    the last level it is continued with its end slope.
    """
    co = getattr(scan, "coarea", None)
    if co is None or len(co) != len(scan.t):
        raise DataError("scan has no coarea column")
    if scan.t[0] != 0.0:
        raise DataError("scan must start at t = 0")
    lc = CubicSpline(scan.t, np.log(co))
    T = float(scan.t[-1])
    slope = float(lc(T, 1))

    def g(x):
        return f(x) ** 6 * np.exp(lc(x))

    knots = np.union1d(scan.t, f.t[f.t <= T])
    body = _composite_gl(g, knots)
    # past T both factors are exponential in t
    fT = float(f(T))
    if fT == 0.0:
        return body
    rate = f.tail_rate
    if math.isinf(rate):
        return body
    decay = 6 * rate - slope
    if not decay > 0:
        raise IntegrabilityError("L6 tail diverges")
    return body + fT**6 * math.exp(float(lc(T))) / decay


def chain_terms(f: ModelProfileF, scan: LevelSetScan):
    """Per-level ``(coarea, flux^3/W^2, flux^3/(card pi (2-e^-t)^2)^2)`` times ``f^6``."""
    f6 = f(scan.t) ** 6
    a = f6 * scan.coarea
    b = f6 * scan.flux**3 / scan.W**2
    c = f6 * scan.flux**3 / (scan.card * math.pi * (2 - np.exp(-scan.t)) ** 2) ** 2
    return a, b, c


@dataclass(frozen=True)
class RayleighReport:
    numerator: float
    denominator_lb: float
    denominator_exact: Optional[float]
    quotient_ub: float
    quotient_exact: Optional[float]
    card: int
    bound: float
    verdict: bool
    C0: float
    dirichlet_integral: float
    l6_integral: float
    sigma_S3: float = SIGMA_S3
    sigma_2: float = SIGMA_2
    hebey_vaugon: float = 0.0

    @property
    def ratio(self) -> float:
        return self.quotient_ub / self.bound

    @property
    def slack(self) -> float:
        return (self.bound - self.quotient_ub) / self.bound

    @property
    def improvement_ratio(self) -> float:
        return self.bound / self.hebey_vaugon

    def to_dict(self) -> dict:
        return {
            "numerator": self.numerator,
            "denominator_lb": self.denominator_lb,
            "denominator_exact": self.denominator_exact,
            "quotient_ub": self.quotient_ub,
            "quotient_exact": self.quotient_exact,
            "card": self.card,
            "bound": self.bound,
            "verdict": self.verdict,
            "ratio": self.ratio,
            "slack": self.slack,
            "C0": self.C0,
            "dirichlet_integral": self.dirichlet_integral,
            "l6_integral": self.l6_integral,
            "sigma_S3": self.sigma_S3,
            "sigma_2": self.sigma_2,
            "hebey_vaugon": self.hebey_vaugon,
            "improvement_ratio": self.improvement_ratio,
        }


def model_quotient(f: ModelProfileF, C0: float = 1.0, card: int = 1) -> float:
    """``8 E / L6_lb^(1/3)``; the model's exact quotient since the chain is tight there."""
    return 8.0 * dirichlet_energy(f, C0) / l6_lower_bound(f, C0, card) ** (1.0 / 3.0)


def rayleigh_model(f: ModelProfileF, scan: LevelSetScan, card: Optional[int] = None, flux_tol: float = 1e-6) -> RayleighReport:
    """Assemble the Rayleigh report for ``f(w_G)`` on the scanned ends."""
    card = scan.card if card is None else card
    if card < 1:
        raise DomainError("orbit cardinality must be >= 1")
    dev = scan.flux_deviation()
    if dev > flux_tol:
        raise ConsistencyError(f"flux e^-t deviates from C0 by {dev:.3e}")
    C0 = scan.C0
    i1 = dirichlet_energy(f, 1.0)
    i2 = l6_integral(f)
    num = 8.0 * C0 * i1
    den_lb = C0**3 * i2 / (card**2 * math.pi**2)
    den_ex = l6_exact(f, scan)
    q_ub = num / den_lb ** (1.0 / 3.0)
    q_ex = num / den_ex ** (1.0 / 3.0)
    bound = improved_bound(card)
    return RayleighReport(
        numerator=num,
        denominator_lb=den_lb,
        denominator_exact=den_ex,
        quotient_ub=q_ub,
        quotient_exact=q_ex,
        card=card,
        bound=bound,
        verdict=bool(q_ub <= bound * (1.0 + VERDICT_RTOL)),
        C0=C0,
        dirichlet_integral=i1,
        l6_integral=i2,
        hebey_vaugon=hebey_vaugon_bound(card),
    )

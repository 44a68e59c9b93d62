"""Green's functions of the conformal Laplacian on round S^3 and the blow-up ends.

The radial Green's function solves ``y'' + 2 cot(d) y' - lam y = 0`` with
``d y -> 1`` at the pole and regularity at the antipode (``lam = R0/8``).
Both endpoints are regular singular points; we start from Frobenius series
at each end and shoot on the free constant term of the pole expansion so the
integrated solution matches the regular antipodal branch.

Blowing up at an orbit ``G.p`` replaces ``g`` by ``Gr^4 g``.  Each orbit
point becomes an asymptotically flat end.  In stereographic coordinates
centred at an orbit point ``q`` (``r = cot(d/2)/2``, so the conformal
factor tends to 1) we radially reduce the end by averaging ``Gr`` over
geodesic spheres about ``q``; averaging commutes with the radial part of
``L0`` so the reduced end is still scalar-flat.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.polynomial import Chebyshev
from scipy.integrate import solve_ivp
from scipy.linalg import null_space
from scipy.optimize import brentq
from scipy.special import bernoulli, factorial

from .errors import DecayFitError, HorizonError, SingularityError, SolverError, SymmetryError
from .geom import ClosedModelMetric, RadialMetric, scalar_curvature_radial
from .groups import FiniteGroupAction, OrbitData, orbit, sphere_distance

__all__ = [
    "GreensProfile",
    "AveragedGreen",
    "BlowupModel",
    "DecayReport",
    "frobenius_coefficients",
    "greens_round",
    "averaged_green",
    "spherical_mean",
    "radial_end",
    "detect_horizon",
    "build_blowup",
    "verify_af_decay",
]

_N_SERIES = 48
_SERIES_EDGE = 0.5


def _cot_coefficients(n):
    """Coefficients e_j of ``d cot d = sum e_j d^(2j)``."""
    b = bernoulli(2 * n)
    j = np.arange(n + 1)
    return (-1.0) ** j * 4.0**j * b[2 * j] / factorial(2 * j)


def frobenius_coefficients(lam, c0, c1, nterms=_N_SERIES):
    """Series ``y = sum c_k d^(k-1)`` solving ``y'' + 2 cot(d) y' - lam y = 0``.

    ``c0`` weights the ``1/d`` branch; ``c1`` is the free constant of the
    regular branch (the indicial roots -1 and 0 differ by an integer and the
    recursion is consistent at k = 1).
    """
    e = _cot_coefficients(nterms // 2 + 1)
    c = np.zeros(nterms)
    c[0] = c0
    if nterms > 1:
        c[1] = c1
    for n in range(2, nterms):
        acc = lam * c[n - 2]
        for j in range(1, n // 2 + 1):
            acc -= 2.0 * e[j] * (n - 2 * j - 1) * c[n - 2 * j]
        c[n] = acc / (n * (n - 1))
    return c


def _series_eval(c, d, nder=0):
    d = np.asarray(d, dtype=float)
    k = np.arange(len(c))
    out = []
    coef = c.copy()
    for m in range(nder + 1):
        # sum coef_k d^(k-1-m): polynomial part plus the few negative powers,
        # so a regular series stays finite at d = 0
        val = P.polyval(d, coef[1 + m :])
        for j in range(min(1 + m, len(coef))):
            if coef[j] != 0.0:
                val = val + coef[j] * d ** float(j - 1 - m)
        out.append(val)
        coef = coef * (k - 1 - m)
    return out


@dataclass(frozen=True, eq=False)
class GreensProfile:
    """Radial Green's function of ``L0`` on the round sphere of ``radius``.

    ``regular_constant`` is the shot constant term of the pole expansion and
    ``antipodal_amplitude`` the matched amplitude of the regular branch at
    the antipode.
    """

    lam: float
    radius: float
    regular_constant: float
    antipodal_amplitude: float
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    solution: object = field(repr=False)
    middle: object = field(repr=False, default=None)
    shooting_residuals: tuple = ()
    singular_orbit: Optional[OrbitData] = None

    def _unit(self, d, nder):
        d = np.asarray(d, dtype=float)
        flat = np.atleast_1d(d).astype(float)
        outs = [np.empty_like(flat) for _ in range(nder + 1)]
        lo = flat <= _SERIES_EDGE
        hi = flat >= math.pi - _SERIES_EDGE
        mid = ~(lo | hi)
        if np.any(lo):
            vals = _series_eval(self.left, flat[lo], nder)
            for o, v in zip(outs, vals):
                o[lo] = v
        if np.any(hi):
            vals = _series_eval(self.right, math.pi - flat[hi], nder)
            for m, (o, v) in enumerate(zip(outs, vals)):
                o[hi] = self.antipodal_amplitude * v * (-1.0) ** m
        if np.any(mid):
            cheb = self.middle
            for m in range(nder + 1):
                outs[m][mid] = cheb(flat[mid])
                cheb = cheb.deriv()
        if np.ndim(d) == 0:
            return [float(o[0]) for o in outs]
        return [o.reshape(d.shape) for o in outs]

    def __call__(self, d):
        """Gr at geodesic distance ``d`` on the sphere of ``radius``."""
        a = self.radius
        return self._unit(np.asarray(d, dtype=float) / a, 0)[0] / a

    def derivative(self, d):
        a = self.radius
        return self._unit(np.asarray(d, dtype=float) / a, 1)[1] / a**2

    def residual(self, d):
        """``L0 Gr`` at unit-sphere distances ``d``; zero up to discretisation."""
        y, y1, y2 = self._unit(d, 2)
        return y2 + 2.0 / np.tan(d) * y1 - self.lam * y

    def normalization(self) -> float:
        """Richardson-extrapolated limit of ``d * Gr(d)`` as ``d -> 0``."""
        h = 1e-4
        f1 = h * self(h)
        f2 = 0.5 * h * self(0.5 * h)
        # d*Gr = 1 + O(d^2)
        return (4 * f2 - f1) / 3


def greens_round(model: ClosedModelMetric = None, pole=None, rtol=1e-12, max_iter=50) -> GreensProfile:
    """Shoot the regular-at-antipode Green's function of ``L0`` on the covering sphere."""
    model = ClosedModelMetric.sphere() if model is None else model
    a = model.radius
    lam = model.scalar_curvature * a * a / 8.0
    right = frobenius_coefficients(lam, 0.0, 1.0)
    sing = frobenius_coefficients(lam, 1.0, 0.0)
    reg = right
    d_lo, d_hi = _SERIES_EDGE, math.pi - _SERIES_EDGE
    s_hi = _SERIES_EDGE
    yr, yr1 = _series_eval(right, np.array(s_hi), 1)
    yr, yr1 = float(yr), float(yr1)

    def rhs(d, y):
        return [y[1], lam * y[0] - 2.0 * y[1] / math.tan(d)]

    def shoot(c1, dense=False):
        c = sing + c1 * reg
        y0, y1 = _series_eval(c, np.array(d_lo), 1)
        sol = solve_ivp(
            rhs, (d_lo, d_hi), [float(y0), float(y1)], method="DOP853",
            rtol=rtol, atol=1e-14, dense_output=dense,
        )
        if not sol.success:
            raise SolverError(f"integration failed: {sol.message}")
        yL, yL1 = sol.y[0, -1], sol.y[1, -1]
        # Wronskian mismatch with the regular antipodal branch b*y_r(pi - d)
        mismatch = yL1 * yr + yL * yr1
        return mismatch, sol, yL

    residuals = []
    x0, x1 = 0.0, 1.0
    f0 = shoot(x0)[0]
    f1 = shoot(x1)[0]
    residuals.extend([abs(f0), abs(f1)])
    c1 = x1
    for _ in range(max_iter):
        if f1 == f0:
            break
        c1 = x1 - f1 * (x1 - x0) / (f1 - f0)
        f_new = shoot(c1)[0]
        residuals.append(abs(f_new))
        x0, f0, x1, f1 = x1, f1, c1, f_new
        if abs(f_new) < 1e-12:
            break
    else:
        raise SolverError("shooting did not converge", residuals)
    if abs(f1) > 1e-9:
        raise SolverError(f"shooting residual {abs(f1):.3e} too large", residuals)
    _, sol, yL = shoot(c1, dense=True)
    amp = yL / yr
    # dense output is slow to evaluate; the middle segment is analytic, so a
    # Chebyshev interpolant of modest degree reproduces it to roundoff
    middle = Chebyshev.interpolate(lambda x: sol.sol(x)[0], 64, domain=[d_lo, d_hi])
    prof = GreensProfile(
        lam=lam,
        radius=a,
        regular_constant=c1,
        antipodal_amplitude=amp,
        left=sing + c1 * reg,
        right=right,
        solution=sol.sol,
        middle=middle,
        shooting_residuals=tuple(residuals),
    )
    return prof


@dataclass(frozen=True, eq=False)
class AveragedGreen:
    """``Gr(x) = sum over q in G.p of profile(dist(q, x))`` on the unit sphere."""

    profile: GreensProfile
    orbit: OrbitData

    @property
    def poles(self):
        return self.orbit.orbit_points

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[:-1])
        for q in self.poles:
            d = sphere_distance(x, q)
            if np.any(d < 1e-12):
                raise SingularityError("evaluation at an orbit point")
            total = total + self.profile(d)
        return total


def averaged_green(action: FiniteGroupAction, profile: GreensProfile, p) -> AveragedGreen:
    return AveragedGreen(profile, orbit(action, p))


def _sphere_rule(n_theta):
    x, w = np.polynomial.legendre.leggauss(n_theta)
    n_phi = 2 * n_theta
    ang = 2 * math.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - x * x)
    dirs = np.stack(
        [
            np.outer(x, np.ones(n_phi)).ravel(),
            np.outer(st, np.cos(ang)).ravel(),
            np.outer(st, np.sin(ang)).ravel(),
        ],
        axis=1,
    )
    weights = np.repeat(w, n_phi) / (2.0 * n_phi)
    return dirs, weights


def spherical_mean(green: AveragedGreen, center, distances, n_theta=32):
    """Mean of ``green`` over geodesic spheres of the given radii about ``center``.

    The quadrature pole points toward the nearest other singularity so the
    near-singular part of the integrand sits at an endpoint of the
    Gauss-Legendre rule.
    """
    center = np.asarray(center, dtype=float)
    others = [q for q in green.poles if sphere_distance(q, center) > 1e-9]
    tangent = null_space(center[None, :])
    if others:
        dist = [sphere_distance(q, center) for q in others]
        q = others[int(np.argmin(dist))]
        v = q - np.dot(q, center) * center
        if np.linalg.norm(v) > 1e-9:
            v = v / np.linalg.norm(v)
            rest = null_space(np.vstack([center, v]))
            tangent = np.column_stack([v, rest])
    dirs, weights = _sphere_rule(n_theta)
    tdirs = dirs @ tangent.T
    out = np.empty(len(distances))
    for i, d in enumerate(np.asarray(distances, dtype=float)):
        pts = math.cos(d) * center + math.sin(d) * tdirs
        out[i] = np.dot(weights, green(pts))
    return out


def radial_end(green: AveragedGreen, center, r_lo, r_hi, n=400, n_theta=32) -> RadialMetric:
    """Tabulated radially reduced end at orbit point ``center``."""
    r = np.geomspace(r_lo, r_hi, n)
    d = 2.0 * np.arctan(1.0 / (2.0 * r))
    mean = spherical_mean(green, center, d, n_theta=n_theta)
    phi = 2.0 * np.sin(d / 2) * mean
    return RadialMetric.tabulated(r, phi)


def detect_horizon(end: RadialMetric, r_lo=None, r_hi=None, n=2000):
    """Outermost critical sphere of the areal radius ``r phi^2``."""
    lo = end.r_min if r_lo is None else r_lo
    if end.kind == "tabulated":
        lo = max(lo, float(end.params["r"][0]))
    hi = (end.r_table_max if math.isfinite(end.r_table_max) else 1e4) if r_hi is None else r_hi
    lo = max(lo, 1e-9)
    grid = np.geomspace(lo, hi, n)
    g = end.d_areal_radius(grid)
    for i in range(n - 1, 0, -1):
        if g[i] > 0 >= g[i - 1] or g[i - 1] == 0:
            if g[i - 1] == 0:
                return float(grid[i - 1])
            return float(brentq(lambda x: float(end.d_areal_radius(x)), grid[i - 1], grid[i], xtol=1e-14, rtol=1e-14))
    raise HorizonError("no minimal sphere in the chart range")


@dataclass(frozen=True)
class DecayReport:
    exponent: Optional[float]
    residual: float
    phi_inf: float
    passed: bool
    exact: bool = False
    window: tuple = ()

    def to_dict(self):
        return {
            "exponent": self.exponent,
            "residual": self.residual,
            "phi_inf": self.phi_inf,
            "passed": self.passed,
            "exact": self.exact,
            "window": list(self.window),
        }


def verify_af_decay(end: RadialMetric, r_max: Optional[float] = None, n=64) -> DecayReport:
    """Fit ``log|phi^4 - phi_inf^4|`` against ``log r`` on ``[r_max/4, r_max]``."""
    if r_max is None:
        r_max = end.r_table_max if math.isfinite(end.r_table_max) else 1e4
    r = np.geomspace(r_max / 4.0, r_max, n)
    phi = end.phi(r)
    phi_inf = end.phi_inf
    # independent estimate: intercept of phi against 1/r
    coef = np.polyfit(1.0 / r, phi, 2)
    if abs(coef[-1] - phi_inf) > 1e-6 * max(1.0, abs(phi_inf)):
        raise DecayFitError(f"phi_inf estimates disagree: {phi_inf} vs {coef[-1]}")
    if not phi_inf > 0:
        raise DecayFitError("conformal factor does not tend to a positive constant")
    y = np.abs(phi**4 - phi_inf**4)
    if np.max(y) < 1e-12 * phi_inf**4:
        return DecayReport(None, 0.0, phi_inf, True, exact=True, window=(r_max / 4.0, r_max))
    lr, ly = np.log(r), np.log(y)
    slope, intercept = np.polyfit(lr, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lr + intercept)) ** 2)))
    return DecayReport(float(slope), resid, float(phi_inf), bool(slope <= -0.9), window=(r_max / 4.0, r_max))


@dataclass(frozen=True, eq=False)
class BlowupModel:
    """Asymptotically flat blow-up of a round model at an orbit.

    ``end_points`` are covering-sphere representatives of the orbit points of
    ``M`` (one per end); ``end_permutation[k]`` maps end ``i`` to the end
    containing ``g_k`` applied to it, for each generator ``g_k`` of ``action``.
    """

    source: ClosedModelMetric
    action: FiniteGroupAction
    covering_action: FiniteGroupAction
    base_point: np.ndarray
    green: AveragedGreen
    ends: list
    end_points: np.ndarray
    end_permutation: list
    horizon_radii: list
    masses: list
    decay: list
    scalar_flat_residual: list
    invariance_residual: float
    end_mismatch: float
    shared_horizon: bool
    warnings: list = field(default_factory=list)

    @property
    def k0(self) -> int:
        return len(self.ends)

    def is_transitive(self) -> bool:
        if self.k0 == 1:
            return True
        reached = {0}
        frontier = [0]
        while frontier:
            i = frontier.pop()
            for perm in self.end_permutation:
                for j in (perm[i], perm.index(i)):
                    if j not in reached:
                        reached.add(j)
                        frontier.append(j)
        return len(reached) == self.k0

    def summary(self) -> dict:
        return {
            "k0": self.k0,
            "covering_orbit": int(len(self.green.poles)),
            "masses": [float(m) for m in self.masses],
            "horizon_radii": [None if h is None else float(h) for h in self.horizon_radii],
            "decay": [d.to_dict() for d in self.decay],
            "scalar_flat_residual": [float(x) for x in self.scalar_flat_residual],
            "invariance_residual": float(self.invariance_residual),
            "end_mismatch": float(self.end_mismatch),
            "end_permutation": [list(p) for p in self.end_permutation],
            "transitive": self.is_transitive(),
            "shared_horizon": bool(self.shared_horizon),
            "warnings": list(self.warnings),
        }


def _deck_group(model: ClosedModelMetric) -> Optional[FiniteGroupAction]:
    if model.kind == "round-sphere":
        return None
    if model.kind == "projective-space":
        return FiniteGroupAction.antipodal()
    return FiniteGroupAction.lens(model.order, 1)


def _class_of(x, reps, deck):
    mats = [np.eye(4)] if deck is None else deck.elements
    for i, q in enumerate(reps):
        for g in mats:
            if np.max(np.abs(g @ q - x)) < 1e-9:
                return i
    return -1


def build_blowup(
    model: ClosedModelMetric,
    action: FiniteGroupAction,
    p=None,
    *,
    r_max: float = 1e4,
    n_table: int = 400,
    n_theta: int = 32,
    n_samples: int = 100,
    rng=None,
    profile: Optional[GreensProfile] = None,
) -> BlowupModel:
    """Blow ``model`` up at the orbit of ``p`` under ``action``.

    Quotient models are handled on the covering sphere: the action is
    combined with the deck group and ends are orbit points modulo deck
    transformations.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    p = np.array([1.0, 0.0, 0.0, 0.0]) if p is None else np.asarray(p, dtype=float)
    deck = _deck_group(model)
    cover = action if deck is None else action.combined_with(deck)
    if profile is None:
        profile = greens_round(ClosedModelMetric.sphere())
    green = averaged_green(cover, profile, p)
    poles = green.poles

    reps: list = []
    for q in poles:
        if _class_of(q, reps, deck) < 0:
            reps.append(q)
    reps = np.array(reps)

    perms = []
    for g in action.generator_matrices():
        perms.append(tuple(_class_of(g @ q, reps, deck) for q in reps))

    ends, horizons, masses, decays, flat_res = [], [], [], [], []
    warn = []
    for q in reps:
        dist_other = [sphere_distance(q, x) for x in poles if sphere_distance(q, x) > 1e-9]
        d_near = min(dist_other) if dist_other else math.pi
        d_big = min(0.75 * d_near, math.pi - 1e-2)
        r_lo = 0.5 / math.tan(d_big / 2.0)
        end = radial_end(green, q, r_lo, r_max, n=n_table, n_theta=n_theta)
        try:
            rh = detect_horizon(end)
            end = end.with_boundary(rh, horizon=rh)
        except HorizonError as exc:
            rh = None
            warn.append(f"end at {np.round(q, 6).tolist()}: {exc}")
        rr = np.asarray(end.params["r"])
        flat_res.append(float(np.max(np.abs(scalar_curvature_radial(end, rr[1:-1])))))
        ends.append(end)
        horizons.append(rh)
        masses.append(end.mass_estimate())
        decays.append(verify_af_decay(end))

    # G-invariance of the averaged Green's function on random samples
    xs = rng.normal(size=(n_samples, 4))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    near = np.zeros(len(xs), dtype=bool)
    for q in cover.elements @ p:
        near |= np.linalg.norm(xs - q, axis=1) < 1e-6
    xs = xs[~near]
    base = green(xs)
    inv = 0.0
    for g in cover.elements:
        inv = max(inv, float(np.max(np.abs(green(xs @ g.T) - base))))

    mismatch = 0.0
    if len(ends) > 1:
        r0 = np.asarray(ends[0].params["r"])
        ph0 = ends[0].phi(r0)
        for e in ends[1:]:
            mismatch = max(mismatch, float(np.max(np.abs(e.phi(r0) - ph0))))

    shared = False
    if len(reps) == 2 and all(h is not None for h in horizons):
        d_h = [2.0 * math.atan(1.0 / (2.0 * h)) for h in horizons]
        if abs(sum(d_h) - sphere_distance(reps[0], reps[1])) < 1e-6:
            shared = True

    return BlowupModel(
        source=model,
        action=action,
        covering_action=cover,
        base_point=p,
        green=green,
        ends=ends,
        end_points=reps,
        end_permutation=perms,
        horizon_radii=horizons,
        masses=masses,
        decay=decays,
        scalar_flat_residual=flat_res,
        invariance_residual=inv,
        end_mismatch=mismatch,
        shared_horizon=shared,
        warnings=warn,
    )


def check_isometric_ends(model: BlowupModel, tol=1e-10):
    if model.end_mismatch > tol:
        raise SymmetryError(f"end profiles differ by {model.end_mismatch:.3e}")

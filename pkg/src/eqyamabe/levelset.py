"""Harmonic potentials on radial ends and the level-set energy W(t).

On an end ``g = phi^4 delta`` a radial harmonic ``u`` satisfies
``(r^2 phi^2 u')' = 0``, so ``u' = -K / (r^2 phi^2)`` and the flux
``int |grad u| da = 4 pi K`` is the same through every sphere.  With
``w = -log u`` the level sets are the spheres ``u = e^-t``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BoundaryError, PreconditionError, SolverError, SymmetryError
from .geom import RadialMetric, scalar_curvature_radial

__all__ = [
    "HarmonicSolution",
    "LevelSetScan",
    "MonotonicityReport",
    "solve_harmonic_radial",
    "scan_levels",
    "monotone_bound",
    "minimal_bound",
    "check_monotonicity",
    "check_minimal_bound",
    "combine_equivariant",
    "write_scan_csv",
    "CSV_COLUMNS",
    "random_admissible_end",
]

CSV_COLUMNS = ("t", "r", "area", "flux", "W", "bound", "slack")
MINIMAL_TOL = 1e-6
_R_CAP = 1e14


@dataclass(frozen=True, eq=False)
class HarmonicSolution:
    """``u`` on ``[r_b, inf)`` with ``u(r_b) = 1`` and ``u -> 0``.

    ``K`` is the constant in ``u' = -K/(r^2 phi^2)``; the capacity flux is
    ``C0 = 4 pi K``.  ``integral`` (general ends) is ``x -> int_0^x
    dx'/phi(1/x')^2`` so that ``u(r) = integral(1/r) / integral(1/r_b)``.
    """

    end: RadialMetric
    r_b: float
    K: float
    provenance: str
    integral: Optional[Callable] = field(default=None, repr=False)
    grid: Optional[object] = field(default=None, repr=False)

    @property
    def C0(self) -> float:
        return 4.0 * math.pi * self.K

    def u(self, r):
        r = np.asarray(r, dtype=float)
        if self.provenance == "closed-form":
            return self.r_b * float(self.end.phi(self.r_b)) / (r * self.end.phi(r))
        x = 1.0 / r
        return self.integral(x) / self.integral(1.0 / self.r_b)

    def du(self, r):
        r = np.asarray(r, dtype=float)
        return -self.K / (r * r * self.end.phi(r) ** 2)

    def grad_w(self, r):
        """``|grad w|_g = |u'| / (u phi^2)``."""
        return np.abs(self.du(r)) / (self.u(r) * self.end.phi(r) ** 2)

    def level_radius(self, t, rtol=1e-12):
        """Radii with ``u = e^-t`` by vectorised bisection in ``log r``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        target = np.exp(-t)
        lo = np.full_like(t, math.log(self.r_b))
        hi = lo + 1.0
        for _ in range(200):
            bad = self.u(np.exp(hi)) > target
            if not np.any(bad) or np.exp(hi.max()) > _R_CAP:
                break
            hi = np.where(bad, hi + 1.0 + (hi - lo), hi)
        hi = np.minimum(hi, math.log(_R_CAP))
        reached = self.u(np.exp(hi)) <= target
        while np.max(hi - lo) > rtol:
            mid = 0.5 * (lo + hi)
            above = self.u(np.exp(mid)) > target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        r = np.exp(0.5 * (lo + hi))
        r = np.where(t == 0.0, self.r_b, r)
        return r, reached | (t == 0.0)


def _boundary_radius(end: RadialMetric, boundary):
    if boundary is not None:
        return float(boundary)
    if end.horizon is not None:
        return float(end.horizon)
    if end.r_min > 0:
        return float(end.r_min)
    raise BoundaryError("end has no horizon or boundary sphere")


def solve_harmonic_radial(end: RadialMetric, boundary: Optional[float] = None, rtol: float = 1e-12) -> HarmonicSolution:
    """Harmonic ``u`` with ``u = 1`` on the boundary sphere and ``u -> 0`` at infinity.

    Scalar-flat closed forms use ``phi u = r_b phi(r_b) / r``.  Otherwise the
    first integral is integrated in ``x = 1/r`` from infinity inward.
    """
    r_b = _boundary_radius(end, boundary)
    if r_b < end.r_min * (1 - 1e-12):
        raise BoundaryError("boundary below the end's r_min")
    phi_inf = end.phi_inf
    if end.is_closed_form_scalar_flat:
        K = r_b * float(end.phi(r_b)) * phi_inf
        sol = HarmonicSolution(end, r_b, K, "closed-form")
    else:
        x_b = 1.0 / r_b

        def rhs(x, y):
            if x < 1e-14:
                return [1.0 / phi_inf**2]
            return [1.0 / float(end.phi(1.0 / x)) ** 2]

        ivp = solve_ivp(rhs, (0.0, x_b), [0.0], method="DOP853", rtol=rtol, atol=1e-15 * x_b, dense_output=True)
        if not ivp.success:
            raise SolverError(f"radial harmonic integration failed: {ivp.message}")
        dense = ivp.sol

        def integral(x):
            x = np.asarray(x, dtype=float)
            return dense(np.clip(x, 0.0, x_b))[0]

        i_b = float(integral(x_b))
        sol = HarmonicSolution(end, r_b, 1.0 / i_b, "radial-ODE", integral=integral)
    probe = np.geomspace(r_b, r_b * 1e6, 64)
    vals = sol.u(probe)
    if np.any(vals <= 0) or np.any(np.diff(vals) >= 0):
        raise SolverError("harmonic potential is not positive and decreasing")
    return sol


@dataclass(frozen=True, eq=False)
class LevelSetScan:
    """Per-level samples; ``coarea`` is ``int |grad w|^-1 da``.

    ``card`` is the number of ends summed (1 for a single end) and
    ``boundary_minimal`` records whether the level-0 sphere is minimal.
    """

    t: np.ndarray
    r: np.ndarray
    area: np.ndarray
    flux: np.ndarray
    W: np.ndarray
    coarea: np.ndarray
    grad_w: np.ndarray
    C0: float
    boundary_minimal: bool
    card: int = 1
    label: str = "end"
    warnings: tuple = ()

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    @property
    def W0(self) -> float:
        return float(self.W[0])

    def flux_deviation(self) -> float:
        return float(np.max(np.abs(self.flux * np.exp(-self.t) / self.C0 - 1.0)))

    def cauchy_schwarz_gap(self) -> np.ndarray:
        """``W area - flux^2`` per level (non-negative)."""
        return self.W * self.area - self.flux**2


def scan_levels(sol: HarmonicSolution, t_grid: Sequence[float]) -> LevelSetScan:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing and start at t >= 0")
    r, ok = sol.level_radius(t)
    warns = []
    if not np.all(ok):
        cut = int(np.argmin(ok))
        warns.append(f"scan truncated at t={t[cut]:.6g}: potential does not reach e^-t in the chart")
        t, r = t[:cut], r[:cut]
    end = sol.end
    phi = end.phi(r)
    area = 4.0 * math.pi * r * r * phi**4
    gw = sol.grad_w(r)
    flux = area * gw
    W = area * gw * gw
    coarea = area / gw
    H = float(end.mean_curvature(sol.r_b))
    minimal = abs(H) * float(end.areal_radius(sol.r_b)) < MINIMAL_TOL
    return LevelSetScan(t, r, area, flux, W, coarea, gw, sol.C0, bool(minimal), 1, "end", tuple(warns))


def monotone_bound(t, W0):
    """``[e^-t sqrt(W0) + (1 - e^-t) sqrt(4 pi)]^2``."""
    e = np.exp(-np.asarray(t, dtype=float))
    return (e * math.sqrt(W0) + (1.0 - e) * math.sqrt(4.0 * math.pi)) ** 2


def minimal_bound(t, card=1):
    """``card * pi (2 - e^-t)^2``."""
    return card * math.pi * (2.0 - np.exp(-np.asarray(t, dtype=float))) ** 2


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    max_violation: float
    max_slack: float
    near_equality: int
    n_levels: int
    kind: str

    def to_dict(self):
        return {
            "passed": self.passed,
            "max_violation": self.max_violation,
            "max_slack": self.max_slack,
            "near_equality_levels": self.near_equality,
            "levels": self.n_levels,
            "kind": self.kind,
        }


def _report(W, bound, tol, kind, eq_tol=1e-6):
    slack = bound - W
    viol = float(max(0.0, -float(np.min(slack))))
    return MonotonicityReport(
        passed=bool(np.all(W <= bound + tol)),
        max_violation=viol,
        max_slack=float(np.max(slack)),
        near_equality=int(np.sum(np.abs(slack) < eq_tol * np.maximum(1.0, bound))),
        n_levels=int(W.size),
        kind=kind,
    )


def check_monotonicity(scan: LevelSetScan, W0: Optional[float] = None, tol: float = 1e-8) -> MonotonicityReport:
    """Per-end form ``W(t) <= [e^-t sqrt(W0) + (1-e^-t) sqrt(4 pi)]^2 + tol``."""
    W0 = scan.W0 if W0 is None else W0
    if scan.card != 1:
        # summed scans: each end obeys its own bound, so the sum of bounds applies
        bound = scan.card * monotone_bound(scan.t, W0 / scan.card)
    else:
        bound = monotone_bound(scan.t, W0)
    return _report(scan.W, bound, tol, "monotone")


def check_minimal_bound(scan: LevelSetScan, tol: float = 1e-8) -> MonotonicityReport:
    """``W(t) <= card pi (2 - e^-t)^2 + tol`` when the boundary is minimal."""
    if not scan.boundary_minimal:
        raise PreconditionError("boundary sphere is not minimal")
    return _report(scan.W, minimal_bound(scan.t, scan.card), tol, "minimal")


def combine_equivariant(per_end: Sequence[LevelSetScan], tol: float = 1e-8, label: str = "G") -> LevelSetScan:
    """Sum isometric per-end scans into the ``W_G`` scan."""
    if not per_end:
        raise ValueError("no end scans to combine")
    ref = per_end[0]
    for s in per_end[1:]:
        if s.t.shape != ref.t.shape or np.max(np.abs(s.t - ref.t)) > 0:
            raise SymmetryError("end scans use different level grids")
        dev = float(np.max(np.abs(s.W - ref.W) / np.maximum(1.0, np.abs(ref.W))))
        if dev > tol:
            raise SymmetryError(f"end profiles differ: relative W mismatch {dev:.3e}")
    card = sum(s.card for s in per_end)
    return LevelSetScan(
        t=ref.t.copy(),
        r=ref.r.copy(),
        area=sum(s.area for s in per_end),
        flux=sum(s.flux for s in per_end),
        W=sum(s.W for s in per_end),
        coarea=sum(s.coarea for s in per_end),
        grad_w=ref.grad_w.copy(),
        C0=float(sum(s.C0 for s in per_end)),
        boundary_minimal=all(s.boundary_minimal for s in per_end),
        card=card,
        label=label,
        warnings=tuple(w for s in per_end for w in s.warnings),
    )


def write_scan_csv(scan: LevelSetScan, path, bound: str = "auto") -> None:
    """Write ``t, r, area, flux, W, bound, slack``.

    ``bound`` is the minimal-boundary bound when the boundary is minimal
    (``auto``) and the monotonicity bound otherwise.
    """
    if bound == "auto":
        bound = "minimal" if scan.boundary_minimal else "monotone"
    if bound == "minimal":
        b = minimal_bound(scan.t, scan.card)
    else:
        b = scan.card * monotone_bound(scan.t, scan.W0 / scan.card)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for row in zip(scan.t, scan.r, scan.area, scan.flux, scan.W, b, b - scan.W):
            wr.writerow([f"{v:.12g}" for v in row])


def random_admissible_end(rng, max_tries: int = 500) -> RadialMetric:
    """Random end with ``R >= 0`` and a mean-convex boundary sphere.

    ``phi = a + b/r + sum c erf(r/s)/r`` (superharmonic) plus, now and then,
    a small exponential bump; candidates are kept only when the sampled
    curvature is non-negative and the boundary has ``H >= 0``.
    """
    probe_hi = 1e3
    for _ in range(max_tries):
        a = rng.uniform(0.5, 2.0)
        b = rng.uniform(0.0, 2.0) * (rng.random() < 0.8)
        blobs = [(rng.uniform(0.0, 1.5), rng.uniform(0.2, 3.0)) for _ in range(rng.integers(0, 4))]
        bumps = []
        if rng.random() < 0.3:
            bumps.append((rng.uniform(-0.05, 0.05) * a, rng.uniform(0.5, 3.0)))
        r_min = rng.uniform(0.2, 3.0)
        end = RadialMetric.potential(a, b, blobs, bumps, r_min=r_min)
        if not bumps and b == 0.0 and not blobs:
            continue
        probe = np.geomspace(r_min, probe_hi, 300)
        if np.any(end.phi(probe) <= 0):
            continue
        if bumps and np.min(scalar_curvature_radial(end, probe)) < -1e-10:
            continue
        if float(end.mean_curvature(r_min)) < 0:
            continue
        return end
    raise SolverError("no admissible random end found", [])

"""Metric models, conformal scalar curvature and the Yamabe functionals.

Two carriers are supported:

* :class:`ClosedModelMetric` -- round S^3 and its quotients RP^3 and L(p, q),
  all of constant positive scalar curvature.
* :class:`RadialMetric` -- a conformally flat end ``g = phi(r)^4 delta`` on
  ``[r_min, inf)``.  ``phi`` is one of a few closed-form variants or a table.

Dimension is fixed to three throughout, so the Sobolev exponent is 6 and the
conformal Laplacian constant is 8.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import erf

from .errors import DegenerateInputError, DomainError, RangeError

__all__ = [
    "ClosedModelMetric",
    "RadialMetric",
    "ConformalTestFunction",
    "scalar_curvature_radial",
    "einstein_hilbert_energy",
    "yamabe_quotient",
    "SQRT_PI",
]

SQRT_PI = math.sqrt(math.pi)
_CLOSED_KINDS = ("round-sphere", "projective-space", "lens")


@dataclass(frozen=True)
class ClosedModelMetric:
    """Round S^3 of ``radius`` or its quotient by a free cyclic group of ``order``."""

    kind: str = "round-sphere"
    radius: float = 1.0
    order: int = 1

    def __post_init__(self):
        if self.kind not in _CLOSED_KINDS:
            raise DomainError(f"unknown closed model kind {self.kind!r}")
        if not self.radius > 0:
            raise DomainError("radius must be positive")
        expected = {"round-sphere": 1, "projective-space": 2}.get(self.kind)
        if expected is not None and self.order != expected:
            object.__setattr__(self, "order", expected)
        if self.order < 1:
            raise DomainError("lens order must be >= 1")

    @classmethod
    def sphere(cls, radius=1.0):
        return cls("round-sphere", radius, 1)

    @classmethod
    def projective(cls, radius=1.0):
        return cls("projective-space", radius, 2)

    @classmethod
    def lens(cls, p, radius=1.0):
        return cls("lens", radius, int(p))

    @property
    def scalar_curvature(self) -> float:
        return 6.0 / self.radius**2

    @property
    def volume(self) -> float:
        return 2.0 * math.pi**2 * self.radius**3 / self.order

    def scaled(self, c: float) -> "ClosedModelMetric":
        """The metric ``c^2 g``."""
        return replace(self, radius=self.radius * abs(c))


def _fd1(f, r, h):
    return (f(r - 2 * h) - 8 * f(r - h) + 8 * f(r + h) - f(r + 2 * h)) / (12 * h)


def _fd2(f, r, h):
    return (-f(r - 2 * h) + 16 * f(r - h) - 30 * f(r) + 16 * f(r + h) - f(r + 2 * h)) / (12 * h * h)


@dataclass(frozen=True, eq=False)
class RadialMetric:
    """Conformally flat radial metric ``phi(r)^4 delta`` on ``[r_min, inf)``.

    Build instances with the classmethod constructors; ``kind`` tags the
    closed form used for ``phi``.  ``horizon`` is the radius of the minimal
    boundary sphere when one is known.
    """

    kind: str
    params: dict = field(default_factory=dict)
    r_min: float = 0.0
    horizon: Optional[float] = None
    _spline: Optional[CubicSpline] = field(default=None, repr=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def flat(cls, r_min=0.0):
        return cls("flat", {}, r_min=float(r_min))

    @classmethod
    def schwarzschild(cls, m):
        if not m > 0:
            raise DomainError("Schwarzschild mass must be positive")
        return cls("schwarzschild", {"m": float(m)}, r_min=m / 2.0, horizon=m / 2.0)

    @classmethod
    def round_stereographic(cls, radius=1.0):
        # phi^4 = (2a / (1 + r^2))^2, the round metric of radius a
        return cls("round", {"radius": float(radius)}, r_min=0.0)

    @classmethod
    def potential(cls, a=1.0, b=0.0, blobs=(), bumps=(), r_min=0.0, horizon=None):
        """``a + b/r + sum c erf(r/s)/r + sum e exp(-r/l)``.

        Each ``erf`` blob is the Newtonian potential of a Gaussian mass, so
        with ``b, c >= 0`` the result is superharmonic (``R >= 0``).  The
        exponential bumps are not; use them for perturbation tests together
        with a curvature check.
        """
        blobs = tuple((float(c), float(s)) for c, s in blobs)
        bumps = tuple((float(e), float(l)) for e, l in bumps)
        return cls(
            "potential",
            {"a": float(a), "b": float(b), "blobs": blobs, "bumps": bumps},
            r_min=float(r_min),
            horizon=horizon,
        )

    @classmethod
    def tabulated(cls, r, phi, r_min=None, horizon=None):
        """Cubic interpolation of ``r*phi(r)``, continued linearly beyond the table.

        Interpolating ``r*phi`` rather than ``phi`` reproduces every
        scalar-flat profile ``a + b/r`` exactly, so curvature residuals
        measure the data and not the interpolant.
        """
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if r.ndim != 1 or r.shape != phi.shape or r.size < 4:
            raise DomainError("tabulated metric needs matching 1-D arrays of >= 4 samples")
        if np.any(np.diff(r) <= 0):
            raise DomainError("radii must be strictly increasing")
        if np.any(phi <= 0):
            raise DomainError("conformal factor must be positive")
        spline = CubicSpline(r, r * phi)
        params = {"r": r, "phi": phi}
        r_lo = float(r[0]) if r_min is None else float(r_min)
        return cls("tabulated", params, r_min=r_lo, horizon=horizon, _spline=spline)

    @classmethod
    def from_callable(cls, phi, r_min=0.0, phi_inf=None, horizon=None):
        """Arbitrary positive ``phi``; derivatives by 5-point finite differences."""
        return cls("callable", {"fn": phi, "phi_inf": phi_inf}, r_min=float(r_min), horizon=horizon)

    def with_boundary(self, r_min, horizon=None):
        return replace(self, r_min=float(r_min), horizon=horizon)

    # -- evaluation ---------------------------------------------------------
    @property
    def phi_inf(self) -> float:
        k = self.kind
        if k in ("flat", "schwarzschild"):
            return 1.0
        if k == "round":
            return 0.0
        if k == "potential":
            return self.params["a"]
        if k == "tabulated":
            r_end = self.params["r"][-1]
            return float(self._spline(r_end, 1))
        val = self.params.get("phi_inf")
        return float(val) if val is not None else float(self.phi(1e8))

    @property
    def r_table_max(self) -> float:
        if self.kind == "tabulated":
            return float(self.params["r"][-1])
        return math.inf

    @property
    def is_closed_form_scalar_flat(self) -> bool:
        """True when ``r*phi`` is affine in r by construction."""
        if self.kind in ("flat", "schwarzschild"):
            return True
        if self.kind == "potential":
            return not self.params["blobs"] and not self.params["bumps"]
        return False

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        lo = self.r_min
        if self.kind == "tabulated":
            lo = min(lo, float(self.params["r"][0]))
        if np.any(r < lo * (1 - 1e-12) - 1e-300):
            raise RangeError(f"radius below r_min={lo}")
        return r

    def _derivs(self, r, order):
        """Return (phi, phi', phi'') up to ``order``."""
        k = self.kind
        p = self.params
        if k == "flat":
            z = np.zeros_like(r)
            return 1.0 + z, z, z
        if k == "schwarzschild":
            m = p["m"]
            return 1.0 + m / (2 * r), -m / (2 * r**2), m / r**3
        if k == "round":
            a = p["radius"]
            q = 1.0 + r * r
            f = np.sqrt(2 * a / q)
            d1 = -r * f / q
            d2 = f * (2 * r * r - 1.0) / q**2
            return f, d1, d2
        if k == "potential":
            f = p["a"] + p["b"] / r
            d1 = -p["b"] / r**2
            d2 = 2 * p["b"] / r**3
            for c, s in p["blobs"]:
                e_ = erf(r / s)
                d = 2.0 / (s * SQRT_PI) * np.exp(-((r / s) ** 2))
                dd = -2 * r / s**2 * d
                f = f + c * e_ / r
                d1 = d1 + c * (d / r - e_ / r**2)
                d2 = d2 + c * (dd / r - 2 * d / r**2 + 2 * e_ / r**3)
            for e, l in p["bumps"]:
                ex = e * np.exp(-r / l)
                f = f + ex
                d1 = d1 - ex / l
                d2 = d2 + ex / l**2
            return f, d1, d2
        if k == "tabulated":
            return self._tab_derivs(r)
        fn = p["fn"]
        f = np.asarray(fn(r), dtype=float)
        if order == 0:
            return f, None, None
        h = 1e-3 * np.maximum(np.abs(r), 1e-2)
        return f, _fd1(fn, r, h), _fd2(fn, r, h)

    def _tab_derivs(self, r):
        sp = self._spline
        r_end = float(self.params["r"][-1])
        inside = r <= r_end
        rc = np.where(inside, r, r_end)
        psi = np.where(inside, sp(rc), 0.0)
        dpsi = np.where(inside, sp(rc, 1), 0.0)
        d2psi = np.where(inside, sp(rc, 2), 0.0)
        # linear continuation of r*phi beyond the table
        s0 = float(sp(r_end))
        s1 = float(sp(r_end, 1))
        psi = np.where(inside, psi, s0 + s1 * (r - r_end))
        dpsi = np.where(inside, dpsi, s1)
        f = psi / r
        d1 = (dpsi - f) / r
        d2 = (d2psi - 2 * d1) / r
        return f, d1, d2

    def phi(self, r):
        r = self._check(r)
        return self._derivs(r, 0)[0]

    def dphi(self, r):
        r = self._check(r)
        return self._derivs(r, 1)[1]

    def d2phi(self, r):
        r = self._check(r)
        return self._derivs(r, 2)[2]

    def phi_derivatives(self, r):
        r = self._check(r)
        return self._derivs(r, 2)

    def areal_radius(self, r):
        """Radius ``r phi^2`` of the round sphere with the same area."""
        r = self._check(r)
        return r * self._derivs(r, 0)[0] ** 2

    def d_areal_radius(self, r):
        f, d1, _ = self.phi_derivatives(r)
        return f * f + 2 * r * f * d1

    def mean_curvature(self, r):
        """Mean curvature of the coordinate sphere of radius r (outward normal)."""
        f, d1, _ = self.phi_derivatives(r)
        r = np.asarray(r, dtype=float)
        return (2.0 / r + 4.0 * d1 / f) / f**2

    def area(self, r):
        r = self._check(r)
        return 4 * math.pi * r * r * self._derivs(r, 0)[0] ** 4

    def mass_estimate(self) -> float:
        """Mass from ``phi ~ phi_inf (1 + m / 2r)``; coordinate-scale dependent."""
        if self.kind == "schwarzschild":
            return self.params["m"]
        if self.kind == "flat":
            return 0.0
        if self.kind == "potential":
            p = self.params
            return 2.0 * (p["b"] + sum(c for c, _ in p["blobs"])) / p["a"]
        if self.kind == "tabulated":
            r_end = float(self.params["r"][-1])
            s0 = float(self._spline(r_end))
            s1 = float(self._spline(r_end, 1))
            return 2.0 * (s0 - s1 * r_end) / s1
        r_far = 1e6
        f = float(self.phi(r_far))
        return 2.0 * r_far * (f - self.phi_inf) / self.phi_inf


def scalar_curvature_radial(metric: RadialMetric, r):
    """Scalar curvature ``-8 phi^-5 (phi'' + 2 phi'/r)`` of ``phi^4 delta``."""
    r_arr = metric._check(r)
    f, d1, d2 = metric._derivs(np.asarray(r_arr, dtype=float), 2)
    if np.any(f <= 0):
        raise DomainError("conformal factor must be positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = np.where(r_arr > 0, d2 + 2 * d1 / np.where(r_arr > 0, r_arr, 1.0), 3 * d2)
    out = -8.0 * lap / f**5
    return float(out) if np.ndim(out) == 0 else out


def einstein_hilbert_energy(metric: ClosedModelMetric) -> float:
    return metric.scalar_curvature * metric.volume ** (2.0 / 3.0)


@dataclass(frozen=True)
class ConformalTestFunction:
    """Radial test function.

    On a :class:`RadialMetric` the argument is the coordinate radius.  On a
    :class:`ClosedModelMetric` it is the geodesic distance from a base point
    on the covering sphere; for quotient models the caller is responsible
    for deck invariance (constants always qualify).
    """

    u: Callable
    du: Optional[Callable] = None
    support_radius: Optional[float] = None
    breakpoints: Sequence[float] = ()

    @classmethod
    def constant(cls, c=1.0):
        return cls(lambda x: np.full_like(np.asarray(x, dtype=float), c), lambda x: np.zeros_like(np.asarray(x, dtype=float)))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        v = np.asarray(self.u(x), dtype=float)
        if self.support_radius is not None:
            v = np.where(x > self.support_radius, 0.0, v)
        return v

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.du is not None:
            d = np.asarray(self.du(x), dtype=float)
        else:
            h = 1e-6 * np.maximum(np.abs(x), 1.0)
            d = (np.asarray(self.u(x + h)) - np.asarray(self.u(x - h))) / (2 * h)
        if self.support_radius is not None:
            d = np.where(x > self.support_radius, 0.0, d)
        return d

    def scaled(self, c):
        u, du = self.u, self.du
        return replace(
            self,
            u=lambda x: c * np.asarray(u(x)),
            du=None if du is None else (lambda x: c * np.asarray(du(x))),
        )


def _quad(fn, a, b, points, rtol):
    pts = sorted(p for p in points if a < p < b)
    edges = [a, *pts, b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(fn, lo, hi, epsrel=rtol, epsabs=0.0, limit=400)
        total += val
    return total


def yamabe_quotient(metric, u: ConformalTestFunction, rtol: float = 1e-8) -> float:
    """``(int 8|grad u|^2 + R u^2) / (int u^6)^(1/3)`` on a model carrier."""
    if isinstance(metric, ClosedModelMetric):
        a = metric.radius
        r0 = metric.scalar_curvature
        d_max = math.pi * a
        if u.support_radius is not None:
            d_max = min(d_max, u.support_radius)

        def num(d):
            w = 4 * math.pi * a * a * math.sin(d / a) ** 2
            return (8 * float(u.derivative(d)) ** 2 + r0 * float(u.value(d)) ** 2) * w

        def den(d):
            return float(u.value(d)) ** 6 * 4 * math.pi * a * a * math.sin(d / a) ** 2

        n = _quad(num, 0.0, d_max, u.breakpoints, rtol) / metric.order
        dd = _quad(den, 0.0, d_max, u.breakpoints, rtol) / metric.order
    elif isinstance(metric, RadialMetric):
        lo = metric.r_min
        hi = math.inf if u.support_radius is None else u.support_radius

        def num(r):
            f, d1, d2 = metric._derivs(np.asarray(r, dtype=float), 2)
            lap = d2 + 2 * d1 / r if r > 0 else 3 * d2
            curv = -8.0 * lap / f**5
            du = float(u.derivative(r))
            uu = float(u.value(r))
            return 4 * math.pi * r * r * (8 * du * du * f * f + curv * uu * uu * f**6)

        def den(r):
            f = float(metric._derivs(np.asarray(r, dtype=float), 0)[0])
            return 4 * math.pi * r * r * float(u.value(r)) ** 6 * f**6

        n = _quad(num, lo, hi, u.breakpoints, rtol)
        dd = _quad(den, lo, hi, u.breakpoints, rtol)
    else:
        raise DomainError(f"unsupported carrier {type(metric).__name__}")
    if not dd > 0:
        raise DegenerateInputError("test function vanishes identically")
    return n / dd ** (1.0 / 3.0)

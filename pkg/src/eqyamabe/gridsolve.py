"""Cartesian-grid cross-check of the radial harmonic solve.

For ``g = phi^4 delta`` we have ``Delta_g u = phi^-5 (Delta v - v Delta phi / phi)``
with ``v = phi u``, so ``v`` solves ``-Delta v - q v = 0`` with
``q = R phi^4 / 8``.  For ``R >= 0`` the shift lowers the spectrum; the
system stays positive definite while ``q`` is small against the lowest
Dirichlet eigenvalue of the shell, and CG reports it otherwise.  ``v`` is discretised with the 7-point stencil on
nodes of ``[0, R_out]^3`` (one octant, mirror symmetry on the coordinate
planes) between the boundary sphere and the outer sphere.  Arms that cross
a sphere are shortened to the crossing point (symmetric cut-cell rows), so
the system is symmetric positive definite and solved with Jacobi-PCG.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import SolverError
from .geom import RadialMetric, scalar_curvature_radial
from .levelset import HarmonicSolution, _boundary_radius

__all__ = ["GridSpec", "GridResult", "assemble", "pcg", "solve_harmonic_grid3d", "grid_error"]


@dataclass(frozen=True)
class GridSpec:
    n: int = 128
    outer_radius: float = 16.0
    octant: bool = True
    rtol: float = 1e-8
    maxiter: int = 20000
    theta_min: float = 1e-3
    backend: Optional[str] = None


@dataclass(frozen=True, eq=False)
class GridResult:
    spec: GridSpec
    h: float
    radii: np.ndarray
    v: np.ndarray
    u: np.ndarray
    iterations: int
    residuals: np.ndarray
    backend: str
    seconds: float


def _axis(spec: GridSpec):
    if spec.octant:
        return np.linspace(0.0, spec.outer_radius, spec.n)
    return np.linspace(-spec.outer_radius, spec.outer_radius, spec.n)


def _crossing(x2, xe, s, h, rho):
    """Smallest ``theta`` in ``(0, 1]`` with ``|x + theta s h e| = rho``."""
    b = s * xe
    disc = np.maximum(b * b - (x2 - rho * rho), 0.0)
    sq = np.sqrt(disc)
    t1 = (-b - sq) / h
    t2 = (-b + sq) / h
    return np.where(t1 > 0, t1, t2)


def assemble(end: RadialMetric, r_b: float, spec: GridSpec):
    """Return ``(op, rhs, active, radii)``; ``op = (diag, w, arms)`` is the weighted symmetric operator.

    The outer sphere carries the monopole data ``v = r_b phi(r_b) / R``.
    """
    op, (rhs_in, rhs_out), active, r = _assemble(end, r_b, spec)
    v_in = float(end.phi(r_b))
    return op, v_in * rhs_in + (r_b * v_in / spec.outer_radius) * rhs_out, active, r


def _assemble(end: RadialMetric, r_b: float, spec: GridSpec):
    """Operator plus the right-hand sides for unit data on the inner and outer spheres."""
    ax = _axis(spec)
    h = float(ax[1] - ax[0])
    R = spec.outer_radius
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    coords = (X, Y, Z)
    r2 = X * X + Y * Y + Z * Z
    r = np.sqrt(r2)
    active = (r > r_b) & (r < R)
    if spec.octant:
        # control volumes on a symmetry plane are halved
        w = 0.5 ** ((X == 0).astype(int) + (Y == 0).astype(int) + (Z == 0).astype(int))
    else:
        w = np.ones_like(r)
    w = np.where(active, w, 0.0)
    diag = np.zeros(r.shape)
    arms = np.zeros(r.shape, dtype=np.uint8)
    rhs_in = np.zeros(r.shape)
    rhs_out = np.zeros(r.shape)
    # neighbour radii by index shift so activity agrees with the node table;
    # index -1 reflects onto 1, and the far layer is never active
    rpad = np.pad(r, 1, mode="reflect")
    bit = 0
    for axis in range(3):
        for s in (-1.0, 1.0):
            sl = [slice(1, -1)] * 3
            sl[axis] = slice(0, -2) if s < 0 else slice(2, None)
            rn = rpad[tuple(sl)]
            regular = active & (rn > r_b) & (rn < R)
            cut_in = active & (rn <= r_b)
            cut_out = active & (rn >= R)
            arms |= (regular.astype(np.uint8) << bit)
            diag += np.where(regular, w, 0.0)
            for mask, rho, rhs in ((cut_in, r_b, rhs_in), (cut_out, R, rhs_out)):
                if not np.any(mask):
                    continue
                th = _crossing(r2[mask], coords[axis][mask], s, h, rho)
                th = np.clip(th, spec.theta_min, 1.0)
                diag[mask] += w[mask] / th
                rhs[mask] += w[mask] / th
            bit += 1
    # zeroth-order term from the scalar curvature of the end
    if not end.is_closed_form_scalar_flat and end.kind != "round":
        ra = r[active]
        q = scalar_curvature_radial(end, ra) * end.phi(ra) ** 4 / 8.0
        diag[active] -= w[active] * h * h * q
    return (diag, np.ascontiguousarray(w), arms), (rhs_in, rhs_out), active, r


def pcg(op, rhs, rtol=1e-8, maxiter=20000, backend=None, x0=None):
    """Jacobi-preconditioned CG on the stencil operator; returns ``(x, residual history)``."""
    k = kernels.get_backend(backend)
    diag, w, arms = op
    dinv = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)
    x = np.zeros_like(rhs) if x0 is None else np.where(diag > 0, x0, 0.0)
    q = np.empty_like(rhs)
    k.matvec_dot(diag, w, arms, x, q)
    r = rhs - q
    z = dinv * r
    p = z.copy()
    rz = float(np.vdot(r, z))
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return x, np.array([0.0])
    hist = [1.0]
    for _ in range(maxiter):
        pq = k.matvec_dot(diag, w, arms, p, q)
        if pq <= 0:
            raise SolverError("operator is not positive definite", hist)
        alpha = rz / pq
        rz_new, rr = k.cg_update(x, r, p, q, dinv, z, alpha)
        rel = math.sqrt(rr) / bnorm
        hist.append(rel)
        if rel < rtol:
            return x, np.array(hist)
        k.xpby(z, p, rz_new / rz)
        rz = rz_new
    raise SolverError(f"CG did not reach rtol={rtol} in {maxiter} iterations", hist)


def solve_harmonic_grid3d(end: RadialMetric, spec: Optional[GridSpec] = None, boundary: Optional[float] = None) -> HarmonicSolution:
    """Grid solve of the harmonic potential; ``u = v / phi`` at the active nodes.

    Scalar-flat ends take the monopole data ``v = r_b phi(r_b) / R`` on the
    outer sphere, which is exact there.  Otherwise ``v = B / r`` only holds
    far out with ``B`` unknown, so two solves are superposed (unit inner
    data, unit outer data) and ``B`` is fixed so that ``v r = B`` on the
    outer band.
    """
    spec = GridSpec() if spec is None else spec
    r_b = _boundary_radius(end, boundary)
    R = spec.outer_radius
    if not r_b < R:
        raise ValueError("outer radius must exceed the boundary radius")
    t0 = time.perf_counter()
    op, (rhs_in, rhs_out), active, r = _assemble(end, r_b, spec)
    v_in = float(end.phi(r_b))
    band_all = (r > R / 4) & (r < R / 2) & active
    # start from the linear-in-r blend of the boundary values; a zero start
    # leaves Krylov vectors subnormal far from the boundary, which is slow
    ramp = (r - r_b) / (R - r_b)
    if end.is_closed_form_scalar_flat or end.kind == "round":
        v_out = r_b * v_in / R
        v, hist = pcg(op, v_in * rhs_in + v_out * rhs_out, spec.rtol, spec.maxiter, spec.backend, x0=v_in + (v_out - v_in) * ramp)
    else:
        v0, hist = pcg(op, v_in * rhs_in, spec.rtol, spec.maxiter, spec.backend, x0=v_in * (1 - ramp))
        v1, hist1 = pcg(op, rhs_out / R, spec.rtol, spec.maxiter, spec.backend, x0=ramp / R)
        hist = np.concatenate([hist, hist1[1:]])
        # (v0 + c v1) r = c on the band, with c the outer coefficient B
        rb_ = r[band_all]
        c = float(np.median(v0[band_all] * rb_ / (1.0 - v1[band_all] * rb_)))
        v = v0 + c * v1
    radii = r[active]
    vv = v[active]
    u = vv / end.phi(radii)
    name = spec.backend or kernels.BACKEND
    res = GridResult(spec, float(_axis(spec)[1] - _axis(spec)[0]), radii, vv, u, len(hist) - 1, hist, name, time.perf_counter() - t0)
    # v ~ b/r; K = b phi_inf
    band = (radii > R / 4) & (radii < R / 2)
    b = float(np.median(vv[band] * radii[band])) if np.any(band) else r_b * v_in
    return HarmonicSolution(end, r_b, b * end.phi_inf, "grid-3d", grid=res)


def grid_error(grid_sol: HarmonicSolution, reference: HarmonicSolution) -> float:
    """Sup-norm difference of ``u`` over the active grid nodes."""
    g = grid_sol.grid
    return float(np.max(np.abs(g.u - reference.u(g.radii))))

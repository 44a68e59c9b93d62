"""Finite groups of isometries of S^3 given by orthogonal 4x4 matrices.

Points of S^3 are unit vectors of R^4.  A group is stored as the full list
of its elements, generated by closure from a few generators, so orbit and
averaging computations are plain sums over ``elements``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import null_space, orth

from .errors import DomainError

__all__ = [
    "FiniteGroupAction",
    "OrbitData",
    "orbit",
    "min_orbit_cardinality",
    "fixed_point_candidates",
    "has_fixed_point",
    "average_function",
    "action_summary",
    "sphere_distance",
    "rotation_block",
]

MERGE_TOL = 1e-9
ORTHO_TOL = 1e-12
MAX_ORDER = 5000


def rotation_block(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def sphere_distance(x, y):
    """Geodesic distance on the unit S^3, accurate near 0 and pi."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))


def _all_members(els, cands, tol=MERGE_TOL):
    diff = np.abs(cands[:, None, :, :] - els[None, :, :, :]).max(axis=(2, 3))
    return bool(np.all(diff.min(axis=1) < tol))


def _index_of(mats, g, tol=MERGE_TOL):
    for i, h in enumerate(mats):
        if np.max(np.abs(h - g)) < tol:
            return i
    return -1


@dataclass(frozen=True, eq=False)
class FiniteGroupAction:
    """Finite subgroup of O(4) acting on S^3.

    ``generators`` are indices into ``elements``; the end-permutation and
    topology code needs them to describe the action combinatorially.
    """

    elements: np.ndarray
    label: str = "custom"
    generators: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        els = np.asarray(self.elements, dtype=float)
        if els.ndim != 3 or els.shape[1:] != (4, 4):
            raise DomainError("elements must be an (n, 4, 4) array")
        object.__setattr__(self, "elements", els)
        eye = np.eye(4)
        for g in els:
            if np.max(np.abs(g.T @ g - eye)) > ORTHO_TOL:
                raise DomainError("group element is not orthogonal")
        if _index_of(els, eye) < 0:
            raise DomainError("group does not contain the identity")
        if not _all_members(els, np.transpose(els, (0, 2, 1))):
            raise DomainError("group is not closed under inverses")
        for g in els:
            if not _all_members(els, g @ els):
                raise DomainError("group is not closed under multiplication")

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_generators(cls, gens: Sequence, label="custom", params=None):
        gens = [np.asarray(g, dtype=float) for g in gens]
        eye = np.eye(4)
        for g in gens:
            if g.shape != (4, 4) or np.max(np.abs(g.T @ g - eye)) > ORTHO_TOL:
                raise DomainError("generators must be orthogonal 4x4 matrices")
        elements = [eye]
        frontier = [eye]
        while frontier:
            new = []
            for h in frontier:
                for g in gens:
                    prod = g @ h
                    if _index_of(elements, prod) < 0:
                        elements.append(prod)
                        new.append(prod)
                        if len(elements) > MAX_ORDER:
                            raise DomainError("generated group exceeds the finite-order cap")
            frontier = new
        # re-orthogonalise accumulated products
        cleaned = []
        for g in elements:
            u, _, vt = np.linalg.svd(g)
            cleaned.append(u @ vt)
        gen_idx = tuple(_index_of(cleaned, g) for g in gens)
        return cls(np.array(cleaned), label=label, generators=gen_idx, params=dict(params or {}))

    @classmethod
    def trivial(cls):
        return cls.from_generators([np.eye(4)], label="trivial")

    @classmethod
    def antipodal(cls):
        return cls.from_generators([-np.eye(4)], label="antipodal")

    @classmethod
    def lens(cls, p: int, q: int = 1):
        """``(z1, z2) -> (zeta z1, zeta^q z2)`` with ``zeta = exp(2 pi i / p)``."""
        if p < 1 or math.gcd(p, q) != 1:
            raise DomainError("lens action needs p >= 1 and gcd(p, q) = 1")
        g = np.zeros((4, 4))
        g[:2, :2] = rotation_block(2 * math.pi / p)
        g[2:, 2:] = rotation_block(2 * math.pi * q / p)
        return cls.from_generators([g], label="lens", params={"p": p, "q": q})

    @classmethod
    def rotation_pi(cls):
        """Rotation by pi in the (x1, x2)-plane; fixes the great circle x1 = x2 = 0."""
        g = np.eye(4)
        g[:2, :2] = rotation_block(math.pi)
        return cls.from_generators([g], label="rotation-pi")

    @property
    def order(self) -> int:
        return len(self.elements)

    def generator_matrices(self):
        return [self.elements[i] for i in self.generators]

    def conjugated(self, q: np.ndarray) -> "FiniteGroupAction":
        q = np.asarray(q, dtype=float)
        return FiniteGroupAction(
            np.array([q @ g @ q.T for g in self.elements]),
            label=self.label,
            generators=self.generators,
            params=self.params,
        )

    def combined_with(self, other: "FiniteGroupAction", label=None) -> "FiniteGroupAction":
        """Group generated by both actions (e.g. a lifted action plus deck transformations)."""
        gens = self.generator_matrices() + other.generator_matrices()
        return FiniteGroupAction.from_generators(gens, label=label or f"{self.label}+{other.label}")


@dataclass(frozen=True, eq=False)
class OrbitData:
    base_point: np.ndarray
    orbit_points: np.ndarray
    isotropy_order: int
    # element_to_point[i] is the orbit index of elements[i] @ base_point
    element_to_point: tuple = ()

    @property
    def cardinality(self) -> int:
        return len(self.orbit_points)


def _unit(p):
    p = np.asarray(p, dtype=float)
    if p.shape != (4,):
        raise DomainError("points of S^3 are 4-vectors")
    if abs(np.linalg.norm(p) - 1.0) > 1e-9:
        raise DomainError("point is not on the unit sphere")
    return p


def orbit(action: FiniteGroupAction, p) -> OrbitData:
    p = _unit(p)
    pts: list = []
    assign = []
    for g in action.elements:
        x = g @ p
        idx = -1
        for j, y in enumerate(pts):
            if np.max(np.abs(x - y)) < MERGE_TOL:
                idx = j
                break
        if idx < 0:
            pts.append(x)
            idx = len(pts) - 1
        assign.append(idx)
    card = len(pts)
    if action.order % card:
        raise DomainError("orbit-stabilizer mismatch; merge tolerance too coarse")
    return OrbitData(p, np.array(pts), action.order // card, tuple(assign))


def _fixed_subspaces(action: FiniteGroupAction):
    """All non-zero intersections of +1-eigenspaces of group elements."""
    eye = np.eye(4)
    spaces = []

    def add(basis):
        if basis.shape[1] == 0:
            return
        for s in spaces:
            if s.shape[1] == basis.shape[1] and np.allclose(s @ s.T, basis @ basis.T, atol=1e-9):
                return
        spaces.append(basis)

    for g in action.elements:
        if np.max(np.abs(g - eye)) < MERGE_TOL:
            continue
        add(null_space(g - eye, rcond=1e-9))
    changed = True
    while changed:
        changed = False
        for a, b in itertools.combinations(list(spaces), 2):
            # intersection of span(a) and span(b)
            m = np.hstack([a, -b])
            ns = null_space(m, rcond=1e-9)
            if ns.shape[1] == 0:
                continue
            inter = orth(a @ ns[: a.shape[1]])
            before = len(spaces)
            add(inter)
            changed = changed or len(spaces) > before
    return spaces


def fixed_point_candidates(action: FiniteGroupAction, rng=None) -> list:
    """Unit vectors whose stabilizers realise every possible isotropy group.

    A generic vector of each intersection of fixed subspaces has the largest
    stabilizer available there; together with one generic point of S^3 this
    covers every orbit type of a finite linear action.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    for basis in _fixed_subspaces(action):
        v = basis @ rng.normal(size=basis.shape[1])
        out.append(v / np.linalg.norm(v))
    g = rng.normal(size=4)
    out.append(g / np.linalg.norm(g))
    return out


def min_orbit_cardinality(action: FiniteGroupAction, samples: Optional[Sequence] = None) -> int:
    pts = list(fixed_point_candidates(action))
    if samples is not None:
        pts.extend(np.asarray(s, dtype=float) / np.linalg.norm(s) for s in samples)
    return min(orbit(action, p).cardinality for p in pts)


def has_fixed_point(action: FiniteGroupAction) -> bool:
    return min_orbit_cardinality(action) == 1


def action_summary(action: FiniteGroupAction, is_sphere_manifold: bool = True) -> dict:
    card = min_orbit_cardinality(action)
    return {"min_card": card, "has_fixed_point": card == 1, "is_sphere_manifold": bool(is_sphere_manifold)}


def average_function(action: FiniteGroupAction, f: Callable, isotropy_order: int) -> Callable:
    """``x -> (1/|G_p|) sum_g f(g x)``; with uniform measure this is the averaged Green's recipe."""
    if isotropy_order <= 0:
        raise DomainError("isotropy order must be positive")
    if action.order % isotropy_order:
        raise DomainError("isotropy order must divide the group order")
    els = action.elements

    def averaged(x):
        x = np.asarray(x, dtype=float)
        total = 0.0
        for g in els:
            total = total + np.asarray(f(x @ g.T))
        return total / isotropy_order

    return averaged

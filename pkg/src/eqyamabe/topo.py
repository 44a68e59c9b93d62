"""Graph encodings of sphere systems and checks of the topological hypotheses.

Regions are vertices and embedded surfaces are edges of a multigraph; a
surface inside a single region that does not cut it is a self-loop.  A group
acts by permuting both.  Embedded spheres in a union are disjoint, so the
components of a union are its spheres and G-connectedness is transitivity
of the action on them.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, SizeError

__all__ = [
    "Surface",
    "TopologyScenario",
    "AssumptionReport",
    "Verdict",
    "is_separating",
    "bridges",
    "g_connected",
    "sphere_orbits",
    "check_assumptions",
    "lemma_outermost_verdict",
    "alpha_two_region_max",
    "random_free_scenario",
    "relabeled",
    "scenario_from_blowup",
    "MAX_ALPHA_EDGES",
]

MAX_ALPHA_EDGES = 20


@dataclass(frozen=True)
class Surface:
    a: str
    b: str
    genus: int = 0
    horizon: bool = False

    @property
    def is_loop(self) -> bool:
        return self.a == self.b


@dataclass(frozen=True, eq=False)
class TopologyScenario:
    """Regions, surfaces and a permutation action of the group generators.

    ``generators`` holds one ``(region_map, surface_map)`` pair per generator;
    unlisted labels are fixed.  ``q_factor`` optionally encodes the summand
    ``Q`` for the alpha check.
    """

    regions: Tuple[str, ...]
    surfaces: Dict[str, Surface]
    exterior: Tuple[str, ...] = ()
    generators: Tuple[Tuple[Dict[str, str], Dict[str, str]], ...] = ()
    name: str = "scenario"
    q_factor: Optional["TopologyScenario"] = None

    def __post_init__(self):
        regs = set(self.regions)
        if len(regs) != len(self.regions):
            raise DomainError("duplicate region labels")
        for sid, s in self.surfaces.items():
            if s.a not in regs or s.b not in regs:
                raise DomainError(f"surface {sid!r} joins unknown regions")
            if s.genus < 0:
                raise DomainError(f"surface {sid!r} has negative genus")
        for e in self.exterior:
            if e not in regs:
                raise DomainError(f"unknown exterior region {e!r}")
        if not self._connected(set(self.surfaces)):
            raise DomainError("incidence multigraph is not connected")
        trivial = len(self.regions) == 1 and not self.surfaces
        if not trivial:
            for e in self.exterior:
                if not any(e in (s.a, s.b) for s in self.surfaces.values()):
                    raise DomainError(f"end region {e!r} has no incident surface")
        for k, (rmap, smap) in enumerate(self.generators):
            rp = self._full_map(rmap, self.regions, f"generator {k} regions")
            sp = self._full_map(smap, tuple(self.surfaces), f"generator {k} surfaces")
            for sid, s in self.surfaces.items():
                t = self.surfaces[sp[sid]]
                if {rp[s.a], rp[s.b]} != {t.a, t.b} or t.genus != s.genus:
                    raise DomainError(f"generator {k} does not respect the incidence of {sid!r}")
            if {rp[e] for e in self.exterior} != set(self.exterior):
                raise DomainError(f"generator {k} does not preserve the ends")

    @staticmethod
    def _full_map(m, labels, what):
        full = {x: x for x in labels}
        for k, v in m.items():
            if k not in full or v not in full:
                raise DomainError(f"{what}: unknown label in permutation")
            full[k] = v
        if sorted(full.values()) != sorted(labels):
            raise DomainError(f"{what}: not a permutation")
        return full

    def region_perm(self, k):
        return self._full_map(self.generators[k][0], self.regions, "regions")

    def surface_perm(self, k):
        return self._full_map(self.generators[k][1], tuple(self.surfaces), "surfaces")

    def _connected(self, edges: Iterable[str]) -> bool:
        return len(self.components(edges)) <= 1

    def components(self, edges: Iterable[str]) -> List[set]:
        """Connected components of the regions using only ``edges``."""
        parent = {r: r for r in self.regions}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for sid in edges:
            s = self.surfaces[sid]
            ra, rb = find(s.a), find(s.b)
            if ra != rb:
                parent[ra] = rb
        comps: Dict[str, set] = {}
        for r in self.regions:
            comps.setdefault(find(r), set()).add(r)
        return list(comps.values())

    @property
    def k0(self) -> int:
        return len(self.exterior)

    @property
    def horizon_surfaces(self) -> List[str]:
        return [sid for sid, s in self.surfaces.items() if s.horizon]

    def has_nonseparating_sphere(self) -> bool:
        return any(s.genus == 0 and not is_separating(self, sid) for sid, s in self.surfaces.items())

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "regions": list(self.regions),
            "exterior": list(self.exterior),
            "surfaces": {
                sid: {"between": [s.a, s.b], "genus": s.genus, "horizon": s.horizon}
                for sid, s in self.surfaces.items()
            },
            "generators": [{"regions": dict(r), "surfaces": dict(s)} for r, s in self.generators],
        }
        if self.q_factor is not None:
            out["q_factor"] = self.q_factor.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TopologyScenario":
        surfaces = {}
        for sid, s in d.get("surfaces", {}).items():
            a, b = s["between"]
            surfaces[str(sid)] = Surface(str(a), str(b), int(s.get("genus", 0)), bool(s.get("horizon", False)))
        gens = tuple(
            ({str(k): str(v) for k, v in (g.get("regions") or {}).items()}, {str(k): str(v) for k, v in (g.get("surfaces") or {}).items()})
            for g in d.get("generators", [])
        )
        q = d.get("q_factor")
        return cls(
            regions=tuple(str(r) for r in d["regions"]),
            surfaces=surfaces,
            exterior=tuple(str(e) for e in d.get("exterior", [])),
            generators=gens,
            name=str(d.get("name", "scenario")),
            q_factor=None if q is None else cls.from_dict(q),
        )


def is_separating(scenario: TopologyScenario, sphere: str) -> bool:
    """Deleting the edge disconnects its two sides (never true for a self-loop)."""
    if sphere not in scenario.surfaces:
        raise KeyError(f"unknown surface {sphere!r}")
    s = scenario.surfaces[sphere]
    if s.is_loop:
        return False
    rest = [k for k in scenario.surfaces if k != sphere]
    for comp in scenario.components(rest):
        if s.a in comp:
            return s.b not in comp
    return True


def bridges(scenario: TopologyScenario) -> set:
    """Bridge edges by Tarjan's low-link algorithm (iterative)."""
    adj: Dict[str, List[Tuple[str, str]]] = {r: [] for r in scenario.regions}
    for sid, s in scenario.surfaces.items():
        if s.is_loop:
            continue
        adj[s.a].append((s.b, sid))
        adj[s.b].append((s.a, sid))
    disc: Dict[str, int] = {}
    low: Dict[str, int] = {}
    out = set()
    counter = 0
    for root in scenario.regions:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, None, iter(adj[root]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, eid in it:
                if eid == via:
                    continue
                if w in disc:
                    low[v] = min(low[v], disc[w])
                else:
                    disc[w] = low[w] = counter
                    counter += 1
                    stack.append((w, eid, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        out.add(via)
    return out


def sphere_orbits(scenario: TopologyScenario, spheres: Iterable[str]) -> List[List[str]]:
    """Orbits of the generated group on ``spheres`` (assumed invariant)."""
    spheres = list(spheres)
    perms = [scenario.surface_perm(k) for k in range(len(scenario.generators))]
    seen = set()
    orbits = []
    for s in spheres:
        if s in seen:
            continue
        orb = {s}
        frontier = [s]
        while frontier:
            x = frontier.pop()
            for p in perms:
                y = p[x]
                if y not in orb:
                    orb.add(y)
                    frontier.append(y)
        seen |= orb
        orbits.append(sorted(orb))
    return orbits


def g_connected(scenario: TopologyScenario, sphere_set: Iterable[str]) -> bool:
    """The group permutes the (disjoint) spheres of the set transitively."""
    sset = set(sphere_set)
    for sid in sset:
        if sid not in scenario.surfaces:
            raise KeyError(f"unknown surface {sid!r}")
    for k in range(len(scenario.generators)):
        p = scenario.surface_perm(k)
        if {p[s] for s in sset} != sset:
            raise DomainError("sphere set is not invariant under the group")
    if not sset:
        return False
    return len(sphere_orbits(scenario, sset)) == 1


@dataclass(frozen=True)
class Verdict:
    passed: Optional[bool]
    witness: object = None
    detail: str = ""

    def to_dict(self):
        return {"passed": self.passed, "witness": self.witness, "detail": self.detail}


@dataclass(frozen=True)
class AssumptionReport:
    """Verdicts for assumptions (i)-(iv); ``passed is None`` means not checked."""

    verdicts: Dict[str, Verdict] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(v.passed is not False for v in self.verdicts.values())

    def failures(self) -> List[str]:
        return [k for k, v in self.verdicts.items() if v.passed is False]

    def to_dict(self):
        return {k: v.to_dict() for k, v in self.verdicts.items()} | {"all_passed": self.all_passed}


def check_assumptions(scenario: TopologyScenario, action_summary: dict) -> AssumptionReport:
    """Evaluate (i), (iii), (iv) and, when a ``Q`` factor is encoded, (ii)."""
    min_card = action_summary.get("min_card")
    fixed = bool(action_summary.get("has_fixed_point", min_card == 1))
    sphere_mfd = bool(action_summary.get("is_sphere_manifold", False))
    v: Dict[str, Verdict] = {}

    finite = min_card is not None and np.isfinite(min_card)
    v["i"] = Verdict(bool(finite), None if finite else "no finite orbit", f"min orbit cardinality {min_card}")

    if scenario.q_factor is None:
        v["ii"] = Verdict(None, None, "not checked")
    else:
        a = alpha_two_region_max(scenario.q_factor)
        v["ii"] = Verdict(a == 2, None if a == 2 else {"alpha": a}, f"alpha(Q) = {a}")

    if sphere_mfd:
        ok = finite and min_card >= 2
        v["iii"] = Verdict(bool(ok), None if ok else "fixed point", "sphere manifold requires a free orbit")
    else:
        v["iii"] = Verdict(True, None, "not a sphere manifold")

    nonsep = [sid for sid, s in scenario.surfaces.items() if s.genus == 0 and not is_separating(scenario, sid)]
    if not nonsep:
        v["iv"] = Verdict(True, None, "no non-separating sphere")
    elif not (finite and min_card >= 2) or fixed:
        v["iv"] = Verdict(False, "fixed point", "non-separating sphere present but the action has a fixed point")
    else:
        bad = [o for o in sphere_orbits(scenario, nonsep) if len(o) > 1]
        if bad:
            v["iv"] = Verdict(False, bad[0], f"G-connected union of {len(bad[0])} non-separating spheres is disconnected")
        else:
            v["iv"] = Verdict(True, None, "every G-connected union of non-separating spheres is one sphere")
    return AssumptionReport(v)


def lemma_outermost_verdict(scenario: TopologyScenario, report: Optional[AssumptionReport] = None) -> dict:
    """Group horizon spheres into G-orbits and check the outermost-sphere conclusion.

    The single invariant sphere shared by two swapped ends counts as one
    sphere but two boundary copies; both counts are returned.
    """
    horizon = scenario.horizon_surfaces
    orbits = sphere_orbits(scenario, horizon)
    J = len(orbits)
    L = [len(o) for o in orbits]
    k0 = scenario.k0
    out = {"J": J, "L": L, "k0": k0, "boundary_copies": None, "degenerate": False, "pass": False, "clause": None, "witness": None}
    if report is not None and not report.all_passed:
        out["clause"] = "assumptions " + ",".join(report.failures()) + " failed"
        out["witness"] = report.verdicts[report.failures()[0]].witness
        return out
    if not horizon:
        out["clause"] = "no horizon"
        out["pass"] = True
        return out
    nonsep = [s for s in horizon if not is_separating(scenario, s)]
    if nonsep:
        out["clause"] = "horizon sphere not separating"
        out["witness"] = nonsep
        return out
    ext = set(scenario.exterior)
    copies = sum((scenario.surfaces[s].a in ext) + (scenario.surfaces[s].b in ext) for s in horizon)
    out["boundary_copies"] = copies
    if J != 1:
        out["clause"] = f"{J} G-connected horizon unions"
        out["witness"] = orbits
        return out
    if L[0] == k0:
        out["pass"] = True
        return out
    s = scenario.surfaces[horizon[0]]
    if L[0] == 1 and k0 == 2 and {s.a, s.b} == ext:
        out["degenerate"] = True
        out["pass"] = copies == k0
        if not out["pass"]:
            out["clause"] = "shared sphere does not bound both ends"
        return out
    out["clause"] = f"L1 = {L[0]} differs from k0 = {k0}"
    return out


def alpha_two_region_max(scenario: TopologyScenario) -> Optional[int]:
    """Max Euler characteristic of an edge set whose removal leaves two regions.

    Returns ``None`` when no edge set cuts the graph into exactly two pieces.
    """
    ids = list(scenario.surfaces)
    if len(ids) > MAX_ALPHA_EDGES:
        raise SizeError(f"{len(ids)} surfaces; enumeration limited to {MAX_ALPHA_EDGES}")
    best = None
    for k in range(1, len(ids) + 1):
        for subset in itertools.combinations(ids, k):
            chosen = set(subset)
            rest = [e for e in ids if e not in chosen]
            if len(scenario.components(rest)) != 2:
                continue
            chi = sum(2 - 2 * scenario.surfaces[e].genus for e in subset)
            if best is None or chi > best:
                best = chi
    return best


def random_free_scenario(rng, k0: Optional[int] = None, max_loops: int = 2, max_inner: int = 2) -> TopologyScenario:
    """``Z_k0`` permuting ``k0`` ends, each cut off by one horizon sphere from a core.

    Invariant decorations (fixed self-loops at the core, symmetric inner
    chains behind each horizon) are added at random; horizon unions stay
    separating, so the lemma's conclusion holds.
    """
    k0 = int(rng.integers(1, 7)) if k0 is None else k0
    regions = ["C"]
    surfaces: Dict[str, Surface] = {}
    rmap: Dict[str, str] = {}
    smap: Dict[str, str] = {}
    depth = int(rng.integers(0, max_inner + 1))
    for i in range(k0):
        j = (i + 1) % k0
        regions.append(f"E{i}")
        rmap[f"E{i}"] = f"E{j}"
        prev = "C"
        for d in range(depth):
            # a chain of interior regions between the core and the horizon
            regions.append(f"B{i}_{d}")
            rmap[f"B{i}_{d}"] = f"B{j}_{d}"
            surfaces[f"T{i}_{d}"] = Surface(prev, f"B{i}_{d}", 0, False)
            smap[f"T{i}_{d}"] = f"T{j}_{d}"
            prev = f"B{i}_{d}"
        surfaces[f"S{i}"] = Surface(prev, f"E{i}", 0, True)
        smap[f"S{i}"] = f"S{j}"
    for l in range(int(rng.integers(0, max_loops + 1))):
        surfaces[f"L{l}"] = Surface("C", "C", int(rng.integers(0, 2)), False)
    exterior = tuple(f"E{i}" for i in range(k0))
    gens = ((rmap, smap),) if k0 > 1 else ()
    return TopologyScenario(tuple(regions), surfaces, exterior, gens, name=f"random-free-{k0}")


def relabeled(scenario: TopologyScenario, rng) -> TopologyScenario:
    """Same scenario with regions and surfaces renamed by random bijections."""
    rnames = list(scenario.regions)
    snames = list(scenario.surfaces)
    rnew = {a: f"r{i}" for i, a in enumerate(rng.permutation(rnames))}
    snew = {a: f"s{i}" for i, a in enumerate(rng.permutation(snames))}
    surfaces = {
        snew[sid]: Surface(rnew[s.a], rnew[s.b], s.genus, s.horizon) for sid, s in scenario.surfaces.items()
    }
    gens = tuple(
        ({rnew[k]: rnew[v] for k, v in rm.items()}, {snew[k]: snew[v] for k, v in sm.items()})
        for rm, sm in scenario.generators
    )
    return TopologyScenario(
        tuple(rnew[r] for r in scenario.regions),
        surfaces,
        tuple(rnew[e] for e in scenario.exterior),
        gens,
        name=scenario.name,
        q_factor=scenario.q_factor,
    )


def scenario_from_blowup(model) -> TopologyScenario:
    """Encode the horizon picture of a blow-up of the round sphere.

    Two swapped ends whose horizons coincide give one shared sphere; otherwise
    every end is cut off from a common core by its own horizon sphere.
    """
    k0 = model.k0
    ends = [f"E{i}" for i in range(k0)]
    if all(h is None for h in model.horizon_radii):
        return TopologyScenario(tuple(ends), {}, tuple(ends), (), name="blowup")
    gens = []
    if model.shared_horizon:
        surfaces = {"H": Surface("E0", "E1", 0, True)}
        for perm in model.end_permutation:
            gens.append(({f"E{i}": f"E{perm[i]}" for i in range(k0)}, {}))
        return TopologyScenario(tuple(ends), surfaces, tuple(ends), tuple(gens), name="blowup")
    surfaces = {f"S{i}": Surface("C", f"E{i}", 0, True) for i in range(k0)}
    for perm in model.end_permutation:
        gens.append(({f"E{i}": f"E{perm[i]}" for i in range(k0)}, {f"S{i}": f"S{perm[i]}" for i in range(k0)}))
    return TopologyScenario(tuple(["C"] + ends), surfaces, tuple(ends), tuple(gens), name="blowup")

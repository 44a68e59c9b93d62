"""Pipeline orchestration: topology, blow-up, harmonic scan, monotonicity, Rayleigh."""
from __future__ import annotations

import datetime as _dt
import functools
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .blowup import build_blowup, greens_round
from .errors import EqYamabeError
from .gridsolve import GridSpec, grid_error, solve_harmonic_grid3d
from .groups import action_summary as _action_summary
from .levelset import (
    check_minimal_bound,
    check_monotonicity,
    combine_equivariant,
    minimal_bound,
    scan_levels,
    solve_harmonic_radial,
    write_scan_csv,
)
from .quotient import build_model_profile, rayleigh_model
from .scenarios import ScenarioConfig
from .topo import check_assumptions, lemma_outermost_verdict, scenario_from_blowup

__all__ = ["RunReport", "run", "EXIT_OK", "EXIT_CONFIG", "EXIT_ASSUMPTION", "EXIT_VERDICT", "EXIT_SOLVER"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_VERDICT, EXIT_SOLVER = 0, 1, 2, 3, 4
DECAY_WINDOW = (-1.1, -0.9)
STAGES = ("topology", "blowup", "harmonic", "monotonicity", "rayleigh", "grid")


@functools.lru_cache(maxsize=1)
def _green_profile():
    return greens_round()


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


@dataclass
class RunReport:
    name: str
    stages: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK
    outputs: list = field(default_factory=list)

    def skip(self, stage, reason):
        self.stages[stage] = {"status": "skipped", "reason": reason}

    def to_dict(self, timestamps: bool = True) -> dict:
        d = {
            "scenario": self.name,
            "version": __version__,
            "exit_code": self.exit_code,
            "stages": self.stages,
            "verdicts": self.verdicts,
            "outputs": sorted(self.outputs),
        }
        if timestamps:
            d["timings"] = self.timings
            d["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return _clean(d)

    def dumps(self, timestamps: bool = True) -> str:
        return json.dumps(self.to_dict(timestamps), indent=2, sort_keys=True) + "\n"


class _Stage:
    def __init__(self, report: RunReport, name: str):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, typ, exc, tb):
        self.report.timings[self.name] = round(time.perf_counter() - self.t0, 6)
        if exc is not None and isinstance(exc, EqYamabeError):
            self.report.stages[self.name] = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
            self.report.exit_code = EXIT_SOLVER
            log.error("stage %s failed: %s", self.name, exc)
            return True
        return False


def _topology(cfg: ScenarioConfig, report: RunReport, blow) -> Optional[bool]:
    if cfg.topology is None:
        report.skip("topology", "no topology scenario")
        return None
    if cfg.topology == "auto":
        if blow is None:
            report.skip("topology", "blow-up unavailable")
            return None
        if cfg.model.get("space", "sphere") != "sphere":
            report.skip("topology", "horizon of a quotient model is not encoded as a sphere system")
            return None
        scen = scenario_from_blowup(blow)
    else:
        scen = cfg.topology_scenario()
    if cfg.action_summary is not None:
        summ = dict(cfg.action_summary)
        summ.setdefault("has_fixed_point", summ["min_card"] == 1)
        summ.setdefault("is_sphere_manifold", False)
    else:
        summ = _action_summary(cfg.group_action(), is_sphere_manifold=cfg.model.get("space", "sphere") == "sphere")
    with _Stage(report, "topology"):
        rep = check_assumptions(scen, summ)
        lemma = lemma_outermost_verdict(scen, rep)
        k = sum(1 for s in scen.horizon_surfaces)
        report.stages["topology"] = {
            "status": "ok" if rep.all_passed and lemma["pass"] else "failed",
            "scenario": scen.to_dict(),
            "action_summary": summ,
            "assumptions": rep.to_dict(),
            "lemma": lemma,
            "horizon_sphere_count": k,
        }
        report.verdicts["assumptions"] = rep.all_passed
        if rep.all_passed:
            report.verdicts["lemma_outermost"] = bool(lemma["pass"])
        return rep.all_passed
    return None


def _write_csv(scan, out_dir, label, report):
    if out_dir is None:
        return
    path = Path(out_dir) / f"scan_{label}.csv"
    write_scan_csv(scan, path)
    report.outputs.append(path.name)


def run(cfg: ScenarioConfig, out_dir=None, timestamps: bool = True, mode: str = "run") -> RunReport:
    """Execute the scenario; ``mode`` is ``run``, ``scan`` or ``topology``."""
    report = RunReport(cfg.name)
    sv = cfg.solver
    rng = np.random.default_rng(cfg.seed)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)

    # blow-up first when the topology picture is derived from it
    blow = None
    if cfg.is_closed and (mode != "topology" or cfg.topology == "auto"):
        with _Stage(report, "blowup"):
            blow = build_blowup(
                cfg.closed_model(),
                cfg.group_action(),
                r_max=sv["r_max"],
                n_theta=sv["n_theta"],
                rng=rng,
                profile=_green_profile(),
            )
            summ = blow.summary()
            ok = all(DECAY_WINDOW[0] <= d["exponent"] <= DECAY_WINDOW[1] for d in summ["decay"])
            report.stages["blowup"] = {"status": "ok" if ok else "failed", **summ}
            report.verdicts["af_decay"] = ok
    else:
        report.skip("blowup", "no closed model" if not cfg.is_closed else "topology-only run")

    if mode == "scan":
        report.skip("topology", "scan mode")
        assumptions_ok = None
    else:
        assumptions_ok = _topology(cfg, report, blow)
    if assumptions_ok is False:
        verdicts = report.stages["topology"]["assumptions"]
        failed = ",".join(k for k, v in verdicts.items() if isinstance(v, dict) and v.get("passed") is False)
        for st in ("harmonic", "monotonicity", "rayleigh", "grid"):
            report.skip(st, f"assumption ({failed}) failed")
        return _finish(report, out_dir, timestamps)

    ends = None
    if cfg.is_radial:
        with _Stage(report, "harmonic"):
            ends = [cfg.radial_end()]
    elif blow is not None:
        ends = list(blow.ends)
    if mode == "topology" or ends is None:
        reason = "topology-only run" if mode == "topology" else ("no numerical model" if cfg.model is None else "blow-up unavailable")
        for st in ("harmonic", "monotonicity", "rayleigh", "grid"):
            if st not in report.stages:
                report.skip(st, reason)
        return _finish(report, out_dir, timestamps)

    t = np.linspace(0.0, sv["t_max"], sv["levels"])
    sols = scans = G = None
    with _Stage(report, "harmonic"):
        sols = [solve_harmonic_radial(e) for e in ends]
        scans = [scan_levels(s, t) for s in sols]
        for i, s in enumerate(scans):
            s_label = f"end{i}"
            _write_csv(s, out_dir, s_label, report)
        G = combine_equivariant(scans) if len(scans) > 1 else scans[0]
        _write_csv(G, out_dir, "G", report)
        dev = max([s.flux_deviation() for s in scans] + [G.flux_deviation()])
        st = {
            "status": "ok",
            "provenance": sorted({s.provenance for s in sols}),
            "boundary_radius": [s.r_b for s in sols],
            "C0": [s.C0 for s in sols],
            "C0_G": G.C0,
            "W0": G.W0,
            "levels": int(G.t.size),
            "t_max": G.t_max,
            "flux_deviation": dev,
            "boundary_minimal": G.boundary_minimal,
            "warnings": list(G.warnings),
        }
        if G.boundary_minimal:
            st["minimal_equality_error"] = float(np.max(np.abs(G.W - minimal_bound(G.t, G.card))))
        flux_ok = dev < sv["flux_tol"]
        st["status"] = "ok" if flux_ok else "failed"
        report.stages["harmonic"] = st
        report.verdicts["flux_constancy"] = flux_ok
    if G is None:
        for st in ("monotonicity", "rayleigh", "grid"):
            report.skip(st, "harmonic stage failed")
        return _finish(report, out_dir, timestamps)

    if mode == "scan":
        for st in ("monotonicity", "rayleigh", "grid"):
            report.skip(st, "scan mode")
        return _finish(report, out_dir, timestamps)

    with _Stage(report, "monotonicity"):
        per_end = [check_monotonicity(s, tol=sv["tol"]).to_dict() for s in scans]
        st = {"per_end": per_end}
        ok = all(p["passed"] for p in per_end)
        if G.boundary_minimal:
            mb = check_minimal_bound(G, tol=sv["tol"]).to_dict()
            st["minimal_bound"] = mb
            ok = ok and mb["passed"]
        else:
            st["minimal_bound"] = {"status": "skipped", "reason": "boundary is not minimal"}
        st["status"] = "ok" if ok else "failed"
        report.stages["monotonicity"] = st
        report.verdicts["monotonicity"] = ok

    if blow is None:
        report.skip("rayleigh", "no closed model")
    else:
        with _Stage(report, "rayleigh"):
            f = build_model_profile(float(blow.masses[0]), t_max=sv["profile_t_max"], dt=sv["profile_dt"])
            fine = combine_equivariant([scan_levels(s, f.t) for s in sols]) if len(sols) > 1 else scan_levels(sols[0], f.t)
            rr = rayleigh_model(f, fine, flux_tol=sv["flux_tol"])
            report.stages["rayleigh"] = {
                "status": "ok" if rr.verdict else "failed",
                "profile": {"mass": f.mass, "t_max": f.T, "dt": sv["profile_dt"], "tail_rate": f.tail_rate, "restoration_residual": f.restoration_residual},
                **rr.to_dict(),
            }
            report.verdicts["rayleigh_bound"] = rr.verdict

    if not sv["grid"]:
        report.skip("grid", "grid cross-check disabled")
    else:
        with _Stage(report, "grid"):
            ref = sols[0]
            gs = solve_harmonic_grid3d(ref.end, GridSpec(n=int(sv["grid"]), outer_radius=sv["grid_outer_radius"]), boundary=ref.r_b)
            g = gs.grid
            report.stages["grid"] = {
                "status": "ok",
                "n": g.spec.n,
                "outer_radius": g.spec.outer_radius,
                "h": g.h,
                "iterations": g.iterations,
                "backend": g.backend,
                "sup_error": grid_error(gs, ref),
                "C0_grid": gs.C0,
                "C0_radial": ref.C0,
            }
            report.timings["grid_solve"] = round(g.seconds, 6)
    return _finish(report, out_dir, timestamps)


def _finish(report: RunReport, out_dir, timestamps) -> RunReport:
    for st in STAGES:
        report.stages.setdefault(st, {"status": "skipped", "reason": "not applicable"})
    if report.exit_code == EXIT_OK:
        if report.verdicts.get("assumptions") is False:
            report.exit_code = EXIT_ASSUMPTION
        elif not all(report.verdicts.values()):
            report.exit_code = EXIT_VERDICT
    if out_dir is not None:
        path = Path(out_dir) / "report.json"
        report.outputs.append(path.name)
        path.write_text(report.dumps(timestamps))
    return report

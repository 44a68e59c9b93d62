"""Numerical and combinatorial checks of equivariant Yamabe upper bounds in model geometries."""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .geom import ClosedModelMetric, ConformalTestFunction, RadialMetric, einstein_hilbert_energy, yamabe_quotient
from .groups import FiniteGroupAction, action_summary, min_orbit_cardinality, orbit
from .blowup import build_blowup, greens_round
from .levelset import scan_levels, solve_harmonic_radial
from .quotient import SIGMA_2, SIGMA_S3, build_model_profile, rayleigh_model
from .topo import TopologyScenario, check_assumptions, lemma_outermost_verdict

__all__ = [
    "ClosedModelMetric",
    "ConformalTestFunction",
    "RadialMetric",
    "einstein_hilbert_energy",
    "yamabe_quotient",
    "FiniteGroupAction",
    "action_summary",
    "min_orbit_cardinality",
    "orbit",
    "build_blowup",
    "greens_round",
    "scan_levels",
    "solve_harmonic_radial",
    "SIGMA_2",
    "SIGMA_S3",
    "build_model_profile",
    "rayleigh_model",
    "TopologyScenario",
    "check_assumptions",
    "lemma_outermost_verdict",
]

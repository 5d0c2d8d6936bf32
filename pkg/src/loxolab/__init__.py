"""Counting, Markov chains and isometric actions for combed hyperbolic groups."""

__version__ = "0.1.0"

from .automaton import (CombingAutomaton, builtin_automaton, load_automaton,
                        scc_report, sphere_count)
from .spectral import spectral_data
from .markov import build_chain, n_step_prob, ps_cone_measure, sample_path
from .actions import (BassSerreTree, CayleyTree, HyperbolicPlane, QuotientCayley,
                      ShadowSpec, action_from_config, builtin_action)

__all__ = [
    "CombingAutomaton", "builtin_automaton", "load_automaton", "scc_report",
    "sphere_count", "spectral_data", "build_chain", "n_step_prob",
    "ps_cone_measure", "sample_path", "BassSerreTree", "CayleyTree",
    "HyperbolicPlane", "QuotientCayley", "ShadowSpec", "action_from_config",
    "builtin_action",
]

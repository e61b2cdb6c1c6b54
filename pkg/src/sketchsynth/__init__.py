"""Counterexample-guided synthesis of probabilistic program sketches."""
from .cex import Conflict, CommandCE, critical_set_liveness, critical_set_safety, generate_conflict, program_ce
from .checker import bounded_cum_reward, bounded_reach_prob, check, expected_reach_reward, reach_prob
from .family import Family, enumerate_family, exact_reach_prob, family_instantiate, parse_family
from .lang import (Program, Property, Sketch, instantiate, parse_goal, parse_program,
                   parse_properties, parse_property, parse_sketch, realization_cost, realizations)
from .mc import MarkovChain, build_mc, fixdl, no_path_states, restrict, sub_mc
from .synth import (ConstraintStore, SynthConfig, SynthStats, enumerate_baseline, initialise,
                    synthesize_feasible, synthesize_max, synthesize_min, synthesize_optimal, verify)

__version__ = "0.1.0"

__all__ = [
    "Conflict", "CommandCE", "critical_set_liveness", "critical_set_safety", "generate_conflict",
    "program_ce", "bounded_cum_reward", "bounded_reach_prob", "check", "expected_reach_reward",
    "reach_prob", "Family", "enumerate_family", "exact_reach_prob", "family_instantiate",
    "parse_family", "Program", "Property", "Sketch", "instantiate", "parse_goal", "parse_program",
    "parse_properties", "parse_property", "parse_sketch", "realization_cost", "realizations",
    "MarkovChain", "build_mc", "fixdl", "no_path_states", "restrict", "sub_mc", "ConstraintStore",
    "SynthConfig", "SynthStats", "enumerate_baseline", "initialise", "synthesize_feasible",
    "synthesize_max", "synthesize_min", "synthesize_optimal", "verify",
]

"""Checking termination certificates for probabilistic programs.

Programs are control-flow graphs with assignment, nondeterministic and
probabilistic locations; certificates are checked against the seven proof
rules on finite, depth-bounded regions of the state space.
"""
from .certificates import format_certificate, load_certificate, parse_certificate
from .cfg import ProgramGraph, State, format_program, load_program, parse_program
from .corpus import get_example
from .expr import evaluate, parse_expr, pretty
from .rules import Verdict, check
from .semantics import (
    enumerate_region,
    kstep_term_prob_min,
    oracle_term_prob,
    reach_prob,
    shortest_run_bound,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "ProgramGraph",
    "State",
    "Verdict",
    "check",
    "enumerate_region",
    "evaluate",
    "format_certificate",
    "format_program",
    "get_example",
    "kstep_term_prob_min",
    "load_certificate",
    "load_program",
    "oracle_term_prob",
    "parse_certificate",
    "parse_expr",
    "parse_program",
    "pretty",
    "reach_prob",
    "shortest_run_bound",
    "simulate",
]

"""Consensus by small groups on median graphs: exact graph tools, token dynamics,
a strategic bargaining round, and the oracles used to check them."""
from ._backend import NAME as BACKEND
from .dynamics import DYNAMICS, DecisionRule, SelectionRule, init_tokens, run
from .errors import TriadLabError
from .generators import GeneratorSpec, generate, load_spec
from .graph import OpinionGraph, OpinionProfile, build_graph, generalized_median, median_of_three

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DYNAMICS",
    "DecisionRule",
    "GeneratorSpec",
    "OpinionGraph",
    "OpinionProfile",
    "SelectionRule",
    "TriadLabError",
    "build_graph",
    "generalized_median",
    "generate",
    "init_tokens",
    "load_spec",
    "median_of_three",
    "run",
]

"""Degree-k control Lyapunov functions built from iterated Lie brackets.

Symbolic vector fields and brackets (``expr``, ``lie``), degree-h
Hamiltonians (``hamiltonian``), sampled verification of candidates
(``clf``), bracket-approximating control words and the descent loop
(``steering``), KL bounds for synthesized runs (``certify``), and the
``lieclf`` command line (``cli``).
"""
from ._kernels import BACKEND
from .certify import KLFunction, build_kl, check_envelope
from .clf import (Ball, DistanceToBall, GammaFn, MaxOfSmooth, Region, SignedDistance,
                  SmoothExpr, estimate_gamma, verify)
from .config import SystemConfig, load_config, load_fixture, parse_config
from .expr import PiecewiseVectorFieldDef, VectorFieldDef
from .hamiltonian import hamiltonian, hamiltonian_chain_check
from .lie import Leaf, Node, bracket, enumerate_brackets, eval_bracket, eval_bracket_setvalued
from .parser import parse_expr
from .steering import asymptotic_order, execute_word, synthesize, word_for_bracket
from .system import SystemDef

__version__ = "0.1.0"

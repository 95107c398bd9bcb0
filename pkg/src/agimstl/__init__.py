"""Continuous-time STL robustness: traditional min/max and AGIM scores,
plus simulation-based falsification and synthesis."""
from .agim import Eta, QuadratureConfig, Verdict, eta, eta_signal, subformula_signals, verdict_of
from .dynamics import ControlSequence, Model, model_from_config, simulate
from .errors import STLError
from .formula import (And, Eventually, Globally, Not, Or, Predicate, TrueF, Until, horizon, load,
                      parse, subformulae, variables)
from .optimize import OptConfig, OptResult, falsify, synthesize
from .trace import ScoreSignal, Trace, denormalize, normalize, normalize_formula, read_csv, write_csv
from .traditional import rho, rho_exact, rho_signal

__version__ = "0.1.0"

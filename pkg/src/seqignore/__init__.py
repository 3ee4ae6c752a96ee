"""Exact identification checks and strategy evaluation for sequential decisions."""

__version__ = "0.1.0"

from .ci import CIStatement, check_extended_ci, check_statement, check_stochastic_ci, derivable, semigraphoid_close
from .conditions import condition_report
from .diagram import InfluenceDiagram, d_separated, implied_ci, moral_separated
from .dsl import parse_ci, parse_diagram, parse_loss, parse_model, parse_strategy, serialize_model
from .fixtures import fixture, verify_fixture
from .grecursion import OutcomeFunctional, consequence_brute_force, g_recursion, g_transfer
from .model import InformationBase, Joint, Kernel, Regime, RegimeModel, Role, Variable, materialize_joint
from .strategy import Strategy, enumerate_strategies, instantiate_regime, optimize

__all__ = [
    "CIStatement",
    "InfluenceDiagram",
    "InformationBase",
    "Joint",
    "Kernel",
    "OutcomeFunctional",
    "Regime",
    "RegimeModel",
    "Role",
    "Strategy",
    "Variable",
    "check_extended_ci",
    "check_statement",
    "check_stochastic_ci",
    "condition_report",
    "consequence_brute_force",
    "d_separated",
    "derivable",
    "enumerate_strategies",
    "fixture",
    "g_recursion",
    "g_transfer",
    "implied_ci",
    "instantiate_regime",
    "materialize_joint",
    "moral_separated",
    "optimize",
    "parse_ci",
    "parse_diagram",
    "parse_loss",
    "parse_model",
    "parse_strategy",
    "semigraphoid_close",
    "serialize_model",
    "verify_fixture",
]

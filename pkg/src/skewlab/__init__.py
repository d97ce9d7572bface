"""Skew products over SU(2) with circle-flow fibers, and the dichotomy between
bounded periodic derivatives and exponential growth along a recurrent ray."""

from .burnside import BallTable, GrigorchukElement
from .circle_flows import FlowSpec, FlowSystem
from .exponents import ExponentReport, growth_exponent, periodic_exponent
from .recurrence_builder import BuilderConfig, RecurrentSequence
from .rotor import UnitQuaternion
from .skew import SkewGroup, SkewWord

__all__ = [
    "BallTable",
    "BuilderConfig",
    "ExponentReport",
    "FlowSpec",
    "FlowSystem",
    "GrigorchukElement",
    "RecurrentSequence",
    "SkewGroup",
    "SkewWord",
    "UnitQuaternion",
    "growth_exponent",
    "periodic_exponent",
]

__version__ = "0.1.0"

"""Social learning from viral content: simulation, analysis, and design."""

from .params import ModelParams, ParameterError
from .strategy import Strategy, StrategyError, majority_rule, contrarian_mix

__all__ = [
    "ModelParams",
    "ParameterError",
    "Strategy",
    "StrategyError",
    "majority_rule",
    "contrarian_mix",
]

__version__ = "0.1.0"

"""Exponent calculus and Monte Carlo checks for rare cell escapes near heteroclinic networks."""

__version__ = "0.1.0"

from .exponents import ExponentReport, Regime, classify_escape
from .network import EscapeChainSpec, PeriodicNetworkSpec, Saddle, chain

__all__ = ["ExponentReport", "Regime", "classify_escape", "EscapeChainSpec", "PeriodicNetworkSpec",
           "Saddle", "chain", "__version__"]

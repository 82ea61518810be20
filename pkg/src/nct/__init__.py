"""Dimension theory toolkit for planar triangular iterated function systems."""
from .expr import parse, evaluate, deriv
from .ifs import SystemSpec, TriangularMap, load_spec, compose, canonical_projection, derivative_along, validate
from .symbolic import TailedWord, BernoulliWeights

__all__ = [
    "parse", "evaluate", "deriv",
    "SystemSpec", "TriangularMap", "load_spec", "compose", "canonical_projection",
    "derivative_along", "validate", "TailedWord", "BernoulliWeights",
]
__version__ = "0.1.0"

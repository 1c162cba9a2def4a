"""Constrained standardized-sentence generation with multi-valued decision
diagrams: corpus n-gram extraction, exact constraint compilation, exhaustive
enumeration, and perplexity ranking."""

__version__ = "0.1.0"

from .mdd import EPSILON, Mdd, build_sum_mdd, intersect, load_mdd, reduce, save_mdd, validate

__all__ = [
    "EPSILON",
    "Mdd",
    "build_sum_mdd",
    "intersect",
    "load_mdd",
    "reduce",
    "save_mdd",
    "validate",
    "__version__",
]

"""Discriminative semi-supervised learning with deterministic priors and
compiled logical rules."""

from .estimator import DSSLClassifier, DSSLMultiLabelClassifier
from .exceptions import (
    ConfigError,
    DivergenceError,
    DomainError,
    ResourceLimitError,
    UnsatisfiableRulesError,
)
from .relaxations import RelaxationKind, RelaxationSpec

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DSSLClassifier",
    "DSSLMultiLabelClassifier",
    "DivergenceError",
    "DomainError",
    "RelaxationKind",
    "RelaxationSpec",
    "ResourceLimitError",
    "UnsatisfiableRulesError",
]

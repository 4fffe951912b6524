"""Decentralized finite-sum optimization with GT-SAGA (gradient tracking + SAGA).

Submodules: :mod:`topology` (graphs, weights, sigma), :mod:`problems`
(finite-sum objectives), :mod:`algorithm` (the synchronous stepper),
:mod:`analysis` (rate matrix, certificate, Lyapunov metrics) and
:mod:`harness` (configs, experiments, CLI).
"""

from . import algorithm, analysis, problems, topology
from .errors import (
    CertificateFailure,
    ConfigError,
    DivergenceDetected,
    GTSagaError,
    InvalidArgument,
    InvalidState,
    NumericFailure,
)

__version__ = "0.1.0"

__all__ = [
    "algorithm",
    "analysis",
    "problems",
    "topology",
    "GTSagaError",
    "InvalidArgument",
    "InvalidState",
    "NumericFailure",
    "DivergenceDetected",
    "CertificateFailure",
    "ConfigError",
]

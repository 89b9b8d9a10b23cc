"""Multi-parameter Hamiltonian estimation with sequential feedback."""

from .errors import ContractViolation, NumericalFailure, PreconditionError
from .fisher import FisherMatrix, ParamModel, cfi, crb, qfim_pure
from .schemes import SchemeConfig
from .su2 import FieldParams, bell_probabilities, evolve, qfim_max

__version__ = "0.1.0"

__all__ = [
    "ContractViolation",
    "FieldParams",
    "FisherMatrix",
    "NumericalFailure",
    "ParamModel",
    "PreconditionError",
    "SchemeConfig",
    "bell_probabilities",
    "cfi",
    "crb",
    "evolve",
    "qfim_max",
    "qfim_pure",
]

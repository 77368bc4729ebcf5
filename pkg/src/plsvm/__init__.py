"""Sparse partially linear support vector machines.

Scores take the form ``f(z, t) = beta'z + g(t)`` with an L1 penalty on ``beta``
and a squared RKHS-norm penalty on ``g``.
"""
from .errors import InvalidInputError, NumericalFailure, SingularSystemError
from .kernels import KernelSpec, finite_rank, gamma_n, gaussian, nu_n, parse_kernel, poly_decay, q_n
from .model import Dataset, GroundTruth, Model, empirical_risk, mc_population_risk, predict
from .solver import FitConfig, FitReport, fit
from .datagen import GeneratorConfig, generate

__all__ = [
    "InvalidInputError", "NumericalFailure", "SingularSystemError",
    "KernelSpec", "finite_rank", "poly_decay", "gaussian", "parse_kernel", "q_n", "nu_n", "gamma_n",
    "Dataset", "GroundTruth", "Model", "empirical_risk", "mc_population_risk", "predict",
    "FitConfig", "FitReport", "fit", "GeneratorConfig", "generate",
]
__version__ = "0.1.0"

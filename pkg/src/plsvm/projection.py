"""Empirical projection of the linear covariates onto the kernel space.

For each column ``z_j`` of ``Z`` the best approximation by a function of ``T``
in the span of the kernel sections is fitted by kernel ridge regression,
``(G + n * ridge * I) alpha_j = z_j``. The residuals ``Z_T = Z - G A`` carry
the part of ``Z`` not explained by ``T``; the smallest eigenvalue of
``Z_T' Z_T / n`` must stay away from zero for the linear coefficients to be
identifiable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg

from . import kernels
from .errors import InvalidInputError, SingularSystemError
from .kernels import KernelSpec
from .model import Dataset, fmt


@dataclass
class ProjectionReport:
    alpha_matrix: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    lambda_min_residual: float
    lambda_max_Z: float
    ridge: float
    gram: np.ndarray

    @property
    def Z(self) -> np.ndarray:
        return self.residuals + self.fitted

    def normal_equation_residuals(self) -> np.ndarray:
        """``||(G + n ridge I) alpha_j - z_j|| / ||z_j||`` per column (ridge > 0 systems)."""
        n = self.gram.shape[0]
        Z = self.Z
        R = self.gram @ self.alpha_matrix + n * self.ridge * self.alpha_matrix - Z
        return np.linalg.norm(R, axis=0) / np.maximum(np.linalg.norm(Z, axis=0), 1e-300)

    def to_csv(self, path) -> None:
        """One row per column ``j`` and a closing ``summary`` record."""
        neq = self.normal_equation_residuals()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "j", "residual_norm", "fitted_norm", "normal_eq_residual",
                        "lambda_min_residual", "lambda_max_Z", "ridge"])
            for j in range(self.residuals.shape[1]):
                w.writerow(["column", j + 1, fmt(np.linalg.norm(self.residuals[:, j])),
                            fmt(np.linalg.norm(self.fitted[:, j])), fmt(neq[j]), "", "", ""])
            w.writerow(["summary", "", "", "", "", fmt(self.lambda_min_residual),
                        fmt(self.lambda_max_Z), fmt(self.ridge)])


def default_ridge(G: np.ndarray) -> float:
    return 1e-8 * float(np.trace(G)) / G.shape[0]


def _second_moment_extremes(X: np.ndarray) -> Tuple[float, float]:
    w = np.linalg.eigvalsh(X.T @ X / X.shape[0])
    return float(w[0]), float(w[-1])


def project_z_on_t(data: Dataset, spec: KernelSpec, ridge: Optional[float] = None,
                   rtol: float = 1e-12) -> ProjectionReport:
    """Kernel ridge projection of every column of ``Z`` on ``T``.

    ``ridge=None`` uses ``1e-8 * trace(G) / n``. With ``ridge=0`` the
    least-squares projection onto the range of ``G`` is returned (minimum-norm
    coefficients), computed from the eigenpairs above ``rtol * max_eigenvalue``.
    """
    if data.n < 2:
        raise InvalidInputError("projection needs at least two observations")
    G = kernels.gram(spec, data.T)
    n = data.n
    ridge = default_ridge(G) if ridge is None else float(ridge)
    if not ridge >= 0:
        raise InvalidInputError("ridge must be nonnegative")
    Z = data.Z
    if ridge > 0:
        M = G + n * ridge * np.eye(n)
        try:
            cf = linalg.cho_factor(M, lower=True)
        except linalg.LinAlgError:
            raise SingularSystemError(
                "G + n*ridge*I is not positive definite; increase ridge") from None
        A = linalg.cho_solve(cf, Z)
        A += linalg.cho_solve(cf, Z - M @ A)  # one step of iterative refinement
        fitted = G @ A
    else:
        w, U = np.linalg.eigh(G)
        keep = w > rtol * max(w[-1], 0.0)
        if not keep.any():
            raise SingularSystemError("Gram matrix is numerically zero; use ridge > 0")
        Uk, wk = U[:, keep], w[keep]
        C = Uk.T @ Z
        A = Uk @ (C / wk[:, None])
        fitted = Uk @ C
    residuals = Z - fitted
    lmin, _ = _second_moment_extremes(residuals)
    _, lmax = _second_moment_extremes(Z)
    return ProjectionReport(A, residuals, fitted, lmin, lmax, ridge, G)


def eigen_diagnostics(report: ProjectionReport) -> Tuple[float, float]:
    """Smallest eigenvalue of ``Z_T'Z_T/n`` and largest of ``Z'Z/n``."""
    lmin, _ = _second_moment_extremes(report.residuals)
    _, lmax = _second_moment_extremes(report.Z)
    return lmin, lmax


def decomposition_check(beta, g_callable: Callable, data: Dataset, report: ProjectionReport):
    """Empirical ``||b'Z + g||^2`` versus ``||b'Z_T||^2 + ||b'Pi + g||^2``.

    Returns ``(lhs, rhs_part1, rhs_part2, gap)`` with squared norms taken as
    sample means. The gap vanishes when the residuals are orthogonal to the
    fitted span and ``g`` lies in it (exact, unpenalized projections).
    """
    beta = np.asarray(beta, dtype=float).reshape(-1)
    gT = np.asarray(g_callable(data.T), dtype=float).reshape(-1)
    lhs = float(np.mean((data.Z @ beta + gT) ** 2))
    part1 = float(np.mean((report.residuals @ beta) ** 2))
    part2 = float(np.mean((report.fitted @ beta + gT) ** 2))
    return lhs, part1, part2, abs(lhs - part1 - part2)

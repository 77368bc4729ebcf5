"""Kernels on the nonlinear covariate domain and their complexity functionals.

Three kernel families are provided:

* ``finite_rank``: ``K(t, t') = scale * sum_k phi_k(t) phi_k(t')`` over ``m``
  features. The default features are Legendre polynomials rescaled to be
  orthonormal under the uniform measure on ``[0, 1]``, so every Mercer
  eigenvalue equals ``scale``.
* ``poly_decay``: a cosine series ``sum_l scale * l**(-2 alpha) phi_l(t) phi_l(t')``
  truncated at ``n_terms`` terms; ``phi_1 = 1`` and ``phi_l = sqrt(2) cos(pi (l-1) t)``
  are orthonormal on ``[0, 1]``.
* ``gaussian``: ``exp(-|t - t'|^2 / (2 sigma^2))`` on ``R^d``.

The local complexity ``q_n(r) = n**-0.5 * sqrt(sum_l min(r^2, mu_l))``, its
critical radius ``nu_n`` and the mixed rate ``gamma_n`` are computed from a
spectrum model, which is either analytic (finite rank, polynomial decay) or
empirical (Gram eigenvalues divided by ``n``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from numpy.polynomial import legendre
from scipy.special import zeta

from .errors import InvalidInputError

FINITE_RANK = "finite_rank"
POLY_DECAY = "poly_decay"
GAUSSIAN = "gaussian"
FAMILIES = (FINITE_RANK, POLY_DECAY, GAUSSIAN)

# Technical constant in the fixed-point inequality c * nu^2 >= q_n(nu).
FIXED_POINT_CONSTANT = 40.0

_DOMAIN_SLACK = 1e-12


def legendre_features(t, m: int) -> np.ndarray:
    """Orthonormal Legendre features ``sqrt(2k+1) P_k(2t - 1)``, ``k < m``."""
    t = np.asarray(t, dtype=float).reshape(-1)
    V = legendre.legvander(2.0 * t - 1.0, m - 1)
    return V * np.sqrt(2.0 * np.arange(m) + 1.0)


def cosine_features(t, n_terms: int) -> np.ndarray:
    """Orthonormal cosine basis on [0, 1]: 1, sqrt(2) cos(pi t), sqrt(2) cos(2 pi t), ..."""
    t = np.asarray(t, dtype=float).reshape(-1)
    freqs = np.pi * np.arange(n_terms)
    out = np.sqrt(2.0) * np.cos(np.outer(t, freqs))
    out[:, 0] = 1.0
    return out


@dataclass(frozen=True)
class KernelSpec:
    """A positive semidefinite kernel on ``domain_dim``-dimensional points.

    Use :func:`finite_rank`, :func:`poly_decay` or :func:`gaussian` rather than
    the constructor. ``feature_map`` (finite rank only) maps an ``(n, d)``
    array to an ``(n, m)`` feature matrix; when omitted the Legendre basis is
    used, which requires ``domain_dim == 1``.
    """

    family: str
    domain_dim: int = 1
    rank: Optional[int] = None
    alpha: Optional[float] = None
    sigma: Optional[float] = None
    scale: float = 1.0
    n_terms: int = 256
    feature_map: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown kernel family {self.family!r}")
        if int(self.domain_dim) < 1:
            raise InvalidInputError("domain_dim must be a positive integer")
        if not self.scale > 0:
            raise InvalidInputError("kernel scale must be positive")
        if self.family == FINITE_RANK:
            if self.rank is None or int(self.rank) < 1:
                raise InvalidInputError("finite-rank kernel needs rank m >= 1")
            if self.feature_map is None and self.domain_dim != 1:
                raise InvalidInputError(
                    "the default Legendre basis is one-dimensional; pass feature_map")
        elif self.family == POLY_DECAY:
            if self.alpha is None or not self.alpha > 0.5:
                raise InvalidInputError("poly-decay kernel needs alpha > 1/2")
            if self.domain_dim != 1:
                raise InvalidInputError("poly-decay cosine basis is one-dimensional")
            if int(self.n_terms) < 1:
                raise InvalidInputError("n_terms must be positive")
        else:
            if self.sigma is None or not self.sigma > 0:
                raise InvalidInputError("gaussian kernel needs bandwidth sigma > 0")

    @property
    def has_features(self) -> bool:
        return self.family in (FINITE_RANK, POLY_DECAY)

    def params(self) -> dict:
        """Family-specific parameters, as stored in model files."""
        if self.family == FINITE_RANK:
            out = {"rank": int(self.rank), "scale": float(self.scale)}
            if self.feature_map is not None:
                out["feature_map"] = "custom"
            return out
        if self.family == POLY_DECAY:
            return {"alpha": float(self.alpha), "scale": float(self.scale),
                    "n_terms": int(self.n_terms)}
        return {"sigma": float(self.sigma)}


def finite_rank(m: int, scale: float = 1.0, feature_map=None, domain_dim: int = 1) -> KernelSpec:
    return KernelSpec(FINITE_RANK, domain_dim=domain_dim, rank=int(m), scale=scale,
                      feature_map=feature_map)


def poly_decay(alpha: float, scale: float = 1.0, n_terms: int = 256) -> KernelSpec:
    return KernelSpec(POLY_DECAY, alpha=float(alpha), scale=scale, n_terms=int(n_terms))


def gaussian(sigma: float, domain_dim: int = 1) -> KernelSpec:
    return KernelSpec(GAUSSIAN, domain_dim=domain_dim, sigma=float(sigma))


def parse_kernel(text: str) -> KernelSpec:
    """Parse ``"name[:key=value,...]"``, e.g. ``"finite_rank:m=6"`` or ``"gaussian:sigma=0.2"``."""
    name, _, rest = text.strip().partition(":")
    kw = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise InvalidInputError(f"malformed kernel parameter {item!r}")
        kw[key.strip()] = value.strip()
    try:
        if name == FINITE_RANK:
            spec = finite_rank(int(kw.pop("m")), scale=float(kw.pop("scale", 1.0)))
        elif name == POLY_DECAY:
            spec = poly_decay(float(kw.pop("alpha")), scale=float(kw.pop("scale", 1.0)),
                              n_terms=int(kw.pop("n_terms", 256)))
        elif name == GAUSSIAN:
            spec = gaussian(float(kw.pop("sigma", 1.0)), domain_dim=int(kw.pop("d", 1)))
        else:
            raise InvalidInputError(f"unknown kernel family {name!r}")
    except KeyError as exc:
        raise InvalidInputError(f"kernel {name!r} is missing parameter {exc}") from None
    except InvalidInputError:
        raise
    except ValueError as exc:
        raise InvalidInputError(f"bad kernel parameter in {text!r}: {exc}") from None
    if kw:
        raise InvalidInputError(f"unknown kernel parameters {sorted(kw)}")
    return spec


def as_points(spec: KernelSpec, points) -> np.ndarray:
    """Validate and reshape points to ``(n, domain_dim)``."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if spec.domain_dim == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != spec.domain_dim:
        raise InvalidInputError(
            f"points have dimension {X.shape[-1]}, kernel expects {spec.domain_dim}")
    if X.shape[0] == 0:
        raise InvalidInputError("need at least one point")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("points contain NaN or Inf")
    if spec.family != GAUSSIAN and spec.feature_map is None:
        if X.min() < -_DOMAIN_SLACK or X.max() > 1 + _DOMAIN_SLACK:
            raise InvalidInputError("basis kernels are defined on [0, 1]")
    return X


def _poly_weights(spec: KernelSpec) -> np.ndarray:
    ell = np.arange(1, spec.n_terms + 1, dtype=float)
    return spec.scale * ell ** (-2.0 * spec.alpha)


def features(spec: KernelSpec, points) -> np.ndarray:
    """Weighted feature matrix ``F`` with ``gram(spec, X) == F @ F.T``.

    Only defined for kernels with an explicit finite expansion.
    """
    X = as_points(spec, points)
    if spec.family == FINITE_RANK:
        if spec.feature_map is not None:
            Phi = np.asarray(spec.feature_map(X), dtype=float).reshape(X.shape[0], -1)
            if Phi.shape[1] != spec.rank:
                raise InvalidInputError(
                    f"feature_map returned {Phi.shape[1]} features, rank is {spec.rank}")
        else:
            Phi = legendre_features(X[:, 0], spec.rank)
        return math.sqrt(spec.scale) * Phi
    if spec.family == POLY_DECAY:
        return cosine_features(X[:, 0], spec.n_terms) * np.sqrt(_poly_weights(spec))
    raise InvalidInputError("gaussian kernels have no finite feature map")


def gram(spec: KernelSpec, points, others=None) -> np.ndarray:
    """Kernel matrix ``G[i, j] = K(points[i], others[j])`` (``others`` defaults to ``points``)."""
    X = as_points(spec, points)
    Y = X if others is None else as_points(spec, others)
    if spec.has_features:
        FX = features(spec, X)
        G = FX @ (FX if others is None else features(spec, Y)).T
    else:
        sq = (np.sum(X * X, axis=1)[:, None] + np.sum(Y * Y, axis=1)[None, :]
              - 2.0 * X @ Y.T)
        G = np.exp(-np.maximum(sq, 0.0) / (2.0 * spec.sigma ** 2))
    if others is None:
        G = 0.5 * (G + G.T)
    return G


def kappa(spec: KernelSpec) -> float:
    """``max_t K(t, t)``."""
    if spec.family == GAUSSIAN:
        return 1.0
    if spec.family == POLY_DECAY:
        # cosine features all peak at t = 0
        w = _poly_weights(spec)
        return float(w[0] + 2.0 * w[1:].sum())
    if spec.feature_map is None:
        # sum_k (2k + 1) = m^2, attained at t = 1
        return float(spec.scale * spec.rank ** 2)
    axes = [np.linspace(0.0, 1.0, 1001 if spec.domain_dim == 1 else 21)] * spec.domain_dim
    grid = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    F = features(spec, grid)
    return float(np.max(np.sum(F * F, axis=1)))


def gram_factor(spec: KernelSpec, points, rtol: float = 1e-12) -> np.ndarray:
    """A tall factor ``F`` with ``F @ F.T`` equal to the Gram matrix.

    Explicit feature maps are used when available; otherwise the eigenpairs of
    the Gram matrix with eigenvalue above ``rtol * max_eigenvalue`` are kept.
    """
    if spec.has_features:
        return features(spec, points)
    G = gram(spec, points)
    w, U = np.linalg.eigh(G)
    keep = w > rtol * max(w[-1], 0.0)
    return U[:, keep] * np.sqrt(w[keep])


# --------------------------------------------------------------------------
# Spectrum models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticFiniteRank:
    """``m`` eigenvalues equal to ``level``, then zeros."""

    m: int
    level: float = 1.0

    def __post_init__(self):
        if int(self.m) < 1 or not self.level > 0:
            raise InvalidInputError("finite-rank spectrum needs m >= 1 and level > 0")

    def eigenvalues(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        out[:min(k, self.m)] = self.level
        return out

    @property
    def top(self) -> float:
        return float(self.level)

    def min_sum(self, r2: float) -> float:
        return self.m * min(r2, self.level)


@dataclass(frozen=True)
class AnalyticPolyDecay:
    """Eigenvalues ``scale * l**(-2 alpha)`` for ``l = 1, 2, ...``."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0.5 or not self.scale > 0:
            raise InvalidInputError("poly-decay spectrum needs alpha > 1/2 and scale > 0")

    def eigenvalues(self, k: int) -> np.ndarray:
        return self.scale * np.arange(1, k + 1, dtype=float) ** (-2.0 * self.alpha)

    @property
    def top(self) -> float:
        return float(self.scale)

    def min_sum(self, r2: float) -> float:
        # Terms with scale * l^(-2a) >= r2 contribute r2 each; the rest is an
        # exact Hurwitz-zeta tail.
        a2 = 2.0 * self.alpha
        L = math.floor((self.scale / r2) ** (1.0 / a2))
        if L < 2 ** 52:
            while L > 0 and self.scale * float(L) ** (-a2) < r2:
                L -= 1
            while self.scale * float(L + 1) ** (-a2) >= r2:
                L += 1
        return float(L) * r2 + self.scale * float(zeta(a2, float(L) + 1.0))


@dataclass(frozen=True)
class EmpiricalSpectrum:
    """A stored, nonincreasing eigenvalue sequence (truncated to its length)."""

    values: tuple

    def __init__(self, eigenvalues):
        vals = np.sort(np.clip(np.asarray(eigenvalues, dtype=float).reshape(-1), 0.0, None))[::-1]
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("eigenvalues must be finite")
        object.__setattr__(self, "values", tuple(float(v) for v in vals))

    def eigenvalues(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        v = np.asarray(self.values[:k])
        out[:v.size] = v
        return out

    @property
    def top(self) -> float:
        return self.values[0] if self.values else 0.0

    def min_sum(self, r2: float) -> float:
        if not self.values:
            return 0.0
        return float(np.minimum(r2, np.asarray(self.values)).sum())


SpectrumModel = Union[AnalyticFiniteRank, AnalyticPolyDecay, EmpiricalSpectrum]


def empirical_spectrum(G: np.ndarray) -> EmpiricalSpectrum:
    """Eigenvalues of ``G / n``: a plug-in estimate of the population spectrum."""
    G = np.asarray(G, dtype=float)
    return EmpiricalSpectrum(np.linalg.eigvalsh(G) / G.shape[0])


def spectrum_of(spec: KernelSpec, points=None) -> SpectrumModel:
    """Analytic spectrum for basis kernels; empirical (needs ``points``) otherwise.

    The empirical spectrum stands in for the population eigenvalues as a heuristic.
    """
    if spec.family == FINITE_RANK and spec.feature_map is None:
        return AnalyticFiniteRank(spec.rank, spec.scale)
    if spec.family == POLY_DECAY:
        return AnalyticPolyDecay(spec.alpha, spec.scale)
    if points is None:
        raise InvalidInputError(f"{spec.family} kernel needs sample points for its spectrum")
    return empirical_spectrum(gram(spec, points))


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise InvalidInputError("n must be a positive integer")
    return int(n)


def q_n(spectrum: SpectrumModel, n: int, r: float) -> float:
    """Local complexity ``n**-0.5 * sqrt(sum_l min(r^2, mu_l))``."""
    n = _check_n(n)
    if not r > 0:
        raise InvalidInputError("radius r must be positive")
    return math.sqrt(spectrum.min_sum(float(r) * float(r))) / math.sqrt(n)


def nu_n(spectrum: SpectrumModel, n: int, constant: float = FIXED_POINT_CONSTANT,
         rtol: float = 1e-12) -> float:
    """Smallest ``nu > 0`` with ``constant * nu^2 >= q_n(nu)``, by bisection.

    ``q_n(nu) / nu^2`` is nonincreasing, so the feasible set is a half-line and
    the returned value is its left end to relative accuracy ``rtol`` (always on
    the feasible side). Returns 0 for an identically zero spectrum.
    """
    n = _check_n(n)
    if spectrum.top <= 0:
        return 0.0

    def ok(v):
        return constant * v * v >= q_n(spectrum, n, v)

    lo, hi = 1e-12, max(1.0, math.sqrt(spectrum.top))
    while not ok(hi):
        lo, hi = hi, 2.0 * hi
    if ok(lo):
        return lo
    while hi - lo > rtol * hi:
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def gamma_n(spectrum: SpectrumModel, n: int, p=None, *, log_p: Optional[float] = None,
            constant: float = FIXED_POINT_CONSTANT) -> float:
    """``max(nu_n, sqrt(log p / n))``. Pass ``log_p`` directly for astronomically large ``p``."""
    n = _check_n(n)
    if log_p is None:
        if p is None or p < 2:
            raise InvalidInputError("p must be at least 2")
        log_p = math.log(p)
    elif not log_p > 0:
        raise InvalidInputError("log p must be positive")
    return max(nu_n(spectrum, n, constant), math.sqrt(log_p / n))

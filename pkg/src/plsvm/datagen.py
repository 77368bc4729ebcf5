"""Synthetic partially linear classification data.

``T`` is uniform on ``[0, 1]^d``. Column ``j`` of ``Z`` mixes the link
``h_j(t) = c0 cos(2 pi j t_1)`` with independent uniform noise:
``clip(rho h_j(T) + sqrt(1 - rho^2) U_j, -c0, c0)``, so ``|Z_ij| <= c0`` always
and ``rho`` controls how much of ``Z`` is explained by ``T``. The truth is
``f* = beta*'z + g*(t)`` with ``beta*`` supported on the first ``s`` indices
(alternating signs). With ``margin > 0`` draws with ``|f*| < margin`` are
rejected, which keeps the label-generating score bounded away from zero.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterator, Tuple

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import InvalidInputError
from .model import Dataset, GroundTruth

NOISE_MODELS = ("deterministic", "logistic", "flip")
G_STAR_KINDS = ("sine", "legendre", "zero")
BETA_SCALINGS = ("entry", "l2")


class DegenerateDatasetWarning(UserWarning):
    """All generated labels are identical."""


@dataclass(frozen=True)
class GeneratorConfig:
    n: int = 200
    p: int = 10
    s: int = 2
    d: int = 1
    beta_magnitude: float = 1.0
    # "entry": every active coefficient has this magnitude;
    # "l2": ||beta*||_2 equals beta_magnitude whatever s is.
    beta_scaling: str = "entry"
    g_star: str = "sine"
    g_freq: float = 2.0 * math.pi
    g_amp: float = 1.0
    g_coeffs: Tuple[float, ...] = ()
    correlation_rho: float = 0.0
    noise: str = "deterministic"
    noise_tau: float = 1.0
    noise_q: float = 0.0
    c0_bound: float = 1.0
    margin: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "g_coeffs", tuple(float(c) for c in self.g_coeffs))
        if min(self.n, self.p, self.d) < 1 or self.s < 0:
            raise InvalidInputError("n, p, d must be positive and s nonnegative")
        if self.s > self.p:
            raise InvalidInputError("sparsity s cannot exceed p")
        if not self.beta_magnitude > 0 or not self.c0_bound > 0:
            raise InvalidInputError("beta_magnitude and c0_bound must be positive")
        if self.beta_scaling not in BETA_SCALINGS:
            raise InvalidInputError(f"beta_scaling must be one of {BETA_SCALINGS}")
        if self.g_star not in G_STAR_KINDS:
            raise InvalidInputError(f"g_star must be one of {G_STAR_KINDS}")
        if not 0.0 <= self.correlation_rho < 1.0:
            raise InvalidInputError("correlation_rho must lie in [0, 1)")
        if self.noise not in NOISE_MODELS:
            raise InvalidInputError(f"noise must be one of {NOISE_MODELS}")
        if self.noise == "logistic" and not self.noise_tau > 0:
            raise InvalidInputError("logistic noise needs tau > 0")
        if not 0.0 <= self.noise_q < 0.5:
            raise InvalidInputError("flip probability must lie in [0, 0.5)")
        if self.margin < 0:
            raise InvalidInputError("margin must be nonnegative")

    def with_(self, **changes) -> "GeneratorConfig":
        return replace(self, **changes)


def make_g_star(cfg: GeneratorConfig):
    if cfg.g_star == "zero":
        return lambda T: np.zeros(np.asarray(T).shape[0])
    if cfg.g_star == "sine":
        freq, amp = cfg.g_freq, cfg.g_amp
        return lambda T: amp * np.sin(freq * np.asarray(T, dtype=float)[:, 0])
    coeffs = np.asarray(cfg.g_coeffs, dtype=float)
    if coeffs.size == 0:
        return lambda T: np.zeros(np.asarray(T).shape[0])
    return lambda T: kernels.legendre_features(np.asarray(T, dtype=float)[:, 0],
                                               coeffs.size) @ coeffs


def make_truth(cfg: GeneratorConfig) -> GroundTruth:
    beta = np.zeros(cfg.p)
    if cfg.s:
        mag = cfg.beta_magnitude / (math.sqrt(cfg.s) if cfg.beta_scaling == "l2" else 1.0)
        beta[:cfg.s] = mag * np.where(np.arange(cfg.s) % 2 == 0, 1.0, -1.0)
    if cfg.g_star == "sine":
        gspec = ("sine", cfg.g_freq, cfg.g_amp)
    elif cfg.g_star == "legendre":
        gspec = ("legendre",) + cfg.g_coeffs
    else:
        gspec = ("zero",)
    if cfg.noise == "logistic":
        noise = ("logistic", cfg.noise_tau)
    elif cfg.noise == "flip":
        noise = ("flip", cfg.noise_q)
    else:
        noise = ("deterministic",)
    return GroundTruth(beta, make_g_star(cfg), gspec, noise + (("margin", cfg.margin),))


def links(cfg: GeneratorConfig, T) -> np.ndarray:
    """``h_j(t) = c0 cos(2 pi j t_1)`` for ``j = 1..p``, as an ``(n, p)`` array."""
    t = np.asarray(T, dtype=float)[:, 0]
    return cfg.c0_bound * np.cos(2.0 * np.pi * np.outer(t, np.arange(1, cfg.p + 1)))


def _draw_covariates(cfg: GeneratorConfig, rng, m: int):
    T = rng.random((m, cfg.d))
    U = rng.uniform(-cfg.c0_bound, cfg.c0_bound, size=(m, cfg.p))
    rho = cfg.correlation_rho
    if rho == 0.0:
        Z = U
    else:
        Z = np.clip(rho * links(cfg, T) + math.sqrt(1.0 - rho * rho) * U,
                    -cfg.c0_bound, cfg.c0_bound)
    return Z, T


def _labels(cfg: GeneratorConfig, f, rng) -> np.ndarray:
    sign = np.where(f >= 0.0, 1.0, -1.0)
    u = rng.random(f.size)
    if cfg.noise == "deterministic":
        return sign
    if cfg.noise == "flip":
        return np.where(u < cfg.noise_q, -sign, sign)
    return np.where(u < expit(f / cfg.noise_tau), 1.0, -1.0)


def sample_stream(cfg: GeneratorConfig, truth: GroundTruth, total: int, seed: int,
                  chunk: int = 20_000) -> Iterator[tuple]:
    """Yield ``(Z, T, y, f*)`` chunks adding up to exactly ``total`` accepted draws."""
    rng = np.random.default_rng(seed)
    left = int(total)
    tried = accepted = 0
    while left > 0:
        m = min(chunk, left)
        if cfg.margin > 0:
            rate = max(accepted / tried, 1e-3) if tried else 0.5
            m = int(min(max(1.2 * m / rate, m), 50 * chunk))
        Z, T = _draw_covariates(cfg, rng, m)
        f = truth.score(Z, T)
        if cfg.margin > 0:
            keep = np.abs(f) >= cfg.margin
            tried += m
            accepted += int(keep.sum())
            if tried > 10_000 and accepted == 0:
                raise InvalidInputError(f"no draw reaches |f*| >= {cfg.margin}")
            Z, T, f = Z[keep], T[keep], f[keep]
            Z, T, f = Z[:left], T[:left], f[:left]
        y = _labels(cfg, f, rng)
        left -= f.size
        if f.size:
            yield Z, T, y, f


def generate(cfg: GeneratorConfig) -> Tuple[Dataset, GroundTruth]:
    """Draw ``cfg.n`` observations; deterministic in ``cfg.seed``."""
    truth = make_truth(cfg)
    parts = list(sample_stream(cfg, truth, cfg.n, cfg.seed, chunk=max(cfg.n, 1)))
    Z = np.vstack([c[0] for c in parts])
    T = np.vstack([c[1] for c in parts])
    y = np.concatenate([c[2] for c in parts])
    data = Dataset(y, Z, T, c0=cfg.c0_bound)
    if np.all(y == y[0]):
        msg = f"degenerate dataset: every label is {int(y[0]):+d}"
        data.warnings.append(msg)
        warnings.warn(msg, DegenerateDatasetWarning, stacklevel=2)
    return data, truth


def flip_rate(data: Dataset, truth: GroundTruth) -> float:
    """Fraction of labels disagreeing with ``sign(f*)`` (``sign(0) = +1``)."""
    f = truth.score(data.Z, data.T)
    return float(np.mean(data.y != np.where(f >= 0.0, 1.0, -1.0)))


FAST_RATE = "fast-rate target zeta=2"
SLOW_RATE = "slow-rate regime, zeta unannotated"


def margin_annotation(cfg: GeneratorConfig) -> str:
    """Bernstein-parameter regime a configuration is built to target (label only)."""
    label_noise_bounded = cfg.noise == "deterministic" or cfg.noise == "flip"
    if label_noise_bounded and cfg.margin > 0:
        return FAST_RATE
    return SLOW_RATE

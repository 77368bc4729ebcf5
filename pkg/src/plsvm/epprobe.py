"""Monte-Carlo probe of the centred empirical hinge process.

For a score ``f`` write ``nu_n(f) = R_n(f) - R(f)``, the empirical minus the
population hinge risk. The probe estimates ``sup |nu_n(f) - nu_n(f*)|`` over a
neighbourhood of ``f*`` cut out by three radii (the l1 norm of ``beta - beta*``
and the L2 and RKHS norms of ``g - g*``) and compares it with the weighted bound

    sqrt(log p / n) R_beta + gamma_n R_minus + gamma_n^2 R_plus + exp(-p).

The supremum is taken over a finite cloud: a fixed set of random directions,
each walked along a logarithmic grid of scales, plus the signed coordinate
vertices of the l1 ball. Candidates outside the ball are dropped, so larger
radii always give a superset of the candidates. Population risks come from one
held-out sample shared by every candidate and replicate.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from . import kernels
from .datagen import GeneratorConfig, make_truth, sample_stream
from .errors import InvalidInputError
from .kernels import KernelSpec
from .model import Dataset, fmt, hinge

RADIUS_MODES = ("gamma", "absolute")


@dataclass(frozen=True)
class ProbeConfig:
    """Probe settings.

    ``radius_mode="gamma"`` rescales the radii per dimension
    (``R_beta = D_beta sqrt(n / log p)``, ``R_minus = D_minus / gamma_n``,
    ``R_plus = D_plus / gamma_n^2``); ``"absolute"`` uses them as given.
    """

    ball_radii: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    n_candidates: int = 64
    n_replicates: int = 20
    seed: int = 0
    radius_mode: str = "gamma"
    n_scales: int = 49
    scale_range: Tuple[float, float] = (1e-4, 1e2)
    mc_factor: int = 100
    chunk: int = 50_000

    def __post_init__(self):
        radii = tuple(float(r) for r in self.ball_radii)
        object.__setattr__(self, "ball_radii", radii)
        if len(radii) != 3 or not all(math.isfinite(r) and r >= 0 for r in radii):
            raise InvalidInputError("ball_radii must be three nonnegative finite numbers")
        if self.n_candidates < 1 or self.n_replicates < 1 or self.n_scales < 1:
            raise InvalidInputError("n_candidates, n_replicates and n_scales must be positive")
        if self.radius_mode not in RADIUS_MODES:
            raise InvalidInputError(f"radius_mode must be one of {RADIUS_MODES}")
        if self.mc_factor < 100:
            raise InvalidInputError("the held-out sample must be at least 100x the probe sample")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise InvalidInputError("scale_range must satisfy 0 < low <= high")


@dataclass
class ProbeResult:
    sup_estimate: float
    bound_value: float
    ratio: float
    replicate_sups: np.ndarray
    radii: Tuple[float, float, float]
    gamma_n: float
    n_in_ball: int
    n: int
    p: int

    @property
    def mean_sup(self) -> float:
        return float(np.mean(self.replicate_sups))

    @property
    def sup_se(self) -> float:
        r = self.replicate_sups
        return float(np.std(r, ddof=1) / math.sqrt(r.size)) if r.size > 1 else 0.0

    def __iter__(self):
        # unpacks as (sup_estimate, bound_value, ratio)
        return iter((self.sup_estimate, self.bound_value, self.ratio))


def deviation(f: Callable, f_star: Callable, sample: Dataset, truth_risk_estimates) -> float:
    """``(R_n(f) - R(f)) - (R_n(f*) - R(f*))`` on ``sample``.

    ``f`` and ``f_star`` map ``(Z, T)`` to scores; ``truth_risk_estimates`` is the
    pair of large-sample risk estimates ``(R(f), R(f*))``.
    """
    risk_f, risk_star = truth_risk_estimates
    rn_f = float(np.mean(hinge(sample.y * f(sample.Z, sample.T))))
    rn_star = float(np.mean(hinge(sample.y * f_star(sample.Z, sample.T))))
    return (rn_f - risk_f) - (rn_star - risk_star)


def bound_value(n: int, p: int, gamma: float, radii) -> float:
    """Weighted bound with unit constant at natural-norm radii."""
    rb, rm, rp = radii
    return math.sqrt(math.log(p) / n) * rb + gamma * rm + gamma * gamma * rp + math.exp(-p)


class _Perturbations:
    """Basis ``B(t)`` for ``g - g*`` with RKHS Gram ``P``: ``||B c||_K^2 = c'Pc``."""

    def __init__(self, spec: KernelSpec, rng):
        self.spec = spec
        if spec.has_features:
            self.anchors = None
            self.P = None
        else:
            m = 16
            d = spec.domain_dim
            self.anchors = (np.linspace(0.0, 1.0, m).reshape(-1, 1) if d == 1
                            else rng.random((m, d)))
            self.P = kernels.gram(spec, self.anchors)

    def __call__(self, T) -> np.ndarray:
        if self.anchors is None:
            return kernels.features(self.spec, T)
        return kernels.gram(self.spec, T, self.anchors)

    def dim(self, T) -> int:
        return self(T[:1]).shape[1]

    def k_norm(self, C: np.ndarray) -> np.ndarray:
        if self.P is None:
            return np.sqrt(np.sum(C * C, axis=0))
        return np.sqrt(np.maximum(np.sum(C * (self.P @ C), axis=0), 0.0))


def _directions(cfg: ProbeConfig, p: int, r: int, rng):
    """Unit directions: columns of ``U`` have unit l1 norm (or are zero),
    columns of ``C`` unit RKHS norm (or zero). Cycles through coordinate
    vertices, sparse beta-only, g-only and mixed directions."""
    K = cfg.n_candidates
    U = np.zeros((p, K))
    C = np.zeros((r, K))
    mix = np.ones(K)
    for k in range(K):
        kind = k % 4
        if kind == 0:
            U[(k // 4) % p, k] = 1.0 if (k // (4 * p)) % 2 == 0 else -1.0
        if kind in (1, 3):
            size = int(rng.integers(1, min(p, 8) + 1))
            idx = rng.choice(p, size=size, replace=False)
            U[idx, k] = rng.standard_normal(size)
            U[:, k] /= np.abs(U[:, k]).sum()
        if kind in (2, 3):
            C[:, k] = rng.standard_normal(r)
        if kind == 3:
            mix[k] = 10.0 ** rng.uniform(-2.0, 2.0)
    return U, C, mix


def sup_probe(cfg: ProbeConfig, generator: GeneratorConfig, spec: KernelSpec) -> ProbeResult:
    """Estimate the supremum deviation over the ball; returns a :class:`ProbeResult`
    that also unpacks as ``(sup_estimate, bound_value, ratio)``."""
    n, p = generator.n, generator.p
    if p < 2:
        raise InvalidInputError("the probe needs p >= 2")
    truth = make_truth(generator)
    rng = np.random.default_rng(cfg.seed)
    basis = _Perturbations(spec, rng)

    M = cfg.mc_factor * n
    held = [c for c in sample_stream(generator, truth, M, cfg.seed + 1, cfg.chunk)]
    Zh = np.vstack([c[0] for c in held])
    Th = np.vstack([c[1] for c in held])
    yh = np.concatenate([c[2] for c in held])
    fh = np.concatenate([c[3] for c in held])

    if spec.family == kernels.GAUSSIAN:
        spectrum = kernels.spectrum_of(spec, Th[:n])
    else:
        spectrum = kernels.spectrum_of(spec)
    gam = kernels.gamma_n(spectrum, n, p)

    db, dm, dp = cfg.ball_radii
    if cfg.radius_mode == "gamma":
        radii = (db * math.sqrt(n / math.log(p)), dm / gam, dp / gam ** 2)
        ref = (math.sqrt(n / math.log(p)), 1.0 / gam ** 2)
    else:
        radii = (db, dm, dp)
        ref = (1.0, 1.0)

    r = basis.dim(Th)
    U, C, mix = _directions(cfg, p, r, rng)
    Bh = basis(Th)
    kn = basis.k_norm(C)
    C = np.where(kn > 0, C / np.where(kn > 0, kn, 1.0), 0.0)
    l2 = np.sqrt(np.mean((Bh @ C) ** 2, axis=0))  # held-out L2 norm of each unit g-direction

    # candidates (k, t): delta beta = t ref_b U_k, delta g = t ref_g mix_k C_k
    ts = np.geomspace(cfg.scale_range[0], cfg.scale_range[1], cfg.n_scales)
    a = np.outer(np.where(np.abs(U).sum(axis=0) > 0, 1.0, 0.0), ts) * ref[0]
    b = np.outer(np.where(l2 > 0, mix, 0.0), ts) * ref[1]
    inside = ((a <= radii[0] * (1 + 1e-12)) & (b * l2[:, None] <= radii[1] * (1 + 1e-12))
              & (b <= radii[2] * (1 + 1e-12)))
    ks, js = np.nonzero(inside)
    A_, B_ = a[ks, js], b[ks, js]

    def scores(Z, T, f_star):
        # (m, n_in) matrix of candidate scores
        zu = Z @ U[:, ks]
        bc = basis(T) @ C[:, ks]
        return f_star[:, None] + zu * A_ + bc * B_

    risk_star = float(np.mean(hinge(yh * fh)))
    risk = np.zeros(ks.size)
    step = max(1, 2_000_000 // max(ks.size, 1))
    for s0 in range(0, M, step):
        sl = slice(s0, s0 + step)
        risk += hinge(yh[sl, None] * scores(Zh[sl], Th[sl], fh[sl])).sum(axis=0)
    risk /= M

    sups = np.zeros(cfg.n_replicates)
    for rep in range(cfg.n_replicates):
        Z, T, y, f = next(sample_stream(generator, truth, n, cfg.seed + 1000 + rep, chunk=n))
        rn_star = float(np.mean(hinge(y * f)))
        if ks.size:
            rn = hinge(y[:, None] * scores(Z, T, f)).mean(axis=0)
            dev = (rn - risk) - (rn_star - risk_star)
            sups[rep] = float(np.max(np.abs(dev)))
    sup = float(sups.max())
    bnd = bound_value(n, p, gam, radii)
    return ProbeResult(sup, bnd, sup / bnd, sups, radii, gam, int(ks.size), n, p)


PROBE_HEADER = ["kind", "n", "p", "radius_beta", "radius_l2", "radius_k", "gamma_n",
                "sup_estimate", "mean_sup", "sup_se", "bound_value", "ratio", "n_candidates"]


def write_probe_csv(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROBE_HEADER)
        for res in results:
            w.writerow(["epprobe", res.n, res.p] + [fmt(v) for v in res.radii]
                       + [fmt(res.gamma_n), fmt(res.sup_estimate), fmt(res.mean_sup),
                          fmt(res.sup_se), fmt(res.bound_value), fmt(res.ratio), res.n_in_ball])

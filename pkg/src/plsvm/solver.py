"""Penalized hinge-risk minimization for the partially linear SVM.

The estimator minimizes

    L(beta, g) = R_n(beta, g) + lam * ||beta||_1 + mu * ||g||_K^2

over ``beta`` in R^p and ``g`` in the span of the kernel sections at the
training points. Writing the Gram matrix as ``G = F F'`` and ``g = F w`` turns
the RKHS penalty into ``mu * ||w||^2``; the fitted ``w`` is mapped back to
expansion coefficients ``alpha`` with ``F' alpha = w``, so ``alpha' G alpha``
equals ``||w||^2``.

The hinge is replaced by a Huber-type smoothing that is quadratic on
``[1 - delta, 1 + delta]``. Each smoothing level is solved by monotone FISTA
with backtracking (the L1 part is handled exactly by soft thresholding),
followed by Newton steps on the active set once the support settles; delta is
then shrunk geometrically down to ``delta_min``, warm-starting every stage.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from . import kernels
from .errors import InvalidInputError
from .kernels import KernelSpec
from .model import Dataset, Model, hinge


@dataclass(frozen=True)
class FitConfig:
    """Regularization pair and solver controls.

    ``seed`` is recorded for provenance; the solver itself is deterministic.
    """

    lam: float = 0.0
    mu: float = 0.0
    smoothing_delta: float = 0.5
    delta_schedule: float = 0.2
    delta_min: float = 1e-4
    max_iters: int = 50_000
    tol_objective: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not (self.lam >= 0 and self.mu >= 0):
            raise InvalidInputError("lam and mu must be nonnegative")
        if not 0 < self.delta_schedule < 1:
            raise InvalidInputError("delta_schedule must lie in (0, 1)")
        if not (self.smoothing_delta > 0 and self.delta_min > 0):
            raise InvalidInputError("smoothing levels must be positive")
        if self.max_iters < 1 or not self.tol_objective > 0:
            raise InvalidInputError("max_iters and tol_objective must be positive")

    def deltas(self) -> List[float]:
        out = [max(self.smoothing_delta, self.delta_min)]
        while out[-1] > self.delta_min:
            out.append(max(out[-1] * self.delta_schedule, self.delta_min))
        return out


@dataclass
class FitReport:
    model: Model
    objective_trace: np.ndarray
    stage_index: np.ndarray
    deltas: List[float]
    iterations: int
    converged: bool
    final_delta: float
    kkt_residual: float
    objective: float = math.nan
    stage_iterations: List[int] = field(default_factory=list)

    def stage_trace(self, k: int) -> np.ndarray:
        return self.objective_trace[self.stage_index == k]


def smoothed_hinge(u, delta: float):
    """Hinge smoothed on ``[1 - delta, 1 + delta]``; exceeds the hinge by at most ``delta / 4``."""
    v = 1.0 + delta - np.asarray(u, dtype=float)
    c = np.clip(v, 0.0, 2.0 * delta)
    return c * c / (4.0 * delta) + np.maximum(v - 2.0 * delta, 0.0)


def smoothed_hinge_grad(u, delta: float):
    return -np.clip((1.0 + delta - np.asarray(u, dtype=float)) / (2.0 * delta), 0.0, 1.0)


def smoothed_hinge_change(u, du, delta: float) -> np.ndarray:
    """Elementwise ``smoothed_hinge(u + du) - smoothed_hinge(u)``, accurate for tiny ``du``."""
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    v = 1.0 + delta - u
    vc = v - du
    piece = np.where(v <= 0.0, 0, np.where(v < 2.0 * delta, 1, 2))
    piece_c = np.where(vc <= 0.0, 0, np.where(vc < 2.0 * delta, 1, 2))
    direct = smoothed_hinge(u + du, delta) - smoothed_hinge(u, delta)
    same_quad = -du * (v + vc) / (4.0 * delta)
    out = np.where(piece != piece_c, direct,
                   np.where(piece == 1, same_quad, np.where(piece == 2, -du, 0.0)))
    return out


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def objective(model: Model, data: Dataset, cfg: FitConfig, G: Optional[np.ndarray] = None) -> float:
    """Exact (unsmoothed) penalized objective of ``model`` on ``data``."""
    scores = data.Z @ model.beta + (model.g(data.T) if G is None else G @ model.alpha)
    risk = float(np.mean(hinge(data.y * scores)))
    return (risk + cfg.lam * float(np.abs(model.beta).sum())
            + cfg.mu * model.rkhs_norm_sq(G))


def smoothed_risk(beta, alpha, data: Dataset, G, delta: float) -> float:
    """Smoothed empirical risk in expansion coordinates ``(beta, alpha)``."""
    m = data.y * (data.Z @ beta + G @ alpha)
    return float(np.mean(smoothed_hinge(m, delta)))


def smoothed_risk_grad(beta, alpha, data: Dataset, G, delta: float):
    """Gradient of :func:`smoothed_risk` with respect to ``beta`` and ``alpha``."""
    m = data.y * (data.Z @ beta + G @ alpha)
    r = data.y * smoothed_hinge_grad(m, delta) / data.n
    return data.Z.T @ r, G @ r


class _Problem:
    """Reduced problem in ``theta = (beta, w)`` with signed design ``A``."""

    def __init__(self, data: Dataset, F: np.ndarray, lam: float, mu: float):
        self.A = np.hstack([data.Z, F]) * data.y[:, None]
        self.n, self.p = data.n, data.p
        self.r = F.shape[1]
        self.lam, self.mu = lam, mu
        AtA = self.A.T @ self.A
        self.norm_sq = float(np.linalg.eigvalsh(AtA)[-1]) if AtA.size else 0.0

    def smooth(self, theta, m, delta):
        w = theta[self.p:]
        return float(np.mean(smoothed_hinge(m, delta))) + self.mu * float(w @ w)

    def grad(self, theta, m, delta):
        g = self.A.T @ smoothed_hinge_grad(m, delta) / self.n
        g[self.p:] += 2.0 * self.mu * theta[self.p:]
        return g

    def smooth_change(self, theta, m, dtheta, dm, delta) -> float:
        """Objective change for a step, free of the cancellation in ``F(new) - F(old)``."""
        p = self.p
        w, dw = theta[p:], dtheta[p:]
        b, db = theta[:p], dtheta[:p]
        return (float(np.mean(smoothed_hinge_change(m, dm, delta)))
                + self.mu * float(2.0 * (w @ dw) + dw @ dw)
                + self.lam * float(np.sum(np.abs(b + db) - np.abs(b))))

    def penalty(self, theta):
        return self.lam * float(np.abs(theta[:self.p]).sum())

    def prox(self, v, step):
        out = v.copy()
        out[:self.p] = soft_threshold(v[:self.p], self.lam * step)
        return out

    def kkt(self, theta, g) -> float:
        """Max scaled stationarity violation of the smoothed composite objective."""
        gb, b = g[:self.p], theta[:self.p]
        res_b = np.where(b != 0, np.abs(gb + self.lam * np.sign(b)),
                         np.maximum(np.abs(gb) - self.lam, 0.0)) / (1.0 + np.abs(gb))
        res_w = np.abs(g[self.p:]) / (1.0 + np.abs(g[self.p:]))
        return float(max(res_b.max(initial=0.0), res_w.max(initial=0.0)))

    def newton(self, theta, m, F_val, delta):
        """One active-set Newton step with backtracking; returns improved (theta, m, F) or None."""
        p = self.p
        cols = np.concatenate([np.flatnonzero(theta[:p]), np.arange(p, p + self.r)])
        if cols.size == 0:
            return None
        g = self.grad(theta, m, delta)[cols]
        g[:cols.size - self.r] += self.lam * np.sign(theta[cols[:cols.size - self.r]])
        band = np.abs(m - 1.0) < delta
        Ab = self.A[band][:, cols]
        H = Ab.T @ Ab / (2.0 * delta * self.n)
        H[np.arange(cols.size - self.r, cols.size), np.arange(cols.size - self.r, cols.size)] += 2.0 * self.mu
        H[np.diag_indices_from(H)] += 1e-12 * (np.trace(H) / cols.size + 1e-300)
        try:
            d = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            d = -np.linalg.lstsq(H, g, rcond=None)[0]
        if not np.all(np.isfinite(d)):
            return None
        step = 1.0
        for _ in range(30):
            cand = theta.copy()
            cand[cols] += step * d
            flipped = np.sign(cand[:p]) * np.sign(theta[:p]) < 0
            cand[:p][flipped] = 0.0
            dtheta = cand - theta
            dm = self.A @ dtheta
            dF = self.smooth_change(theta, m, dtheta, dm, delta)
            if dF < 0.0:
                return cand, m + dm, F_val + dF
            step *= 0.5
        return None


def _run_stage(prob: _Problem, theta, delta, L, cfg: FitConfig, final: bool):
    """Minimize the smoothed composite at one delta. Returns theta, L, trace, iters, kkt."""
    tol = cfg.tol_objective
    x = theta
    mx = prob.A @ x
    Fx = prob.smooth(x, mx, delta) + prob.penalty(x)
    trace = [Fx]
    yk, my, t = x.copy(), mx.copy(), 1.0
    window, check_every = 20, 10
    kkt = math.inf
    last_support = None
    it = 0
    for it in range(1, cfg.max_iters + 1):
        Sy = prob.smooth(yk, my, delta)
        gy = prob.grad(yk, my, delta)
        while True:
            z = prob.prox(yk - gy / L, 1.0 / L)
            dz = z - yk
            mz = prob.A @ z
            Sz = prob.smooth(z, mz, delta)
            if Sz <= Sy + gy @ dz + 0.5 * L * (dz @ dz) + 1e-15 * max(1.0, abs(Sy)):
                break
            L *= 2.0
        Fz = Sz + prob.penalty(z)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if Fz <= Fx:
            x_prev, m_prev = x, mx
            x, mx, Fx = z, mz, Fz
            yk = x + ((t - 1.0) / t_new) * (x - x_prev)
            my = mx + ((t - 1.0) / t_new) * (mx - m_prev)
            t = t_new
        else:
            # monotone safeguard: keep x, restart momentum
            yk, my, t = x.copy(), mx.copy(), 1.0
        trace.append(Fx)
        L *= 0.9

        if it % check_every:
            continue
        kkt = prob.kkt(x, prob.grad(x, mx, delta))
        if kkt <= tol:
            break
        support = tuple(np.flatnonzero(x[:prob.p]))
        stalled = (len(trace) > window and
                   trace[-window - 1] - Fx <= tol * max(abs(Fx), 1e-300))
        if support == last_support or stalled:
            for _ in range(10):
                step = prob.newton(x, mx, Fx, delta)
                if step is None:
                    break
                x, mx, Fx = step
                trace.append(Fx)
                kkt = prob.kkt(x, prob.grad(x, mx, delta))
                if kkt <= tol:
                    break
            yk, my, t = x.copy(), mx.copy(), 1.0
            if kkt <= tol or (stalled and not final):
                break
        last_support = support
    return x, L, np.asarray(trace), it, kkt


def fit(data: Dataset, spec: KernelSpec, cfg: FitConfig = FitConfig()) -> FitReport:
    """Fit the partially linear SVM; see the module docstring for the algorithm.

    Non-convergence is reported through ``FitReport.converged`` rather than raised.
    """
    if data.n < 2:
        raise InvalidInputError("fit needs at least two observations")
    F = kernels.gram_factor(spec, data.T)
    if F.shape[1] > data.n:
        F = _eig_factor(F @ F.T)
    prob = _Problem(data, F, cfg.lam, cfg.mu)
    theta = np.zeros(prob.p + prob.r)

    traces, stages, stage_iters = [], [], []
    deltas = cfg.deltas()
    L = None
    kkt = math.inf
    for k, delta in enumerate(deltas):
        L0 = prob.norm_sq / (2.0 * delta * data.n) + 2.0 * cfg.mu
        L = L0 if L is None else min(L * deltas[k - 1] / delta, L0)
        L = max(L, 1e-12)
        theta, L, tr, its, kkt = _run_stage(prob, theta, delta, L, cfg, k == len(deltas) - 1)
        traces.append(tr)
        stages.append(np.full(tr.size, k))
        stage_iters.append(its)

    beta = theta[:prob.p].copy()
    w = theta[prob.p:]
    alpha = np.linalg.lstsq(F.T, w, rcond=None)[0] if prob.r else np.zeros(data.n)
    model = Model(beta, alpha, data.T, spec)
    report = FitReport(model=model, objective_trace=np.concatenate(traces),
                       stage_index=np.concatenate(stages), deltas=deltas,
                       iterations=int(sum(stage_iters)), converged=bool(kkt <= cfg.tol_objective),
                       final_delta=deltas[-1], kkt_residual=kkt, stage_iterations=stage_iters)
    report.objective = objective(model, data, cfg)
    return report


def _eig_factor(G: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    w, U = np.linalg.eigh(0.5 * (G + G.T))
    keep = w > rtol * max(w[-1], 0.0)
    return U[:, keep] * np.sqrt(w[keep])


GRID_CAP = 8
CLOUD_CAP = 20


def brute_force_oracle(data: Dataset, spec: KernelSpec, cfg: FitConfig,
                       search_box: Tuple[float, float] = (-5.0, 5.0), resolution=None,
                       mode: str = "cloud", search: str = "full", seed: int = 0,
                       polish: bool = True) -> Tuple[float, Tuple[np.ndarray, np.ndarray]]:
    """Best exact objective over a grid or a random cloud in ``(beta, alpha)``.

    ``search="beta"`` holds ``alpha`` at zero. ``resolution`` is the grid step
    (grid mode, default 0.05) or the number of cloud points (default 10**6).
    With ``polish`` the best few points are refined by Powell's method on the
    exact objective. Used as an independent check of :func:`fit`.
    """
    n, p = data.n, data.p
    dims = p + (n if search == "full" else 0)
    cap = GRID_CAP if mode == "grid" else CLOUD_CAP
    if mode not in ("grid", "cloud") or search not in ("full", "beta"):
        raise InvalidInputError("mode must be grid|cloud and search full|beta")
    if dims > cap:
        raise InvalidInputError(f"search dimension {dims} exceeds the {mode} cap {cap}")
    G = kernels.gram(spec, data.T)

    def unpack(P):
        P = np.atleast_2d(P)
        alpha = P[:, p:] if search == "full" else np.zeros((P.shape[0], n))
        return P[:, :p], alpha

    def values(P):
        B, Al = unpack(P)
        scores = B @ data.Z.T + Al @ G
        risk = hinge(data.y[None, :] * scores).mean(axis=1)
        rk = np.einsum("ki,ij,kj->k", Al, G, Al)
        return risk + cfg.lam * np.abs(B).sum(axis=1) + cfg.mu * rk

    if dims == 0:
        return float(values(np.zeros((1, 0)))[0]), (np.zeros(p), np.zeros(n))

    lo, hi = search_box
    best_vals, best_pts = [], []
    if mode == "grid":
        step = 0.05 if resolution is None else float(resolution)
        axis = np.arange(lo, hi + 0.5 * step, step)
        it = itertools.product(axis, repeat=dims)
        while True:
            block = np.array(list(itertools.islice(it, 50_000)), dtype=float)
            if block.size == 0:
                break
            v = values(block)
            k = np.argsort(v)[:5]
            best_vals.extend(v[k])
            best_pts.extend(block[k])
    else:
        total = 10 ** 6 if resolution is None else int(resolution)
        rng = np.random.default_rng(seed)
        done = 0
        while done < total:
            m = min(20_000, total - done)
            block = rng.uniform(lo, hi, size=(m, dims))
            block[0] = 0.0 if done == 0 else block[0]
            v = values(block)
            k = np.argsort(v)[:5]
            best_vals.extend(v[k])
            best_pts.extend(block[k])
            done += m
    order = np.argsort(best_vals)[:5]
    best_val = float(best_vals[order[0]])
    best = np.asarray(best_pts[order[0]])
    if polish:
        for j in order:
            res = optimize.minimize(lambda x: float(values(x)[0]), best_pts[j], method="Powell",
                                    options={"xtol": 1e-10, "ftol": 1e-12, "maxfev": 20_000})
            if res.fun < best_val:
                best_val, best = float(res.fun), np.asarray(res.x)
    B, Al = unpack(best)
    return best_val, (B[0], Al[0])

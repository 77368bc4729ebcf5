"""Datasets, fitted partially linear models and the hinge risks they are scored by."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .kernels import KernelSpec


def fmt(x: float) -> str:
    """17-significant-digit decimal; round-trips every double exactly."""
    return format(float(x), ".17g")


def hinge(u):
    """``max(1 - u, 0)``; scalar in, float out, array in, array out."""
    out = np.maximum(1.0 - np.asarray(u, dtype=float), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class Dataset:
    """Observations ``(y_i, z_i, t_i)``: labels in {-1, +1}, linear covariates
    ``Z`` (n x p) and nonlinear covariates ``T`` (n x d).

    ``c0`` records the sup-norm bound the covariates were generated under, if any.
    """

    y: np.ndarray
    Z: np.ndarray
    T: np.ndarray
    c0: Optional[float] = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        n = self.y.size
        self.Z = np.asarray(self.Z, dtype=float).reshape(n, -1) if n else np.zeros((0, 0))
        self.T = np.asarray(self.T, dtype=float)
        if self.T.ndim == 1:
            self.T = self.T.reshape(-1, 1)
        if n < 1:
            raise InvalidInputError("a dataset needs at least one observation")
        if self.T.shape[0] != n:
            raise InvalidInputError("y, Z and T must have the same number of rows")
        if not np.all((self.y == 1.0) | (self.y == -1.0)):
            raise InvalidInputError("labels must be exactly -1 or +1")
        if not (np.all(np.isfinite(self.Z)) and np.all(np.isfinite(self.T))):
            raise InvalidInputError("covariates contain NaN or Inf")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    @property
    def d(self) -> int:
        return self.T.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.y[idx], self.Z[idx], self.T[idx], c0=self.c0)

    def to_csv(self, path) -> None:
        header = (["y"] + [f"z{j + 1}" for j in range(self.p)]
                  + [f"t{k + 1}" for k in range(self.d)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(self.n):
                w.writerow([str(int(self.y[i]))] + [fmt(v) for v in self.Z[i]]
                           + [fmt(v) for v in self.T[i]])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise InvalidInputError(f"{path}: empty file")
        header = rows[0]
        if not header or header[0] != "y":
            raise InvalidInputError(f"{path}: header must start with 'y'")
        zcols = [i for i, h in enumerate(header) if h.startswith("z")]
        tcols = [i for i, h in enumerate(header) if h.startswith("t")]
        expect = ["y"] + [f"z{j + 1}" for j in range(len(zcols))] + \
                 [f"t{k + 1}" for k in range(len(tcols))]
        if header != expect:
            raise InvalidInputError(f"{path}: header must be y,z1..zp,t1..td")
        try:
            data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise InvalidInputError(f"{path}: {exc}") from None
        if data.size == 0:
            raise InvalidInputError(f"{path}: no observations")
        return cls(data[:, 0], data[:, zcols], data[:, tcols])


class Model:
    """Fitted score ``f(z, t) = beta'z + sum_i alpha_i K(t, anchors_i)``."""

    def __init__(self, beta, alpha, anchors, spec: KernelSpec):
        self.beta = np.asarray(beta, dtype=float).reshape(-1)
        self.alpha = np.asarray(alpha, dtype=float).reshape(-1)
        self.anchors = kernels.as_points(spec, anchors) if len(self.alpha) else \
            np.zeros((0, spec.domain_dim))
        self.spec = spec
        if self.anchors.shape[0] != self.alpha.size:
            raise InvalidInputError("need one anchor per expansion coefficient")
        self._weights = None

    @classmethod
    def zeros(cls, p: int, anchors, spec: KernelSpec) -> "Model":
        anchors = kernels.as_points(spec, anchors)
        return cls(np.zeros(p), np.zeros(anchors.shape[0]), anchors, spec)

    @property
    def p(self) -> int:
        return self.beta.size

    def _feature_weights(self) -> np.ndarray:
        # g = F(t) @ (F(anchors)' alpha) for kernels with explicit features
        if self._weights is None:
            self._weights = kernels.features(self.spec, self.anchors).T @ self.alpha
        return self._weights

    def g(self, T) -> np.ndarray:
        if self.alpha.size == 0:
            return np.zeros(kernels.as_points(self.spec, T).shape[0])
        if self.spec.has_features:
            return kernels.features(self.spec, T) @ self._feature_weights()
        return kernels.gram(self.spec, T, self.anchors) @ self.alpha

    def decision_function(self, Z, T) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        Z = Z.reshape(1, -1) if Z.ndim == 1 else Z
        if Z.shape[1] != self.p:
            raise InvalidInputError(f"z has dimension {Z.shape[1]}, model expects {self.p}")
        gT = self.g(T)
        if gT.shape[0] != Z.shape[0]:
            raise InvalidInputError("Z and T must have the same number of rows")
        return Z @ self.beta + gT

    def gram(self) -> np.ndarray:
        return kernels.gram(self.spec, self.anchors)

    def rkhs_norm_sq(self, G: Optional[np.ndarray] = None) -> float:
        """``alpha' G alpha`` (``G`` is the anchor Gram matrix, computed if omitted)."""
        if self.alpha.size == 0:
            return 0.0
        if G is None and self.spec.has_features:
            w = self._feature_weights()
            return float(w @ w)
        G = self.gram() if G is None else G
        return float(self.alpha @ G @ self.alpha)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "alpha": self.alpha, "anchors": self.anchors,
                "kernel": {"family": self.spec.family, "domain_dim": self.spec.domain_dim,
                           **self.spec.params()}}

    def to_json(self, path=None) -> str:
        d = self.to_dict()

        def vec(a):
            return "[" + ", ".join(fmt(v) for v in a) + "]"

        kern = ", ".join(f"{json.dumps(k)}: {json.dumps(v)}" for k, v in d["kernel"].items())
        text = ("{\n"
                f'  "beta": {vec(self.beta)},\n'
                f'  "alpha": {vec(self.alpha)},\n'
                f'  "anchors": [{", ".join(vec(r) for r in self.anchors)}],\n'
                f'  "kernel": {{{kern}}}\n'
                "}\n")
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, source, feature_map=None) -> "Model":
        """Load from a path or JSON text. Custom feature maps must be supplied again."""
        if isinstance(source, str) and source.lstrip().startswith("{"):
            doc = json.loads(source)
        else:
            with open(source) as fh:
                doc = json.load(fh)
        k = dict(doc["kernel"])
        family = k.pop("family")
        d = int(k.pop("domain_dim", 1))
        if family == kernels.FINITE_RANK:
            if k.pop("feature_map", None) == "custom" and feature_map is None:
                raise InvalidInputError("model uses a custom feature map; pass feature_map")
            spec = kernels.finite_rank(k["rank"], k.get("scale", 1.0), feature_map, d)
        elif family == kernels.POLY_DECAY:
            spec = kernels.poly_decay(k["alpha"], k.get("scale", 1.0), k.get("n_terms", 256))
        else:
            spec = kernels.gaussian(k["sigma"], d)
        anchors = np.asarray(doc["anchors"], dtype=float).reshape(-1, d)
        return cls(doc["beta"], doc["alpha"], anchors, spec)


@dataclass
class GroundTruth:
    """Data-generating score ``f*(z, t) = beta_star'z + g_star(t)`` and its label noise."""

    beta_star: np.ndarray
    g_star: Callable[[np.ndarray], np.ndarray]
    g_star_spec: tuple = ("zero",)
    noise: tuple = ("deterministic",)

    def __post_init__(self):
        self.beta_star = np.asarray(self.beta_star, dtype=float).reshape(-1)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta_star)

    @property
    def s(self) -> int:
        return int(self.support.size)

    def score(self, Z, T) -> np.ndarray:
        T = np.asarray(T, dtype=float)
        T = T.reshape(-1, 1) if T.ndim == 1 else T
        return np.asarray(Z, dtype=float) @ self.beta_star + self.g_star(T)

    def to_dict(self) -> dict:
        return {"beta_star": [float(v) for v in self.beta_star],
                "g_star_spec": list(self.g_star_spec), "noise": list(self.noise)}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def predict(model: Model, z, t) -> float:
    """Score of a single observation."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != model.p:
        raise InvalidInputError(f"z has dimension {z.size}, model expects {model.p}")
    t = kernels.as_points(model.spec, np.asarray(t, dtype=float).reshape(1, -1))
    return float(model.decision_function(z.reshape(1, -1), t)[0])


def empirical_risk(model: Model, data: Dataset) -> float:
    """Mean hinge loss of ``y_i f(x_i)``."""
    if data.n < 1:
        raise InvalidInputError("empty dataset")
    return float(np.mean(hinge(data.y * model.decision_function(data.Z, data.T))))


def l2_norm_gap(scores_a, scores_b) -> float:
    """Root mean squared difference of two score vectors on a shared sample."""
    a = np.asarray(scores_a, dtype=float).reshape(-1)
    b = np.asarray(scores_b, dtype=float).reshape(-1)
    if a.size == 0 or a.shape != b.shape:
        raise InvalidInputError("need two nonempty score vectors of equal length")
    return math.sqrt(float(np.mean((a - b) ** 2)))


def mc_population_risk(model: Model, truth: GroundTruth, generator_config, mc_n: int = 100_000,
                       seed: int = 0, chunk: int = 20_000):
    """Monte-Carlo hinge risk on ``mc_n`` fresh draws; returns ``(risk, standard_error)``."""
    from .datagen import sample_stream

    if mc_n < 1:
        raise InvalidInputError("mc_n must be positive")
    total = total_sq = 0.0
    for Z, T, y, _ in sample_stream(generator_config, truth, mc_n, seed, chunk):
        v = hinge(y * model.decision_function(Z, T))
        total += v.sum()
        total_sq += (v * v).sum()
    mean = total / mc_n
    var = max(total_sq / mc_n - mean * mean, 0.0) * mc_n / max(mc_n - 1, 1)
    return mean, math.sqrt(var / mc_n)

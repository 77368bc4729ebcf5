"""Fit one simulated dataset and compare the estimate with the truth.

Run: python demos/fit_one.py
"""
import numpy as np

from plsvm import datagen, experiments, kernels
from plsvm.solver import FitConfig, fit

gen = datagen.GeneratorConfig(n=1000, p=200, s=4, beta_magnitude=2.0, beta_scaling="l2",
                              g_star="legendre", g_coeffs=(0.0, 0.5), margin=1.0, seed=0)
spec = kernels.finite_rank(6)
data, truth = datagen.generate(gen)

# default tuning: lambda = sqrt(log p / n), mu = gamma_n^2
cfg = experiments.ExperimentConfig(grid_n=(gen.n,), grid_p=(gen.p,), grid_s=(gen.s,), kernel=spec)
lam, mu, gam, nu = experiments.hyperparameters(cfg, gen.n, gen.p, data.T)
rep = fit(data, spec, FitConfig(lam=lam, mu=mu))

print(f"lambda={lam:.4f} mu={mu:.3g} gamma_n={gam:.4f} nu_n={nu:.4g}")
print(f"objective={rep.objective:.6f} converged={rep.converged} iterations={rep.iterations}")
print("nonzero coefficients:", np.flatnonzero(rep.model.beta).tolist())
print("beta_hat[:6] =", np.round(rep.model.beta[:6], 3).tolist())
print("beta_star[:6]=", np.round(truth.beta_star[:6], 3).tolist())
res = experiments.evaluate(rep.model, truth, gen, mc_n=100_000, seed=1)
print(", ".join(f"{k}={v:.4f}" for k, v in res.items()))

"""Monte Carlo sup of the centred excess hinge deviation over a fixed ball, against n.

Run: python demos/probe_shape.py   (about 20 s)
"""
import numpy as np

from plsvm import datagen, kernels
from plsvm.epprobe import ProbeConfig, sup_probe

gen = datagen.GeneratorConfig(p=30, s=4, beta_magnitude=2.0, beta_scaling="l2", g_star="legendre",
                              g_coeffs=(0.0, 0.5), margin=1.0)
cfg = ProbeConfig(ball_radii=(0.5, 0.5, 0.5), radius_mode="absolute", n_replicates=10, seed=3)
grid = [250, 500, 1000, 2000]
sups = []
for n in grid:
    res = sup_probe(cfg, gen.with_(n=n), kernels.finite_rank(6))
    sups.append(res.sup_estimate)
    print(f"n={n:5d}  sup={res.sup_estimate:.4f}  bound={res.bound_value:.4f}  ratio={res.ratio:.3f}")
print(f"slope of sup vs n: {np.polyfit(np.log(grid), np.log(sups), 1)[0]:.3f}")

"""Small version of the sample-size sweep: beta error should fall roughly like n^(-1/2).

Run: python demos/rate_in_n.py   (about 15 s)
"""
from plsvm import datagen, experiments, kernels

gen = datagen.GeneratorConfig(beta_magnitude=2.0, beta_scaling="l2", g_star="legendre",
                              g_coeffs=(0.0, 0.5), margin=1.0)
cfg = experiments.ExperimentConfig(grid_n=(250, 500, 1000, 2000), grid_p=(200,), grid_s=(4,),
                                   kernel=kernels.finite_rank(6), generator=gen, replicates=5,
                                   eval_mc=20_000)
rows = experiments.run(cfg)
for r in experiments.summarize(rows):
    print(f"n={int(r['n']):5d}  beta error {r['beta_l2_error_mean']:.3f} +- {r['beta_l2_error_se']:.3f}"
          f"  excess risk {r['excess_risk_mean']:.4f}")
slope, _, r2 = experiments.rate_fit(rows, "n", "beta_l2_error")
print(f"log-log slope {slope:.3f} (r^2 {r2:.3f})")

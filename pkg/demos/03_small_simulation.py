"""A short Monte Carlo run of the finite-sample comparison.

Uses few replications so it finishes in seconds; the full study uses 2000.
"""

from pretest_liu import SimConfig, run_simulation

cfg = SimConfig(n=250, q=3, reps=200, d_values=(0.5, 0.9), alpha_values=(0.05,),
                delta_star_grid=(0.0, 4.0, 20.0), seed=1)
res = run_simulation(cfg)

print("Delta*  d     " + "".join(k.rjust(8) for k in ("RE", "PT", "S", "PS")))
for ds in cfg.delta_star_grid:
    for d in cfg.d_labels:
        vals = [res.rmse("RE", d, None, ds), res.rmse("PT", d, 0.05, ds),
                res.rmse("S", d, None, ds), res.rmse("PS", d, None, ds)]
        print(f"{ds:6g}  {str(d):5s} " + "".join(f"{v:8.3f}" for v in vals))
    print(f"        rejection rate at alpha=0.05: {res.rejection_rate(0.05, ds):.3f}")

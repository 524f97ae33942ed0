"""Final distance versus perturbation size, with noise that dies out.

A sweep runs the cross product of step sizes and amplitudes from one config
template; here the template asks for noise decaying like 0.999^t.
"""

from consensus_iss.harness import load_config, sweep

cfg = load_config("demos/configs/fig2_wang_elia.json")
res = sweep(cfg, gammas=[1e-5, 3e-5], amplitudes=[0.0, 0.01, 0.1, 1.0], outdir="runs")

print(f"{'gamma':>8} {'amplitude':>9} {'final distance':>15} {'certified':>10} {'fitted':>10}")
for row in res.table():
    print(f"{row['gamma']:8.0e} {row['amplitude']:9g} {row['final_distance']:15.3e} "
          f"{row['certified_rate']:10.7f} {row['empirical_rate']:10.7f}")
# the distance goes to zero whatever the amplitude; only the transient changes

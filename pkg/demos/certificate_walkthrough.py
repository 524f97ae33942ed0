"""Build the ISS certificate for a small ring and test it on a noisy run."""

import numpy as np

from consensus_iss import (
    AlgorithmState,
    PerturbationSpec,
    Stepper,
    build_dispersion_basis,
    build_equilibrium,
    build_error_system,
    build_k_metropolis,
    builtin_graph,
    check_delta_v,
    check_iss_bound,
    compute_certificate,
    make_quadratic_problem,
    rollout,
)
from consensus_iss.dynamics import UniformNoise

rng = np.random.default_rng(0)
n = 5
problem = make_quadratic_problem(list(zip(rng.uniform(0.5, 2, n), rng.uniform(-3, 3, n))))
graph = builtin_graph("cycle", n)
k = build_k_metropolis(graph)
basis = build_dispersion_basis(n)

cert = compute_certificate(problem, build_error_system(k, basis))  # gamma = gamma*/2
print(f"theta* = {problem.theta_star:.6f}  ell = {problem.lipschitz_ell}  c0 = {problem.strong_convexity_c0:.4f}")
print(f"gamma* = {cert.gamma_star:.3e}, using gamma = {cert.gamma:.3e}")
print(f"P eigenvalues in [{cert.lambda_min:.3f}, {cert.lambda_max:.3f}], residual {cert.lyapunov_residual:.1e}")
print(f"alpha = {cert.alpha:.3f}  mu = {cert.mu:.8f}  rho = {cert.rho:.3e}  tau = {cert.tau:.3e}")

eq = build_equilibrium(problem, k, basis, cert.gamma)
stepper = Stepper.wang_elia(k, problem, cert.gamma)
start = AlgorithmState(rng.normal(0, 2, n), np.zeros(n))
noise = PerturbationSpec.additive(UniformNoise(1e-3), UniformNoise(1e-3), seed=1)

# long run, every 1000th state kept: the ISS estimate only needs running suprema
horizon = int(5 / (cert.c0 * cert.gamma))
traj = rollout(start, stepper, noise, horizon=horizon, stride=1000)
iss = check_iss_bound(traj, cert, eq)
print(f"{horizon:,} steps, distance to the optimal set: {iss.distance[0]:.3f} -> {iss.distance[-1]:.3e}")
print(f"ISS bound holds at every recorded step: {iss.holds()} (min slack {iss.min_slack:.3e})")

# the dissipation inequality is per step, so check it on a fully recorded prefix
dv = check_delta_v(rollout(start, stepper, noise, horizon=20_000), cert, eq)
print(f"one-step dissipation holds: {dv.holds()} (max residual {dv.max_residual:.3e})")

# the bound is loose by design: the tau term alone dwarfs the actual distance
print(f"bound / distance at the last step: {iss.rhs[-1] / iss.distance[-1]:.1e}")

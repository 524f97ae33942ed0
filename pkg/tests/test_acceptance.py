"""One test per acceptance criterion; conftest prints a PASS/FAIL line for each."""

import json
import math
import time

import numpy as np
from scipy.optimize import minimize_scalar

from consensus_iss import cli
from consensus_iss.certify import (
    check_delta_v,
    check_iss_bound,
    distance_series,
    empirical_rate,
    integral_average_diagnostic,
)
from consensus_iss.dynamics import (
    AlgorithmState,
    AlternatingNoise,
    ConstantNoise,
    PerturbationSpec,
    Stepper,
    UniformNoise,
    rollout,
)
from consensus_iss.harness import reproduce_fig2
from consensus_iss.lincore import build_dispersion_basis, lyapunov_by_iteration
from consensus_iss.network import build_k_metropolis, build_stochastic_pair, path_graph
from consensus_iss.problem import build_equilibrium, distance_to_optimal_set, make_quadratic_problem

HORIZON = 20_000


def test_criterion_1_fig2_reproduction(tmp_path):
    start = time.perf_counter()
    result = reproduce_fig2(outdir=tmp_path)
    elapsed = time.perf_counter() - start
    gt = sorted(result.runs_for("gradient_tracking"), key=lambda r: -r.gamma)
    we = result.runs_for("wang_elia")
    for r in gt:
        print(f"GT gamma={r.gamma:g}: time to |(x,z)| > 1e3 = {r.diverged_at}")
    for r in we:
        print(f"WE gamma={r.gamma:g}: max |x_i - 2.5| = {r.final_consensus_error:.3e}")
    print(f"runtime {elapsed:.1f}s")
    assert len(gt) == 4 and len(we) == 4
    assert all(r.diverged for r in gt)
    assert all(r.final_norm > 1e3 for r in gt)
    ttt = [r.diverged_at for r in gt]
    assert all(a > b for a, b in zip(ttt, ttt[1:]))
    assert all(not r.diverged and r.final_consensus_error <= 0.01 for r in we)
    assert result.ok
    assert elapsed <= 120


def test_criterion_2_iss_bound_randomized(scenarios):
    start = time.perf_counter()
    worst = math.inf
    for sc in scenarios:
        pert = PerturbationSpec.additive(UniformNoise(sc.amplitude), UniformNoise(sc.amplitude), seed=sc.index)
        traj = rollout(sc.initial, sc.stepper, pert, horizon=HORIZON)
        chk = check_iss_bound(traj, sc.cert, sc.eq)
        normalized = float((chk.slack / (1.0 + chk.rhs)).min())
        worst = min(worst, normalized)
        assert chk.holds(1e-9), f"scenario {sc.index}: min slack {chk.min_slack}"
    elapsed = time.perf_counter() - start
    print(f"{len(scenarios)} scenarios, min slack/(1+rhs) = {worst:.3e}, runtime {elapsed:.1f}s")
    assert len(scenarios) >= 50
    assert elapsed <= 60


def test_criterion_3_linear_convergence(scenarios):
    for sc in scenarios:
        traj = rollout(sc.initial, sc.stepper, None, horizon=HORIZON)
        dist = distance_series(traj, sc.eq, sc.basis)
        t = traj.t.astype(float)
        rate = math.sqrt(1.0 - sc.cert.c0 * sc.cert.gamma)
        rhs = sc.cert.alpha * rate**t * dist[0]
        assert np.all(dist <= rhs * (1 + 1e-9) + 1e-12), f"scenario {sc.index}"
        emp = empirical_rate(traj.t, dist)
        assert emp <= sc.cert.mu, f"scenario {sc.index}: empirical {emp} > certified {sc.cert.mu}"


def test_criterion_4_dissipation(scenarios):
    worst = -math.inf
    for sc in scenarios:
        pert = PerturbationSpec.additive(UniformNoise(sc.amplitude), UniformNoise(sc.amplitude), seed=sc.index)
        traj = rollout(sc.initial, sc.stepper, pert, horizon=2_000)
        chk = check_delta_v(traj, sc.cert, sc.eq)
        worst = max(worst, float((chk.residual / (1 + np.abs(chk.v[:-1]))).max()))
        assert chk.holds(1e-9), f"scenario {sc.index}: residual {chk.max_residual}"

        free = rollout(sc.initial, sc.stepper, None, horizon=2_000)
        v = check_delta_v(free, sc.cert, sc.eq).v
        assert np.all(np.diff(v) < 0), f"scenario {sc.index}: V not strictly decreasing"
    print(f"max normalized dV residual {worst:.3e}")


def test_criterion_5_structural_invariants(scenarios, fig2_problem):
    # z-average conservation, both algorithms, w_z = 0
    for sc in scenarios[:10]:
        wx_only = PerturbationSpec.additive(UniformNoise(0.01), None, seed=sc.index)
        traj = rollout(sc.initial, sc.stepper, wx_only, horizon=10_000)
        drift = np.abs(traj.z.mean(axis=1) - traj.z[0].mean()).max()
        assert drift <= 1e-9
        rc = build_stochastic_pair(sc.graph, 0.5)
        z0 = sc.initial.z - sc.initial.z.mean()
        gt = rollout(AlgorithmState(sc.initial.x, z0), Stepper.gradient_tracking(rc, sc.problem, 1e-3),
                     wx_only, horizon=10_000)
        assert np.abs(gt.z.mean(axis=1)).max() <= 1e-9

    # x trajectory invariant under z0 -> z0 + c 1
    for sc in scenarios[:10]:
        a = rollout(sc.initial, sc.stepper, None, horizon=500)
        b = rollout(AlgorithmState(sc.initial.x, sc.initial.z + 3.7), sc.stepper, None, horizon=500)
        assert np.abs(a.x - b.x).max() <= 1e-9

    for sc in scenarios:
        es = sc.cert.es
        assert np.abs(es.tkt[0]).max() <= 1e-12 and np.abs(es.tkt[:, 0]).max() <= 1e-12
        eig = np.abs(np.linalg.eigvals(es.a))
        assert eig.min() > 0 and eig.max() < 1
        assert sc.cert.lyapunov_residual <= 1e-8
        oracle = lyapunov_by_iteration(es.a, 3 * np.eye(es.a.shape[0]), doubling=True)
        assert np.abs(oracle - sc.cert.p_matrix).max() <= 1e-8 * np.abs(oracle).max()
        kk = sc.k.k
        phi = sc.problem.gradient(sc.eq.x_star)
        assert np.abs(kk @ sc.eq.x_star).max() <= 1e-10
        assert np.abs(kk @ sc.eq.x_star + kk @ sc.eq.z_star + sc.cert.gamma * phi).max() <= 1e-10

    # distance identity against a 1-D projection oracle: the optimal set is
    # {(1 theta*, z* + c 1)}, so the distance minimises over the scalar c
    rng = np.random.default_rng(5)
    for sc in scenarios[:20]:
        x, z = rng.normal(0, 2, sc.problem.n), rng.normal(0, 2, sc.problem.n)
        res = minimize_scalar(
            lambda c: np.sum((x - sc.eq.x_star) ** 2) + np.sum((z - sc.eq.z_star - c) ** 2),
            bracket=(-10, 10), tol=1e-12,
        )
        assert abs(math.sqrt(res.fun) - distance_to_optimal_set((x, z), sc.problem, sc.eq, sc.basis)) <= 1e-6

    # gradients against central differences
    for sc in scenarios[:10]:
        for cost in sc.problem.costs:
            for th in (-3.0, 0.4, 2.2):
                h = 1e-5
                fd = (cost.eval(th + h) - cost.eval(th - h)) / (2 * h)
                g = cost.grad(th)
                assert abs(fd - g) <= 1e-5 * max(1.0, abs(g))


def test_criterion_6_vanishing_perturbation(fig2_problem, fig2_k, fig2_cert):
    basis = build_dispersion_basis(2)
    gamma = fig2_cert.gamma
    eq = build_equilibrium(fig2_problem, fig2_k, basis, gamma)
    horizon = math.ceil(20 / (fig2_problem.strong_convexity_c0 * gamma))
    traj = rollout(AlgorithmState.zeros(2), Stepper.wang_elia(fig2_k, fig2_problem, gamma),
                   PerturbationSpec.vanishing(0.1, 0.999, seed=3), horizon=horizon, stride=100)
    dist = distance_series(traj, eq, basis)
    print(f"horizon {horizon}, final distance {dist[-1]:.3e}")
    assert dist[-1] <= 1e-6


def test_criterion_7_certificate_constants(tmp_path, capsys):
    cfg = tmp_path / "fig2_we.json"
    cfg.write_text(json.dumps({"preset": "fig2", "algorithm": "wang_elia", "gamma": 1e-5}))
    assert cli.main(["certify", str(cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    c = out["constants"]
    expected = {"c0": 1.0, "c1": math.sqrt(2), "c2": 2.0, "c3": 9.0}
    for key, val in expected.items():
        assert abs(c[key] - val) <= 1e-12, key
    assert out["ell"] == 2.0
    assert abs(out["thresholds"]["gamma_star0"] - 1 / 18) <= 1e-12


def test_criterion_8_integral_average_diagnostic():
    problem = make_quadratic_problem([(1.0, 0.0), (2.0, 1.0), (0.5, -2.0)])
    k = build_k_metropolis(path_graph(3))
    stepper = Stepper.wang_elia(k, problem, 1e-3)
    horizon = 5_000

    bias = 1e-4
    const = PerturbationSpec.additive(None, ConstantNoise(bias))
    traj = rollout(AlgorithmState.zeros(3), stepper, const, horizon=horizon)
    diag = integral_average_diagnostic(traj, threshold=1e-2)
    assert not diag.bounded
    zbar = traj.z.mean(axis=1)
    assert np.abs(zbar - bias * traj.t).max() <= 1e-9

    amp = 1e-3
    alt = PerturbationSpec.additive(None, AlternatingNoise(amp))
    traj = rollout(AlgorithmState.zeros(3), stepper, alt, horizon=horizon)
    diag = integral_average_diagnostic(traj, threshold=1e-2)
    assert diag.bounded
    assert np.abs(traj.z.mean(axis=1)).max() <= amp * (1 + 1e-12)


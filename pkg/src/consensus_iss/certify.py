"""ISS certificate for the Wang-Elia iteration and its trajectory checks.

In error coordinates the dynamics split into the scalar average error
``xi_avg``, the dispersion pair ``eta = (xi_perp, zeta_perp)`` driven by the
Schur matrix ``A``, and the decoupled integrator ``zeta_avg``. With ``P``
solving ``A^T P A - P = -3 I`` the function ``V = xi_avg**2 + eta^T P eta``
certifies

    |(x^t, z^t)|_{A*} <= alpha mu^t |(x^0, z^0)|_{A*}
                         + rho sup|w_x avg| + tau sup|(w_x perp, w_z perp)|.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import TrajectoryRecord
from .errors import ConstructionError, DimensionError, GammaRangeError
from .lincore import (
    DispersionBasis,
    operator_norm,
    solve_discrete_lyapunov,
    symmetric_eigenvalues,
)
from .network import WeightMatrixK
from .problem import OptimalEquilibrium, ProblemInstance

__all__ = [
    "ErrorSystemMatrices",
    "Certificate",
    "IssCheck",
    "DeltaVCheck",
    "IntegralAverageDiagnostic",
    "build_error_system",
    "compute_certificate",
    "lyapunov_value",
    "trajectory_coordinates",
    "distance_series",
    "check_iss_bound",
    "check_delta_v",
    "integral_average_diagnostic",
    "empirical_rate",
]


@dataclass(frozen=True)
class ErrorSystemMatrices:
    a: np.ndarray
    b: np.ndarray
    tkt: np.ndarray
    basis: DispersionBasis

    @property
    def n(self) -> int:
        return self.basis.n


def build_error_system(k: WeightMatrixK, basis: DispersionBasis) -> ErrorSystemMatrices:
    kk = np.asarray(k.k, dtype=float)
    n = basis.n
    if kk.shape != (n, n):
        raise DimensionError(f"K is {kk.shape}, basis is for n={n}")
    s = basis.s_matrix
    tkt = basis.t_matrix @ kk @ basis.t_inverse
    if np.abs(tkt[0]).max() > 1e-12 or np.abs(tkt[:, 0]).max() > 1e-12:
        raise ConstructionError("T K T^-1 has a nonzero first row or column")
    m = s.T @ kk @ s
    eye = np.eye(n - 1)
    a = np.block([[eye - m, -m], [m, eye]])
    b = np.vstack([s.T, np.zeros((n - 1, n))])
    moduli = np.abs(np.linalg.eigvals(a))
    if moduli.min() <= 1e-12 or moduli.max() >= 1.0 - 1e-9:
        raise ConstructionError(
            f"A is not Schur with spectrum in (0, 1): moduli in [{moduli.min():.3e}, {moduli.max():.12g}]"
        )
    if abs(operator_norm(b) - 1.0) > 1e-12:
        raise ConstructionError("|B| differs from 1")
    return ErrorSystemMatrices(a=a, b=b, tkt=tkt, basis=basis)


@dataclass(frozen=True)
class Certificate:
    n: int
    p_matrix: np.ndarray
    lambda_min: float
    lambda_max: float
    lyapunov_residual: float
    ell: float
    c0: float
    norms: dict
    gamma_star0: float
    gamma_star1: float
    gamma_star: float
    gamma: float
    es: ErrorSystemMatrices = field(repr=False)

    # gamma-independent constants
    @property
    def constants(self) -> dict:
        n, ell, c0 = self.n, self.ell, self.c0
        apb, pb, bpb, ap, p = (self.norms[k] for k in ("ApB", "PB", "BPB", "AP", "P"))
        c1 = ell / math.sqrt(n)
        c2 = c1**2 / c0
        c4 = math.sqrt(n)
        out = {
            "c0": c0,
            "c1": c1,
            "c2": c2,
            "c3": c0 * ell / 2 + 2 * ell**2,
            "c4": c4,
            "c5": 2 * ell**2 / n,
            "c7": c2 + c4,
            "c8": 4 * apb**2 * ell**2 * n / c0 + 2 * apb * ell + pb * ell,
            "c9": 4 * pb**2 * ell**2 * n / c0 + pb * ell,
            "c10": 2 * bpb * ell**2,
            "c11": 2 * ap**2 + p,
            "c12": 2 * bpb * ell**2 * n,
        }
        g = self.gamma
        out["c6"] = self.c6(g)
        out["c13"] = self.c13(g)
        out["c14"] = self.c14(g)
        out["c15"] = self.c15(g)
        return dict(sorted(out.items(), key=lambda kv: int(kv[0][1:])))

    def c6(self, gamma: float) -> float:
        return 1 + 2 * self.ell / self.c0 + (2 / self.c0 + math.sqrt(self.n)) / gamma

    def c13(self, gamma: float) -> float:
        pb, ap, p = self.norms["PB"], self.norms["AP"], self.norms["P"]
        c9 = 4 * pb**2 * self.ell**2 * self.n / self.c0 + pb * self.ell
        c11 = 2 * ap**2 + p
        return c11 + c9 * gamma

    def c14(self, gamma: float) -> float:
        return self.c6(gamma) / (self.c0 * gamma)

    def c15(self, gamma: float) -> float:
        return self.c13(gamma) / (self.c0 * gamma)

    @property
    def q_gamma(self) -> float:
        return 1.0 - min(self.c0 * self.gamma, 1.0 / self.lambda_max)

    @property
    def alpha(self) -> float:
        return math.sqrt(max(1.0 / self.n, self.lambda_max) * max(self.n, 1.0 / self.lambda_min))

    @property
    def mu(self) -> float:
        return math.sqrt(self.q_gamma)

    @property
    def rho(self) -> float:
        return math.sqrt(self.c14(self.gamma) * max(self.n, 1.0 / self.lambda_min))

    @property
    def tau(self) -> float:
        return math.sqrt(self.c15(self.gamma) * max(self.n, 1.0 / self.lambda_min))

    def at(self, gamma: float) -> "Certificate":
        """Same certificate evaluated at another admissible step size."""
        _check_gamma(gamma, self.gamma_star)
        return replace(self, gamma=float(gamma))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ell": self.ell,
            "c0": self.c0,
            "gamma": self.gamma,
            "constants": self.constants,
            "operator_norms": dict(self.norms),
            "thresholds": {
                "gamma_star0": self.gamma_star0,
                "gamma_star1": self.gamma_star1,
                "gamma_star": self.gamma_star,
            },
            "q_gamma": self.q_gamma,
            "iss": {"alpha": self.alpha, "mu": self.mu, "rho": self.rho, "tau": self.tau},
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "lyapunov_residual": self.lyapunov_residual,
            "p_matrix": self.p_matrix.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _check_gamma(gamma, gamma_star):
    if not 0 < gamma < gamma_star:
        raise GammaRangeError(
            f"gamma={gamma!r} outside the certified range (0, {gamma_star!r})", gamma_star=gamma_star
        )


def compute_certificate(p: ProblemInstance, es: ErrorSystemMatrices, gamma="auto") -> Certificate:
    """Solve for ``P``, evaluate every constant and the ISS tuple.

    ``gamma="auto"`` picks half of the certified threshold.
    """
    n = es.n
    if p.n != n:
        raise DimensionError(f"problem has {p.n} agents, error system {n}")
    a, b = es.a, es.b
    q = 3.0 * np.eye(a.shape[0])
    pm = solve_discrete_lyapunov(a, q)
    residual = operator_norm(a.T @ pm @ a - pm + q)
    eig = symmetric_eigenvalues(pm)
    lam_lo, lam_hi = float(eig[0]), float(eig[-1])
    norms = {
        "ApB": operator_norm(a.T @ pm @ b),
        "PB": operator_norm(pm @ b),
        "BPB": operator_norm(b.T @ pm @ b),
        "AP": operator_norm(a.T @ pm),
        "P": operator_norm(pm),
    }
    ell, c0 = float(p.lipschitz_ell), float(p.strong_convexity_c0)
    probe = Certificate(n, pm, lam_lo, lam_hi, residual, ell, c0, norms, 0.0, 0.0, 0.0, 1.0, es)
    c = probe.constants
    gs0 = c0 / (2 * c["c3"])
    gs1 = min(gs0, (4 * c["c10"]) ** -0.5, 1 / (4 * c["c8"]), c0 / (2 * c["c12"]))
    gs = min(gs1, 1 / (2 * c["c7"]), (2 * c["c5"]) ** -0.5, 1 / (c0 * lam_hi), 1 / c0)
    if gamma == "auto":
        gamma = gs / 2
    gamma = float(gamma)
    _check_gamma(gamma, gs)
    pm.setflags(write=False)
    return Certificate(n, pm, lam_lo, lam_hi, residual, ell, c0, norms, gs0, gs1, gs, gamma, es)


def lyapunov_value(coords, cert: Certificate):
    """``(V1, V2, V)`` for ``coords = (xi_avg, xi_perp, zeta_perp)``."""
    xi_avg, xi_perp, zeta_perp = coords
    eta = np.concatenate([np.atleast_1d(np.asarray(xi_perp, float)), np.atleast_1d(np.asarray(zeta_perp, float))])
    if eta.shape != (cert.p_matrix.shape[0],):
        raise DimensionError(f"expected eta of length {cert.p_matrix.shape[0]}, got {eta.shape}")
    v1 = float(xi_avg) ** 2
    v2 = float(eta @ cert.p_matrix @ eta)
    return v1, v2, v1 + v2


def trajectory_coordinates(traj: TrajectoryRecord, eq: OptimalEquilibrium, basis: DispersionBasis):
    """Error coordinates for every recorded state, as arrays."""
    if traj.n != basis.n:
        raise DimensionError("trajectory and basis sizes differ")
    s = basis.s_matrix
    xi_avg = traj.x.mean(axis=1) - eq.theta_star
    xi_perp = traj.x @ s
    zeta_avg = traj.z.mean(axis=1)
    zeta_perp = (traj.z - eq.z_star) @ s
    return xi_avg, xi_perp, zeta_avg, zeta_perp


def distance_series(traj: TrajectoryRecord, eq: OptimalEquilibrium, basis: DispersionBasis) -> np.ndarray:
    xi_avg, xi_perp, _, zeta_perp = trajectory_coordinates(traj, eq, basis)
    return np.sqrt(basis.n * xi_avg**2 + (xi_perp**2).sum(axis=1) + (zeta_perp**2).sum(axis=1))


def _v_series(traj, cert, eq):
    xi_avg, xi_perp, _, zeta_perp = trajectory_coordinates(traj, eq, cert.es.basis)
    eta = np.hstack([xi_perp, zeta_perp])
    v2 = np.einsum("ti,ij,tj->t", eta, cert.p_matrix, eta)
    return xi_avg, eta, xi_avg**2 + v2


def _check_same_gamma(traj, cert, eq):
    if traj.algorithm != "wang_elia":
        raise ValueError("the certificate applies to Wang-Elia trajectories only")
    if not (math.isclose(traj.gamma, cert.gamma, rel_tol=1e-12) and math.isclose(eq.gamma, cert.gamma, rel_tol=1e-12)):
        raise GammaRangeError(
            f"gamma mismatch: trajectory {traj.gamma!r}, equilibrium {eq.gamma!r}, certificate {cert.gamma!r}",
            gamma_star=cert.gamma_star,
        )


@dataclass
class IssCheck:
    t: np.ndarray
    distance: np.ndarray
    rhs: np.ndarray
    slack: np.ndarray

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    def holds(self, rel_tol: float = 1e-9) -> bool:
        return bool(np.all(self.slack >= -rel_tol * (1.0 + self.rhs)))


def check_iss_bound(traj: TrajectoryRecord, cert: Certificate, eq: OptimalEquilibrium) -> IssCheck:
    """Pointwise slack of the ISS estimate along a recorded trajectory.

    Also stores ``dist_Astar``, ``V``, ``iss_bound`` and ``slack`` in
    ``traj.derived`` for export.
    """
    _check_same_gamma(traj, cert, eq)
    dist = distance_series(traj, eq, cert.es.basis)
    t = traj.t - traj.t[0]
    rhs = (
        cert.alpha * cert.mu ** t.astype(float) * dist[0]
        + cert.rho * traj.sup_wx_avg
        + cert.tau * traj.sup_w_perp
    )
    slack = rhs - dist
    _, _, v = _v_series(traj, cert, eq)
    traj.derived.update(dist_Astar=dist, V=v, iss_bound=rhs, slack=slack)
    return IssCheck(t=traj.t.copy(), distance=dist, rhs=rhs, slack=slack)


@dataclass
class DeltaVCheck:
    t: np.ndarray
    delta_v: np.ndarray
    bound: np.ndarray
    residual: np.ndarray
    v: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0

    def holds(self, rel_tol: float = 1e-9) -> bool:
        return bool(np.all(self.residual <= rel_tol * (1.0 + np.abs(self.v[:-1]))))


def check_delta_v(traj: TrajectoryRecord, cert: Certificate, eq: OptimalEquilibrium) -> DeltaVCheck:
    """Residual of the one-step dissipation inequality for V at each step.

    ``residual = dV - (-gamma c0 xi_avg**2 - |eta|**2 + c6 |w_x avg|**2 + c13 |delta_perp|**2)``
    should be nonpositive.
    """
    _check_same_gamma(traj, cert, eq)
    if not traj.is_contiguous():
        raise ValueError("dissipation check needs every step recorded (stride 1)")
    xi_avg, eta, v = _v_series(traj, cert, eq)
    s = cert.es.basis.s_matrix
    wx, wz = traj.wx[:-1], traj.wz[:-1]
    wbar_x = wx.mean(axis=1)
    delta_sq = ((wx @ s) ** 2).sum(axis=1) + ((wz @ s) ** 2).sum(axis=1)
    g = cert.gamma
    bound = (
        -g * cert.c0 * xi_avg[:-1] ** 2
        - (eta[:-1] ** 2).sum(axis=1)
        + cert.c6(g) * wbar_x**2
        + cert.c13(g) * delta_sq
    )
    dv = np.diff(v)
    return DeltaVCheck(t=traj.t[:-1].copy(), delta_v=dv, bound=bound, residual=dv - bound, v=v)


@dataclass
class IntegralAverageDiagnostic:
    t: np.ndarray
    running_sum: np.ndarray
    threshold: float

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.abs(self.running_sum) < self.threshold))

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.running_sum).max())


def integral_average_diagnostic(traj: TrajectoryRecord, threshold: float = 1e-2) -> IntegralAverageDiagnostic:
    """Running sum of the average ``z`` perturbation and whether it stays below ``threshold``."""
    return IntegralAverageDiagnostic(t=traj.t.copy(), running_sum=traj.sum_wz_avg.copy(), threshold=float(threshold))


def empirical_rate(t, distance, floor: float = 1e-12) -> float:
    """Per-step contraction factor from a least-squares fit of ``log distance``.

    Points below ``floor * distance[0]`` are dropped (roundoff plateau).
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(distance, dtype=float)
    ok = d > floor * max(d[0], np.finfo(float).tiny)
    if ok.sum() < 2:
        return 0.0
    slope = np.polyfit(t[ok], np.log(d[ok]), 1)[0]
    return float(math.exp(slope))

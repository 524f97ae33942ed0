"""Local costs, the stacked gradient map and the optimal steady-state locus.

A :class:`ProblemInstance` bundles ``N`` scalar costs together with the
Lipschitz constant ``ell`` of the stacked gradient ``Phi`` and the constant
``c0`` for which ``xi * sum_i (grad f_i(xi + theta*) - grad f_i(theta*)) >=
2 c0 N xi**2`` holds. Both constants feed every certificate formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AssumptionError, BracketError, ConstructionError, DimensionError
from .lincore import DispersionBasis
from .network import WeightMatrixK

__all__ = [
    "LocalCost",
    "ProblemInstance",
    "OptimalEquilibrium",
    "ErrorCoordinates",
    "quadratic_cost",
    "make_quadratic_problem",
    "make_problem",
    "solve_theta_star",
    "build_equilibrium",
    "distance_to_optimal_set",
    "error_coordinates",
    "state_from_error_coordinates",
]


@dataclass(frozen=True)
class LocalCost:
    eval: Callable[[float], float]
    grad: Callable[[float], float]
    kind: str = "custom"
    params: tuple = ()


def quadratic_cost(a: float, b: float) -> LocalCost:
    """``f(theta) = a (theta - b)**2``."""
    a, b = float(a), float(b)
    if a < 0:
        raise AssumptionError(f"quadratic curvature must be >= 0, got {a}")
    return LocalCost(
        eval=lambda th: a * (th - b) ** 2,
        grad=lambda th: 2.0 * a * (th - b),
        kind="quadratic",
        params=(a, b),
    )


@dataclass(frozen=True)
class ProblemInstance:
    costs: tuple
    lipschitz_ell: float
    strong_convexity_c0: float
    theta_star: float
    _quad: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def quadratic_params(self):
        """``(a, b)`` arrays when every cost is quadratic, else ``None``."""
        return self._quad

    def gradient(self, x) -> np.ndarray:
        """Stacked gradient ``Phi(x) = (grad f_1(x_1), ..., grad f_N(x_N))``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"expected state of length {self.n}, got {x.shape}")
        if self._quad is not None:
            a, b = self._quad
            return 2.0 * a * (x - b)
        return np.array([c.grad(float(xi)) for c, xi in zip(self.costs, x)])

    def local_gradient(self, i: int, xi: float) -> float:
        if self._quad is not None:
            a, b = self._quad
            return 2.0 * a[i] * (xi - b[i])
        return float(self.costs[i].grad(float(xi)))

    def total_gradient(self, theta: float) -> float:
        return float(sum(c.grad(float(theta)) for c in self.costs))

    def total_cost(self, theta: float) -> float:
        return float(sum(c.eval(float(theta)) for c in self.costs))

    def validate(self, rng=None, samples: int = 1000, span: float = 10.0) -> None:
        """Sampled checks of stationarity, strong convexity and Lipschitz bounds."""
        rng = np.random.default_rng(0 if rng is None else rng)
        ell, c0, n = self.lipschitz_ell, self.strong_convexity_c0, self.n
        g_star = self.total_gradient(self.theta_star)
        if abs(g_star) > 1e-10 * max(1.0, ell) * max(1.0, n):
            raise AssumptionError(f"sum of gradients at theta* is {g_star:.3e}, not zero")
        g0 = np.array([c.grad(self.theta_star) for c in self.costs])
        xis = rng.uniform(-span, span, samples)
        xis = xis[xis != 0.0]
        for xi in xis:
            g = np.array([c.grad(self.theta_star + xi) for c in self.costs])
            lhs = xi * float(np.sum(g - g0))
            if lhs < 2.0 * c0 * n * xi * xi * (1.0 - 1e-12):
                raise AssumptionError(
                    f"strong-convexity bound with c0={c0} fails at offset {xi:.6g}"
                )
        for _ in range(samples // 10 or 1):
            x = self.theta_star + rng.uniform(-span, span, n)
            y = self.theta_star + rng.uniform(-span, span, n)
            lhs = np.linalg.norm(self.gradient(x) - self.gradient(y))
            if lhs > ell * np.linalg.norm(x - y) * (1.0 + 1e-12):
                raise AssumptionError(f"Lipschitz bound with ell={ell} violated")


def make_quadratic_problem(params: Sequence, ell: float | None = None, c0: float | None = None):
    """Quadratic instance ``f_i(theta) = a_i (theta - b_i)**2``.

    Defaults are the tight constants ``ell = 2 max a_i`` and
    ``c0 = sum(a_i) / N``; overrides must remain valid and are checked.
    """
    params = [(float(a), float(b)) for a, b in params]
    if not params:
        raise AssumptionError("need at least one cost")
    a = np.array([p[0] for p in params])
    b = np.array([p[1] for p in params])
    if (a < 0).any():
        raise AssumptionError("curvatures a_i must be nonnegative")
    if a.sum() <= 0:
        raise AssumptionError("global cost is not strongly convex (all a_i = 0)")
    n = len(params)
    theta = float((a * b).sum() / a.sum())
    tight_ell = 2.0 * float(a.max())
    tight_c0 = float(a.sum()) / n
    if ell is not None and ell < tight_ell * (1 - 1e-12):
        raise AssumptionError(f"ell={ell} is below the Lipschitz constant {tight_ell}")
    if c0 is not None and not 0 < c0 <= tight_c0 * (1 + 1e-12):
        raise AssumptionError(f"c0={c0} must lie in (0, {tight_c0}]")
    a.setflags(write=False)
    b.setflags(write=False)
    return ProblemInstance(
        costs=tuple(quadratic_cost(ai, bi) for ai, bi in params),
        lipschitz_ell=tight_ell if ell is None else float(ell),
        strong_convexity_c0=tight_c0 if c0 is None else float(c0),
        theta_star=theta,
        _quad=(a, b),
    )


def make_problem(costs: Sequence[LocalCost], ell: float, c0: float, bracket=(-1e3, 1e3), rng=None):
    """Instance from arbitrary costs; ``ell`` and ``c0`` are verified by sampling."""
    costs = tuple(costs)
    if all(c.kind == "quadratic" for c in costs):
        return make_quadratic_problem([c.params for c in costs], ell=ell, c0=c0)
    theta = solve_theta_star(costs, bracket, ell=ell)
    p = ProblemInstance(costs, float(ell), float(c0), theta)
    p.validate(rng=rng)
    return p


def solve_theta_star(costs: Sequence[LocalCost], bracket=(-100.0, 100.0), ell: float = 1.0) -> float:
    """Root of ``sum_i grad f_i`` by bisection to width 1e-12, then one Newton step."""
    lo, hi = float(bracket[0]), float(bracket[1])

    def g(th):
        return float(sum(c.grad(th) for c in costs))

    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise BracketError(
            f"sum of gradients has the same sign at {lo} ({glo:.3g}) and {hi} ({ghi:.3g})"
        )
    while hi - lo > 1e-12 * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        gm = g(mid)
        if gm == 0.0:
            return mid
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    h = 1e-6 * max(1.0, abs(theta))
    slope = (g(theta + h) - g(theta - h)) / (2 * h)
    if slope > 0:
        cand = theta - g(theta) / slope
        if abs(g(cand)) < abs(g(theta)):
            theta = cand
    if abs(g(theta)) > 1e-10 * max(1.0, ell) * max(1, len(costs)):
        raise ArithmeticError(f"root polish failed: residual {g(theta):.3e}")
    return theta


@dataclass(frozen=True)
class OptimalEquilibrium:
    x_star: np.ndarray
    z_star: np.ndarray
    gamma: float
    theta_star: float


def build_equilibrium(p: ProblemInstance, k: WeightMatrixK, basis: DispersionBasis, gamma: float):
    """``x* = 1 theta*`` and ``z* = -gamma S (S^T K S)^{-1} S^T Phi(x*)``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    if not (p.n == k.n == basis.n):
        raise DimensionError(f"sizes differ: problem {p.n}, K {k.n}, basis {basis.n}")
    s = basis.s_matrix
    kk = np.asarray(k.k)
    x_star = np.full(p.n, p.theta_star)
    phi = p.gradient(x_star)
    m = s.T @ kk @ s
    try:
        y = np.linalg.solve(m, s.T @ phi)
    except np.linalg.LinAlgError as exc:
        raise ConstructionError("S^T K S is singular") from exc
    z_star = -gamma * (s @ y)
    # 1^T z* = 0 by construction; S has columns orthogonal to 1.
    scale = max(1.0, float(np.abs(gamma * phi).max()))
    eq_res = float(np.abs(kk @ x_star + kk @ z_star + gamma * phi).max())
    cons_res = float(np.abs(kk @ x_star).max())
    if eq_res > 1e-10 * scale or cons_res > 1e-12 * max(1.0, abs(p.theta_star)):
        raise ConstructionError(
            f"equilibrium residuals too large: {eq_res:.3e}, {cons_res:.3e}"
        )
    x_star.setflags(write=False)
    z_star.setflags(write=False)
    return OptimalEquilibrium(x_star=x_star, z_star=z_star, gamma=float(gamma), theta_star=p.theta_star)


@dataclass(frozen=True)
class ErrorCoordinates:
    xi_avg: float
    xi_perp: np.ndarray
    zeta_avg: float
    zeta_perp: np.ndarray


def _split_state(state, n):
    x, z = (np.asarray(v, dtype=float) for v in state)
    if x.shape != (n,) or z.shape != (n,):
        raise DimensionError(f"expected x and z of length {n}, got {x.shape} and {z.shape}")
    return x, z


def error_coordinates(state, eq: OptimalEquilibrium, basis: DispersionBasis) -> ErrorCoordinates:
    x, z = _split_state(state, basis.n)
    s = basis.s_matrix
    return ErrorCoordinates(
        xi_avg=float(x.mean() - eq.theta_star),
        xi_perp=s.T @ x,
        zeta_avg=float(z.mean()),
        zeta_perp=s.T @ (z - eq.z_star),
    )


def state_from_error_coordinates(coords: ErrorCoordinates, eq: OptimalEquilibrium, basis: DispersionBasis):
    s = basis.s_matrix
    n = basis.n
    x = np.full(n, coords.xi_avg + eq.theta_star) + s @ coords.xi_perp
    z = np.full(n, coords.zeta_avg) + s @ (coords.zeta_perp + s.T @ eq.z_star)
    return x, z


def distance_to_optimal_set(state, p: ProblemInstance, eq: OptimalEquilibrium, basis: DispersionBasis) -> float:
    """``|(x, z)|_{A*} = |(sqrt(N) xi_avg, xi_perp, zeta_perp)|``."""
    if p.n != basis.n:
        raise DimensionError(f"problem has {p.n} agents, basis {basis.n}")
    c = error_coordinates(state, eq, basis)
    return math.sqrt(
        p.n * c.xi_avg**2 + float(c.xi_perp @ c.xi_perp) + float(c.zeta_perp @ c.zeta_perp)
    )

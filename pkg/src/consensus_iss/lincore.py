"""Dense linear-algebra primitives for the average/dispersion coordinates.

The dispersion basis ``S`` is any ``N x (N-1)`` matrix with orthonormal
columns orthogonal to the all-ones vector. Together with ``1/N`` it defines
the change of coordinates ``T = [1^T/N; S^T]`` with inverse ``[1, S]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NotSchurError, NotSymmetricError

__all__ = [
    "DispersionBasis",
    "AvgDispPair",
    "build_dispersion_basis",
    "decompose",
    "recompose",
    "symmetric_eigh",
    "symmetric_eigenvalues",
    "spectral_radius",
    "solve_discrete_lyapunov",
    "lyapunov_by_iteration",
    "operator_norm",
]

# Kronecker solve is O(n^6); above this size hand over to Bartels-Stewart.
_VECTORIZED_MAX_DIM = 40


@dataclass(frozen=True)
class DispersionBasis:
    n: int
    s_matrix: np.ndarray

    @property
    def t_matrix(self) -> np.ndarray:
        return np.vstack([np.full((1, self.n), 1.0 / self.n), self.s_matrix.T])

    @property
    def t_inverse(self) -> np.ndarray:
        return np.hstack([np.ones((self.n, 1)), self.s_matrix])


@dataclass(frozen=True)
class AvgDispPair:
    avg: float
    disp: np.ndarray


def build_dispersion_basis(n: int) -> DispersionBasis:
    """Deterministic dispersion basis from a Householder reflector.

    The reflector ``H`` maps ``1/sqrt(n)`` onto the first canonical vector;
    being an involution, its first column is ``1/sqrt(n)`` and the remaining
    ``n - 1`` columns are an orthonormal basis of the complement.
    """
    if int(n) != n or n < 2:
        raise DimensionError(f"dispersion basis needs n >= 2, got {n!r}")
    n = int(n)
    u = np.full(n, 1.0 / np.sqrt(n))
    u[0] -= 1.0
    h = np.eye(n) - 2.0 * np.outer(u, u) / (u @ u)
    s = np.ascontiguousarray(h[:, 1:])
    s.setflags(write=False)
    return DispersionBasis(n=n, s_matrix=s)


def decompose(basis: DispersionBasis, chi) -> AvgDispPair:
    chi = np.asarray(chi, dtype=float)
    if chi.shape != (basis.n,):
        raise DimensionError(f"expected vector of length {basis.n}, got shape {chi.shape}")
    return AvgDispPair(avg=float(chi.mean()), disp=basis.s_matrix.T @ chi)


def recompose(basis: DispersionBasis, pair: AvgDispPair) -> np.ndarray:
    disp = np.asarray(pair.disp, dtype=float)
    if disp.shape != (basis.n - 1,):
        raise DimensionError(
            f"expected dispersion of length {basis.n - 1}, got shape {disp.shape}"
        )
    return np.full(basis.n, float(pair.avg)) + basis.s_matrix @ disp


def _check_symmetric(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > tol * scale:
        raise NotSymmetricError("matrix is not symmetric")
    return m


def symmetric_eigh(m):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    m = _check_symmetric(m)
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    residual = np.linalg.norm(m @ v - v * w, 2) if m.size else 0.0
    if residual > 1e-9 * max(1.0, operator_norm(m)):
        raise ArithmeticError(f"eigendecomposition residual {residual:.3e} too large")
    return w, v


def symmetric_eigenvalues(m) -> np.ndarray:
    return symmetric_eigh(m)[0]


def spectral_radius(m) -> float:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(m)).max())


def operator_norm(m) -> float:
    """Induced 2-norm (largest singular value)."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    if m.ndim == 1:
        return float(np.linalg.norm(m))
    return float(np.linalg.norm(m, 2))


def _check_lyapunov_inputs(a, q):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    q = _check_symmetric(q)
    if q.shape != a.shape:
        raise DimensionError(f"shape mismatch: a {a.shape}, q {q.shape}")
    if symmetric_eigenvalues(q)[0] <= 0:
        raise ValueError("q must be positive definite")
    rho = spectral_radius(a)
    if rho >= 1.0:
        raise NotSchurError(f"matrix is not Schur (spectral radius {rho:.12g})")
    return a, q


def solve_discrete_lyapunov(a, q) -> np.ndarray:
    """Solve ``a^T P a - P = -q`` for symmetric positive-definite ``P``.

    Small systems use the vectorized form ``(I - a^T (x) a^T) vec(P) = vec(q)``;
    larger ones go through scipy's Bartels-Stewart solver.
    """
    a, q = _check_lyapunov_inputs(a, q)
    n = a.shape[0]
    if n <= _VECTORIZED_MAX_DIM:
        lhs = np.eye(n * n) - np.kron(a.T, a.T)
        p = np.linalg.solve(lhs, q.reshape(-1)).reshape(n, n)
    else:
        p = scipy.linalg.solve_discrete_lyapunov(a.T, q)
    p = 0.5 * (p + p.T)
    residual = operator_norm(a.T @ p @ a - p + q)
    if residual > 1e-8 * operator_norm(q):
        raise ArithmeticError(f"Lyapunov residual {residual:.3e} exceeds tolerance")
    return p


def lyapunov_by_iteration(a, q, tol: float = 1e-12, max_iter: int = 100_000, doubling: bool = False):
    """Fixed-point iteration ``P <- a^T P a + q`` for the same equation.

    With ``doubling=True`` the squared-iterate (Smith) variant is used, which
    needs only ``O(log(1/(1 - rho)))`` steps for spectral radius ``rho``.
    """
    a, q = _check_lyapunov_inputs(a, q)
    p = q.copy()
    if doubling:
        ak = a.copy()
        for _ in range(200):
            inc = ak.T @ p @ ak
            p = p + inc
            ak = ak @ ak
            if operator_norm(inc) <= tol * operator_norm(p):
                break
    else:
        for _ in range(max_iter):
            nxt = a.T @ p @ a + q
            if operator_norm(nxt - p) <= tol * operator_norm(nxt):
                p = nxt
                break
            p = nxt
        else:
            raise ArithmeticError("fixed-point iteration did not converge")
    return 0.5 * (p + p.T)

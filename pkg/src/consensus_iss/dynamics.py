"""Update maps, perturbation models and trajectory rollout.

Two algorithms share the state ``(x, z)``:

* Wang-Elia:  ``x+ = (I - K) x - K z - gamma Phi(x) + w_x``,
  ``z+ = z + K x + w_z``.
* Gradient Tracking (canonical coordinates):
  ``x+ = R x + z - gamma Phi(x) + w_x``,
  ``z+ = C z - gamma (C - I) Phi(x) + w_z``.

Quantization of ``z`` is modelled natively and also reported as the
equivalent additive ``w_z`` so every run can be scored in one frame.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import DimensionError, NonFiniteStateError
from .lincore import build_dispersion_basis
from .network import StochasticPair, WeightMatrixK
from .problem import ProblemInstance

__all__ = [
    "AlgorithmState",
    "ZeroNoise",
    "UniformNoise",
    "ConstantNoise",
    "AlternatingNoise",
    "PerturbationSpec",
    "Stepper",
    "TrajectoryRecord",
    "wang_elia_step",
    "wang_elia_step_agentwise",
    "gradient_tracking_step",
    "gradient_tracking_step_agentwise",
    "quantize",
    "gt_quantized_z_step",
    "we_quantized_z_step",
    "rollout",
    "replay_mismatch",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

DEFAULT_DIVERGENCE_THRESHOLD = 1e6
_CHUNK = 1 << 16


@dataclass(frozen=True)
class AlgorithmState:
    x: np.ndarray
    z: np.ndarray
    t: int = 0

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        z = np.array(self.z, dtype=float)
        if x.ndim != 1 or x.shape != z.shape:
            raise DimensionError(f"x and z must be vectors of equal length, got {x.shape}, {z.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @classmethod
    def zeros(cls, n: int) -> "AlgorithmState":
        return cls(np.zeros(n), np.zeros(n), 0)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def norm(self) -> float:
        return math.sqrt(float(self.x @ self.x + self.z @ self.z))

    def require_finite(self):
        if not (np.isfinite(self.x).all() and np.isfinite(self.z).all()):
            raise NonFiniteStateError(f"state at t={self.t} has non-finite entries")


def _perturbation(w, n):
    if w is None:
        return np.zeros(n), np.zeros(n)
    wx, wz = (np.asarray(v, dtype=float) for v in w)
    if wx.shape != (n,) or wz.shape != (n,):
        raise DimensionError(f"perturbations must have length {n}")
    return wx, wz


def _check_step_inputs(s: AlgorithmState, n: int, gamma: float):
    s.require_finite()
    if s.n != n:
        raise DimensionError(f"state has {s.n} agents, network has {n}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")


def wang_elia_step(s: AlgorithmState, k: WeightMatrixK, p: ProblemInstance, gamma: float, w=None):
    kk = np.asarray(k.k)
    _check_step_inputs(s, kk.shape[0], gamma)
    wx, wz = _perturbation(w, s.n)
    kx = kk @ s.x
    x_next = s.x - kx - kk @ s.z - gamma * p.gradient(s.x) + wx
    z_next = s.z + kx + wz
    return AlgorithmState(x_next, z_next, s.t + 1)


def wang_elia_step_agentwise(s: AlgorithmState, k: WeightMatrixK, p: ProblemInstance, gamma: float, w=None):
    """Same map evaluated agent by agent, reading only neighbours' states."""
    _check_step_inputs(s, k.n, gamma)
    wx, wz = _perturbation(w, s.n)
    x_next = np.empty(s.n)
    z_next = np.empty(s.n)
    for i in range(1, s.n + 1):
        xi, zi = s.x[i - 1], s.z[i - 1]
        coupling = 0.0
        integral = 0.0
        for j in k.graph.neighbors(i):
            kij = k.edge_weights[(min(i, j), max(i, j))]
            coupling += kij * (s.x[j - 1] - xi + s.z[j - 1] - zi)
            integral += kij * (s.x[j - 1] - xi)
        x_next[i - 1] = xi + coupling - gamma * p.local_gradient(i - 1, xi) + wx[i - 1]
        z_next[i - 1] = zi - integral + wz[i - 1]
    return AlgorithmState(x_next, z_next, s.t + 1)


def gradient_tracking_step(s: AlgorithmState, rc: StochasticPair, p: ProblemInstance, gamma: float, w=None):
    r, c = np.asarray(rc.r), np.asarray(rc.c)
    _check_step_inputs(s, r.shape[0], gamma)
    wx, wz = _perturbation(w, s.n)
    phi = p.gradient(s.x)
    x_next = r @ s.x + s.z - gamma * phi + wx
    z_next = c @ s.z - gamma * (c @ phi - phi) + wz
    return AlgorithmState(x_next, z_next, s.t + 1)


def gradient_tracking_step_agentwise(s: AlgorithmState, rc: StochasticPair, p: ProblemInstance, gamma: float, w=None):
    r, c = np.asarray(rc.r), np.asarray(rc.c)
    _check_step_inputs(s, r.shape[0], gamma)
    wx, wz = _perturbation(w, s.n)
    phi = np.array([p.local_gradient(i, s.x[i]) for i in range(s.n)])
    x_next = np.empty(s.n)
    z_next = np.empty(s.n)
    for i in range(1, s.n + 1):
        local = [i] + rc.graph.neighbors(i)
        rx = sum(r[i - 1, j - 1] * s.x[j - 1] for j in local)
        cz = sum(c[i - 1, j - 1] * s.z[j - 1] for j in local)
        cphi = sum(c[i - 1, j - 1] * phi[j - 1] for j in local)
        x_next[i - 1] = rx + s.z[i - 1] - gamma * phi[i - 1] + wx[i - 1]
        z_next[i - 1] = cz - gamma * (cphi - phi[i - 1]) + wz[i - 1]
    return AlgorithmState(x_next, z_next, s.t + 1)


def quantize(v, resolution: float) -> np.ndarray:
    """Largest multiple of ``resolution`` not exceeding each entry."""
    if not resolution > 0:
        raise ValueError(f"resolution must be positive, got {resolution!r}")
    v = np.asarray(v, dtype=float)
    q = np.floor(v / resolution)
    q = np.where((q + 1.0) * resolution <= v, q + 1.0, q)
    q = np.where(q * resolution > v, q - 1.0, q)
    return q * resolution


def gt_quantized_z_step(s: AlgorithmState, rc: StochasticPair, p: ProblemInstance, gamma: float, resolution: float = 1e-5):
    """GT step with ``z+ = C Q(z) - gamma (C - I) Phi(x)``.

    Returns ``(next_state, w_z)`` where ``w_z = C (Q(z) - z)`` is the
    equivalent additive perturbation of the unquantized update.
    """
    r, c = np.asarray(rc.r), np.asarray(rc.c)
    _check_step_inputs(s, r.shape[0], gamma)
    phi = p.gradient(s.x)
    qz = quantize(s.z, resolution)
    x_next = r @ s.x + s.z - gamma * phi
    cq = c @ qz
    z_next = cq - gamma * (c @ phi - phi)
    return AlgorithmState(x_next, z_next, s.t + 1), cq - c @ s.z


def we_quantized_z_step(s: AlgorithmState, k: WeightMatrixK, p: ProblemInstance, gamma: float, resolution: float = 1e-5):
    """Wang-Elia step with ``z+ = Q(z) + K x``; returns ``(next_state, Q(z) - z)``."""
    kk = np.asarray(k.k)
    _check_step_inputs(s, kk.shape[0], gamma)
    qz = quantize(s.z, resolution)
    kx = kk @ s.x
    x_next = s.x - kx - kk @ s.z - gamma * p.gradient(s.x)
    return AlgorithmState(x_next, qz + kx, s.t + 1), qz - s.z


# -- perturbations -----------------------------------------------------------


@dataclass(frozen=True)
class ZeroNoise:
    def sample(self, rng, t0, length, n):
        return np.zeros((length, n))

    def to_dict(self):
        return {"type": "zero"}


@dataclass(frozen=True)
class UniformNoise:
    """Independent uniform entries on ``[-amplitude, amplitude]``."""

    amplitude: float

    def sample(self, rng, t0, length, n):
        return rng.uniform(-self.amplitude, self.amplitude, size=(length, n))

    def to_dict(self):
        return {"type": "uniform", "amplitude": self.amplitude}


@dataclass(frozen=True)
class ConstantNoise:
    value: float | tuple

    def sample(self, rng, t0, length, n):
        return np.broadcast_to(np.asarray(self.value, dtype=float), (length, n)).copy()

    def to_dict(self):
        v = self.value
        return {"type": "constant", "value": list(v) if isinstance(v, tuple) else v}


@dataclass(frozen=True)
class AlternatingNoise:
    """``+amplitude`` on even steps and ``-amplitude`` on odd ones, every agent."""

    amplitude: float

    def sample(self, rng, t0, length, n):
        sign = 1.0 - 2.0 * ((t0 + np.arange(length)) % 2)
        return np.repeat((self.amplitude * sign)[:, None], n, axis=1)

    def to_dict(self):
        return {"type": "alternating", "amplitude": self.amplitude}


def noise_from_dict(d) -> object:
    kind = d.get("type")
    if kind == "zero":
        return ZeroNoise()
    if kind == "uniform":
        return UniformNoise(float(d["amplitude"]))
    if kind == "constant":
        v = d["value"]
        return ConstantNoise(tuple(float(x) for x in v) if isinstance(v, list) else float(v))
    if kind == "alternating":
        return AlternatingNoise(float(d["amplitude"]))
    raise ValueError(f"unknown noise type {kind!r}")


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str = "none"
    resolution: float | None = None
    wx: object = None
    wz: object = None
    amplitude: float | None = None
    decay: float | None = None
    seed: int = 0

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def quantize_z(cls, resolution: float = 1e-5):
        if not resolution > 0:
            raise ValueError("quantization resolution must be positive")
        return cls("quantize_z", resolution=float(resolution))

    @classmethod
    def additive(cls, wx=None, wz=None, seed: int = 0):
        return cls("additive", wx=wx or ZeroNoise(), wz=wz or ZeroNoise(), seed=int(seed))

    @classmethod
    def vanishing(cls, amplitude: float, decay: float, seed: int = 0):
        if not 0 <= decay < 1:
            raise ValueError("decay must lie in [0, 1)")
        return cls("vanishing", amplitude=float(amplitude), decay=float(decay), seed=int(seed))

    def sampler(self):
        """Callable ``(t0, length, n) -> (wx, wz)``; ``None`` when no additive noise."""
        if self.kind in ("none", "quantize_z"):
            return None
        seqs = np.random.SeedSequence(self.seed).spawn(2)
        rx, rz = (np.random.Generator(np.random.Philox(s)) for s in seqs)
        if self.kind == "additive":
            def draw(t0, length, n):
                return self.wx.sample(rx, t0, length, n), self.wz.sample(rz, t0, length, n)
        elif self.kind == "vanishing":
            def draw(t0, length, n):
                env = self.amplitude * self.decay ** (t0 + np.arange(length, dtype=float))
                ux = rx.uniform(-1.0, 1.0, size=(length, n))
                uz = rz.uniform(-1.0, 1.0, size=(length, n))
                return ux * env[:, None], uz * env[:, None]
        else:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        return draw

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "quantize_z":
            d["resolution"] = self.resolution
        elif self.kind == "additive":
            d.update(wx=self.wx.to_dict(), wz=self.wz.to_dict(), seed=self.seed)
        elif self.kind == "vanishing":
            d.update(amplitude=self.amplitude, decay=self.decay, seed=self.seed)
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "none")
        if kind == "none":
            return cls.none()
        if kind == "quantize_z":
            return cls.quantize_z(float(d.get("resolution", 1e-5)))
        if kind == "additive":
            return cls.additive(
                noise_from_dict(d.get("wx", {"type": "zero"})),
                noise_from_dict(d.get("wz", {"type": "zero"})),
                seed=int(d.get("seed", 0)),
            )
        if kind == "vanishing":
            return cls.vanishing(float(d["amplitude"]), float(d["decay"]), seed=int(d.get("seed", 0)))
        raise ValueError(f"unknown perturbation kind {kind!r}")


# -- rollout -----------------------------------------------------------------


@dataclass(frozen=True)
class Stepper:
    """An algorithm with its weights, problem and step size."""

    algorithm: str
    gamma: float
    problem: ProblemInstance
    weights: object

    @classmethod
    def wang_elia(cls, k: WeightMatrixK, problem: ProblemInstance, gamma: float):
        return cls("wang_elia", float(gamma), problem, k)

    @classmethod
    def gradient_tracking(cls, rc: StochasticPair, problem: ProblemInstance, gamma: float):
        return cls("gradient_tracking", float(gamma), problem, rc)

    def __post_init__(self):
        if self.algorithm not in ("wang_elia", "gradient_tracking"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        want = WeightMatrixK if self.algorithm == "wang_elia" else StochasticPair
        if not isinstance(self.weights, want):
            raise TypeError(f"{self.algorithm} needs a {want.__name__}")
        if self.weights.graph.n != self.problem.n:
            raise DimensionError("network and problem sizes differ")

    @property
    def n(self) -> int:
        return self.problem.n

    def step(self, s: AlgorithmState, w=None, resolution: float | None = None):
        """One reference step; with ``resolution`` the quantized-z variant.

        Returns ``(next_state, (w_x, w_z))`` with the perturbation applied.
        """
        if self.algorithm == "wang_elia":
            if resolution is not None:
                nxt, wz = we_quantized_z_step(s, self.weights, self.problem, self.gamma, resolution)
                return nxt, (np.zeros(s.n), wz)
            wx, wz = _perturbation(w, s.n)
            return wang_elia_step(s, self.weights, self.problem, self.gamma, (wx, wz)), (wx, wz)
        if resolution is not None:
            nxt, wz = gt_quantized_z_step(s, self.weights, self.problem, self.gamma, resolution)
            return nxt, (np.zeros(s.n), wz)
        wx, wz = _perturbation(w, s.n)
        return gradient_tracking_step(s, self.weights, self.problem, self.gamma, (wx, wz)), (wx, wz)

    def _kernel_args(self):
        if self.algorithm == "wang_elia":
            m = np.ascontiguousarray(self.weights.k, dtype=float)
            return _kernels.WANG_ELIA, m, m
        return (
            _kernels.GRADIENT_TRACKING,
            np.ascontiguousarray(self.weights.r, dtype=float),
            np.ascontiguousarray(self.weights.c, dtype=float),
        )


@dataclass
class TrajectoryRecord:
    """Recorded states plus the perturbation applied at each recorded step.

    Row ``k`` holds the state at time ``t[k]`` and the perturbation that maps
    it to time ``t[k] + 1`` (NaN on the final row). ``sup_wx_avg`` and
    ``sup_w_perp`` are running suprema over steps ``0..t[k]-1`` of ``|w_x avg|``
    and ``|(S^T w_x, S^T w_z)|``; ``sum_wz_avg`` is the running sum of the
    average of ``w_z`` over the same steps.
    """

    algorithm: str
    gamma: float
    stride: int
    horizon: int
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    wx: np.ndarray
    wz: np.ndarray
    sup_wx_avg: np.ndarray
    sup_w_perp: np.ndarray
    sum_wz_avg: np.ndarray
    diverged_at: int | None = None
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec.none)
    derived: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def final_time(self) -> int:
        return int(self.t[-1])

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    def state(self, k: int) -> AlgorithmState:
        return AlgorithmState(self.x[k], self.z[k], int(self.t[k]))

    def norms(self) -> np.ndarray:
        return np.sqrt((self.x**2).sum(axis=1) + (self.z**2).sum(axis=1))

    def is_contiguous(self) -> bool:
        return bool(np.all(np.diff(self.t) == 1))


def _perp_norms(wx, wz, s):
    px = wx @ s
    pz = wz @ s
    return np.sqrt((px * px).sum(axis=1) + (pz * pz).sum(axis=1))


def rollout(
    initial: AlgorithmState,
    stepper: Stepper,
    pert: PerturbationSpec | None = None,
    horizon: int = 1000,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
    stride: int = 1,
) -> TrajectoryRecord:
    """Iterate the chosen update map for ``horizon`` steps.

    Stops early once ``|(x, z)|`` exceeds ``divergence_threshold`` or turns
    non-finite, recording the time in ``diverged_at``. Every ``stride``-th
    state and the final state are kept.
    """
    pert = pert or PerturbationSpec.none()
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    initial.require_finite()
    n = stepper.n
    if initial.n != n:
        raise DimensionError(f"initial state has {initial.n} agents, stepper {n}")
    s_mat = build_dispersion_basis(n).s_matrix if n >= 2 else np.zeros((1, 0))
    draw = pert.sampler()
    quantized = pert.kind == "quantize_z"
    res = pert.resolution if quantized else 1.0
    quad = stepper.problem.quadratic_params
    if quad is not None:
        alg, m1, m2 = stepper._kernel_args()
        a_arr = np.ascontiguousarray(quad[0], dtype=float)
        b_arr = np.ascontiguousarray(quad[1], dtype=float)
    empty = np.zeros((0, n))

    rows = {k: [] for k in ("t", "x", "z", "wx", "wz", "sa", "sp", "sz")}
    sup_avg = sup_perp = 0.0
    sum_wz = 0.0
    x, z = initial.x.copy(), initial.z.copy()
    t0 = int(initial.t)
    done = 0
    diverged_at = None
    if not math.sqrt(float(x @ x + z @ z)) <= divergence_threshold:
        diverged_at = t0

    while done < horizon and diverged_at is None:
        length = min(_CHUNK, horizon - done)
        wx_in, wz_in = draw(t0 + done, length, n) if draw else (empty, empty)
        xs = np.empty((length + 1, n))
        zs = np.empty((length + 1, n))
        wxs = np.empty((length, n))
        wzs = np.empty((length, n))
        xs[0], zs[0] = x, z
        if quad is not None:
            steps, status = _kernels.run_chunk(
                alg, quantized, m1, m2, a_arr, b_arr, stepper.gamma, res,
                np.ascontiguousarray(wx_in), np.ascontiguousarray(wz_in),
                length, divergence_threshold, xs, zs, wxs, wzs,
            )
        else:
            steps, status = _python_chunk(
                stepper, quantized, res, wx_in, wz_in, length, divergence_threshold, xs, zs, wxs, wzs, t0 + done
            )
        wbar_x = np.abs(wxs[:steps].mean(axis=1))
        wbar_z = wzs[:steps].mean(axis=1)
        perp = _perp_norms(wxs[:steps], wzs[:steps], s_mat)
        # statistics at state j of this chunk cover perturbations 0..j-1
        sa = np.concatenate([[sup_avg], np.maximum(sup_avg, np.maximum.accumulate(wbar_x))])
        sp = np.concatenate([[sup_perp], np.maximum(sup_perp, np.maximum.accumulate(perp))])
        sz = sum_wz + np.concatenate([[0.0], np.cumsum(wbar_z)])
        times = t0 + done + np.arange(steps + 1)
        keep = np.nonzero((times[:steps] - t0) % stride == 0)[0]
        rows["t"].append(times[keep])
        rows["x"].append(xs[keep])
        rows["z"].append(zs[keep])
        rows["wx"].append(wxs[keep])
        rows["wz"].append(wzs[keep])
        rows["sa"].append(sa[keep])
        rows["sp"].append(sp[keep])
        rows["sz"].append(sz[keep])
        x, z = xs[steps].copy(), zs[steps].copy()
        sup_avg, sup_perp, sum_wz = float(sa[steps]), float(sp[steps]), float(sz[steps])
        done += steps
        if status != _kernels.STATUS_OK:
            diverged_at = t0 + done

    nan_row = np.full((1, n), np.nan)
    for key, val in (
        ("t", [t0 + done]), ("x", x[None]), ("z", z[None]), ("wx", nan_row), ("wz", nan_row),
        ("sa", [sup_avg]), ("sp", [sup_perp]), ("sz", [sum_wz]),
    ):
        rows[key].append(np.asarray(val))
    cat = {k: np.concatenate(v) for k, v in rows.items()}
    return TrajectoryRecord(
        algorithm=stepper.algorithm,
        gamma=stepper.gamma,
        stride=stride,
        horizon=horizon,
        t=cat["t"].astype(int),
        x=cat["x"],
        z=cat["z"],
        wx=cat["wx"],
        wz=cat["wz"],
        sup_wx_avg=cat["sa"],
        sup_w_perp=cat["sp"],
        sum_wz_avg=cat["sz"],
        diverged_at=diverged_at,
        perturbation=pert,
    )


def _python_chunk(stepper, quantized, res, wx_in, wz_in, length, threshold, xs, zs, wxs, wzs, t_start):
    have_noise = wx_in.shape[0] > 0
    for t in range(length):
        s = AlgorithmState(xs[t], zs[t], t_start + t)
        w = (wx_in[t], wz_in[t]) if have_noise else None
        nxt, (wx, wz) = stepper.step(s, w, resolution=res if quantized else None)
        xs[t + 1], zs[t + 1] = nxt.x, nxt.z
        wxs[t], wzs[t] = wx, wz
        sq = float(nxt.x @ nxt.x + nxt.z @ nxt.z)
        if not math.isfinite(sq):
            return t + 1, _kernels.STATUS_NONFINITE
        if sq > threshold * threshold:
            return t + 1, _kernels.STATUS_THRESHOLD
    return length, _kernels.STATUS_OK


def replay_mismatch(traj: TrajectoryRecord, stepper: Stepper) -> float:
    """Largest deviation between recorded ``states[k+1]`` and a re-applied step.

    Uses the same update path as :func:`rollout`, so a faithful record gives
    exactly zero. Only consecutive rows are compared.
    """
    quantized = traj.perturbation.kind == "quantize_z"
    res = traj.perturbation.resolution if quantized else 1.0
    quad = stepper.problem.quadratic_params
    worst = 0.0
    n = traj.n
    for k in range(len(traj.t) - 1):
        if traj.t[k + 1] != traj.t[k] + 1:
            continue
        xs = np.empty((2, n))
        zs = np.empty((2, n))
        xs[0], zs[0] = traj.x[k], traj.z[k]
        wxs = np.empty((1, n))
        wzs = np.empty((1, n))
        wx_in = np.zeros((0, n)) if quantized else traj.wx[k : k + 1].copy()
        wz_in = np.zeros((0, n)) if quantized else traj.wz[k : k + 1].copy()
        if quad is not None:
            alg, m1, m2 = stepper._kernel_args()
            _kernels.run_chunk(
                alg, quantized, m1, m2, np.asarray(quad[0], float), np.asarray(quad[1], float),
                stepper.gamma, res, wx_in, wz_in, 1, np.inf, xs, zs, wxs, wzs,
            )
        else:
            _python_chunk(stepper, quantized, res, wx_in, wz_in, 1, np.inf, xs, zs, wxs, wzs, int(traj.t[k]))
        worst = max(
            worst,
            float(np.abs(xs[1] - traj.x[k + 1]).max()),
            float(np.abs(zs[1] - traj.z[k + 1]).max()),
        )
    return worst


# -- CSV export --------------------------------------------------------------

_DERIVED_COLUMNS = ("dist_Astar", "V", "iss_bound", "slack")


def trajectory_header(n: int) -> list[str]:
    cols = ["t"]
    for name in ("x", "z", "wx", "wz"):
        cols += [f"{name}_{i}" for i in range(1, n + 1)]
    return cols + list(_DERIVED_COLUMNS)


def write_trajectory_csv(traj: TrajectoryRecord, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = len(traj.t)
    derived = [np.asarray(traj.derived.get(c, np.full(rows, np.nan)), dtype=float) for c in _DERIVED_COLUMNS]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(traj.n))
        for k in range(rows):
            vals = [int(traj.t[k])]
            for arr in (traj.x, traj.z, traj.wx, traj.wz):
                vals += [repr(float(v)) for v in arr[k]]
            vals += [repr(float(d[k])) for d in derived]
            w.writerow(vals)
    return path


def read_trajectory_csv(path) -> dict:
    """Columns of an exported trajectory as float arrays (``t`` as int)."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, len(header))
    n = (len(header) - 1 - len(_DERIVED_COLUMNS)) // 4
    out = {"t": data[:, 0].astype(int)}
    for j, name in enumerate(("x", "z", "wx", "wz")):
        out[name] = data[:, 1 + j * n : 1 + (j + 1) * n]
    for j, name in enumerate(_DERIVED_COLUMNS):
        out[name] = data[:, 1 + 4 * n + j]
    return out

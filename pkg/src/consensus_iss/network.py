"""Communication graphs and the weight matrices built on them.

``K`` drives the Wang-Elia updates and must be symmetric with kernel
``span(1)`` and spectrum in ``[0, 1)``. Gradient Tracking instead needs a
row-stochastic ``R`` and a column-stochastic ``C`` with the graph's sparsity.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    ConstructionError,
    DimensionError,
    DisconnectedGraphError,
    GraphError,
    SpectrumError,
    WeightError,
)
from .lincore import build_dispersion_basis, spectral_radius, symmetric_eigenvalues

__all__ = [
    "Graph",
    "WeightMatrixK",
    "StochasticPair",
    "ValidationReport",
    "path_graph",
    "cycle_graph",
    "complete_graph",
    "star_graph",
    "random_connected_graph",
    "builtin_graph",
    "parse_edge_list",
    "build_k_metropolis",
    "build_k_custom",
    "build_k_from_adjacency",
    "build_stochastic_pair",
    "stochastic_pair_from_matrices",
    "validate_k",
    "metropolis_weights",
    "assemble_k",
]

# Upper spectral margin: lambda_max(K) must not exceed 1 - SPECTRAL_MARGIN.
SPECTRAL_MARGIN = 1e-9
DEFAULT_METROPOLIS_SCALE = 0.5


def _edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``1..n``."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise GraphError(f"graph needs n >= 1 vertices, got {self.n!r}")
        normalized = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise GraphError(f"edge ({i}, {j}) outside vertex range 1..{self.n}")
            normalized.add(_edge_key(i, j))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", frozenset(normalized))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable) -> "Graph":
        seen = set()
        for e in edges:
            i, j = (int(v) for v in e)
            key = _edge_key(i, j)
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
        return cls(n, frozenset(seen))

    def neighbors(self, i: int) -> list[int]:
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return sorted(out)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i - 1] += 1
            deg[j - 1] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n))
        for i, j in self.edges:
            adj[i - 1, j - 1] = adj[j - 1, i - 1] = 1.0
        return adj

    def is_connected(self) -> bool:
        adj = {v: [] for v in range(1, self.n + 1)}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {1}
        queue = deque([1])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return len(seen) == self.n

    def require_connected(self):
        if not self.is_connected():
            raise DisconnectedGraphError(f"graph on {self.n} vertices is not connected")


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(1, n)))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        return path_graph(n)
    return Graph(n, frozenset([(i, i + 1) for i in range(1, n)] + [(1, n)]))


def complete_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)))


def star_graph(n: int) -> Graph:
    return Graph(n, frozenset((1, j) for j in range(2, n + 1)))


def random_connected_graph(n: int, edge_prob: float = 0.3, rng=None) -> Graph:
    """Random spanning tree plus independent extra edges with ``edge_prob``."""
    rng = np.random.default_rng(rng)
    order = rng.permutation(n) + 1
    edges = set()
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        edges.add(_edge_key(int(order[k]), int(parent)))
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if rng.random() < edge_prob:
                edges.add((i, j))
    return Graph(n, frozenset(edges))


_BUILTINS = {
    "path": path_graph,
    "cycle": cycle_graph,
    "complete": complete_graph,
    "star": star_graph,
}


def builtin_graph(name: str, n: int, seed=None, edge_prob: float = 0.3) -> Graph:
    if name == "random":
        return random_connected_graph(n, edge_prob, rng=seed)
    try:
        return _BUILTINS[name](n)
    except KeyError:
        raise GraphError(
            f"unknown builtin graph {name!r}; expected one of {sorted(_BUILTINS) + ['random']}"
        ) from None


def parse_edge_list(text: str, n: int | None = None):
    """Parse an ``i j [weight]`` edge list (1-based ids, ``#`` comments).

    Returns ``(graph, weights)`` where ``weights`` is ``None`` when no line
    carries a weight. Mixing weighted and unweighted lines is an error.
    """
    edges = []
    weights = {}
    weighted_lines = unweighted_lines = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"line {lineno}: expected 'i j [weight]', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise GraphError(f"line {lineno}: cannot parse {raw!r}") from None
        key = _edge_key(i, j)
        if key in weights or key in edges:
            raise GraphError(f"line {lineno}: duplicate edge {key}")
        edges.append(key)
        if w is None:
            unweighted_lines += 1
        else:
            weighted_lines += 1
            weights[key] = w
    if weighted_lines and unweighted_lines:
        raise GraphError("edge list mixes weighted and unweighted lines")
    if n is None:
        n = max((max(e) for e in edges), default=0)
    graph = Graph.from_edges(n, edges)
    return graph, (weights if weighted_lines else None)


@dataclass(frozen=True)
class WeightMatrixK:
    k: np.ndarray
    edge_weights: Mapping
    graph: Graph

    @property
    def n(self) -> int:
        return self.graph.n


@dataclass(frozen=True)
class StochasticPair:
    r: np.ndarray
    c: np.ndarray
    graph: Graph


@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)

    def add(self, name: str, passed: bool, detail: str = ""):
        self.checks[name] = (bool(passed), detail)

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, (passed, _) in self.checks.items() if not passed]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": {k: {"passed": p, "detail": d} for k, (p, d) in self.checks.items()},
        }

    def __str__(self):
        lines = []
        for name, (passed, detail) in self.checks.items():
            tag = "PASS" if passed else "FAIL"
            lines.append(f"[{tag}] {name}" + (f": {detail}" if detail else ""))
        return "\n".join(lines)


def assemble_k(graph: Graph, weights: Mapping) -> np.ndarray:
    """``K`` with ``-k_ij`` off the diagonal and row sums on it; no validation."""
    k = np.zeros((graph.n, graph.n))
    for (i, j), w in weights.items():
        k[i - 1, j - 1] = k[j - 1, i - 1] = -w
    np.fill_diagonal(k, -k.sum(axis=1))
    return k


def validate_k(k, graph: Graph | None = None) -> ValidationReport:
    """Check every admissibility condition on ``K`` and collect the results."""
    k = np.asarray(k, dtype=float)
    report = ValidationReport()
    n = k.shape[0]
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        report.add("square", False, f"shape {k.shape}")
        return report
    asym = float(np.abs(k - k.T).max(initial=0.0))
    report.add("symmetric", asym == 0.0, f"max |K - K^T| = {asym:.3e}")
    ones = np.ones(n)
    row_res = float(np.abs(k @ ones).max(initial=0.0))
    col_res = float(np.abs(ones @ k).max(initial=0.0))
    report.add("K 1 = 0", row_res <= 1e-12, f"max |K 1| = {row_res:.3e}")
    report.add("1^T K = 0", col_res <= 1e-12, f"max |1^T K| = {col_res:.3e}")

    ksym = 0.5 * (k + k.T)
    eig = symmetric_eigenvalues(ksym) if n else np.zeros(0)
    lo, hi = float(eig[0]), float(eig[-1])
    in_range = lo >= -1e-12 and hi <= 1.0 - SPECTRAL_MARGIN
    report.add(
        "spectrum in [0, 1)",
        in_range,
        f"min eigenvalue {lo:.12g}, max eigenvalue {hi:.12g}",
    )
    if n >= 2:
        second = float(eig[1])
        report.add(
            "ker K = span 1",
            row_res <= 1e-12 and second > 1e-10,
            f"second-smallest eigenvalue {second:.3e}",
        )
        s = build_dispersion_basis(n).s_matrix
        m = s.T @ ksym @ s
        m_eig = symmetric_eigenvalues(0.5 * (m + m.T))
        report.add(
            "S^T K S invertible and Schur",
            m_eig[0] > 1e-10 and spectral_radius(m) < 1.0,
            f"spectrum of S^T K S in [{m_eig[0]:.6g}, {m_eig[-1]:.6g}]",
        )
    if graph is not None:
        if graph.n != n:
            report.add("sparsity", False, f"graph has {graph.n} vertices, K is {n}x{n}")
        else:
            bad = []
            for i in range(1, n + 1):
                for j in range(i + 1, n + 1):
                    on_edge = (i, j) in graph.edges
                    if on_edge and not (k[i - 1, j - 1] < 0 and k[j - 1, i - 1] < 0):
                        bad.append((i, j))
                    elif not on_edge and (k[i - 1, j - 1] != 0 or k[j - 1, i - 1] != 0):
                        bad.append((i, j))
            report.add(
                "sparsity",
                not bad,
                "matches graph" if not bad else f"mismatched pairs {bad[:5]}",
            )
    return report


def _finalize_k(graph: Graph, weights: Mapping) -> WeightMatrixK:
    if graph.n < 2:
        raise DimensionError("K needs at least two agents")
    k = assemble_k(graph, weights)
    eig = symmetric_eigenvalues(k)
    if eig[-1] > 1.0 - SPECTRAL_MARGIN:
        raise SpectrumError(
            f"largest eigenvalue of K is {eig[-1]:.12g}; need it below 1 - {SPECTRAL_MARGIN:g}",
            eigenvalue=float(eig[-1]),
        )
    report = validate_k(k, graph)
    if not report.ok:
        raise ConstructionError(f"K failed validation: {report.failures()}\n{report}")
    k.setflags(write=False)
    return WeightMatrixK(k=k, edge_weights=dict(weights), graph=graph)


def build_k_metropolis(graph: Graph, scale: float = DEFAULT_METROPOLIS_SCALE) -> WeightMatrixK:
    """``k_ij = scale / (1 + max(deg i, deg j))`` on every edge.

    ``K = scale * (I - W)`` with ``W`` the Metropolis matrix, whose spectrum
    lies in ``(-1, 1]``; ``scale <= 1/2`` is therefore always admissible. For
    larger scales the spectral check may reject the result.
    """
    if not 0.0 < scale <= 1.0:
        raise WeightError(f"scale must lie in (0, 1], got {scale!r}")
    graph.require_connected()
    return _finalize_k(graph, metropolis_weights(graph, scale))


def metropolis_weights(graph: Graph, scale: float = DEFAULT_METROPOLIS_SCALE) -> dict:
    deg = graph.degrees()
    return {(i, j): scale / (1.0 + max(deg[i - 1], deg[j - 1])) for i, j in sorted(graph.edges)}


def build_k_custom(graph: Graph, weights: Mapping) -> WeightMatrixK:
    graph.require_connected()
    normalized = {}
    for e, w in weights.items():
        key = _edge_key(int(e[0]), int(e[1]))
        if key in normalized:
            raise WeightError(f"edge {key} given twice")
        normalized[key] = float(w)
    missing = graph.edges - normalized.keys()
    extra = normalized.keys() - graph.edges
    if missing:
        raise WeightError(f"missing weights for edges {sorted(missing)}")
    if extra:
        raise WeightError(f"weights given for non-edges {sorted(extra)}")
    bad = {e: w for e, w in normalized.items() if not (w > 0 and np.isfinite(w))}
    if bad:
        raise WeightError(f"edge weights must be positive and finite: {bad}")
    return _finalize_k(graph, normalized)


def build_k_from_adjacency(graph: Graph, beta: float, adjacency_weights: Mapping | None = None):
    """``k_ij = beta * a_ij``, the parametrization of the original algorithm."""
    a = adjacency_weights or {e: 1.0 for e in graph.edges}
    return build_k_custom(graph, {e: beta * w for e, w in a.items()})


def _check_stochastic(r, c, graph: Graph) -> None:
    n = graph.n
    if r.shape != (n, n) or c.shape != (n, n):
        raise DimensionError(f"expected {n}x{n} matrices, got {r.shape} and {c.shape}")
    ones = np.ones(n)
    if np.abs(r @ ones - ones).max() > 1e-12:
        raise ConstructionError("R is not row stochastic")
    if np.abs(ones @ c - ones).max() > 1e-12:
        raise ConstructionError("C is not column stochastic")
    if (r < 0).any() or (c < 0).any():
        raise ConstructionError("stochastic matrices must be entrywise nonnegative")
    for i in range(n):
        for j in range(n):
            if i != j and _edge_key(i + 1, j + 1) not in graph.edges:
                if r[i, j] != 0 or c[i, j] != 0:
                    raise ConstructionError(f"entry ({i + 1}, {j + 1}) violates graph sparsity")


def build_stochastic_pair(graph: Graph, self_weight: float = 0.5) -> StochasticPair:
    """Doubly stochastic ``R = C = I - s (I - W)`` with ``W`` Metropolis.

    The scale ``s`` is chosen so that the smallest diagonal entry equals
    ``self_weight``.
    """
    if not 0.0 < self_weight < 1.0:
        raise WeightError(f"self_weight must lie in (0, 1), got {self_weight!r}")
    graph.require_connected()
    n = graph.n
    if n == 1:
        r = np.ones((1, 1))
    else:
        deg = graph.degrees()
        lap = np.zeros((n, n))
        for i, j in graph.edges:
            w = 1.0 / (1.0 + max(deg[i - 1], deg[j - 1]))
            lap[i - 1, j - 1] = lap[j - 1, i - 1] = -w
        np.fill_diagonal(lap, -lap.sum(axis=1))
        s = (1.0 - self_weight) / lap.diagonal().max()
        r = np.eye(n) - s * lap
    c = r.copy()
    _check_stochastic(r, c, graph)
    r.setflags(write=False)
    c.setflags(write=False)
    return StochasticPair(r=r, c=c, graph=graph)


def stochastic_pair_from_matrices(r, c, graph: Graph) -> StochasticPair:
    r = np.array(r, dtype=float)
    c = np.array(c, dtype=float)
    _check_stochastic(r, c, graph)
    r.setflags(write=False)
    c.setflags(write=False)
    return StochasticPair(r=r, c=c, graph=graph)

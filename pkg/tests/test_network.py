import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_iss.errors import (
    ConstructionError,
    DimensionError,
    DisconnectedGraphError,
    GraphError,
    SpectrumError,
    WeightError,
)
from consensus_iss.lincore import build_dispersion_basis, symmetric_eigenvalues
from consensus_iss.network import (
    Graph,
    assemble_k,
    build_k_custom,
    build_k_from_adjacency,
    build_k_metropolis,
    build_stochastic_pair,
    builtin_graph,
    complete_graph,
    cycle_graph,
    parse_edge_list,
    path_graph,
    random_connected_graph,
    star_graph,
    stochastic_pair_from_matrices,
    validate_k,
)

PAIR = Graph.from_edges(2, [(1, 2)])


def test_graph_basics():
    g = Graph.from_edges(4, [(2, 1), (2, 3), (3, 4)])
    assert g.edges == frozenset({(1, 2), (2, 3), (3, 4)})
    assert g.neighbors(2) == [1, 3]
    assert list(g.degrees()) == [1, 2, 2, 1]
    assert g.is_connected()
    assert not Graph.from_edges(3, [(1, 2)]).is_connected()
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(1, 1)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(1, 4)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(1, 2), (2, 1)])


def test_builtin_families():
    assert len(path_graph(5).edges) == 4
    assert len(cycle_graph(5).edges) == 5
    assert len(complete_graph(5).edges) == 10
    assert len(star_graph(5).edges) == 4
    assert builtin_graph("random", 6, seed=3) == builtin_graph("random", 6, seed=3)
    with pytest.raises(GraphError):
        builtin_graph("lattice", 4)


def test_metropolis_two_agents():
    k = build_k_metropolis(PAIR, 0.4)
    assert k.edge_weights[(1, 2)] == pytest.approx(0.2)
    assert np.allclose(k.k, [[0.2, -0.2], [-0.2, 0.2]])
    assert np.allclose(symmetric_eigenvalues(k.k), [0.0, 0.4], atol=1e-15)


def test_metropolis_path3_full_scale_rejected():
    # K = L / 3 has eigenvalues {0, 1/3, 1}: boundary, rejected not rescaled
    k = assemble_k(path_graph(3), {(1, 2): 1 / 3, (2, 3): 1 / 3})
    assert np.allclose(symmetric_eigenvalues(k), [0, 1 / 3, 1])
    with pytest.raises(SpectrumError) as exc:
        build_k_metropolis(path_graph(3), 1.0)
    assert exc.value.eigenvalue == pytest.approx(1.0)


def test_metropolis_disconnected_rejected():
    with pytest.raises(DisconnectedGraphError):
        build_k_metropolis(Graph.from_edges(2, []))
    with pytest.raises(ValueError):
        build_k_metropolis(PAIR, 0.0)


def test_custom_weights():
    k = build_k_custom(PAIR, {(1, 2): 0.2})
    assert np.allclose(k.k, [[0.2, -0.2], [-0.2, 0.2]])
    with pytest.raises(SpectrumError):
        build_k_custom(PAIR, {(1, 2): 0.6})
    with pytest.raises(WeightError):
        build_k_custom(PAIR, {(1, 2): -0.1})
    with pytest.raises(WeightError):
        build_k_custom(path_graph(3), {(1, 2): 0.1})
    with pytest.raises(WeightError):
        build_k_custom(PAIR, {(1, 2): 0.1, (2, 3): 0.1})


def test_k_from_adjacency():
    k = build_k_from_adjacency(path_graph(3), 0.25)
    assert np.allclose(k.k, 0.25 * np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]]))


def test_single_agent_rejected():
    with pytest.raises(DimensionError):
        build_k_custom(Graph.from_edges(1, []), {})


def test_stochastic_pair_two_agents():
    rc = build_stochastic_pair(PAIR, 0.8)
    assert np.allclose(rc.r, [[0.8, 0.2], [0.2, 0.8]], atol=1e-15)
    assert np.allclose(rc.c, rc.r)


def test_stochastic_pair_complete3():
    rc = build_stochastic_pair(complete_graph(3), 0.8)
    for m in (rc.r, rc.c):
        assert np.abs(m.sum(0) - 1).max() <= 1e-12
        assert np.abs(m.sum(1) - 1).max() <= 1e-12


def test_stochastic_pair_rejects_isolated_vertex():
    with pytest.raises(DisconnectedGraphError):
        build_stochastic_pair(Graph.from_edges(3, [(1, 2)]), 0.5)
    with pytest.raises(ValueError):
        build_stochastic_pair(PAIR, 1.0)


def test_stochastic_pair_from_matrices():
    r = [[0.7, 0.3], [0.3, 0.7]]
    rc = stochastic_pair_from_matrices(r, r, PAIR)
    assert np.allclose(rc.r, r)
    with pytest.raises(ValueError):
        stochastic_pair_from_matrices([[0.5, 0.6], [0.5, 0.4]], r, PAIR)


def test_validate_k_reports():
    good = build_k_custom(PAIR, {(1, 2): 0.2})
    rep = validate_k(good.k, PAIR)
    assert rep.ok, str(rep)
    broken = np.array(good.k)
    broken[0, 1] += 1e-3
    rep = validate_k(broken, PAIR)
    assert "symmetric" in rep.failures()
    lap = assemble_k(path_graph(3), {(1, 2): 1.0, (2, 3): 1.0})
    rep = validate_k(lap, path_graph(3))
    assert "spectrum in [0, 1)" in rep.failures()
    assert "3" in rep.checks["spectrum in [0, 1)"][1]
    assert "[FAIL]" in str(rep) and rep.to_dict()["ok"] is False


def test_parse_edge_list():
    g, w = parse_edge_list("# ring\n1 2\n2 3\n3 1\n")
    assert g.n == 3 and w is None and len(g.edges) == 3
    g, w = parse_edge_list("1 2 0.1\n2 3 0.2\n", n=4)
    assert g.n == 4 and w == {(1, 2): 0.1, (2, 3): 0.2}
    with pytest.raises(GraphError, match="line 2"):
        parse_edge_list("1 2\n2 x\n")
    with pytest.raises(GraphError, match="mixes"):
        parse_edge_list("1 2 0.1\n2 3\n")
    with pytest.raises(GraphError, match="duplicate"):
        parse_edge_list("1 2\n2 1\n")


@given(st.integers(2, 10), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_constructed_k_invariants(n, p, seed):
    g = random_connected_graph(n, p, rng=seed)
    k = build_k_metropolis(g).k
    s = build_dispersion_basis(n).s_matrix
    assert np.abs(k @ np.ones(n)).max() <= 1e-12
    assert np.abs(np.ones(n) @ k).max() <= 1e-12
    eig = symmetric_eigenvalues(s.T @ k @ s)
    assert eig.min() > 0 and eig.max() < 1


@given(st.integers(2, 10), st.floats(0.0, 1.0), st.floats(0.01, 0.99), st.integers(0, 2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_metropolis_scale_below_one(n, p, scale, seed):
    # scale <= 1/2 is always admissible; larger scales either pass or are rejected
    g = random_connected_graph(n, p, rng=seed)
    try:
        k = build_k_metropolis(g, scale)
    except SpectrumError:
        assert scale > 0.5
        return
    assert symmetric_eigenvalues(k.k)[-1] < 1


@given(st.integers(2, 10), st.floats(0.0, 1.0), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_stochastic_pair_doubly_stochastic(n, p, sw, seed):
    rc = build_stochastic_pair(random_connected_graph(n, p, rng=seed), sw)
    for m in (rc.r, rc.c):
        assert np.abs(m.sum(0) - 1).max() <= 1e-12
        assert np.abs(m.sum(1) - 1).max() <= 1e-12
        assert m.min() >= 0


def test_construction_error_type():
    assert issubclass(ConstructionError, ValueError)

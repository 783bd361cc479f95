import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph, two_bridged_cliques
from nodemoe import _fallback, kernels
from nodemoe.graph import (
    GraphError,
    OperatorKind,
    apply_operator,
    build_graph,
    detect_communities,
    graph_homophily,
    modularity,
    node_homophily,
)

edge_lists = st.integers(2, 25).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=80)))


def dense_reference(g, kind):
    a = g.dense_adjacency()
    deg = a.sum(axis=1)
    dis = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1)), 0.0)
    di = np.where(deg > 0, 1.0 / np.where(deg > 0, deg, 1), 0.0)
    sym = dis[:, None] * a * dis[None, :]
    return {
        OperatorKind.ADJACENCY: a,
        OperatorKind.SYM_ADJ: sym,
        OperatorKind.ROW_ADJ: di[:, None] * a,
        OperatorKind.SYM_LAPLACIAN: np.eye(g.num_nodes) - sym,
        OperatorKind.SHIFTED_LAPLACIAN: -sym,
    }[kind]


# ------------------------------------------------------------ construction


def test_single_edge():
    g = build_graph([(0, 1)], 2)
    assert g.degrees.tolist() == [1, 1]
    assert g.neighbors(0).tolist() == [1]
    assert g.neighbors(1).tolist() == [0]


def test_dedup_and_self_loop_drop():
    g = build_graph([(0, 1), (1, 0), (0, 0)], 2)
    ref = build_graph([(0, 1)], 2)
    assert np.array_equal(g.csr_offsets, ref.csr_offsets)
    assert np.array_equal(g.csr_targets, ref.csr_targets)


def test_triangle_degrees():
    assert build_graph([(0, 1), (1, 2), (0, 2)], 3).degrees.tolist() == [2, 2, 2]


@pytest.mark.parametrize("edges,n", [([(0, 2)], 2), ([(-1, 0)], 3), ([], 0)])
def test_build_errors(edges, n):
    with pytest.raises(GraphError):
        build_graph(edges, n)


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_csr_invariants(case):
    n, edges = case
    g = build_graph(edges, n)
    off, tg = g.csr_offsets, g.csr_targets
    assert np.all(np.diff(off) >= 0) and off[-1] == len(tg)
    assert np.array_equal(g.degrees, np.diff(off))
    pairs = {(i, int(j)) for i in range(n) for j in g.neighbors(i)}
    assert all((j, i) in pairs for i, j in pairs)
    assert all(i != j for i, j in pairs)
    assert len(pairs) == len(tg)
    for i in range(n):
        row = g.neighbors(i)
        assert np.all(np.diff(row) > 0)
    expected = {(min(u, v), max(u, v)) for u, v in edges if u != v}
    assert {tuple(e) for e in g.edge_list().tolist()} == expected


# ------------------------------------------------------------ operators


def test_k2_sym_adj_swaps():
    g = build_graph([(0, 1)], 2)
    out = apply_operator(g.operator("sym_adj"), np.array([[1.0], [3.0]]))
    assert out.tolist() == [[3.0], [1.0]]


def test_k2_sym_laplacian():
    g = build_graph([(0, 1)], 2)
    out = apply_operator(g.operator("sym_laplacian"), np.array([[1.0], [3.0]]))
    assert out.tolist() == [[-2.0], [2.0]]


def test_row_adj_fixes_constants():
    g = build_graph([(0, 1), (1, 2), (0, 2)], 3)
    out = apply_operator(g.operator("row_adj"), np.full((3, 1), 5.0))
    assert np.allclose(out, 5.0)


def test_isolated_node_convention():
    g = build_graph([(0, 1)], 3)
    x = np.array([[1.0], [2.0], [7.0]])
    assert apply_operator(g.operator("sym_adj"), x)[2, 0] == 0.0
    assert apply_operator(g.operator("row_adj"), x)[2, 0] == 0.0
    assert apply_operator(g.operator("sym_laplacian"), x)[2, 0] == 7.0
    # L - I is zero on an isolated row since L acts as the identity there
    assert apply_operator(g.operator("shifted_laplacian"), x)[2, 0] == 0.0


def test_row_mismatch():
    g = build_graph([(0, 1)], 2)
    with pytest.raises(GraphError):
        apply_operator(g.operator("sym_adj"), np.ones((3, 2)))


def test_vector_input():
    g = build_graph([(0, 1)], 2)
    assert apply_operator(g.operator("sym_adj"), np.array([1.0, 3.0])).tolist() == [3.0, 1.0]


@pytest.mark.parametrize("kind", list(OperatorKind))
def test_dense_oracle(kind, rng):
    for trial in range(10):
        n = int(rng.integers(2, 51))
        g = random_graph(n, rng.uniform(0.02, 0.5), rng)
        x = rng.standard_normal((n, 4))
        ref = dense_reference(g, kind) @ x
        out = apply_operator(g.operator(kind), x)
        assert out.shape == x.shape
        assert np.max(np.abs(out - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_spectra_ranges(rng):
    for _ in range(10):
        g = random_graph(int(rng.integers(3, 30)), 0.3, rng)
        ev_adj = np.linalg.eigvalsh(g.operator("sym_adj").dense())
        ev_lap = np.linalg.eigvalsh(g.operator("sym_laplacian").dense())
        assert ev_adj.min() >= -1 - 1e-10 and ev_adj.max() <= 1 + 1e-10
        assert ev_lap.min() >= -1e-10 and ev_lap.max() <= 2 + 1e-10


def test_row_adj_transpose(rng):
    g = random_graph(20, 0.2, rng)
    op = g.operator("row_adj")
    y = rng.standard_normal((20, 3))
    assert np.allclose(op.apply_transpose(y), op.dense().T @ y, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3),
       st.sampled_from([k.value for k in OperatorKind]))
def test_linearity(seed, a, b, kind):
    rng = np.random.default_rng(seed)
    g = random_graph(15, 0.3, rng)
    x, y = rng.standard_normal((2, 15, 3))
    op = g.operator(kind)
    lhs = apply_operator(op, a * x + b * y)
    rhs = a * apply_operator(op, x) + b * apply_operator(op, y)
    assert np.allclose(lhs, rhs, atol=1e-10, rtol=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    n = 18
    g = random_graph(n, 0.25, rng)
    perm = rng.permutation(n)
    gp = g.permute(perm)
    x = rng.standard_normal((n, 2))
    xp = np.empty_like(x)
    xp[perm] = x
    labels = rng.integers(0, 3, n)
    lp = np.empty_like(labels)
    lp[perm] = labels
    for kind in OperatorKind:
        out = apply_operator(g.operator(kind), x)
        assert np.allclose(apply_operator(gp.operator(kind), xp)[perm], out, atol=1e-12)
    h, hp = node_homophily(g, labels), node_homophily(gp, lp)
    assert np.allclose(hp[perm], h, equal_nan=True)


# ------------------------------------------------------------ homophily


def test_homophily_k2():
    g = build_graph([(0, 1)], 2)
    assert node_homophily(g, np.array([0, 0])).tolist() == [1.0, 1.0]
    assert graph_homophily(g, np.array([0, 0])) == 1.0
    assert node_homophily(g, np.array([0, 1])).tolist() == [0.0, 0.0]
    assert graph_homophily(g, np.array([0, 1])) == 0.0


def test_homophily_path():
    g = build_graph([(0, 1), (1, 2)], 3)
    labels = np.array([0, 0, 1])
    assert node_homophily(g, labels).tolist() == [1.0, 0.5, 0.0]
    assert graph_homophily(g, labels) == 0.5


def test_homophily_isolated_nan():
    g = build_graph([(0, 1)], 3)
    h = node_homophily(g, np.array([0, 0, 0]))
    assert np.isnan(h[2])
    assert graph_homophily(g, np.array([0, 0, 0])) == 1.0


@settings(max_examples=40, deadline=None)
@given(edge_lists, st.integers(0, 1000))
def test_homophily_range_and_mean(case, seed):
    n, edges = case
    g = build_graph(edges, n)
    labels = np.random.default_rng(seed).integers(0, 3, n)
    h = node_homophily(g, labels)
    finite = h[~np.isnan(h)]
    assert np.all((finite >= 0) & (finite <= 1))
    assert np.all(np.isnan(h) == (g.degrees == 0))
    if finite.size:
        assert graph_homophily(g, labels) == pytest.approx(finite.mean(), abs=1e-15)


# ------------------------------------------------------------ communities


def test_two_triangles():
    g = build_graph([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], 6)
    c = detect_communities(g, seed=0)
    assert c.tolist() == [0, 0, 0, 1, 1, 1]


def test_k5_single_community():
    g = build_graph([(i, j) for i in range(5) for j in range(i + 1, 5)], 5)
    assert set(detect_communities(g, seed=3).tolist()) == {0}


@pytest.mark.parametrize("seed", range(5))
def test_bridged_cliques_split(seed):
    g = two_bridged_cliques()
    c = detect_communities(g, seed=seed)
    assert len(set(c[:10])) == 1 and len(set(c[10:])) == 1 and c[0] != c[10]
    split = np.repeat([0, 1], 10)
    assert modularity(g, split) > modularity(g, np.zeros(20, dtype=np.int64))
    assert modularity(g, c) == pytest.approx(modularity(g, split))


def test_communities_deterministic(rng):
    g = random_graph(60, 0.08, rng)
    assert np.array_equal(detect_communities(g, seed=7), detect_communities(g, seed=7))


def test_modularity_oracle():
    g = two_bridged_cliques()
    # 2 cliques of 45 edges + 1 bridge: m = 91; each side has degree sum 91
    expected = 90 / 91 - 2 * (91 / 182) ** 2
    assert modularity(g, np.repeat([0, 1], 10)) == pytest.approx(expected, abs=1e-12)


# ------------------------------------------------------------ backend parity


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_kernel_parity(rng):
    from nodemoe import _kernels

    g = random_graph(80, 0.1, rng)
    x = rng.standard_normal((80, 5))
    s = g.inv_sqrt_degrees()
    assert np.allclose(_kernels.csr_spmm(g.csr_offsets, g.csr_targets, s, s, x),
                       _fallback.csr_spmm(g.csr_offsets, g.csr_targets, s, s, x), atol=1e-13)
    labels = rng.integers(0, 3, 80)
    assert np.array_equal(_kernels.same_label_counts(g.csr_offsets, g.csr_targets, labels),
                          _fallback.same_label_counts(g.csr_offsets, g.csr_targets, labels))
    order = rng.permutation(80).astype(np.int64)
    la, lb = np.arange(80, dtype=np.int64), np.arange(80, dtype=np.int64)
    z = np.zeros(80, dtype=np.int64)
    ca = _kernels.label_propagation_sweep(g.csr_offsets, g.csr_targets, order, la, z)
    cb = _fallback.label_propagation_sweep(g.csr_offsets, g.csr_targets, order, lb, z.copy())
    assert ca == cb and np.array_equal(la, lb)


def test_fallback_forced_by_env():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-c", "import nodemoe.kernels as k; print(k.BACKEND)"],
                         env={"NODEMOE_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True)
    assert out.stdout.strip() == "python"

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph, two_bridged_cliques
from nodemoe.analysis import (
    accuracy_by_homophily,
    bucketize,
    community_homophily,
    density_mode,
    gate_weight_by_homophily,
    homophily_density,
    induced_subgraph,
    silverman_bandwidth,
    svg_line_plot,
    table_to_csv,
)
from nodemoe.csbm import generate, regime1
from nodemoe.graph import build_graph, node_homophily


def test_all_homophilic_top_bin():
    g = build_graph([(0, 1), (1, 2), (0, 2), (3, 4)], 5)
    table = homophily_density(g, np.zeros(5, dtype=int), bins=10)
    assert density_mode(table) == pytest.approx(0.95)
    assert table[-1]["density"] == max(r["density"] for r in table)


def test_density_mode_csbm():
    s = generate(regime1(0).replace(P=1.0))
    table = homophily_density(s.graph, s.labels, bins=50)
    assert abs(density_mode(table) - 0.05 / 0.06) <= 0.03


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 60))
def test_density_integrates_to_one(seed, bins):
    rng = np.random.default_rng(seed)
    g = random_graph(40, 0.15, rng)
    table = homophily_density(g, rng.integers(0, 3, 40), bins=bins)
    if all(r["density"] == 0 for r in table):
        return  # edgeless draw
    assert sum(r["density"] * (r["hi"] - r["lo"]) for r in table) == pytest.approx(1.0, abs=1e-6)


def test_density_bins_check():
    with pytest.raises(ValueError):
        homophily_density(build_graph([(0, 1)], 2), np.zeros(2, int), bins=1)


def test_silverman():
    v = np.random.default_rng(0).standard_normal(1000)
    iqr = np.subtract(*np.percentile(v, [75, 25]))
    assert silverman_bandwidth(v) == pytest.approx(0.9 * min(v.std(ddof=1), iqr / 1.34) * 1000 ** -0.2)
    assert silverman_bandwidth(np.ones(1)) == 0.0


# ------------------------------------------------------------ communities


def test_disjoint_same_label_cliques():
    k4 = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    g = build_graph(k4 + [(i + 4, j + 4) for i, j in k4], 8)
    rows = community_homophily(g, np.zeros(8, int))
    assert [r["homophily"] for r in rows] == [1.0, 1.0]
    assert [r["size"] for r in rows] == [4, 4]


def test_bridged_cliques_different_labels():
    g = two_bridged_cliques()
    labels = np.repeat([0, 1], 10)
    rows = community_homophily(g, labels)
    assert len(rows) == 2 and {r["size"] for r in rows} == {10}
    # the bridge is a cross-community edge, dropped from each induced subgraph
    assert all(r["homophily"] == 1.0 for r in rows)
    # whole-graph view: bridge endpoints fall below 1
    h = node_homophily(g, labels)
    assert h[9] < 1 and h[10] < 1


def test_bridge_inside_one_community_lowers_h():
    g = two_bridged_cliques()
    labels = np.repeat([0, 1], 10)
    rows = community_homophily(g, labels, communities=np.zeros(20, dtype=np.int64))
    assert rows[0]["homophily"] < 1.0
    assert rows[0]["homophily"] == pytest.approx(1 - 2 * (1 / 10) / 20)


def test_top_n_returns_all_when_fewer():
    g = two_bridged_cliques()
    assert len(community_homophily(g, np.zeros(20, int), top_n=10)) == 2
    assert len(community_homophily(g, np.zeros(20, int), top_n=1)) == 1


def test_induced_subgraph():
    g = build_graph([(0, 1), (1, 2), (2, 3)], 4)
    sub, nodes = induced_subgraph(g, np.array([1, 2, 3]))
    assert nodes.tolist() == [1, 2, 3]
    assert sub.edge_list().tolist() == [[0, 1], [1, 2]]


def test_community_sizes_sorted(rng):
    g = random_graph(80, 0.05, rng)
    rows = community_homophily(g, rng.integers(0, 2, 80), top_n=100)
    sizes = [r["size"] for r in rows]
    assert sizes == sorted(sizes, reverse=True)
    assert sum(sizes) == 80


# ------------------------------------------------------------ buckets


def test_bucketize():
    h = np.array([0.0, 0.19, 0.2, 0.99, 1.0, np.nan])
    assert bucketize(h, 5).tolist() == [0, 0, 1, 4, 4, -1]


def test_flat_gate():
    h = np.linspace(0, 1, 100)
    rows, rho = gate_weight_by_homophily(np.full((100, 2), 0.5), h, 5, 1)
    assert rho == 0.0
    assert all(r["weight_expert_0"] == 0.5 and r["weight_expert_1"] == 0.5 for r in rows)


def test_monotone_gate():
    h = np.random.default_rng(0).random(200)
    w = np.stack([h, 1 - h], axis=1)
    rows, rho = gate_weight_by_homophily(w, h, 5, 1)
    assert rho == pytest.approx(-1.0)
    for r in rows:
        assert r["weight_expert_0"] + r["weight_expert_1"] == pytest.approx(1.0)


def test_empty_bucket_flagged():
    h = np.array([0.05, 0.1, 0.95, 0.97])
    rows, _ = gate_weight_by_homophily(np.full((4, 2), 0.5), h, 5)
    assert [r["empty"] for r in rows] == [False, True, True, True, False]
    assert sum(r["count"] for r in rows) == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 10))
def test_accuracy_partition_identity(seed, buckets):
    rng = np.random.default_rng(seed)
    n = 50
    h = rng.random(n)
    h[rng.random(n) < 0.1] = np.nan
    a, b = rng.random(n) < 0.7, rng.random(n) < 0.5
    rows, overall = accuracy_by_homophily(a, b, h, buckets)
    counted = sum(r["count"] for r in rows)
    assert counted + overall["isolated"] == n
    finite = ~np.isnan(h)
    if counted:
        weighted = sum(r["acc_a"] * r["count"] for r in rows if r["count"]) / counted
        assert weighted == pytest.approx(a[finite].mean(), abs=1e-12)
    for r in rows:
        if r["count"]:
            assert r["delta"] == r["acc_a"] - r["acc_b"]


def test_accuracy_flat():
    h = np.linspace(0, 1, 20)
    rows, overall = accuracy_by_homophily(np.ones(20, bool), None, h, 4)
    assert all(r["acc_a"] == 1.0 for r in rows) and overall["acc_a"] == 1.0


def test_table_csv_and_svg():
    text = table_to_csv([{"a": 1, "b": 0.5}, {"a": 2, "b": float("nan")}])
    assert text == "a,b\n1,0.5\n2,nan\n"
    svg = svg_line_plot([0, 1, 2], {"x": [1, 2, 3]}, title="t")
    assert svg.startswith("<svg") and "polyline" in svg and svg.endswith("</svg>\n")

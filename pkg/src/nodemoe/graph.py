"""Undirected CSR graphs, normalized operators, homophily and communities."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

from . import kernels


class GraphError(ValueError):
    """Invalid graph construction input."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph in CSR form (both directions stored)."""

    num_nodes: int
    csr_offsets: np.ndarray
    csr_targets: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def degrees(self) -> np.ndarray:
        if "degrees" not in self._cache:
            self._cache["degrees"] = np.diff(self.csr_offsets)
        return self._cache["degrees"]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return len(self.csr_targets) // 2

    def neighbors(self, i: int) -> np.ndarray:
        return self.csr_targets[self.csr_offsets[i] : self.csr_offsets[i + 1]]

    def edge_list(self) -> np.ndarray:
        """Each undirected edge once as (u, v) with u < v, lexicographic."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees)
        keep = rows < self.csr_targets
        return np.stack([rows[keep], self.csr_targets[keep]], axis=1)

    def inv_sqrt_degrees(self) -> np.ndarray:
        if "inv_sqrt" not in self._cache:
            deg = self.degrees.astype(np.float64)
            out = np.zeros_like(deg)
            nz = deg > 0
            out[nz] = 1.0 / np.sqrt(deg[nz])
            self._cache["inv_sqrt"] = out
        return self._cache["inv_sqrt"]

    def inv_degrees(self) -> np.ndarray:
        if "inv" not in self._cache:
            deg = self.degrees.astype(np.float64)
            out = np.zeros_like(deg)
            nz = deg > 0
            out[nz] = 1.0 / deg[nz]
            self._cache["inv"] = out
        return self._cache["inv"]

    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        a[rows, self.csr_targets] = 1.0
        return a

    def permute(self, perm: np.ndarray) -> "Graph":
        """Relabel nodes: old node i becomes perm[i]."""
        edges = self.edge_list()
        return build_graph(perm[edges], self.num_nodes)

    def operator(self, kind: "OperatorKind | str") -> "NormalizedOperator":
        kind = OperatorKind(kind)
        key = ("op", kind)
        if key not in self._cache:
            self._cache[key] = NormalizedOperator(kind, self)
        return self._cache[key]


def build_graph(edges: Iterable, num_nodes: int) -> Graph:
    """Symmetrize, drop self-loops and duplicates, sort targets per row."""
    if num_nodes <= 0:
        raise GraphError("num_nodes must be positive")
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if e.size == 0:
        e = e.reshape(0, 2)
    if e.ndim != 2 or e.shape[1] != 2:
        raise GraphError("edges must be a sequence of pairs")
    bad = (e < 0) | (e >= num_nodes)
    if bad.any():
        k = int(np.argmax(bad.any(axis=1)))
        raise GraphError(f"edge {k} {tuple(e[k])} has endpoint out of range [0, {num_nodes})")
    e = e[e[:, 0] != e[:, 1]]
    both = np.concatenate([e, e[:, ::-1]], axis=0)
    keys = np.unique(both[:, 0] * num_nodes + both[:, 1])
    rows, cols = np.divmod(keys, num_nodes)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=num_nodes), out=offsets[1:])
    offsets.flags.writeable = False
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    cols.flags.writeable = False
    return Graph(num_nodes, offsets, cols)


class OperatorKind(str, Enum):
    ADJACENCY = "adjacency"  # raw A, used for GIN sum aggregation
    SYM_ADJ = "sym_adj"
    ROW_ADJ = "row_adj"
    SYM_LAPLACIAN = "sym_laplacian"
    SHIFTED_LAPLACIAN = "shifted_laplacian"


@dataclass(frozen=True, eq=False)
class NormalizedOperator:
    """A linear graph operator; D^{-1/2} and D^{-1} are 0 on isolated nodes.

    ``shifted_laplacian`` is L - I with lambda_max fixed at 2, i.e. -D^{-1/2}AD^{-1/2}.
    """

    kind: OperatorKind
    graph: Graph

    def _scales(self):
        g = self.graph
        if self.kind is OperatorKind.ADJACENCY:
            ones = np.ones(g.num_nodes)
            return ones, ones
        if self.kind is OperatorKind.ROW_ADJ:
            return g.inv_degrees(), np.ones(g.num_nodes)
        s = g.inv_sqrt_degrees()
        return s, s

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_operator(self, x)

    def apply_transpose(self, x: np.ndarray) -> np.ndarray:
        """Adjoint application; only row_adj is not self-adjoint."""
        if self.kind is OperatorKind.ROW_ADJ:
            g = self.graph
            ones = np.ones(g.num_nodes)
            xs = np.ascontiguousarray(x * g.inv_degrees()[:, None], dtype=np.float64)
            return kernels.csr_spmm(g.csr_offsets, g.csr_targets, ones, ones, xs)
        return apply_operator(self, x)

    def dense(self) -> np.ndarray:
        return apply_operator(self, np.eye(self.graph.num_nodes))


def apply_operator(op: NormalizedOperator, x: np.ndarray) -> np.ndarray:
    """Sparse application of ``op`` to the n x d matrix ``x`` (1-D allowed)."""
    g = op.graph
    x = np.asarray(x, dtype=np.float64)
    vector = x.ndim == 1
    if vector:
        x = x[:, None]
    if x.shape[0] != g.num_nodes:
        raise GraphError(f"operator expects {g.num_nodes} rows, got {x.shape[0]}")
    row, col = op._scales()
    y = kernels.csr_spmm(g.csr_offsets, g.csr_targets, row, col, np.ascontiguousarray(x))
    if op.kind is OperatorKind.SYM_LAPLACIAN:
        y = x - y
    elif op.kind is OperatorKind.SHIFTED_LAPLACIAN:
        y = -y
    return y[:, 0] if vector else y


def node_homophily(g: Graph, labels: np.ndarray) -> np.ndarray:
    """Same-label fraction of each node's neighbors; NaN for isolated nodes."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    same = kernels.same_label_counts(g.csr_offsets, g.csr_targets, labels)
    deg = g.degrees
    h = np.full(g.num_nodes, np.nan)
    nz = deg > 0
    h[nz] = same[nz] / deg[nz]
    return h


def graph_homophily(g: Graph, labels: np.ndarray) -> float:
    h = node_homophily(g, labels)
    finite = h[~np.isnan(h)]
    return float(finite.mean()) if finite.size else float("nan")


def detect_communities(g: Graph, seed: int = 0, max_sweeps: int = 100) -> np.ndarray:
    """Asynchronous label propagation; ids renumbered by first occurrence."""
    rng = np.random.default_rng(seed)
    labels = np.arange(g.num_nodes, dtype=np.int64)
    counts = np.zeros(g.num_nodes, dtype=np.int64)
    for _ in range(max_sweeps):
        order = rng.permutation(g.num_nodes).astype(np.int64)
        if kernels.label_propagation_sweep(g.csr_offsets, g.csr_targets, order, labels, counts) == 0:
            break
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inverse].astype(np.int64)


def modularity(g: Graph, communities: np.ndarray) -> float:
    """Newman modularity of a partition."""
    m2 = float(len(g.csr_targets))
    if m2 == 0:
        return 0.0
    rows = np.repeat(np.arange(g.num_nodes), g.degrees)
    inside = float(np.sum(communities[rows] == communities[g.csr_targets]))
    deg_tot = np.bincount(communities, weights=g.degrees.astype(float))
    return inside / m2 - float(np.sum((deg_tot / m2) ** 2))

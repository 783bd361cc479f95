"""Chebyshev polynomial filters on the shifted normalized Laplacian.

A filter is ``f(lambda) = sum_k theta_k T_k(lambda - 1)`` for lambda in [0, 2],
i.e. a polynomial in ``L - I`` applied to node signals.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import NormalizedOperator, OperatorKind

DEFAULT_ORDER = 10
DEFAULT_GRID_POINTS = 51
INIT_STRATEGIES = ("decreasing", "increasing", "uniform")


def chebyshev_table(x: np.ndarray, order: int) -> np.ndarray:
    """T_k(x) for k = 0..order, one column per k."""
    x = np.asarray(x, dtype=np.float64)
    t = np.empty(x.shape + (order + 1,))
    t[..., 0] = 1.0
    if order >= 1:
        t[..., 1] = x
    for k in range(2, order + 1):
        t[..., k] = 2.0 * x * t[..., k - 1] - t[..., k - 2]
    return t


def chebyshev_nodes(order: int) -> np.ndarray:
    """The order+1 Chebyshev points of the first kind, ascending in [-1, 1]."""
    j = np.arange(order + 1)
    return np.cos((order - j + 0.5) * math.pi / (order + 1))


@dataclass
class FilterCoeffs:
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).copy()
        if self.theta.ndim != 1 or len(self.theta) < 2:
            raise ValueError("need at least two coefficients (order >= 1)")

    @property
    def order(self) -> int:
        return len(self.theta) - 1

    @classmethod
    def from_node_values(cls, values: Sequence[float]) -> "FilterCoeffs":
        """Coefficients of the polynomial interpolating ``values`` at the
        ascending Chebyshev nodes (lambda = node + 1)."""
        values = np.asarray(values, dtype=np.float64)
        order = len(values) - 1
        t = chebyshev_table(chebyshev_nodes(order), order)
        theta = (2.0 / (order + 1)) * (t.T @ values)
        theta[0] *= 0.5
        return cls(theta)

    def node_values(self) -> np.ndarray:
        return self.response(chebyshev_nodes(self.order) + 1.0)

    def response(self, lam) -> np.ndarray:
        """Vectorized frequency response, no range check."""
        return chebyshev_table(np.asarray(lam, dtype=np.float64) - 1.0, self.order) @ self.theta


def frequency_response(f: FilterCoeffs, lam: float) -> float:
    if not 0.0 <= lam <= 2.0:
        raise ValueError(f"lambda={lam} outside [0, 2]")
    return float(f.response(lam))


@dataclass(frozen=True)
class SmoothingGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or len(pts) < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(pts) < 0):
            raise ValueError("grid must be ascending")
        if pts[0] != 0.0 or pts[-1] != 2.0:
            raise ValueError("grid must span [0, 2] including both endpoints")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, num_points: int = DEFAULT_GRID_POINTS) -> "SmoothingGrid":
        return cls(np.linspace(0.0, 2.0, num_points))

    def difference_matrix(self, order: int) -> np.ndarray:
        """M with M @ theta = successive response differences on the grid."""
        t = chebyshev_table(self.points - 1.0, order)
        return t[1:] - t[:-1]


def smoothing_loss(f: FilterCoeffs, grid: SmoothingGrid) -> float:
    """Squared total variation of the response over the grid."""
    r = f.response(grid.points)
    return float(np.sum(np.diff(r) ** 2))


def smoothing_loss_grad(f: FilterCoeffs, grid: SmoothingGrid) -> np.ndarray:
    m = grid.difference_matrix(f.order)
    return 2.0 * m.T @ (m @ f.theta)


def init_node_values(strategy: str, alpha: float, order: int) -> np.ndarray:
    """Initial filter values at the ascending Chebyshev nodes.

    ``decreasing`` is low-pass, ``increasing`` high-pass, ``uniform`` all-pass.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha={alpha} must lie in (0, 1]")
    if order < 1:
        raise ValueError("order must be >= 1")
    powers = alpha ** np.arange(order + 1, dtype=np.float64)
    if strategy == "decreasing":
        return powers
    if strategy == "increasing":
        return powers[::-1].copy()
    if strategy == "uniform":
        return np.ones(order + 1)
    raise ValueError(f"unknown init strategy {strategy!r}; expected one of {INIT_STRATEGIES}")


def init_coeffs(strategy: str, alpha: float, order: int) -> FilterCoeffs:
    return FilterCoeffs.from_node_values(init_node_values(strategy, alpha, order))


@dataclass
class SpectralBasis:
    blocks: list

    @property
    def order(self) -> int:
        return len(self.blocks) - 1

    def combine(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if len(theta) != len(self.blocks):
            raise ValueError(f"{len(theta)} coefficients for a basis of order {self.order}")
        out = theta[0] * self.blocks[0]
        for k in range(1, len(theta)):
            out = out + theta[k] * self.blocks[k]
        return out


def precompute_basis(op: NormalizedOperator, h: np.ndarray, order: int) -> SpectralBasis:
    """T_k(L - I) h for k = 0..order by the three-term recurrence."""
    if op.kind is not OperatorKind.SHIFTED_LAPLACIAN:
        raise ValueError("basis requires the shifted_laplacian operator")
    if order < 1:
        raise ValueError("order must be >= 1")
    h = np.asarray(h, dtype=np.float64)
    if h.shape[0] != op.graph.num_nodes:
        raise ValueError(f"h has {h.shape[0]} rows, graph has {op.graph.num_nodes} nodes")
    blocks = [h, op.apply(h)]
    for _ in range(2, order + 1):
        blocks.append(2.0 * op.apply(blocks[-1]) - blocks[-2])
    return SpectralBasis(blocks)


def export_filters(filters: Sequence[FilterCoeffs], grid: SmoothingGrid | None = None) -> str:
    """CSV text: lambda, response_expert_0, ..., on the grid."""
    grid = grid or SmoothingGrid.uniform()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda"] + [f"response_expert_{o}" for o in range(len(filters))])
    responses = [f.response(grid.points) for f in filters]
    for i, lam in enumerate(grid.points):
        w.writerow([repr(float(lam))] + [repr(float(r[i])) for r in responses])
    return buf.getvalue()

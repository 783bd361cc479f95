"""Two-pattern contextual stochastic block model.

Every node gets a fair-coin class and, independently, a pattern: homophilic
(H0) with probability ``P`` and heterophilic (H1) otherwise. Each undirected
pair (i, j), i < j, is drawn once. Two pair rules are available:

``pattern_blocks`` (default)
    pairs whose endpoints have different patterns never connect; a
    within-pattern pair uses that pattern's rates divided by the pattern's
    share (``P`` or ``1 - P``). Every node then sees exactly its own pattern's
    same/different-label ratio and expected degree ``n (p + q) / 2``.
``lower_index``
    the pair uses the rates of the lower-indexed endpoint's pattern. Mixed
    pairs leak the other pattern into a node's neighborhood.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, build_graph

H0, H1 = 0, 1
C0, C1 = 0, 1


class CsbmError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CsbmParams:
    n: int
    d: int
    mu: np.ndarray
    nu: np.ndarray
    p0: float
    q0: float
    p1: float
    q1: float
    P: float
    seed: int = 0
    pair_rule: str = "pattern_blocks"

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64))
        object.__setattr__(self, "nu", np.asarray(self.nu, dtype=np.float64))

    @classmethod
    def with_distance(cls, n, d, p0, q0, p1, q1, P, dist=1.0, seed=0,
                      pair_rule="pattern_blocks") -> "CsbmParams":
        """Symmetric means +-(dist/2)/sqrt(d) * ones, so ||mu - nu|| == dist."""
        u = np.full(d, 1.0 / math.sqrt(d))
        s = dist / 2.0
        return cls(n, d, s * u, -s * u, p0, q0, p1, q1, P, seed, pair_rule)

    @property
    def mean_distance(self) -> float:
        return float(np.linalg.norm(self.mu - self.nu))

    def replace(self, **kw) -> "CsbmParams":
        fields = dict(n=self.n, d=self.d, mu=self.mu, nu=self.nu, p0=self.p0, q0=self.q0,
                      p1=self.p1, q1=self.q1, P=self.P, seed=self.seed,
                      pair_rule=self.pair_rule)
        fields.update(kw)
        return CsbmParams(**fields)

    def validate(self) -> None:
        if self.n < 2 or self.d < 1:
            raise CsbmError("need n >= 2 and d >= 1")
        if self.mu.shape != (self.d,) or self.nu.shape != (self.d,):
            raise CsbmError("mu and nu must be d-vectors")
        if np.linalg.norm(self.mu) > 1 + 1e-12 or np.linalg.norm(self.nu) > 1 + 1e-12:
            raise CsbmError("class means must have norm <= 1")
        for name in ("p0", "q0", "p1", "q1", "P"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise CsbmError(f"{name}={v} outside [0, 1]")
        if not self.p0 > self.q0:
            raise CsbmError("homophilic pattern needs p0 > q0")
        if not self.p1 < self.q1:
            raise CsbmError("heterophilic pattern needs p1 < q1")
        if abs((self.p0 + self.q0) - (self.p1 + self.q1)) > 1e-12:
            raise CsbmError("degree matching requires p0 + q0 == p1 + q1")
        if self.pair_rule not in PAIR_RULES:
            raise CsbmError(f"unknown pair_rule {self.pair_rule!r}")
        if self.pair_rule == "pattern_blocks":
            rates = self.pair_rates()
            if rates.max() > 1.0:
                raise CsbmError("pattern_blocks rates exceed 1 after dividing by the pattern share")

    def pair_rates(self) -> np.ndarray:
        """rates[pattern, same_label] for pairs inside one pattern."""
        base = np.array([[self.q0, self.p0], [self.q1, self.p1]])
        if self.pair_rule == "lower_index":
            return base
        share = np.array([self.P, 1.0 - self.P])
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = np.where(share[:, None] > 0, base / share[:, None], 0.0)
        return scaled

    def as_dict(self) -> dict:
        return {
            "n": self.n, "d": self.d, "p0": self.p0, "q0": self.q0, "p1": self.p1,
            "q1": self.q1, "P": self.P, "seed": self.seed, "pair_rule": self.pair_rule,
            "mu": self.mu.tolist(), "nu": self.nu.tolist(),
        }


PAIR_RULES = ("pattern_blocks", "lower_index")

REGIME1 = dict(n=2000, d=100, p0=0.05, q0=0.01, p1=0.01, q1=0.05, P=0.5, dist=1.0)


def regime1(seed: int = 0) -> CsbmParams:
    return CsbmParams.with_distance(seed=seed, **REGIME1)


@dataclass(frozen=True, eq=False)
class CsbmSample:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    pattern: np.ndarray
    params: CsbmParams | None = None

    @property
    def num_classes(self) -> int:
        return 2


def generate(params: CsbmParams) -> CsbmSample:
    """Draw labels, patterns, features, then edges, from one seeded stream."""
    params.validate()
    n, d = params.n, params.d
    rng = np.random.default_rng(params.seed)
    labels = rng.integers(0, 2, size=n).astype(np.int64)
    pattern = np.where(rng.random(n) < params.P, H0, H1).astype(np.int64)
    means = np.where(labels[:, None] == C0, params.mu[None, :], params.nu[None, :])
    features = means + rng.standard_normal((n, d)) / math.sqrt(d)

    rates = params.pair_rates()
    blocks = params.pair_rule == "pattern_blocks"
    chunks = []
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        prob = rates[pattern[i], (labels[j] == labels[i]).astype(np.int64)]
        if blocks:
            prob = np.where(pattern[j] == pattern[i], prob, 0.0)
        hit = j[rng.random(n - i - 1) < prob]
        if hit.size:
            chunks.append(np.stack([np.full(hit.size, i), hit], axis=1))
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    return CsbmSample(build_graph(edges, n), features, labels, pattern, params)


def expected_filtered_mean(params: CsbmParams, cls: int, pattern: int) -> np.ndarray:
    """Mean of the row-normalized neighbor average for a class/pattern cell."""
    params.validate()
    p, q = (params.p0, params.q0) if pattern == H0 else (params.p1, params.q1)
    if cls == C0:
        return (p * params.mu + q * params.nu) / (p + q)
    return (q * params.mu + p * params.nu) / (p + q)

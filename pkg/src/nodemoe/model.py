"""Node-wise mixture of Chebyshev experts with a GIN gate."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import FILTER_COEFF, NETWORK_WEIGHT, Param, Tape, Var
from .graph import Graph, OperatorKind
from .spectral import (
    DEFAULT_GRID_POINTS,
    DEFAULT_ORDER,
    FilterCoeffs,
    SmoothingGrid,
    SpectralBasis,
    init_coeffs,
)

CHECKPOINT_FORMAT = "nodemoe-checkpoint-v1"


@dataclass
class ExpertConfig:
    order: int = DEFAULT_ORDER
    hidden: int = 64
    init: str = "uniform"
    alpha: float = 0.9
    dropout: float = 0.0


@dataclass
class GateConfig:
    num_experts: int = 2
    mode: str = "soft"
    k: int = 1
    hidden: int = 32
    epsilon: float = 0.0
    dropout: float = 0.0
    # multiply each GIN sum-aggregate by 1 / (1 + eps + mean degree)
    scale_aggregate: bool = True

    def validate(self):
        if self.num_experts < 1:
            raise ValueError("need at least one expert")
        if self.mode not in ("soft", "topk"):
            raise ValueError(f"unknown gate mode {self.mode!r}")
        if self.mode == "topk" and not 1 <= self.k <= self.num_experts:
            raise ValueError(f"top-k needs 1 <= k <= {self.num_experts}, got k={self.k}")


@dataclass
class LossWeights:
    gamma: float = 0.1
    beta: float = 0.01

    def __post_init__(self):
        if self.gamma < 0 or self.beta < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class ModelConfig:
    in_dim: int
    num_classes: int
    experts: list = field(default_factory=lambda: [ExpertConfig(init="decreasing"),
                                                   ExpertConfig(init="increasing")])
    gate: GateConfig = field(default_factory=GateConfig)
    seed: int = 0
    grid_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        self.experts = [e if isinstance(e, ExpertConfig) else ExpertConfig(**e) for e in self.experts]
        if isinstance(self.gate, dict):
            self.gate = GateConfig(**self.gate)
        self.gate.num_experts = len(self.experts)

    def validate(self):
        self.gate.validate()
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        inits = [(e.init, e.alpha) for e in self.experts]
        if 2 <= len(inits) <= 3 and len(set(e.init for e in self.experts)) != len(inits):
            raise ValueError(f"expert initializations must differ, got {inits}")
        orders = {e.order for e in self.experts}
        if min(orders) < 1:
            raise ValueError("filter order must be >= 1")

    def to_dict(self) -> dict:
        return {
            "in_dim": self.in_dim,
            "num_classes": self.num_classes,
            "experts": [asdict(e) for e in self.experts],
            "gate": asdict(self.gate),
            "seed": self.seed,
            "grid_points": self.grid_points,
        }


def gate_input(g: Graph, x: np.ndarray) -> np.ndarray:
    """[X, |AX - X|, |A^2 X - X|] with A the symmetric normalized adjacency."""
    a = g.operator(OperatorKind.SYM_ADJ)
    ax = a.apply(x)
    a2x = a.apply(ax)
    return np.concatenate([x, np.abs(ax - x), np.abs(a2x - x)], axis=1)


def _glorot(rng, fan_in, fan_out):
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def _dropout(x: Var, p: float, rng) -> Var:
    if p <= 0 or rng is None:
        return x
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return ad.elementwise_mul(x, x.tape.const(mask))


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class Forward:
    """Tape handles produced by one forward pass."""

    logits: Var
    gate: Var | None
    gate_logits: Var | None
    expert_logits: list
    thetas: list

    @property
    def probabilities(self) -> np.ndarray:
        return softmax_rows(self.logits.value)

    def gate_weights(self) -> np.ndarray:
        if self.gate is None:
            return np.ones((self.logits.shape[0], 1))
        return self.gate.value


class NodeMoE:
    def __init__(self, cfg: ModelConfig):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.params: dict[str, Param] = {}
        d, c = cfg.in_dim, cfg.num_classes
        for o, e in enumerate(cfg.experts):
            self._add(f"expert{o}.w1", _glorot(rng, d, e.hidden))
            self._add(f"expert{o}.b1", np.zeros(e.hidden))
            self._add(f"expert{o}.w2", _glorot(rng, e.hidden, c))
            self._add(f"expert{o}.b2", np.zeros(c))
            self._add(f"expert{o}.theta", init_coeffs(e.init, e.alpha, e.order).theta, FILTER_COEFF)
        if self.num_experts > 1:
            gc = cfg.gate
            width = 3 * d
            for layer in range(2):
                self._add(f"gate.gin{layer}.w1", _glorot(rng, width, gc.hidden))
                self._add(f"gate.gin{layer}.b1", np.zeros(gc.hidden))
                self._add(f"gate.gin{layer}.w2", _glorot(rng, gc.hidden, gc.hidden))
                self._add(f"gate.gin{layer}.b2", np.zeros(gc.hidden))
                width = gc.hidden
            self._add("gate.out.w", _glorot(rng, gc.hidden, self.num_experts))
            self._add("gate.out.b", np.zeros(self.num_experts))
        self.grid = SmoothingGrid.uniform(cfg.grid_points)
        self._cache_key = None
        self._gate_in = None
        self._gate_agg = None

    def _add(self, name, value, tag=NETWORK_WEIGHT):
        self.params[name] = Param(value, tag, name)

    @property
    def num_experts(self) -> int:
        return len(self.cfg.experts)

    def filters(self) -> list[FilterCoeffs]:
        return [FilterCoeffs(self.params[f"expert{o}.theta"].value) for o in range(self.num_experts)]

    def _gate_input(self, g: Graph, x: np.ndarray) -> np.ndarray:
        if self._cache_key is None or self._cache_key[0] is not g or self._cache_key[1] is not x:
            self._gate_in = gate_input(g, x)
            self._cache_key = (g, x)
            self._gate_agg = None
        return self._gate_in

    def _gate_first_aggregate(self, g: Graph, x: np.ndarray) -> np.ndarray:
        """(1 + eps) h + A h on the constant gate input, cached per (graph, features)."""
        h = self._gate_input(g, x)
        if self._gate_agg is None:
            adj = g.operator(OperatorKind.ADJACENCY)
            self._gate_agg = ((1.0 + self.cfg.gate.epsilon) * h + adj.apply(h)) * self._aggregate_scale(g)
        return self._gate_agg

    def _aggregate_scale(self, g: Graph) -> float:
        if not self.cfg.gate.scale_aggregate:
            return 1.0
        return 1.0 / (1.0 + self.cfg.gate.epsilon + float(np.mean(g.degrees)))

    # ------------------------------------------------------------ forward

    def gate_logits(self, tape: Tape, g: Graph, x: np.ndarray, rng=None) -> Var:
        gc = self.cfg.gate
        adj = g.operator(OperatorKind.ADJACENCY)
        p = {k: tape.param(v) for k, v in self.params.items() if k.startswith("gate.")}
        h = tape.const(self._gate_input(g, x))
        for layer in range(2):
            if layer == 0 and (gc.dropout <= 0 or rng is None):
                agg = tape.const(self._gate_first_aggregate(g, x))
            else:
                h = _dropout(h, gc.dropout, rng)
                agg = ad.add(ad.scale(h, 1.0 + gc.epsilon), ad.sparse_apply(adj, h))
                agg = ad.scale(agg, self._aggregate_scale(g))
            h = ad.relu(ad.add_bias(ad.matmul(agg, p[f"gate.gin{layer}.w1"]), p[f"gate.gin{layer}.b1"]))
            h = ad.relu(ad.add_bias(ad.matmul(h, p[f"gate.gin{layer}.w2"]), p[f"gate.gin{layer}.b2"]))
        return ad.add_bias(ad.matmul(h, p["gate.out.w"]), p["gate.out.b"])

    def expert_logits(self, tape: Tape, o: int, g: Graph, x: Var, rng=None) -> tuple[Var, Var]:
        e = self.cfg.experts[o]
        p = {k.split(".", 1)[1]: tape.param(v) for k, v in self.params.items() if k.startswith(f"expert{o}.")}
        h = _dropout(x, e.dropout, rng)
        h = ad.relu(ad.add_bias(ad.matmul(h, p["w1"]), p["b1"]))
        h = _dropout(h, e.dropout, rng)
        h = ad.add_bias(ad.matmul(h, p["w2"]), p["b2"])
        lap = g.operator(OperatorKind.SHIFTED_LAPLACIAN)
        blocks = [h, ad.sparse_apply(lap, h)]
        for _ in range(2, e.order + 1):
            blocks.append(ad.sub(ad.scale(ad.sparse_apply(lap, blocks[-1]), 2.0), blocks[-2]))
        return ad.linear_combination(p["theta"], blocks), p["theta"]

    def forward(self, tape: Tape, g: Graph, x: np.ndarray, rng=None) -> Forward:
        """Pass ``rng`` to enable dropout (training); ``None`` is inference."""
        xv = tape.const(x)
        outs, thetas = [], []
        for o in range(self.num_experts):
            z, th = self.expert_logits(tape, o, g, xv, rng)
            outs.append(z)
            thetas.append(th)
        if self.num_experts == 1:
            return Forward(outs[0], None, None, outs, thetas)
        logits = self.gate_logits(tape, g, x, rng)
        gc = self.cfg.gate
        weights = ad.row_softmax(logits) if gc.mode == "soft" else ad.topk_softmax(logits, gc.k)
        combined = None
        for o, z in enumerate(outs):
            term = ad.mul_rows(z, ad.column(weights, o))
            combined = term if combined is None else ad.add(combined, term)
        return Forward(combined, weights, logits, outs, thetas)

    def predict(self, g: Graph, x: np.ndarray) -> Forward:
        return self.forward(Tape(), g, x)

    # ------------------------------------------------------------ loss

    def total_loss(self, fwd: Forward, labels, mask, lw: LossWeights):
        """Returns (loss Var, components dict of floats)."""
        return total_loss(fwd.logits, labels, mask, fwd.thetas, fwd.gate, lw, self.grid)

    # ------------------------------------------------------------ state

    def state(self) -> dict:
        return {k: p.value.copy() for k, p in self.params.items()}

    def load_state(self, state: dict) -> None:
        for k, v in state.items():
            self.params[k].value = np.array(v, dtype=np.float64).reshape(self.params[k].value.shape)

    def to_checkpoint(self, extra: dict | None = None) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "config": self.cfg.to_dict(),
            "params": {k: {"shape": list(p.value.shape), "tag": p.tag, "values": p.value.ravel().tolist()}
                       for k, p in self.params.items()},
            "extra": extra or {},
        }

    @classmethod
    def from_checkpoint(cls, ck: dict) -> "NodeMoE":
        if ck.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"not a {CHECKPOINT_FORMAT} file")
        model = cls(ModelConfig(**ck["config"]))
        for k, rec in ck["params"].items():
            if k not in model.params:
                raise ValueError(f"unexpected parameter {k!r} in checkpoint")
            model.params[k].value = np.array(rec["values"], dtype=np.float64).reshape(rec["shape"])
        return model


def save_checkpoint(model: NodeMoE, path, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_checkpoint(extra), fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[NodeMoE, dict]:
    with open(path) as fh:
        ck = json.load(fh)
    return NodeMoE.from_checkpoint(ck), ck.get("extra", {})


def total_loss(logits: Var, labels, mask, thetas: Sequence[Var], gate: Var | None,
               lw: LossWeights, grid: SmoothingGrid):
    """Masked cross-entropy + gamma * smoothing + beta * CV^2(importance)."""
    task = ad.log_softmax_cross_entropy(logits, labels, mask)
    loss = task
    smooth_total = 0.0
    for th in thetas:
        diffs = ad.dense_apply(grid.difference_matrix(th.shape[0] - 1), th)
        s = ad.reduce_sum(ad.elementwise_mul(diffs, diffs))
        smooth_total += float(s.value)
        if lw.gamma:
            loss = ad.add(loss, ad.scale(s, lw.gamma))
    balance = 0.0
    if gate is not None:
        b = ad.cv_squared(ad.column_sums(gate))
        balance = float(b.value)
        if lw.beta:
            loss = ad.add(loss, ad.scale(b, lw.beta))
    return loss, {"task": float(task.value), "smoothing": smooth_total, "balance": balance,
                  "total": float(loss.value)}


# ------------------------------------------------------- numpy-level views


def expert_forward(basis: SpectralBasis, coeffs: FilterCoeffs) -> np.ndarray:
    if basis.order != coeffs.order:
        raise ValueError(f"filter order {coeffs.order} does not match basis order {basis.order}")
    return basis.combine(coeffs.theta)


def moe_forward(gate_weights: np.ndarray, expert_logits: Sequence[np.ndarray]) -> np.ndarray:
    """Row-softmax of the gate-weighted sum of expert logits."""
    w = np.asarray(gate_weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != len(expert_logits):
        raise ValueError(f"gate has shape {w.shape} for {len(expert_logits)} experts")
    shapes = {np.shape(z) for z in expert_logits}
    if len(shapes) != 1 or next(iter(shapes))[0] != w.shape[0]:
        raise ValueError("expert outputs must share one shape with n rows")
    s = sum(w[:, [o]] * np.asarray(z) for o, z in enumerate(expert_logits))
    return softmax_rows(s)


def gate_weights_from_logits(logits: np.ndarray, mode: str = "soft", k: int = 1) -> np.ndarray:
    tape = Tape()
    v = tape.const(logits)
    return (ad.row_softmax(v) if mode == "soft" else ad.topk_softmax(v, k)).value

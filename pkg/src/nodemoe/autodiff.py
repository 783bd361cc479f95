"""A small reverse-mode tape over numpy arrays.

Usage::

    tape = Tape()
    w = tape.param(p)                 # p is a Param
    loss = reduce_sum(elementwise_mul(w, w))
    tape.backward(loss)               # p.grad now holds 2 * p.value

Each primitive records its output on the tape of its first Var argument
together with a closure mapping the output adjoint to input adjoints.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

FILTER_COEFF = "filter_coeff"
NETWORK_WEIGHT = "network_weight"
TAGS = (FILTER_COEFF, NETWORK_WEIGHT)


class TapeError(RuntimeError):
    pass


class Param:
    """A trainable array with a gradient accumulator and an optimizer group tag."""

    def __init__(self, value, tag: str = NETWORK_WEIGHT, name: str = ""):
        if tag not in TAGS:
            raise ValueError(f"unknown tag {tag!r}")
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self._tag = tag
        self.name = name

    @property
    def tag(self) -> str:
        return self._tag

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.value.shape}, tag={self.tag})"


class Var:
    __slots__ = ("value", "parents", "backward_fn", "tape", "param", "adjoint", "requires_grad")

    def __init__(self, tape, value, parents=(), backward_fn=None, param=None):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.param = param
        self.adjoint = None
        self.requires_grad = param is not None or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


class Tape:
    def __init__(self):
        self.nodes: list[Var] = []
        self._consumed = False

    def _record(self, value, parents=(), backward_fn=None, param=None) -> Var:
        if self._consumed:
            raise TapeError("tape already consumed by backward(); start a new tape")
        v = Var(self, np.asarray(value, dtype=np.float64), tuple(parents), backward_fn, param)
        self.nodes.append(v)
        return v

    def param(self, p: Param) -> Var:
        return self._record(p.value, param=p)

    def const(self, value) -> Var:
        return self._record(np.asarray(value, dtype=np.float64))

    def backward(self, loss: Var) -> None:
        """Accumulate d(loss)/d(param) into every Param reached from ``loss``."""
        if self._consumed:
            raise TapeError("backward() already called on this tape")
        if loss.tape is not self:
            raise TapeError("loss was not recorded on this tape")
        if loss.value.size != 1:
            raise TapeError(f"loss must be scalar, got shape {loss.value.shape}")
        self._consumed = True
        loss.adjoint = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            g = node.adjoint
            if g is None or not node.requires_grad:
                continue
            if node.param is not None:
                node.param.grad += g.reshape(node.param.value.shape)
            if node.backward_fn is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.adjoint is None:
                    parent.adjoint = np.array(pg, dtype=np.float64)
                else:
                    parent.adjoint = parent.adjoint + pg


def _check(cond, msg):
    if not cond:
        raise ValueError(msg)


def _record(x: Var, value, parents, fn: Callable):
    return x.tape._record(value, parents, fn)


# ---------------------------------------------------------------- primitives


def matmul(a: Var, b: Var) -> Var:
    _check(a.value.ndim == 2 and b.value.ndim == 2 and a.shape[1] == b.shape[0],
           f"matmul shape mismatch {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _record(a, av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def sparse_apply(op, x: Var) -> Var:
    _check(x.value.ndim == 2 and x.shape[0] == op.graph.num_nodes,
           f"sparse_apply expects {op.graph.num_nodes} rows, got {x.shape}")
    return _record(x, op.apply(x.value), (x,), lambda g: (op.apply_transpose(g),))


def add(a: Var, b: Var) -> Var:
    _check(a.shape == b.shape, f"add shape mismatch {a.shape} vs {b.shape}")
    return _record(a, a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Var, b: Var) -> Var:
    _check(a.shape == b.shape, f"sub shape mismatch {a.shape} vs {b.shape}")
    return _record(a, a.value - b.value, (a, b), lambda g: (g, -g))


def add_bias(x: Var, b: Var) -> Var:
    """x (n x d) plus a length-d bias on every row."""
    _check(x.value.ndim == 2 and b.value.ndim == 1 and b.shape[0] == x.shape[1],
           f"add_bias shape mismatch {x.shape} + {b.shape}")
    return _record(x, x.value + b.value, (x, b), lambda g: (g, g.sum(axis=0)))


def scale(x: Var, s) -> Var:
    """x times a Python float or a scalar Var."""
    if isinstance(s, Var):
        _check(s.value.size == 1, "scale factor must be scalar")
        sv = float(s.value.reshape(()))
        xv = x.value
        return _record(x, xv * sv, (x, s),
                       lambda g: (g * sv, np.sum(g * xv).reshape(s.value.shape)))
    s = float(s)
    return _record(x, x.value * s, (x,), lambda g: (g * s,))


def relu(x: Var) -> Var:
    mask = x.value > 0
    # np.maximum keeps NaN visible to the divergence check
    return _record(x, np.maximum(x.value, 0.0), (x,), lambda g: (g * mask,))


def abs_(x: Var) -> Var:
    sign = np.sign(x.value)  # subgradient 0 at 0
    return _record(x, np.abs(x.value), (x,), lambda g: (g * sign,))


def elementwise_mul(a: Var, b: Var) -> Var:
    _check(a.shape == b.shape, f"elementwise_mul shape mismatch {a.shape} vs {b.shape}")
    av, bv = a.value, b.value
    return _record(a, av * bv, (a, b), lambda g: (g * bv, g * av))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def row_softmax(x: Var) -> Var:
    _check(x.value.ndim == 2, "row_softmax expects a matrix")
    if x.shape[1] == 0:
        raise ValueError("softmax over an empty row")
    y = _softmax(x.value)
    return _record(x, y, (x,), lambda g: (y * (g - np.sum(g * y, axis=1, keepdims=True)),))


def topk_softmax(x: Var, k: int) -> Var:
    """Softmax over the k largest entries of each row, exact zeros elsewhere.

    Ties keep the lower column index. Gradients reach surviving logits only.
    """
    _check(x.value.ndim == 2, "topk_softmax expects a matrix")
    n, m = x.shape
    _check(1 <= k <= m, f"k={k} outside [1, {m}]")
    order = np.argsort(-x.value, axis=1, kind="stable")[:, :k]
    keep = np.zeros((n, m), dtype=bool)
    keep[np.arange(n)[:, None], order] = True
    z = np.where(keep, x.value, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.where(keep, np.exp(z), 0.0)
    y = e / e.sum(axis=1, keepdims=True)
    return _record(x, y, (x,), lambda g: (y * (g - np.sum(g * y, axis=1, keepdims=True)),))


def log_softmax_cross_entropy(logits: Var, labels: np.ndarray, mask: np.ndarray) -> Var:
    """Mean negative log-likelihood over rows selected by ``mask``."""
    _check(logits.value.ndim == 2, "logits must be a matrix")
    idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cross-entropy over an empty mask")
    z = logits.value[idx]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = np.asarray(labels)[idx]
    loss = -np.mean(logp[np.arange(idx.size), y])

    def back(g):
        p = np.exp(logp)
        p[np.arange(idx.size), y] -= 1.0
        full = np.zeros_like(logits.value)
        full[idx] = p * (float(g) / idx.size)
        return (full,)

    return _record(logits, np.array(loss), (logits,), back)


def reduce_sum(x: Var) -> Var:
    shape = x.shape
    return _record(x, np.array(x.value.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def column_sums(x: Var) -> Var:
    n = x.shape[0]
    return _record(x, x.value.sum(axis=0), (x,), lambda g: (np.broadcast_to(g, (n,) + g.shape).copy(),))


def concat_columns(xs: Sequence[Var]) -> Var:
    _check(len(xs) > 0, "nothing to concatenate")
    rows = xs[0].shape[0]
    _check(all(x.value.ndim == 2 and x.shape[0] == rows for x in xs), "row counts differ")
    widths = np.cumsum([0] + [x.shape[1] for x in xs])
    out = np.concatenate([x.value for x in xs], axis=1)
    return _record(xs[0], out, tuple(xs),
                   lambda g: tuple(g[:, widths[i]:widths[i + 1]] for i in range(len(xs))))


def column(x: Var, j: int) -> Var:
    _check(x.value.ndim == 2, "column expects a matrix")
    shape = x.shape

    def back(g):
        full = np.zeros(shape)
        full[:, j] = g
        return (full,)

    return _record(x, x.value[:, j].copy(), (x,), back)


def mul_rows(x: Var, w: Var) -> Var:
    """Scale row i of x by w[i]."""
    _check(x.value.ndim == 2 and w.value.ndim == 1 and w.shape[0] == x.shape[0],
           f"mul_rows shape mismatch {x.shape} * {w.shape}")
    xv, wv = x.value, w.value
    return _record(x, xv * wv[:, None], (x, w),
                   lambda g: (g * wv[:, None], np.sum(g * xv, axis=1)))


def linear_combination(theta: Var, blocks: Sequence[Var]) -> Var:
    """sum_k theta[k] * blocks[k]."""
    _check(theta.value.ndim == 1 and theta.shape[0] == len(blocks),
           f"{theta.shape[0]} coefficients for {len(blocks)} blocks")
    tv = theta.value
    bv = [b.value for b in blocks]
    out = tv[0] * bv[0]
    for k in range(1, len(bv)):
        out = out + tv[k] * bv[k]

    def back(g):
        dtheta = np.array([np.sum(g * b) for b in bv])
        return (dtheta,) + tuple(tv[k] * g for k in range(len(bv)))

    return _record(theta, out, (theta,) + tuple(blocks), back)


def cv_squared(v: Var) -> Var:
    """Squared coefficient of variation (population variance / mean^2)."""
    _check(v.value.ndim == 1 and v.shape[0] >= 1, "cv_squared expects a vector")
    x = v.value
    m = x.size
    mean = x.mean()
    if mean == 0:
        raise ValueError("cv_squared of a zero-mean vector")
    var = np.mean((x - mean) ** 2)
    out = var / mean**2

    def back(g):
        dvar = 2.0 * (x - mean) / m
        dmean = np.full(m, 1.0 / m)
        return (float(g) * (dvar / mean**2 - 2.0 * var / mean**3 * dmean),)

    return _record(v, np.array(out), (v,), back)


def dense_apply(m: np.ndarray, x: Var) -> Var:
    """Constant matrix times a vector or matrix Var."""
    return _record(x, m @ x.value, (x,), lambda g: (m.T @ g,))

"""Central finite-difference checks of tape gradients."""
from __future__ import annotations

import csv
import io
from typing import Callable

import numpy as np

from .autodiff import Param, Tape, Var

GRADCHECK_COLUMNS = ("param", "tag", "size", "max_abs_grad", "max_abs_err", "rel_err")


def numeric_grad(loss_fn: Callable[[], float], p: Param, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_fn`` w.r.t. every entry of ``p.value``."""
    out = np.zeros_like(p.value)
    for idx in np.ndindex(p.value.shape):
        old = p.value[idx]
        p.value[idx] = old + h
        up = loss_fn()
        p.value[idx] = old - h
        down = loss_fn()
        p.value[idx] = old
        out[idx] = (up - down) / (2 * h)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| over the array, scaled by max |n| (at least ``floor``)."""
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / max(float(np.max(np.abs(numeric))), floor))


def check_params(build: Callable[[Tape], Var], params: dict, h: float = 1e-5) -> list[dict]:
    """Compare backward() against finite differences for each named Param.

    ``build`` records a scalar loss on the given tape from the params' current
    values.
    """
    for p in params.values():
        p.zero_grad()
    tape = Tape()
    tape.backward(build(tape))
    analytic = {k: p.grad.copy() for k, p in params.items()}

    def loss_value():
        return float(build(Tape()).value)

    rows = []
    for name, p in params.items():
        num = numeric_grad(loss_value, p, h)
        rows.append({"param": name, "tag": p.tag, "size": int(p.value.size),
                     "max_abs_grad": float(np.max(np.abs(analytic[name]))) if p.value.size else 0.0,
                     "max_abs_err": float(np.max(np.abs(analytic[name] - num))) if p.value.size else 0.0,
                     "rel_err": relative_error(analytic[name], num)})
    return rows


def check_model(model, g, x, labels, mask, lw, h: float = 1e-5) -> list[dict]:
    """Gradient check of the full composite loss for every model parameter."""

    def build(tape):
        fwd = model.forward(tape, g, x)
        return model.total_loss(fwd, labels, mask, lw)[0]

    return check_params(build, model.params, h)


def gradcheck_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRADCHECK_COLUMNS)
    for r in rows:
        w.writerow([r["param"], r["tag"], r["size"]] + [repr(float(r[c])) for c in GRADCHECK_COLUMNS[3:]])
    return buf.getvalue()

"""Empirical checks of global vs. node-wise filtering on the two-pattern CSBM.

Part 1 filters every node with the row-normalized adjacency D^-1 A and fits a
norm-bounded logistic classifier on homophilic nodes only. Part 2 negates the
filter on heterophilic nodes and fits one classifier on all nodes.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .csbm import C0, C1, H0, H1, CsbmParams, CsbmSample, expected_filtered_mean, generate
from .graph import OperatorKind

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("seed", "h0_acc", "h1_acc", "h1_bce", "bound", "part2_acc")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def bce(features, labels, w, b) -> float:
    """Mean binary cross-entropy of sigmoid(x.w + b), computed stably."""
    z = features @ w + b
    y = np.asarray(labels, dtype=np.float64)
    # log(1 + e^z) - y z
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fit_bounded_logistic(features, labels, R: float, steps: int = 500, lr: float = 0.1):
    """Projected gradient descent on BCE subject to ||w||_2 <= R, from w = 0, b = 0."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary (0/1)")
    if R < 0:
        raise ValueError("R must be nonnegative")
    y = y.astype(np.float64)
    n = len(y)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(steps):
        r = _sigmoid(x @ w + b) - y
        w = w - lr * (x.T @ r) / n
        b = b - lr * float(r.mean())
        norm = float(np.linalg.norm(w))
        if norm > R:
            w = w * (R / norm) if norm > 0 else w
    return w, b


def predict(features, w, b) -> np.ndarray:
    return (features @ w + b > 0).astype(np.int64)


def loss_bound(params: CsbmParams, R: float) -> float:
    """R (q1 - p1) / (2 (q1 + p1)) * ||mu - nu||."""
    return R * (params.q1 - params.p1) / (2.0 * (params.q1 + params.p1)) * params.mean_distance


def regime_flags(params: CsbmParams) -> list[str]:
    """Warnings where the theorem's growth conditions look violated at this n."""
    flags = []
    n = params.n
    floor = math.log(n) ** 2 / n
    for name in ("p0", "q0", "p1", "q1"):
        if getattr(params, name) < floor:
            flags.append(f"sparse:{name}<log^2(n)/n={floor:.4g}")
    need = math.log(n) / math.sqrt(params.d * n * (params.p0 + params.q0))
    if params.mean_distance < need:
        flags.append(f"close_means:||mu-nu||<{need:.4g}")
    return flags


@dataclass
class SeparabilityReport:
    seed: int
    bound: float
    R: float
    n_h0: int = 0
    n_h1: int = 0
    h0_acc: float = float("nan")
    h1_acc: float = float("nan")
    h1_bce: float = float("nan")
    full_acc: float = float("nan")
    part2_acc: float = float("nan")
    w: np.ndarray | None = None
    b: float = 0.0
    flags: list = field(default_factory=list)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}

    def text(self) -> str:
        lines = [f"seed={self.seed} |H0|={self.n_h0} |H1|={self.n_h1} R={self.R}"]
        for k in ("h0_acc", "h1_acc", "h1_bce", "bound", "full_acc", "part2_acc"):
            lines.append(f"  {k:10s} {getattr(self, k):.6f}")
        if self.flags:
            lines.append("  flags: " + ", ".join(self.flags))
        return "\n".join(lines)


def _sample(params, sample):
    return sample if sample is not None else generate(params)


def low_pass_features(sample: CsbmSample) -> np.ndarray:
    return sample.graph.operator(OperatorKind.ROW_ADJ).apply(sample.features)


def node_wise_features(sample: CsbmSample) -> np.ndarray:
    xf = low_pass_features(sample)
    return np.where((sample.pattern == H1)[:, None], -xf, xf)


def validate_part1(params: CsbmParams, R: float = 1.0, sample: CsbmSample | None = None,
                   steps: int = 500, lr: float = 0.1) -> SeparabilityReport:
    s = _sample(params, sample)
    rep = SeparabilityReport(params.seed, loss_bound(params, R), R, flags=regime_flags(params))
    h0 = np.flatnonzero(s.pattern == H0)
    h1 = np.flatnonzero(s.pattern == H1)
    rep.n_h0, rep.n_h1 = len(h0), len(h1)
    if len(h0) == 0:
        raise ValueError("no homophilic nodes to fit on")
    xf = low_pass_features(s)
    w, b = fit_bounded_logistic(xf[h0], s.labels[h0], R, steps, lr)
    rep.w, rep.b = w, b
    pred = predict(xf, w, b)
    rep.h0_acc = float(np.mean(pred[h0] == s.labels[h0]))
    rep.full_acc = float(np.mean(pred == s.labels))
    if len(h1) == 0:
        rep.flags.append("empty_H1")
    else:
        rep.h1_acc = float(np.mean(pred[h1] == s.labels[h1]))
        rep.h1_bce = bce(xf[h1], s.labels[h1], w, b)
    return rep


def validate_part2(params: CsbmParams, R: float = 1.0, sample: CsbmSample | None = None,
                   steps: int = 500, lr: float = 0.1) -> SeparabilityReport:
    s = _sample(params, sample)
    rep = SeparabilityReport(params.seed, loss_bound(params, R), R, flags=regime_flags(params))
    rep.n_h0 = int(np.sum(s.pattern == H0))
    rep.n_h1 = int(np.sum(s.pattern == H1))
    if rep.n_h0 == 0 or rep.n_h1 == 0:
        rep.flags.append("single_pattern")
    xf = node_wise_features(s)
    w, b = fit_bounded_logistic(xf, s.labels, R, steps, lr)
    rep.w, rep.b = w, b
    rep.part2_acc = float(np.mean(predict(xf, w, b) == s.labels))
    return rep


def validate_theorem(params: CsbmParams, R: float = 1.0) -> SeparabilityReport:
    """Both parts on one generated sample; part-2 accuracy merged into the report."""
    s = generate(params)
    rep = validate_part1(params, R, s)
    rep.part2_acc = validate_part2(params, R, s).part2_acc
    return rep


def filtered_mean_check(sample: CsbmSample, signed: bool = False, scale: float = 5.0) -> list[dict]:
    """Compare class/pattern-conditional filtered means with their expectation.

    With ``signed`` the heterophilic rows are negated (part-2 filter) and so is
    the expectation. Tolerance is ``scale / sqrt(count * d)`` on the max-abs
    per-coordinate deviation.
    """
    params = sample.params
    xf = node_wise_features(sample) if signed else low_pass_features(sample)
    rows = []
    for cls in (C0, C1):
        for pat in (H0, H1):
            m = (sample.labels == cls) & (sample.pattern == pat)
            count = int(m.sum())
            if count == 0:
                continue
            expected = expected_filtered_mean(params, cls, pat)
            if signed and pat == H1:
                expected = -expected
            dev = float(np.max(np.abs(xf[m].mean(axis=0) - expected)))
            tol = scale / math.sqrt(count * params.d)
            rows.append({"cls": cls, "pattern": pat, "count": count, "max_abs_dev": dev,
                         "tol": tol, "ok": dev <= tol})
    return rows


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([r.seed] + [repr(float(getattr(r, k))) for k in REPORT_COLUMNS[1:]])
    return buf.getvalue()

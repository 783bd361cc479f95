"""Homophily, gate and accuracy tables for trained models and raw graphs."""
from __future__ import annotations

import csv
import io
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import spearmanr

from .graph import Graph, build_graph, detect_communities, node_homophily


def silverman_bandwidth(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    std = float(np.std(v, ddof=1))
    q75, q25 = np.percentile(v, [75, 25])
    spread = min(std, (q75 - q25) / 1.34) if q75 > q25 else std
    return 0.9 * spread * v.size ** (-0.2)


def homophily_density(g: Graph, labels, bins: int = 50, h: np.ndarray | None = None) -> list[dict]:
    """Gaussian-KDE density of node homophily over ``bins`` equal bins of [0, 1].

    Each bin receives the kernel mass falling inside it (exact CDF
    differences), renormalized over [0, 1]; a zero bandwidth degenerates to a
    histogram. Isolated nodes are excluded.
    """
    if bins < 2:
        raise ValueError("need at least two bins")
    if h is None:
        h = node_homophily(g, labels)
    h = np.clip(h[~np.isnan(h)], 0.0, 1.0)
    edges = np.linspace(0.0, 1.0, bins + 1)
    width = 1.0 / bins
    if h.size == 0:
        mass = np.zeros(bins)
    else:
        bw = silverman_bandwidth(h)
        if bw > 0:
            cdf = ndtr((edges[None, :] - h[:, None]) / bw)
            mass = np.diff(cdf, axis=1).mean(axis=0)
        else:
            idx = np.minimum((h * bins).astype(np.int64), bins - 1)
            mass = np.bincount(idx, minlength=bins) / h.size
        mass = mass / mass.sum()
    return [{"bin": i, "lo": float(edges[i]), "hi": float(edges[i + 1]),
             "center": float(edges[i] + width / 2), "density": float(mass[i] / width)}
            for i in range(bins)]


def density_mode(table: list[dict]) -> float:
    return max(table, key=lambda r: r["density"])["center"]


def induced_subgraph(g: Graph, nodes: np.ndarray) -> tuple[Graph, np.ndarray]:
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    e = g.edge_list()
    keep = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0)
    return build_graph(local[e[keep]], len(nodes)), nodes


def community_homophily(g: Graph, labels, top_n: int = 10, seed: int = 0,
                        communities: np.ndarray | None = None) -> list[dict]:
    """Largest communities with their induced-subgraph homophily."""
    labels = np.asarray(labels)
    if communities is None:
        communities = detect_communities(g, seed)
    sizes = np.bincount(communities)
    order = sorted(range(len(sizes)), key=lambda c: (-sizes[c], c))[:top_n]
    rows = []
    for rank, c in enumerate(order):
        members = np.flatnonzero(communities == c)
        sub, nodes = induced_subgraph(g, members)
        h = node_homophily(sub, labels[nodes])
        finite = h[~np.isnan(h)]
        rows.append({"rank": rank, "community": int(c), "size": int(sizes[c]),
                     "homophily": float(finite.mean()) if finite.size else float("nan")})
    return rows


def bucketize(h: np.ndarray, buckets: int = 5) -> np.ndarray:
    """Equal-width bucket index in [0, buckets); h == 1 joins the last bucket; NaN -> -1."""
    h = np.asarray(h, dtype=np.float64)
    out = np.full(h.shape, -1, dtype=np.int64)
    ok = ~np.isnan(h)
    out[ok] = np.minimum((h[ok] * buckets).astype(np.int64), buckets - 1)
    return out


def _spearman(x, y) -> float:
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(spearmanr(x, y).statistic)


def gate_weight_by_homophily(weights: np.ndarray, h: np.ndarray, buckets: int = 5,
                             high_pass_expert: int = -1) -> tuple[list[dict], float]:
    """Mean gate weight per expert per homophily bucket, plus the Spearman
    correlation of bucket index with the high-pass expert's mean weight."""
    weights = np.asarray(weights, dtype=np.float64)
    m = weights.shape[1]
    hp = high_pass_expert % m
    b = bucketize(h, buckets)
    rows = []
    for k in range(buckets):
        sel = b == k
        row = {"bucket": k, "lo": k / buckets, "hi": (k + 1) / buckets, "count": int(sel.sum()),
               "empty": not sel.any()}
        for o in range(m):
            row[f"weight_expert_{o}"] = float(weights[sel, o].mean()) if sel.any() else float("nan")
        rows.append(row)
    present = [r for r in rows if not r["empty"]]
    rho = _spearman([r["bucket"] for r in present], [r[f"weight_expert_{hp}"] for r in present])
    return rows, rho


def accuracy_by_homophily(correct_a: np.ndarray, correct_b: np.ndarray | None, h: np.ndarray,
                          buckets: int = 5) -> tuple[list[dict], dict]:
    """Per-bucket accuracy of one or two models over the same node set.

    ``correct_*`` and ``h`` are aligned per evaluated node. Returns the table
    and overall accuracies (nodes with undefined homophily are counted in
    ``isolated`` and included in the overall numbers).
    """
    ca = np.asarray(correct_a, dtype=bool)
    cb = None if correct_b is None else np.asarray(correct_b, dtype=bool)
    b = bucketize(h, buckets)
    rows = []
    for k in range(buckets):
        sel = b == k
        row = {"bucket": k, "lo": k / buckets, "hi": (k + 1) / buckets, "count": int(sel.sum()),
               "acc_a": float(ca[sel].mean()) if sel.any() else float("nan")}
        if cb is not None:
            row["acc_b"] = float(cb[sel].mean()) if sel.any() else float("nan")
            row["delta"] = row["acc_a"] - row["acc_b"]
        rows.append(row)
    overall = {"acc_a": float(ca.mean()) if ca.size else float("nan"), "isolated": int(np.sum(b < 0))}
    if cb is not None:
        overall["acc_b"] = float(cb.mean()) if cb.size else float("nan")
    return rows, overall


def pick_high_pass_expert(model) -> int:
    """Expert initialized high-pass, else the one whose learned response rises most."""
    for o, e in enumerate(model.cfg.experts):
        if e.init == "increasing":
            return o
    lam = np.linspace(0, 2, 51)
    slopes = [np.mean(f.response(lam[lam > 1])) - np.mean(f.response(lam[lam < 1])) for f in model.filters()]
    return int(np.argmax(slopes))


def model_gate_by_homophily(model, data, buckets: int = 5, idx=None):
    weights = model.predict(data.graph, data.features).gate_weights()
    h = node_homophily(data.graph, data.labels)
    if idx is not None:
        weights, h = weights[idx], h[idx]
    return gate_weight_by_homophily(weights, h, buckets, pick_high_pass_expert(model) if weights.shape[1] > 1 else 0)


def model_accuracy_by_homophily(model_a, model_b, data, idx, buckets: int = 5):
    from .trainer import evaluate

    _, ca = evaluate(model_a, data, idx)
    cb = evaluate(model_b, data, idx)[1] if model_b is not None else None
    h = node_homophily(data.graph, data.labels)[np.asarray(idx)]
    return accuracy_by_homophily(ca, cb, h, buckets)


def table_to_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(r[c])) if isinstance(r[c], (float, np.floating)) else r[c] for c in columns])
    return buf.getvalue()


def svg_line_plot(x, series: dict, title: str = "", width: int = 480, height: int = 300) -> str:
    """Self-contained SVG polyline chart."""
    x = np.asarray(x, dtype=np.float64)
    ys = {k: np.asarray(v, dtype=np.float64) for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] or [np.zeros(1)])
    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        hi = lo + 1.0
    pad = 40
    sx = lambda v: pad + (v - x.min()) / (np.ptp(x) or 1.0) * (width - 2 * pad)  # noqa: E731
    sy = lambda v: height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)  # noqa: E731
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{x.min():.3g}</text>',
             f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{x.max():.3g}</text>',
             f'<text x="{pad - 3}" y="{pad}" font-size="10" text-anchor="end">{hi:.3g}</text>',
             f'<text x="{pad - 3}" y="{height - pad}" font-size="10" text-anchor="end">{lo:.3g}</text>']
    for i, (name, v) in enumerate(ys.items()):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, v) if np.isfinite(b))
        c = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{width - pad}" y="{pad + 14 * i}" font-size="10" fill="{c}" text-anchor="end">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

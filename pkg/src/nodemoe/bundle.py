"""Dataset directories: meta.json, edges.tsv, features.csv, labels.csv, splits.json.

Layout::

    meta.json     {"name", "num_nodes", "num_features", "num_classes", "num_edges",
                   "has_pattern", "csbm" (generator params, optional)}
    edges.tsv     one undirected edge per line, "src<TAB>dst"
    features.csv  one row per node, num_features comma-separated floats, no header
    labels.csv    header "node,label" (or "node,label,pattern"), one row per node
    splits.json   optional {"train": [...], "val": [...], "test": [...]}

Floats are written in shortest round-trip form, so a save/load cycle of
files written here reproduces every value bit for bit.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, build_graph
from .trainer import Split

log = logging.getLogger(__name__)


class BundleError(ValueError):
    pass


@dataclass(eq=False)
class DatasetBundle:
    name: str
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: Split | None = None
    pattern: np.ndarray | None = None
    extra_meta: dict = field(default_factory=dict)
    duplicate_edges: int = 0

    def validate(self):
        n = self.graph.num_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise BundleError(f"features have shape {self.features.shape}, expected ({n}, d)")
        if self.labels.shape != (n,):
            raise BundleError(f"{len(self.labels)} labels for {n} nodes")
        if self.num_classes < 2 or self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise BundleError(f"labels must lie in [0, {self.num_classes}) with at least 2 classes")
        if self.pattern is not None and self.pattern.shape != (n,):
            raise BundleError("pattern flags must have one entry per node")

    @classmethod
    def from_sample(cls, sample, name: str = "csbm", split: Split | None = None) -> "DatasetBundle":
        meta = {"csbm": sample.params.as_dict()} if sample.params is not None else {}
        return cls(name, sample.graph, sample.features, sample.labels, 2, split, sample.pattern, meta)


def _fmt(v: float) -> str:
    return repr(float(v))


def save_bundle(bundle: DatasetBundle, directory) -> None:
    bundle.validate()
    os.makedirs(directory, exist_ok=True)
    g = bundle.graph
    meta = {
        "name": bundle.name,
        "num_nodes": g.num_nodes,
        "num_features": int(bundle.features.shape[1]),
        "num_classes": int(bundle.num_classes),
        "num_edges": g.num_edges,
        "has_pattern": bundle.pattern is not None,
    }
    meta.update(bundle.extra_meta)
    with open(os.path.join(directory, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(directory, "edges.tsv"), "w") as fh:
        for u, v in g.edge_list():
            fh.write(f"{u}\t{v}\n")
    with open(os.path.join(directory, "features.csv"), "w") as fh:
        for row in bundle.features:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    with open(os.path.join(directory, "labels.csv"), "w") as fh:
        if bundle.pattern is None:
            fh.write("node,label\n")
            for i, y in enumerate(bundle.labels):
                fh.write(f"{i},{y}\n")
        else:
            fh.write("node,label,pattern\n")
            for i, (y, p) in enumerate(zip(bundle.labels, bundle.pattern)):
                fh.write(f"{i},{y},{p}\n")
    split_path = os.path.join(directory, "splits.json")
    if bundle.split is not None:
        with open(split_path, "w") as fh:
            json.dump(bundle.split.to_dict(), fh)
            fh.write("\n")
    elif os.path.exists(split_path):
        os.remove(split_path)


def _open(directory, name):
    path = os.path.join(directory, name)
    if not os.path.exists(path):
        raise BundleError(f"missing file {path}")
    return open(path)


def load_bundle(directory) -> DatasetBundle:
    with _open(directory, "meta.json") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BundleError(f"meta.json: {exc}") from exc
    try:
        n = int(meta["num_nodes"])
        d = int(meta["num_features"])
        c = int(meta["num_classes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"meta.json: missing or invalid field ({exc})") from exc

    edges = []
    seen = set()
    dups = 0
    with _open(directory, "edges.tsv") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise BundleError(f"edges.tsv:{lineno}: expected 'src<TAB>dst', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise BundleError(f"edges.tsv:{lineno}: non-integer endpoint in {line!r}") from None
            if not (0 <= u < n and 0 <= v < n):
                raise BundleError(f"edges.tsv:{lineno}: endpoint out of range [0, {n}) in {line!r}")
            key = (min(u, v), max(u, v))
            if key in seen:
                dups += 1
            seen.add(key)
            edges.append(key)
    if dups:
        log.warning("edges.tsv: %d duplicate edge lines collapsed", dups)

    features = np.empty((n, d))
    rows = 0
    with _open(directory, "features.csv") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if rows >= n:
                raise BundleError(f"features.csv:{lineno}: more than {n} rows")
            parts = line.split(",")
            if len(parts) != d:
                raise BundleError(f"features.csv:{lineno}: {len(parts)} values, expected {d}")
            try:
                features[rows] = [float(p) for p in parts]
            except ValueError:
                raise BundleError(f"features.csv:{lineno}: non-numeric value") from None
            rows += 1
    if rows != n:
        raise BundleError(f"features.csv: {rows} rows, expected {n}")

    labels = np.full(n, -1, dtype=np.int64)
    pattern = None
    with _open(directory, "labels.csv") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["node", "label"]:
            raise BundleError(f"labels.csv:1: header must start with 'node,label', got {header}")
        has_pattern = "pattern" in header
        if has_pattern:
            pattern = np.full(n, -1, dtype=np.int64)
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise BundleError(f"labels.csv:{lineno}: expected {len(header)} fields")
            try:
                vals = [int(p) for p in parts]
            except ValueError:
                raise BundleError(f"labels.csv:{lineno}: non-integer field in {line!r}") from None
            i = vals[0]
            if not 0 <= i < n:
                raise BundleError(f"labels.csv:{lineno}: node {i} out of range")
            if not 0 <= vals[1] < c:
                raise BundleError(f"labels.csv:{lineno}: label {vals[1]} outside [0, {c})")
            labels[i] = vals[1]
            if has_pattern:
                pattern[i] = vals[2]
    if np.any(labels < 0):
        raise BundleError(f"labels.csv: {int(np.sum(labels < 0))} nodes without a label")

    split = None
    split_path = os.path.join(directory, "splits.json")
    if os.path.exists(split_path):
        with open(split_path) as fh:
            try:
                raw = json.load(fh)
                split = Split(raw["train"], raw["val"], raw["test"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise BundleError(f"splits.json: {exc}") from exc
        parts = [split.train, split.val, split.test]
        allidx = np.concatenate(parts)
        if allidx.size and (allidx.min() < 0 or allidx.max() >= n):
            raise BundleError("splits.json: index out of range")
        if len(np.unique(allidx)) != len(allidx):
            raise BundleError("splits.json: train/val/test overlap")

    extra = {k: v for k, v in meta.items()
             if k not in ("name", "num_nodes", "num_features", "num_classes", "num_edges", "has_pattern")}
    bundle = DatasetBundle(meta.get("name", os.path.basename(os.path.normpath(directory))),
                           build_graph(edges, n), features, labels, c, split, pattern, extra, dups)
    bundle.validate()
    return bundle

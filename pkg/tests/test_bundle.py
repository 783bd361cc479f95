import json

import numpy as np
import pytest

from nodemoe.bundle import BundleError, DatasetBundle, load_bundle, save_bundle
from nodemoe.csbm import generate, regime1
from nodemoe.graph import build_graph
from nodemoe.trainer import make_split


@pytest.fixture
def sample():
    return generate(regime1(2).replace(n=120))


def test_round_trip_bit_exact(tmp_path, sample):
    split = make_split(120, sample.labels, seed=2)
    save_bundle(DatasetBundle.from_sample(sample, "toy", split), tmp_path)
    b = load_bundle(tmp_path)
    assert b.name == "toy" and b.num_classes == 2
    assert np.array_equal(b.features, sample.features)
    assert np.array_equal(b.labels, sample.labels)
    assert np.array_equal(b.pattern, sample.pattern)
    assert np.array_equal(b.graph.csr_offsets, sample.graph.csr_offsets)
    assert np.array_equal(b.graph.csr_targets, sample.graph.csr_targets)
    assert b.split.to_dict() == split.to_dict()
    assert b.extra_meta["csbm"]["seed"] == 2


def test_resave_identical_bytes(tmp_path, sample):
    save_bundle(DatasetBundle.from_sample(sample), tmp_path / "a")
    save_bundle(load_bundle(tmp_path / "a"), tmp_path / "b")
    for f in ("meta.json", "edges.tsv", "features.csv", "labels.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def _write_min(d, edges="0\t1\n", n=3):
    d.mkdir(exist_ok=True)
    (d / "meta.json").write_text(json.dumps({"num_nodes": n, "num_features": 2, "num_classes": 2}))
    (d / "edges.tsv").write_text(edges)
    (d / "features.csv").write_text("".join(f"{i}.5,1e-3\n" for i in range(n)))
    (d / "labels.csv").write_text("node,label\n" + "".join(f"{i},{i % 2}\n" for i in range(n)))


def test_external_decimal_text(tmp_path):
    _write_min(tmp_path)
    b = load_bundle(tmp_path)
    assert b.features[2].tolist() == [2.5, 0.001]
    assert b.split is None and b.pattern is None


def test_endpoint_out_of_range_names_line(tmp_path):
    _write_min(tmp_path, edges="0\t1\n1\t2\n2\t3\n")
    with pytest.raises(BundleError, match=r"edges.tsv:3"):
        load_bundle(tmp_path)


def test_duplicate_edges_counted(tmp_path):
    _write_min(tmp_path, edges="0\t1\n1\t0\n0\t1\n1\t2\n")
    b = load_bundle(tmp_path)
    assert b.graph.num_edges == 2 and b.duplicate_edges == 2


@pytest.mark.parametrize("fname,content,pattern", [
    ("edges.tsv", "0 1\n", r"edges.tsv:1"),
    ("edges.tsv", "0\tx\n", r"edges.tsv:1"),
    ("features.csv", "1,2\n1,oops\n1,2\n", r"features.csv:2"),
    ("features.csv", "1,2\n1,2\n", r"features.csv"),
    ("features.csv", "1,2,3\n1,2\n1,2\n", r"features.csv:1"),
    ("labels.csv", "node,label\n0,0\n1,5\n2,0\n", r"labels.csv:3"),
    ("labels.csv", "id,y\n", r"labels.csv:1"),
    ("labels.csv", "node,label\n0,0\n1,1\n", r"without a label"),
    ("meta.json", "{", r"meta.json"),
    ("meta.json", '{"num_nodes": 3}', r"meta.json"),
    ("splits.json", '{"train": [0, 1], "val": [1], "test": [2]}', r"overlap"),
    ("splits.json", '{"train": [0, 9], "val": [], "test": []}', r"out of range"),
])
def test_malformed(tmp_path, fname, content, pattern):
    _write_min(tmp_path)
    (tmp_path / fname).write_text(content)
    with pytest.raises(BundleError, match=pattern):
        load_bundle(tmp_path)


def test_missing_file(tmp_path):
    _write_min(tmp_path)
    (tmp_path / "labels.csv").unlink()
    with pytest.raises(BundleError, match="missing"):
        load_bundle(tmp_path)


def test_validate_on_save(tmp_path):
    g = build_graph([(0, 1)], 2)
    with pytest.raises(BundleError):
        save_bundle(DatasetBundle("x", g, np.zeros((3, 1)), np.zeros(2, int), 2), tmp_path)
    with pytest.raises(BundleError):
        save_bundle(DatasetBundle("x", g, np.zeros((2, 1)), np.array([0, 2]), 2), tmp_path)

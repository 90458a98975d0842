import json

import numpy as np
import pandas as pd
import pytest
import scipy.sparse as sp

from gsattack.attacker import dice_attack
from gsattack.bundle import (
    load_dataset,
    load_poisoned,
    load_trace,
    read_trace,
    save_dataset,
    save_poisoned,
    undo_trace,
)
from gsattack.exceptions import DuplicateEdge, IndexOutOfRange, ReplayMismatch, SchemaError, SelfLoopInInput
from gsattack.graph import Graph
from gsattack.models import AttackTrace, PerturbationRecord


def write_edges(root, rows):
    (root / "edges.csv").write_text("src,dst\n" + "".join(f"{a},{b}\n" for a, b in rows))


def test_dense_bundle_roundtrip(tmp_path, small_sbm):
    graph, labels = small_sbm
    save_dataset(graph, labels, tmp_path)
    loaded, loaded_labels = load_dataset(tmp_path)
    assert (loaded.adjacency != graph.adjacency).nnz == 0
    # 17 значащих цифр: признаки восстанавливаются без потерь
    assert np.array_equal(loaded.features, graph.features)
    assert np.array_equal(loaded_labels.labels, labels.labels)
    assert np.array_equal(loaded_labels.train_idx, labels.train_idx)
    assert np.array_equal(loaded_labels.test_idx, labels.test_idx)


def test_sparse_bundle_roundtrip(tmp_path, triangle_with_tail):
    graph, labels = triangle_with_tail
    features = sp.csr_matrix(np.array([[0.1, 0.0], [0.0, 1 / 3], [0.0, 0.0], [2.5, 1e-17]]))
    sparse_graph = Graph(graph.adjacency, features)
    save_dataset(sparse_graph, labels, tmp_path)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["feature_storage"] == "sparse"
    loaded, _ = load_dataset(tmp_path)
    assert sp.issparse(loaded.features)
    assert np.array_equal(loaded.features.toarray(), features.toarray())


def test_missing_splits_are_generated(tmp_path, small_sbm):
    graph, labels = small_sbm
    save_dataset(graph, labels, tmp_path)
    (tmp_path / "splits.json").unlink()
    _, loaded = load_dataset(tmp_path)
    assert loaded.train_idx.size > 0
    assert np.intersect1d(loaded.train_idx, loaded.test_idx).size == 0


@pytest.mark.parametrize(
    "rows, error, line",
    [
        ([(0, 1), (2, 2)], SelfLoopInInput, 3),
        ([(0, 1), (1, 2), (0, 1)], DuplicateEdge, 4),
        ([(0, 1), (1, 9)], IndexOutOfRange, 3),
        ([(1, 0)], SchemaError, 2),
    ],
)
def test_edge_list_errors_report_line(tmp_path, triangle_with_tail, rows, error, line):
    graph, labels = triangle_with_tail
    save_dataset(graph, labels, tmp_path)
    write_edges(tmp_path, rows)
    with pytest.raises(error) as info:
        load_dataset(tmp_path)
    assert info.value.file == "edges.csv"
    assert info.value.line == line


def test_bad_header_and_missing_files(tmp_path, triangle_with_tail):
    graph, labels = triangle_with_tail
    save_dataset(graph, labels, tmp_path)
    (tmp_path / "edges.csv").write_text("a,b\n0,1\n")
    with pytest.raises(SchemaError) as info:
        load_dataset(tmp_path)
    assert info.value.line == 1
    (tmp_path / "meta.json").unlink()
    with pytest.raises(SchemaError) as info:
        load_dataset(tmp_path)
    assert info.value.file == "meta.json"


def test_unlabeled_node_is_rejected(tmp_path, triangle_with_tail):
    graph, labels = triangle_with_tail
    save_dataset(graph, labels, tmp_path)
    (tmp_path / "labels.csv").write_text("node,label\n0,0\n1,0\n2,1\n")
    with pytest.raises(SchemaError):
        load_dataset(tmp_path)


def test_poisoned_bundle_roundtrip(tmp_path, small_sbm):
    graph, labels = small_sbm
    poisoned, trace = dice_attack(graph, labels, budget=6, seed=0)
    save_poisoned(poisoned, trace, tmp_path, labels=labels, clean_graph=graph)
    loaded, _, loaded_trace = load_poisoned(tmp_path)
    assert (loaded.adjacency != poisoned.adjacency).nnz == 0
    assert loaded_trace.trace_hash() == trace.trace_hash()
    assert [r.h_gt for r in loaded_trace.records] == [r.h_gt for r in trace.records]
    assert loaded_trace.method == "dice"
    assert load_trace(tmp_path, clean_graph=graph).budget == 6


def test_trace_keeps_undefined_homophily(tmp_path):
    # единственное ребро удалено: гомофилия после флипа не определена
    poisoned = Graph.from_edges(3, [], np.eye(3))
    record = PerturbationRecord(
        iteration=1, i=0, j=1, action="remove", saliency=-0.5,
        intra_pseudo=True, intra_gt=True, h_pseudo=None, h_gt=None,
    )
    trace = AttackTrace(records=[record], clean_h_pseudo=1.0, clean_h_gt=1.0, clean_edge_count=1)
    save_poisoned(poisoned, trace, tmp_path)
    loaded = read_trace(tmp_path)
    assert loaded.records[0].h_gt is None
    assert loaded.records[0].h_pseudo is None
    assert loaded.clean_h_gt == 1.0
    assert loaded.trace_hash() == trace.trace_hash()


def test_sparse_feature_value_must_be_numeric(tmp_path, triangle_with_tail):
    graph, labels = triangle_with_tail
    sparse_graph = Graph(graph.adjacency, sp.csr_matrix(np.eye(4)))
    save_dataset(sparse_graph, labels, tmp_path)
    (tmp_path / "features.triplets").write_text("node,dim,value\n0,0,1.0\n1,1,oops\n")
    with pytest.raises(SchemaError) as info:
        load_dataset(tmp_path)
    assert info.value.line == 3


def test_broken_json_reports_line(tmp_path, triangle_with_tail):
    graph, labels = triangle_with_tail
    save_dataset(graph, labels, tmp_path)
    (tmp_path / "meta.json").write_text('{\n  "num_nodes": 4,\n  oops\n}\n')
    with pytest.raises(SchemaError) as info:
        load_dataset(tmp_path)
    assert info.value.file == "meta.json"
    assert info.value.line == 3


def test_trace_must_lead_from_clean_graph(tmp_path, small_sbm):
    graph, labels = small_sbm
    poisoned, trace = dice_attack(graph, labels, budget=3, seed=0)
    with pytest.raises(ReplayMismatch):
        save_poisoned(graph, trace, tmp_path)
    save_poisoned(poisoned, trace, tmp_path)
    touched = {(r.i, r.j) for r in trace.records}
    pair = next((i, j) for i in range(graph.n_nodes) for j in range(i + 1, graph.n_nodes) if (i, j) not in touched)
    other = graph.flip(*pair)
    with pytest.raises(ReplayMismatch):
        load_trace(tmp_path, clean_graph=other)


def test_undo_trace_checks_edge_count(small_sbm):
    graph, labels = small_sbm
    poisoned, trace = dice_attack(graph, labels, budget=2, seed=0)
    edges = {(int(i), int(j)) for i, j in poisoned.edge_list()}
    assert undo_trace(edges, trace) == {(int(i), int(j)) for i, j in graph.edge_list()}
    with pytest.raises(ReplayMismatch):
        undo_trace(edges | {(-1, -2)}, trace)


def test_read_trace_requires_sequential_iterations(tmp_path, small_sbm):
    graph, labels = small_sbm
    poisoned, trace = dice_attack(graph, labels, budget=3, seed=0)
    save_poisoned(poisoned, trace, tmp_path)
    frame = pd.read_csv(tmp_path / "perturbations.csv")
    frame.loc[1, "iter"] = 5
    frame.to_csv(tmp_path / "perturbations.csv", index=False)
    with pytest.raises(SchemaError) as info:
        read_trace(tmp_path / "perturbations.csv")
    assert info.value.line == 3

"""
Бандлы на диске: датасет (meta.json, edges.csv, features.csv | features.triplets,
labels.csv, splits.json) и отравленный граф (тот же бандл + perturbations.csv + config.json).
Числа с плавающей точкой пишутся с 17 значащими цифрами и читаются без потерь.
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import ValidationError

from .config import (
    EDGES_FILE,
    FEATURES_DENSE_FILE,
    FEATURES_SPARSE_FILE,
    FLOAT_FORMAT,
    LABELS_FILE,
    META_FILE,
    PERTURBATIONS_FILE,
    PERTURBATION_COLUMNS,
    SPLITS_FILE,
    TRACE_CONFIG_FILE,
    TRAIN_FRACTION,
)
from .exceptions import DuplicateEdge, IndexOutOfRange, ReplayMismatch, SchemaError, SelfLoopInInput
from .graph import Graph, LabelData, stratified_split
from .models import ACTION_ADD, AttackTrace, DatasetMeta, PerturbationRecord, SplitSpec

from log import get_logger

logger = get_logger("gsattack.bundle")

PathLike = Union[str, Path]
Pair = Tuple[int, int]

# Номер строки файла для строки DataFrame: шапка занимает строку 1
_HEADER_LINES = 1


def _read_json(path: Path) -> Any:
    if not path.exists():
        raise SchemaError("required file is missing", file=path.name)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", file=path.name, line=e.lineno) from e


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def _read_table(path: Path, columns: List[str]) -> pd.DataFrame:
    if not path.exists():
        raise SchemaError("required file is missing", file=path.name)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise SchemaError("file is empty, header expected", file=path.name, line=1) from e
    if list(frame.columns) != columns:
        raise SchemaError(
            f"unexpected header, expected {','.join(columns)}",
            file=path.name, line=1, header=list(frame.columns),
        )
    return frame


def _int_column(frame: pd.DataFrame, column: str, file: str) -> np.ndarray:
    if frame.empty:
        return np.empty(0, dtype=np.int64)
    values = pd.to_numeric(frame[column], errors="coerce").astype(np.float64)
    bad = values.isna() | (values != values.round())
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise SchemaError(f"column {column} must hold integers", file=file, line=row + 1 + _HEADER_LINES)
    return values.to_numpy(dtype=np.int64)


def _float_column(frame: pd.DataFrame, column: str, file: str) -> np.ndarray:
    if frame.empty:
        return np.empty(0, dtype=np.float64)
    bad = pd.to_numeric(frame[column], errors="coerce").isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise SchemaError(f"column {column} must hold numbers", file=file, line=row + 1 + _HEADER_LINES)
    # astype разбирает строки без потери точности %.17g
    return frame[column].astype(np.float64).to_numpy()


def _first(mask: np.ndarray) -> Optional[int]:
    hits = np.flatnonzero(mask)
    return int(hits[0]) if hits.size else None


# ============== Чтение датасета ==============

def _load_meta(root: Path) -> DatasetMeta:
    try:
        return DatasetMeta.model_validate(_read_json(root / META_FILE))
    except ValidationError as e:
        raise SchemaError(f"invalid meta: {e.errors()[0]['msg']}", file=META_FILE) from e


def _load_edges(root: Path, n_nodes: int) -> np.ndarray:
    frame = _read_table(root / EDGES_FILE, ["src", "dst"])
    src = _int_column(frame, "src", EDGES_FILE)
    dst = _int_column(frame, "dst", EDGES_FILE)
    line = lambda row: row + 1 + _HEADER_LINES  # noqa: E731

    row = _first((src < 0) | (dst < 0) | (src >= n_nodes) | (dst >= n_nodes))
    if row is not None:
        raise IndexOutOfRange("edge endpoint out of range", file=EDGES_FILE, line=line(row), n_nodes=n_nodes)
    row = _first(src == dst)
    if row is not None:
        raise SelfLoopInInput("self-loop in edge list", file=EDGES_FILE, line=line(row), node=int(src[row]))
    row = _first(src > dst)
    if row is not None:
        raise SchemaError("edges must be listed with src < dst", file=EDGES_FILE, line=line(row))
    pairs = np.stack([src, dst], axis=1)
    duplicated = pd.DataFrame(pairs).duplicated().to_numpy()
    row = _first(duplicated)
    if row is not None:
        raise DuplicateEdge("edge listed twice", file=EDGES_FILE, line=line(row), edge=[int(src[row]), int(dst[row])])
    return pairs


def _load_features(root: Path, meta: DatasetMeta):
    n, d = meta.num_nodes, meta.feature_dim
    if meta.feature_storage == "sparse":
        frame = _read_table(root / FEATURES_SPARSE_FILE, ["node", "dim", "value"])
        node = _int_column(frame, "node", FEATURES_SPARSE_FILE)
        dim = _int_column(frame, "dim", FEATURES_SPARSE_FILE)
        value = _float_column(frame, "value", FEATURES_SPARSE_FILE)
        row = _first((node < 0) | (node >= n) | (dim < 0) | (dim >= d))
        if row is not None:
            raise IndexOutOfRange("feature index out of range", file=FEATURES_SPARSE_FILE, line=row + 1 + _HEADER_LINES)
        return sp.csr_matrix((value, (node, dim)), shape=(n, d))

    path = root / FEATURES_DENSE_FILE
    if not path.exists():
        raise SchemaError("required file is missing", file=FEATURES_DENSE_FILE)
    try:
        frame = pd.read_csv(path, header=None, float_precision="round_trip")
    except pd.errors.EmptyDataError as e:
        raise SchemaError("feature file is empty", file=FEATURES_DENSE_FILE, line=1) from e
    if frame.shape != (n, d):
        raise SchemaError(
            "feature matrix shape does not match meta",
            file=FEATURES_DENSE_FILE, expected=[n, d], found=list(frame.shape),
        )
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    row = _first(numeric.isna().any(axis=1).to_numpy())
    if row is not None:
        raise SchemaError("features must be numeric", file=FEATURES_DENSE_FILE, line=row + 1)
    return numeric.to_numpy(dtype=np.float64)


def _load_labels(root: Path, meta: DatasetMeta) -> np.ndarray:
    frame = _read_table(root / LABELS_FILE, ["node", "label"])
    node = _int_column(frame, "node", LABELS_FILE)
    label = _int_column(frame, "label", LABELS_FILE)
    row = _first((node < 0) | (node >= meta.num_nodes) | (label < 0) | (label >= meta.num_classes))
    if row is not None:
        raise IndexOutOfRange("node or label out of range", file=LABELS_FILE, line=row + 1 + _HEADER_LINES)
    row = _first(pd.Series(node).duplicated().to_numpy())
    if row is not None:
        raise SchemaError("node labeled twice", file=LABELS_FILE, line=row + 1 + _HEADER_LINES, node=int(node[row]))
    if node.size != meta.num_nodes:
        raise SchemaError("every node must be labeled", file=LABELS_FILE, labeled=int(node.size), n_nodes=meta.num_nodes)
    labels = np.empty(meta.num_nodes, dtype=np.int64)
    labels[node] = label
    return labels


def _load_splits(root: Path, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    path = root / SPLITS_FILE
    if not path.exists():
        logger.info("%s missing: generating a stratified %.0f%% split", SPLITS_FILE, TRAIN_FRACTION * 100)
        return stratified_split(labels, TRAIN_FRACTION, seed=0)
    try:
        spec = SplitSpec.model_validate(_read_json(path))
    except ValidationError as e:
        raise SchemaError(f"invalid splits: {e.errors()[0]['msg']}", file=SPLITS_FILE) from e
    n = labels.size
    if max(spec.train + spec.test) >= n:
        raise IndexOutOfRange("split index out of range", file=SPLITS_FILE, n_nodes=n)
    return np.asarray(spec.train, dtype=np.int64), np.asarray(spec.test, dtype=np.int64)


def load_dataset(path: PathLike) -> Tuple[Graph, LabelData]:
    root = Path(path)
    meta = _load_meta(root)
    edges = _load_edges(root, meta.num_nodes)
    features = _load_features(root, meta)
    labels = _load_labels(root, meta)
    train_idx, test_idx = _load_splits(root, labels)
    graph = Graph.from_edges(meta.num_nodes, edges, features)
    label_data = LabelData(labels=labels, k_classes=meta.num_classes, train_idx=train_idx, test_idx=test_idx)
    logger.info(
        "dataset loaded from %s: %d nodes, %d edges, %d classes, %d features",
        root, graph.n_nodes, graph.edge_count, meta.num_classes, meta.feature_dim,
    )
    return graph, label_data


# ============== Запись датасета ==============

def _write_edges(root: Path, graph: Graph) -> None:
    edges = graph.edge_list()
    pd.DataFrame({"src": edges[:, 0], "dst": edges[:, 1]}).to_csv(root / EDGES_FILE, index=False)


def save_dataset(graph: Graph, labels: LabelData, path: PathLike, split_seed: int = 0) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    sparse = sp.issparse(graph.features)
    meta = DatasetMeta(
        num_nodes=graph.n_nodes,
        num_classes=labels.k_classes,
        feature_dim=graph.feature_dim,
        feature_storage="sparse" if sparse else "dense",
    )
    _write_json(root / META_FILE, meta.model_dump())
    _write_edges(root, graph)
    if sparse:
        coo = graph.features.tocoo()
        order = np.lexsort((coo.col, coo.row))
        pd.DataFrame({"node": coo.row[order], "dim": coo.col[order], "value": coo.data[order]}).to_csv(
            root / FEATURES_SPARSE_FILE, index=False, float_format=FLOAT_FORMAT,
        )
    else:
        pd.DataFrame(graph.features).to_csv(
            root / FEATURES_DENSE_FILE, index=False, header=False, float_format=FLOAT_FORMAT,
        )
    pd.DataFrame({"node": np.arange(labels.n_nodes), "label": labels.labels}).to_csv(root / LABELS_FILE, index=False)
    splits = SplitSpec(train=labels.train_idx.tolist(), test=labels.test_idx.tolist(), seed=split_seed)
    _write_json(root / SPLITS_FILE, splits.model_dump())
    logger.info("dataset written to %s", root)
    return root


# ============== Трасса атаки ==============

def _record_to_row(r: PerturbationRecord) -> Dict[str, Any]:
    return {
        "iter": r.iteration,
        "i": r.i,
        "j": r.j,
        "action": r.action,
        "saliency": r.saliency,
        "intra_pseudo": int(r.intra_pseudo),
        "intra_gt": int(r.intra_gt),
        "h_pseudo": r.h_pseudo,
        "h_gt": r.h_gt,
        "lambda1": r.lambda1,
        "lambda2": r.lambda2,
    }


def _optional_float(text: str) -> Optional[float]:
    # пустая ячейка: гомофилия графа без рёбер
    return float(text) if text != "" else None


def _row_to_record(row: Dict[str, str]) -> PerturbationRecord:
    return PerturbationRecord(
        iteration=int(row["iter"]),
        i=int(row["i"]),
        j=int(row["j"]),
        action=row["action"],
        saliency=float(row["saliency"]),
        intra_pseudo=row["intra_pseudo"] == "1",
        intra_gt=row["intra_gt"] == "1",
        h_pseudo=_optional_float(row["h_pseudo"]),
        h_gt=_optional_float(row["h_gt"]),
        lambda1=float(row["lambda1"]),
        lambda2=float(row["lambda2"]),
    )


def undo_trace(poisoned_edges: Set[Pair], trace: AttackTrace) -> Set[Pair]:
    """Откатывает записи с конца: add должно присутствовать, remove должно отсутствовать."""
    edges = set(poisoned_edges)
    for r in reversed(trace.records):
        pair = (r.i, r.j)
        if r.action == ACTION_ADD:
            if pair not in edges:
                raise ReplayMismatch("added edge is missing from the stored graph", iteration=r.iteration, i=r.i, j=r.j)
            edges.remove(pair)
        else:
            if pair in edges:
                raise ReplayMismatch("removed edge is present in the stored graph", iteration=r.iteration, i=r.i, j=r.j)
            edges.add(pair)
    if len(edges) != trace.clean_edge_count:
        raise ReplayMismatch(
            "recovered clean edge count differs from the trace",
            recovered=len(edges), expected=trace.clean_edge_count,
        )
    return edges


def _edge_set(graph: Graph) -> Set[Pair]:
    return {(int(i), int(j)) for i, j in graph.edge_list()}


def save_poisoned(
    graph: Graph,
    trace: AttackTrace,
    path: PathLike,
    labels: Optional[LabelData] = None,
    clean_graph: Optional[Graph] = None,
) -> Path:
    """edges.csv (итоговый граф) + perturbations.csv + config.json; с labels получается полный бандл."""
    recovered = undo_trace(_edge_set(graph), trace)
    if clean_graph is not None and recovered != _edge_set(clean_graph):
        raise ReplayMismatch("trace does not lead from the clean graph to the poisoned graph")
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if labels is not None:
        save_dataset(graph, labels, root)
    else:
        _write_edges(root, graph)
    rows = [_record_to_row(r) for r in trace.records]
    pd.DataFrame(rows, columns=PERTURBATION_COLUMNS).to_csv(
        root / PERTURBATIONS_FILE, index=False, float_format=FLOAT_FORMAT,
    )
    _write_json(root / TRACE_CONFIG_FILE, trace.model_dump(exclude={"records"}))
    logger.info("poisoned graph written to %s (%d flips)", root, len(rows))
    return root


def read_trace(path: PathLike) -> AttackTrace:
    """Читает трассу без сверки с графом (perturbations.csv + config.json рядом)."""
    path = Path(path)
    root = path.parent if path.is_file() else path
    frame = _read_table(root / PERTURBATIONS_FILE, PERTURBATION_COLUMNS)
    records = []
    for k, row in enumerate(frame.to_dict(orient="records")):
        line = k + 1 + _HEADER_LINES
        try:
            record = _row_to_record(row)
        except (ValueError, ValidationError) as e:
            raise SchemaError(f"invalid perturbation row: {e}", file=PERTURBATIONS_FILE, line=line) from e
        if record.iteration != k + 1:
            raise SchemaError("iterations must run 1, 2, ... in order", file=PERTURBATIONS_FILE, line=line)
        records.append(record)
    header = _read_json(root / TRACE_CONFIG_FILE)
    try:
        return AttackTrace.model_validate({**header, "records": records})
    except ValidationError as e:
        raise SchemaError(f"invalid trace config: {e.errors()[0]['msg']}", file=TRACE_CONFIG_FILE) from e


def load_trace(path: PathLike, clean_graph: Optional[Graph] = None) -> AttackTrace:
    """Трасса отравленного бандла; записи сверяются с сохранённым edges.csv."""
    path = Path(path)
    root = path.parent if path.is_file() else path
    trace = read_trace(root)
    meta_path = root / META_FILE
    if meta_path.exists():
        n_nodes = _load_meta(root).num_nodes
    elif clean_graph is not None:
        n_nodes = clean_graph.n_nodes
    else:
        raise SchemaError("node count unknown: meta.json missing and no clean graph given", file=META_FILE)
    stored = {(int(i), int(j)) for i, j in _load_edges(root, n_nodes)}
    recovered = undo_trace(stored, trace)
    if clean_graph is not None and recovered != _edge_set(clean_graph):
        raise ReplayMismatch("trace does not reproduce the stored adjacency from the clean graph")
    return trace


def load_poisoned(path: PathLike) -> Tuple[Graph, LabelData, AttackTrace]:
    graph, labels = load_dataset(path)
    return graph, labels, load_trace(path)

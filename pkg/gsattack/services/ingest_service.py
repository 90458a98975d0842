"""
Разовый конвертер сырых датасетов в бандл: Planetoid (ind.<name>.x, .tx, .allx,
.y, .ty, .ally, .graph, .test.index) и LINQS (<name>.content, <name>.cites).
Симметризует рёбра, убирает петли и повторы, при желании оставляет
наибольшую компоненту связности и делает стратифицированное разбиение.
"""
import pickle
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..bundle import save_dataset
from ..config import TRAIN_FRACTION
from ..exceptions import SchemaError
from ..graph import Graph, LabelData, stratified_split

from log import get_logger

logger = get_logger("gsattack.ingest")

PathLike = Union[str, Path]

PLANETOID_PARTS = ["x", "y", "tx", "ty", "allx", "ally", "graph"]


@dataclass
class RawDataset:
    """Сырые данные до очистки: направленные пары, признаки, метки (−1 означает отсутствие метки)."""

    pairs: np.ndarray
    features: sp.csr_matrix
    labels: np.ndarray
    class_names: List[str]


def detect_format(raw: Path, name: Optional[str] = None) -> Tuple[str, str]:
    if raw.is_file():
        raw = raw.parent
    if name is None:
        graphs = sorted(raw.glob("ind.*.graph"))
        contents = sorted(raw.glob("*.content"))
        if graphs:
            return "planetoid", graphs[0].name.split(".")[1]
        if contents:
            return "linqs", contents[0].stem
        raise SchemaError("no Planetoid or LINQS files found", file=str(raw))
    if (raw / f"ind.{name}.graph").exists():
        return "planetoid", name
    if (raw / f"{name}.content").exists():
        return "linqs", name
    raise SchemaError(f"dataset {name} not found", file=str(raw))


def _load_pickle(path: Path):
    if not path.exists():
        raise SchemaError("required file is missing", file=path.name)
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def read_planetoid(root: Path, name: str) -> RawDataset:
    x, y, tx, ty, allx, ally, graph = (_load_pickle(root / f"ind.{name}.{part}") for part in PLANETOID_PARTS)
    index_path = root / f"ind.{name}.test.index"
    if not index_path.exists():
        raise SchemaError("required file is missing", file=index_path.name)
    test_idx_reorder = np.loadtxt(index_path, dtype=np.int64).ravel()
    test_idx_range = np.sort(test_idx_reorder)

    # у части наборов (Citeseer) есть изолированные test-узлы без признаков
    full_range = np.arange(test_idx_range.min(), test_idx_range.max() + 1)
    tx_extended = sp.lil_matrix((full_range.size, x.shape[1]))
    tx_extended[test_idx_range - test_idx_range.min(), :] = tx
    ty_extended = np.zeros((full_range.size, y.shape[1]))
    ty_extended[test_idx_range - test_idx_range.min(), :] = ty

    features = sp.vstack((allx, tx_extended)).tolil()
    features[test_idx_reorder, :] = features[test_idx_range, :]
    one_hot = np.vstack((ally, ty_extended))
    one_hot[test_idx_reorder, :] = one_hot[test_idx_range, :]
    labels = np.where(one_hot.sum(axis=1) > 0, one_hot.argmax(axis=1), -1)

    pairs = [(int(u), int(v)) for u, neighbors in graph.items() for v in neighbors]
    return RawDataset(
        pairs=np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
        features=sp.csr_matrix(features, dtype=np.float64),
        labels=labels.astype(np.int64),
        class_names=[str(c) for c in range(one_hot.shape[1])],
    )


def read_linqs(root: Path, name: str) -> RawDataset:
    content = pd.read_csv(root / f"{name}.content", sep="\t", header=None, dtype=str)
    cites = pd.read_csv(root / f"{name}.cites", sep="\t", header=None, dtype=str)
    ids = content.iloc[:, 0].tolist()
    index = {paper: k for k, paper in enumerate(ids)}
    if len(index) != len(ids):
        raise SchemaError("paper ids in the content file are not unique", file=f"{name}.content")
    class_names = sorted(content.iloc[:, -1].unique())
    class_index = {c: k for k, c in enumerate(class_names)}
    labels = content.iloc[:, -1].map(class_index).to_numpy(dtype=np.int64)
    features = sp.csr_matrix(content.iloc[:, 1:-1].astype(np.float64).to_numpy())

    known = cites[0].isin(ids) & cites[1].isin(ids)
    if not known.all():
        logger.warning("%d citations reference unknown papers and were dropped", int((~known).sum()))
    cites = cites[known]
    # .cites: <цитируемая> <цитирующая>; направление не важно
    pairs = np.stack([cites[1].map(index).to_numpy(), cites[0].map(index).to_numpy()], axis=1)
    return RawDataset(pairs=pairs.astype(np.int64), features=features, labels=labels, class_names=class_names)


def canonical_edges(pairs: np.ndarray, n_nodes: int) -> np.ndarray:
    """Неориентированные рёбра i < j без петель и повторов; отброшенное пишется в лог."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    in_range = (pairs >= 0).all(axis=1) & (pairs < n_nodes).all(axis=1)
    if not in_range.all():
        logger.warning("%d edges reference missing nodes and were dropped", int((~in_range).sum()))
        pairs = pairs[in_range]
    loops = pairs[:, 0] == pairs[:, 1]
    if loops.any():
        logger.warning("%d self-loops dropped", int(loops.sum()))
    pairs = pairs[~loops]
    ordered = np.sort(pairs, axis=1)
    unique = np.unique(ordered, axis=0) if ordered.size else ordered
    if len(unique) < len(ordered):
        logger.warning("%d duplicate edges dropped", len(ordered) - len(unique))
    return unique


def _keep_nodes(edges: np.ndarray, features: sp.csr_matrix, labels: np.ndarray, keep: np.ndarray):
    remap = np.full(labels.size, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    inside = (remap[edges[:, 0]] >= 0) & (remap[edges[:, 1]] >= 0)
    return remap[edges[inside]], features[keep], labels[keep]


def largest_component(edges: np.ndarray, n_nodes: int) -> np.ndarray:
    a = sp.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n_nodes, n_nodes))
    _, component = connected_components(a, directed=False)
    biggest = np.bincount(component).argmax()
    return np.flatnonzero(component == biggest)


def ingest(
    raw: PathLike,
    out: PathLike,
    name: Optional[str] = None,
    keep_largest_component: bool = False,
    seed: int = 0,
    train_fraction: float = TRAIN_FRACTION,
) -> Tuple[Graph, LabelData]:
    raw = Path(raw)
    fmt, name = detect_format(raw, name)
    root = raw.parent if raw.is_file() else raw
    data = read_planetoid(root, name) if fmt == "planetoid" else read_linqs(root, name)
    n = data.labels.size
    logger.info("read %s dataset %s: %d nodes, %d raw edges", fmt, name, n, len(data.pairs))

    edges = canonical_edges(data.pairs, n)
    features, labels = data.features, data.labels
    unlabeled = labels < 0
    if unlabeled.any():
        logger.warning("%d unlabeled nodes dropped", int(unlabeled.sum()))
        edges, features, labels = _keep_nodes(edges, features, labels, np.flatnonzero(~unlabeled))
    if keep_largest_component:
        keep = largest_component(edges, labels.size)
        logger.info("largest connected component: %d of %d nodes", keep.size, labels.size)
        edges, features, labels = _keep_nodes(edges, features, labels, keep)

    k_classes = len(data.class_names)
    graph = Graph.from_edges(labels.size, edges, features)
    train_idx, test_idx = stratified_split(labels, train_fraction, seed)
    label_data = LabelData(labels=labels, k_classes=k_classes, train_idx=train_idx, test_idx=test_idx)
    save_dataset(graph, label_data, out, split_seed=seed)
    logger.info(
        "bundle %s: %d nodes, %d edges, %d classes, %d features",
        out, graph.n_nodes, graph.edge_count, k_classes, graph.feature_dim,
    )
    return graph, label_data

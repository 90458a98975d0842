"""
Граф и метки: хранение смежности (разреженно), нормализация, гомофилия,
матрица согласованности меток, генерация SBM и стратифицированное разбиение.
Все функции чистые и не меняют входные данные.
"""
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .config import SBM_FEATURE_NOISE, TRAIN_FRACTION
from .exceptions import ConfigError, EmptyEdgeSet, InvalidGraph, InvalidProbability
from .seeding import substream

Features = Union[np.ndarray, sp.csr_matrix]


def _canonical(adjacency) -> sp.csr_matrix:
    a = sp.csr_matrix(adjacency, dtype=np.float64)
    a.eliminate_zeros()
    a.sort_indices()
    return a


def flip_pair(adjacency, i: int, j: int) -> float:
    """Переключает пару (i, j) на месте в изменяемой матрице (ndarray или LIL); возвращает новое значение."""
    if i == j:
        raise InvalidGraph("cannot flip a diagonal entry", node=i)
    value = 0.0 if adjacency[i, j] else 1.0
    adjacency[i, j] = value
    adjacency[j, i] = value
    return value


@dataclass(frozen=True, eq=False)
class Graph:
    """Неориентированный невзвешенный граф: симметричная 0/1-смежность без петель + признаки X."""

    adjacency: sp.csr_matrix
    features: Features

    def __post_init__(self):
        a = _canonical(self.adjacency)
        object.__setattr__(self, "adjacency", a)
        if sp.issparse(self.features):
            object.__setattr__(self, "features", sp.csr_matrix(self.features, dtype=np.float64))
        else:
            object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        n = a.shape[0]
        if a.shape != (n, n):
            raise InvalidGraph("adjacency must be square", shape=list(a.shape))
        if self.features.shape[0] != n:
            raise InvalidGraph(
                "features must have one row per node",
                n_nodes=n, feature_rows=int(self.features.shape[0]),
            )
        if a.nnz and not np.all(a.data == 1.0):
            raise InvalidGraph("adjacency entries must be 0 or 1")
        if a.diagonal().any():
            raise InvalidGraph("adjacency must have a zero diagonal")
        if (a != a.T).nnz:
            raise InvalidGraph("adjacency must be symmetric")

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edge_count(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[Tuple[int, int]], features: Features) -> "Graph":
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n_nodes):
            raise InvalidGraph("edge endpoint out of range", n_nodes=n_nodes)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        a = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
        # повторы схлопываются в 1
        a.data[:] = 1.0
        return cls(a, features)

    def edge_list(self) -> np.ndarray:
        """Рёбра (i, j) с i < j, отсортированные лексикографически, форма (|E|, 2)."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.stack([upper.row[order], upper.col[order]], axis=1).astype(np.int64)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def flip(self, i: int, j: int) -> "Graph":
        """Новый граф с переключённой парой (i, j) в обеих симметричных позициях."""
        a = self.adjacency.tolil(copy=True)
        flip_pair(a, i, j)
        return Graph(a.tocsr(), self.features)

    def with_adjacency(self, adjacency) -> "Graph":
        return Graph(adjacency, self.features)


@dataclass(frozen=True, eq=False)
class LabelData:
    """Истинные метки, разбиение train/test, псевдометки и объединённые метки Ŷ."""

    labels: np.ndarray
    k_classes: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    pseudo_labels: Optional[np.ndarray] = None
    merged_labels: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "train_idx", np.sort(np.asarray(self.train_idx, dtype=np.int64)))
        object.__setattr__(self, "test_idx", np.sort(np.asarray(self.test_idx, dtype=np.int64)))
        if labels.size and (labels.min() < 0 or labels.max() >= self.k_classes):
            raise InvalidGraph("labels must lie in [0, k)", k_classes=self.k_classes)
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise InvalidGraph("train and test node sets must be disjoint")
        if self.pseudo_labels is not None and self.merged_labels is None:
            object.__setattr__(self, "merged_labels", _merge(labels, self.train_idx, self.pseudo_labels))

    @property
    def n_nodes(self) -> int:
        return int(self.labels.size)

    @property
    def has_pseudo_labels(self) -> bool:
        return self.pseudo_labels is not None

    def with_pseudo_labels(self, pseudo_labels: np.ndarray) -> "LabelData":
        pseudo = np.asarray(pseudo_labels, dtype=np.int64)
        return LabelData(
            labels=self.labels,
            k_classes=self.k_classes,
            train_idx=self.train_idx,
            test_idx=self.test_idx,
            pseudo_labels=pseudo,
            merged_labels=_merge(self.labels, self.train_idx, pseudo),
        )


def _merge(labels: np.ndarray, train_idx: np.ndarray, pseudo: np.ndarray) -> np.ndarray:
    # Ŷ = Y_train ∪ Y'_test; узлы вне train получают псевдометку
    merged = np.asarray(pseudo, dtype=np.int64).copy()
    merged[train_idx] = labels[train_idx]
    return merged


@dataclass(frozen=True, eq=False)
class NormalizedView:
    """Â = D̃^{-1/2}(A+I)D̃^{-1/2}, D̃ и L_sym = I − Â."""

    a_hat: sp.csr_matrix
    degree: np.ndarray

    @property
    def l_sym(self) -> sp.csr_matrix:
        n = self.a_hat.shape[0]
        return (sp.identity(n, format="csr") - self.a_hat).tocsr()


@dataclass(frozen=True, eq=False)
class ConsistencyMatrix:
    """H[i, j] = 1 тогда и только тогда, когда Ŷ_i = Ŷ_j."""

    h_matrix: np.ndarray


def normalize_adjacency(graph: Graph) -> NormalizedView:
    return normalize_sparse(graph.adjacency)


def normalize_sparse(adjacency: sp.spmatrix) -> NormalizedView:
    n = adjacency.shape[0]
    with_loops = (sp.csr_matrix(adjacency, dtype=np.float64) + sp.identity(n, format="csr")).tocsr()
    degree = np.asarray(with_loops.sum(axis=1)).ravel()
    inv_sqrt = sp.diags(1.0 / np.sqrt(degree))
    a_hat = (inv_sqrt @ with_loops @ inv_sqrt).tocsr()
    a_hat.sort_indices()
    return NormalizedView(a_hat=a_hat, degree=degree)


def homophily(graph: Graph, labels: np.ndarray, include_self_loops: bool = False) -> float:
    return adjacency_homophily(graph.adjacency, labels, include_self_loops)


def intra_edge_count(adjacency: sp.spmatrix, labels: np.ndarray) -> int:
    upper = sp.triu(adjacency, k=1).tocoo()
    labels = np.asarray(labels)
    return int(np.count_nonzero(labels[upper.row] == labels[upper.col]))


def adjacency_homophily(adjacency: sp.spmatrix, labels: np.ndarray, include_self_loops: bool = False) -> float:
    """Доля рёбер с одинаковыми метками концов; каждое ребро считается один раз."""
    labels = np.asarray(labels)
    n = adjacency.shape[0]
    if labels.shape[0] != n:
        raise InvalidGraph("one label per node is required", n_nodes=n, n_labels=int(labels.shape[0]))
    intra = intra_edge_count(adjacency, labels)
    total = sp.triu(adjacency, k=1).nnz
    if include_self_loops:
        intra += n
        total += n
    if total == 0:
        raise EmptyEdgeSet("homophily is undefined for a graph without edges")
    return intra / total


def consistency_matrix(labels: np.ndarray) -> ConsistencyMatrix:
    labels = np.asarray(labels)
    return ConsistencyMatrix(h_matrix=np.equal.outer(labels, labels).astype(np.float64))


def predicted_homophily_after_additions(h0: float, e_count: int, delta: int) -> float:
    """h после delta добавлений межклассовых рёбер: h0·|E|/(|E|+Δ)."""
    return h0 * e_count / (e_count + delta)


def homophily_drop(h0: float, e_count: int, delta: int) -> float:
    """Падение гомофилии: h0·Δ/(|E|+Δ)."""
    return h0 * delta / (e_count + delta)


def homophily_limits(h0: float, e_count: int, t: int) -> Tuple[float, float]:
    """Пределы для кривой динамики: нижний, если все t флипов добавляют межклассовые рёбра; верхний, если все добавляют внутриклассовые."""
    lower = predicted_homophily_after_additions(h0, e_count, t)
    upper = (h0 * e_count + t) / (e_count + t)
    return lower, upper


def homophily_envelope(h0: float, e_count: int, t: int) -> Tuple[float, float]:
    """Точная достижимая область после t флипов с любым сочетанием добавлений и удалений."""
    intra = h0 * e_count
    inter = e_count - intra
    low, high = np.inf, -np.inf
    for removals in range(0, t + 1):
        additions = t - removals
        # снижение: удаляем внутриклассовые, добавляем межклассовые
        if removals <= intra and e_count + additions - removals > 0:
            low = min(low, (intra - removals) / (e_count + additions - removals))
        # рост: удаляем межклассовые, добавляем внутриклассовые
        if removals <= inter and e_count + additions - removals > 0:
            high = max(high, (intra + additions) / (e_count + additions - removals))
    return float(low), float(high)


def _block_sizes(n: int, k: int) -> np.ndarray:
    sizes = np.full(k, n // k, dtype=np.int64)
    sizes[: n % k] += 1
    return sizes


def generate_sbm(
    n: int,
    k: int,
    p_intra: float,
    p_inter: float,
    seed: int,
    noise: float = SBM_FEATURE_NOISE,
    train_fraction: float = TRAIN_FRACTION,
) -> Tuple[Graph, LabelData]:
    """
    Стохастическая блочная модель: k равных блоков, пары внутри блока соединяются
    с вероятностью p_intra, между блоками с p_inter. Признаки: one-hot класса
    плюс гауссов шум noise.
    """
    if not (0.0 <= p_inter <= p_intra <= 1.0):
        raise InvalidProbability(
            "expected 0 <= p_inter <= p_intra <= 1", p_intra=p_intra, p_inter=p_inter
        )
    if k < 1 or n < k:
        raise ConfigError("expected n >= k >= 1", n=n, k=k)
    labels = np.repeat(np.arange(k), _block_sizes(n, k))
    rng = substream(seed, "sbm")
    rows, cols = np.triu_indices(n, k=1)
    prob = np.where(labels[rows] == labels[cols], p_intra, p_inter)
    keep = rng.random(rows.size) < prob
    graph_edges = np.stack([rows[keep], cols[keep]], axis=1)
    feature_rng = substream(seed, "features")
    features = np.eye(k)[labels] + feature_rng.normal(0.0, noise, size=(n, k))
    graph = Graph.from_edges(n, graph_edges, features)
    train_idx, test_idx = stratified_split(labels, train_fraction, seed)
    return graph, LabelData(labels=labels, k_classes=k, train_idx=train_idx, test_idx=test_idx)


def stratified_split(labels: np.ndarray, train_fraction: float = TRAIN_FRACTION, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Стратифицированное разбиение: в train попадает доля train_fraction каждого класса (не меньше одного узла)."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)", train_fraction=train_fraction)
    labels = np.asarray(labels)
    rng = substream(seed, "splits")
    train = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        take = max(1, int(round(train_fraction * members.size)))
        if members.size > 1:
            take = min(take, members.size - 1)
        train.append(members[:take])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.setdiff1d(np.arange(labels.size), train_idx)
    return train_idx, test_idx

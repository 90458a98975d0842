"""
Минимальное обратное дифференцирование (reverse mode) по матричным выражениям.

Узел выражения хранит значение, прямых предков и функцию обратного прохода,
которая по градиенту выхода возвращает градиенты предков. Разреженные
матрицы scipy допускаются только как константы (Â и X при обучении);
дифференцируемые листья являются плотными массивы float64.
"""
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import log_softmax

from .exceptions import NonFiniteValue, NotScalarRoot, ShapeMismatch
from .graph import ConsistencyMatrix

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]
Value = Union[np.ndarray, sp.spmatrix]


class Node:
    """Вершина ациклического графа выражения."""

    __slots__ = ("value", "parents", "backward_fn", "requires_grad", "name", "kind")

    def __init__(
        self,
        value: Value,
        parents: Tuple["Node", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        requires_grad: bool = False,
        name: Optional[str] = None,
        kind: str = "op",
    ):
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name
        self.kind = kind

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.value.shape)

    def item(self) -> float:
        if np.size(self.value) != 1:
            raise NotScalarRoot("node is not scalar", shape=list(self.shape))
        return float(np.asarray(self.value).reshape(()))

    def __repr__(self) -> str:
        return f"Node(kind={self.kind}, name={self.name}, shape={self.shape})"


def _check_finite(value: Value, op: str) -> None:
    data = value.data if sp.issparse(value) else value
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"non-finite value produced by {op}", op=op)


def _dense(value: Value) -> np.ndarray:
    return np.asarray(value.toarray() if sp.issparse(value) else value, dtype=np.float64)


def constant(value, name: Optional[str] = None) -> Node:
    if not sp.issparse(value):
        value = np.asarray(value, dtype=np.float64)
    _check_finite(value, name or "constant")
    return Node(value, name=name, kind="input")


def parameter(value, name: Optional[str] = None) -> Node:
    value = np.array(value, dtype=np.float64)
    _check_finite(value, name or "parameter")
    return Node(value, requires_grad=True, name=name, kind="parameter")


def _as_node(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def _op(name: str, value: Value, parents: Tuple[Node, ...], backward_fn: BackwardFn) -> Node:
    _check_finite(value, name)
    requires = any(p.requires_grad for p in parents)
    return Node(value, parents, backward_fn if requires else None, requires, name, "op")


def _require_dense_if_grad(node: Node, op: str) -> None:
    if node.requires_grad and sp.issparse(node.value):
        raise ShapeMismatch(f"{op}: sparse operands must be constants", op=op)


# ---------- Примитивы ----------

def matmul(a, b) -> Node:
    """Матричное произведение: разреженное×плотное и плотное×плотное."""
    a, b = _as_node(a), _as_node(b)
    _require_dense_if_grad(a, "matmul")
    _require_dense_if_grad(b, "matmul")
    if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch("matmul: incompatible shapes", left=list(a.shape), right=list(b.shape))
    av, bv = a.value, b.value
    out = av @ bv
    out = _dense(out)

    def backward(g):
        ga = np.asarray(g @ bv.T) if a.requires_grad else None
        gb = np.asarray(av.T @ g) if b.requires_grad else None
        return ga, gb

    return _op("matmul", out, (a, b), backward)


def add(a, b) -> Node:
    """Поэлементная сумма одинаковых по форме операндов."""
    a, b = _as_node(a), _as_node(b)
    if a.shape != b.shape:
        raise ShapeMismatch("add: shapes differ", left=list(a.shape), right=list(b.shape))
    out = _dense(a.value) + _dense(b.value)

    def backward(g):
        return g, g

    return _op("add", out, (a, b), backward)


def concat_columns(nodes: Sequence) -> Node:
    nodes = tuple(_as_node(n) for n in nodes)
    if not nodes:
        raise ShapeMismatch("concat_columns: nothing to concatenate")
    rows = {n.shape[0] for n in nodes}
    if len(rows) != 1 or any(len(n.shape) != 2 for n in nodes):
        raise ShapeMismatch("concat_columns: row counts differ", shapes=[list(n.shape) for n in nodes])
    out = np.concatenate([_dense(n.value) for n in nodes], axis=1)
    offsets = np.cumsum([0] + [n.shape[1] for n in nodes])

    def backward(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(nodes)))

    return _op("concat_columns", out, nodes, backward)


def relu(a) -> Node:
    a = _as_node(a)
    value = _dense(a.value)
    mask = value > 0
    out = np.where(mask, value, 0.0)

    def backward(g):
        return (g * mask,)

    return _op("relu", out, (a,), backward)


def take_rows(a, start: int, stop: int) -> Node:
    """Блок строк [start, stop); нужен для разбиения весов многошагового слоя."""
    a = _as_node(a)
    if not 0 <= start <= stop <= a.shape[0]:
        raise ShapeMismatch("take_rows: block out of range", start=start, stop=stop, rows=a.shape[0])
    out = _dense(a.value)[start:stop].copy()

    def backward(g):
        full = np.zeros(a.shape)
        full[start:stop] = g
        return (full,)

    return _op("take_rows", out, (a,), backward)


def sym_normalize(adjacency) -> Node:
    """
    Â = D̃^{-1/2}(A+I)D̃^{-1/2}, где D̃ это суммы строк (A+I).
    Степени дифференцируются вместе с A.
    """
    a = _as_node(adjacency)
    if len(a.shape) != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch("sym_normalize: adjacency must be square", shape=list(a.shape))
    m = _dense(a.value) + np.eye(a.shape[0])
    degree = m.sum(axis=1)
    if np.any(degree <= 0):
        raise NonFiniteValue("sym_normalize: non-positive degree", op="sym_normalize")
    s = degree ** -0.5
    out = s[:, None] * m * s[None, :]

    def backward(g):
        gm = g * m
        grad_s = gm @ s + gm.T @ s
        grad_degree = grad_s * (-0.5) * degree ** -1.5
        return (g * np.outer(s, s) + grad_degree[:, None],)

    return _op("sym_normalize", out, (a,), backward)


def softmax_cross_entropy(logits, targets: np.ndarray, index: np.ndarray) -> Node:
    """Средняя кросс-энтропия softmax(logits[i]) против targets[i] по узлам index."""
    z = _as_node(logits)
    if len(z.shape) != 2:
        raise ShapeMismatch("softmax_cross_entropy: logits must be a matrix", shape=list(z.shape))
    targets = np.asarray(targets, dtype=np.int64)
    index = np.asarray(index, dtype=np.int64)
    if targets.shape[0] != z.shape[0]:
        raise ShapeMismatch("softmax_cross_entropy: one target per row", rows=z.shape[0], targets=int(targets.shape[0]))
    if index.size == 0:
        raise ShapeMismatch("softmax_cross_entropy: empty node mask")
    logp = log_softmax(_dense(z.value), axis=1)
    rows_t = targets[index]
    out = np.asarray(-logp[index, rows_t].mean())

    def backward(g):
        grad = np.zeros(z.shape)
        grad[index] = np.exp(logp[index])
        grad[index, rows_t] -= 1.0
        return (grad * (g / index.size),)

    return _op("softmax_cross_entropy", out, (z,), backward)


def _require_scalar(node: Node, op: str) -> None:
    if np.size(node.value) != 1:
        raise ShapeMismatch(f"{op}: scalar operand expected", shape=list(node.shape))


def scalar_add(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    _require_scalar(a, "scalar_add")
    _require_scalar(b, "scalar_add")
    out = np.asarray(a.item() + b.item())

    def backward(g):
        return np.reshape(g, a.value.shape), np.reshape(g, b.value.shape)

    return _op("scalar_add", out, (a, b), backward)


def scalar_scale(a, factor: float) -> Node:
    """factor·a для константного множителя."""
    a = _as_node(a)
    out = _dense(a.value) * float(factor)

    def backward(g):
        return (g * float(factor),)

    return _op("scalar_scale", out, (a,), backward)


def sum_entries(a) -> Node:
    a = _as_node(a)
    out = np.asarray(_dense(a.value).sum())

    def backward(g):
        return (np.full(a.shape, float(g)),)

    return _op("sum_entries", out, (a,), backward)


def sum_squares(a) -> Node:
    a = _as_node(a)
    value = _dense(a.value)
    out = np.asarray(np.sum(value * value))

    def backward(g):
        return (2.0 * float(g) * value,)

    return _op("sum_squares", out, (a,), backward)


def homophily_ratio_relaxed(adjacency, consistency, include_self_loops: bool = True) -> Node:
    """
    Непрерывная гомофилия ΣA⊙H / ΣA (с петлями: (ΣA⊙H + n)/(ΣA + n)).
    При бинарной A совпадает с долей внутриклассовых рёбер.
    """
    a = _as_node(adjacency)
    h = consistency.h_matrix if isinstance(consistency, ConsistencyMatrix) else np.asarray(consistency, dtype=np.float64)
    if a.shape != h.shape:
        raise ShapeMismatch("homophily_ratio_relaxed: H must match A", adjacency=list(a.shape), consistency=list(h.shape))
    av = a.value
    numerator = float(av.multiply(h).sum()) if sp.issparse(av) else float(np.sum(av * h))
    denominator = float(av.sum())
    if include_self_loops:
        n = a.shape[0]
        numerator += n
        denominator += n
    if denominator == 0:
        raise NonFiniteValue("homophily_ratio_relaxed: empty adjacency", op="homophily_ratio_relaxed")
    ratio = numerator / denominator
    out = np.asarray(ratio)

    def backward(g):
        return (float(g) * (h - ratio) / denominator,)

    return _op("homophily_ratio_relaxed", out, (a,), backward)


# ---------- Обратный проход ----------

class GradientSet(Mapping):
    """Градиенты по листьям; для отсутствующего листа возвращаются нули его формы."""

    def __init__(self, grads: Dict[Node, np.ndarray]):
        self._grads = grads

    def __getitem__(self, leaf: Node) -> np.ndarray:
        grad = self._grads.get(leaf)
        return grad if grad is not None else np.zeros(leaf.shape)

    def __iter__(self) -> Iterator[Node]:
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)


def _topological(root: Node) -> List[Node]:
    order: List[Node] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in reversed(node.parents):
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(root: Node, leaves: Optional[Iterable[Node]] = None) -> GradientSet:
    """Накапливает градиенты скалярного root по листьям (по умолчанию по всем параметрам)."""
    if np.size(root.value) != 1:
        raise NotScalarRoot("backward requires a scalar root", shape=list(root.shape))
    order = _topological(root) if root.requires_grad else []
    grads: Dict[Node, np.ndarray] = {root: np.ones_like(np.asarray(root.value, dtype=np.float64))}
    for node in reversed(order):
        g = grads.get(node)
        if g is None or node.backward_fn is None:
            continue
        for parent, parent_grad in zip(node.parents, node.backward_fn(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            grads[parent] = grads[parent] + parent_grad if parent in grads else parent_grad
    if leaves is None:
        leaves = [node for node in order if node.kind == "parameter"]
    return GradientSet({leaf: grads[leaf] for leaf in leaves if leaf in grads})

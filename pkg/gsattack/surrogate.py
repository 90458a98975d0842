"""
Суррогатные модели: двухслойный GCN и многошаговая агрегация
concat[H, ÂH, Â²H]·W; полнобатчевое детерминированное обучение и псевдометки.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from .config import ADAM_BETAS, ADAM_EPS
from .exceptions import NonFiniteLoss, NonFiniteValue, ShapeMismatch
from .graph import Graph, LabelData, NormalizedView, normalize_adjacency
from .models import ARCH_GCN, ARCH_MULTIHOP, TrainConfig
from .seeding import substream

from log import get_logger

logger = get_logger("gsattack.surrogate")


@dataclass(frozen=True, eq=False)
class SurrogateParams:
    """Веса θ = {W⁽ˡ⁾} и тег архитектуры."""

    architecture: str
    weights: Tuple[np.ndarray, ...]

    @property
    def layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        first = self.weights[0].shape[0]
        return first if self.architecture == ARCH_GCN else first // 3

    @property
    def k_classes(self) -> int:
        return self.weights[-1].shape[1]


@dataclass(frozen=True, eq=False)
class TrainResult:
    params: SurrogateParams
    losses: Tuple[float, ...]
    train_accuracy: float


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def layer_shapes(architecture: str, input_dim: int, k_classes: int, config: TrainConfig) -> List[Tuple[int, int]]:
    hidden = config.hidden_for(architecture)
    if architecture == ARCH_GCN:
        return [(input_dim, hidden), (hidden, k_classes)]
    if architecture == ARCH_MULTIHOP:
        widths = [input_dim] + [hidden] * (config.layers - 1) + [k_classes]
        return [(3 * widths[l], widths[l + 1]) for l in range(config.layers)]
    raise ShapeMismatch(f"unknown architecture: {architecture}", architecture=architecture)


def init_params(
    architecture: str,
    input_dim: int,
    k_classes: int,
    config: TrainConfig,
    rng: np.random.Generator,
) -> SurrogateParams:
    weights = tuple(glorot_uniform(rng, fan_in, fan_out) for fan_in, fan_out in layer_shapes(architecture, input_dim, k_classes, config))
    return SurrogateParams(architecture=architecture, weights=weights)


# ---------- Прямой проход (выражения autodiff) ----------

def gcn_expr(a_hat: ad.Node, x: ad.Node, weights: Sequence[ad.Node]) -> ad.Node:
    """Â·relu(Â·X·W⁽⁰⁾)·W⁽¹⁾; X·W считается до умножения на Â."""
    if len(weights) != 2:
        raise ShapeMismatch("gcn expects exactly two weight matrices", layers=len(weights))
    w0, w1 = weights
    hidden = ad.relu(ad.matmul(a_hat, ad.matmul(x, w0)))
    return ad.matmul(a_hat, ad.matmul(hidden, w1))


def multihop_layer_expr(a_hat: ad.Node, h: ad.Node, weight: ad.Node) -> ad.Node:
    d_in = h.shape[1]
    if len(weight.shape) != 2 or weight.shape[0] != 3 * d_in:
        raise ShapeMismatch(
            "multihop weight must have 3·d_in rows",
            d_in=d_in, weight=list(weight.shape),
        )
    d_out = weight.shape[1]
    if d_in > d_out:
        # concat[H, ÂH, Â²H]·W = H·W₁ + Â(H·W₂) + Â(Â(H·W₃)): то же значение без широких Â·H
        w1 = ad.take_rows(weight, 0, d_in)
        w2 = ad.take_rows(weight, d_in, 2 * d_in)
        w3 = ad.take_rows(weight, 2 * d_in, 3 * d_in)
        hop0 = ad.matmul(h, w1)
        hop1 = ad.matmul(a_hat, ad.matmul(h, w2))
        hop2 = ad.matmul(a_hat, ad.matmul(a_hat, ad.matmul(h, w3)))
        return ad.add(ad.add(hop0, hop1), hop2)
    ah = ad.matmul(a_hat, h)
    a2h = ad.matmul(a_hat, ah)
    return ad.matmul(ad.concat_columns([h, ah, a2h]), weight)


def multihop_expr(a_hat: ad.Node, x: ad.Node, weights: Sequence[ad.Node]) -> ad.Node:
    h = x
    for l, weight in enumerate(weights):
        h = multihop_layer_expr(a_hat, h, weight)
        if l < len(weights) - 1:
            h = ad.relu(h)
    return h


def logits_expr(architecture: str, a_hat: ad.Node, x: ad.Node, weights: Sequence[ad.Node]) -> ad.Node:
    if architecture == ARCH_GCN:
        return gcn_expr(a_hat, x, weights)
    if architecture == ARCH_MULTIHOP:
        return multihop_expr(a_hat, x, weights)
    raise ShapeMismatch(f"unknown architecture: {architecture}", architecture=architecture)


def gcn_forward(norm: NormalizedView, features, params: SurrogateParams) -> np.ndarray:
    if params.architecture != ARCH_GCN:
        raise ShapeMismatch("gcn_forward needs gcn parameters", architecture=params.architecture)
    return gcn_expr(ad.constant(norm.a_hat), ad.constant(features), [ad.constant(w) for w in params.weights]).value


def multihop_layer(norm: NormalizedView, h_in, weight: np.ndarray) -> np.ndarray:
    return multihop_layer_expr(ad.constant(norm.a_hat), ad.constant(h_in), ad.constant(weight)).value


def multihop_forward(norm: NormalizedView, features, params: SurrogateParams) -> np.ndarray:
    if params.architecture != ARCH_MULTIHOP:
        raise ShapeMismatch("multihop_forward needs multihop parameters", architecture=params.architecture)
    return multihop_expr(ad.constant(norm.a_hat), ad.constant(features), [ad.constant(w) for w in params.weights]).value


def predict(params: SurrogateParams, norm: NormalizedView, features) -> np.ndarray:
    if params.architecture == ARCH_GCN:
        return gcn_forward(norm, features, params)
    return multihop_forward(norm, features, params)


def accuracy(logits: np.ndarray, labels: np.ndarray, index: np.ndarray) -> float:
    index = np.asarray(index)
    if index.size == 0:
        return float("nan")
    return float(np.mean(np.argmax(logits[index], axis=1) == np.asarray(labels)[index]))


# ---------- Оптимизаторы ----------

class Adam:
    def __init__(self, learning_rate: float, betas: Tuple[float, float] = ADAM_BETAS, eps: float = ADAM_EPS):
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self._m: Optional[List[np.ndarray]] = None
        self._v: Optional[List[np.ndarray]] = None
        self._t = 0

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> List[np.ndarray]:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        bias1 = 1.0 - self.beta1 ** self._t
        bias2 = 1.0 - self.beta2 ** self._t
        updated = []
        for k, (p, g) in enumerate(zip(params, grads)):
            self._m[k] = self.beta1 * self._m[k] + (1.0 - self.beta1) * g
            self._v[k] = self.beta2 * self._v[k] + (1.0 - self.beta2) * g * g
            m_hat = self._m[k] / bias1
            v_hat = self._v[k] / bias2
            updated.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))
        return updated


class GradientDescent:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> List[np.ndarray]:
        return [p - self.learning_rate * g for p, g in zip(params, grads)]


def _optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.learning_rate)
    return GradientDescent(config.learning_rate)


# ---------- Обучение ----------

def training_loss(
    architecture: str,
    a_hat: ad.Node,
    x: ad.Node,
    weights: Sequence[ad.Node],
    labels: LabelData,
    weight_decay: float,
) -> ad.Node:
    """CE по train-узлам + (weight_decay/2)·‖W⁽⁰⁾‖²."""
    logits = logits_expr(architecture, a_hat, x, weights)
    loss = ad.softmax_cross_entropy(logits, labels.labels, labels.train_idx)
    if weight_decay > 0:
        loss = ad.scalar_add(loss, ad.scalar_scale(ad.sum_squares(weights[0]), 0.5 * weight_decay))
    return loss


def fit(
    graph: Graph,
    labels: LabelData,
    config: TrainConfig,
    architecture: str = ARCH_GCN,
    norm: Optional[NormalizedView] = None,
    rng: Optional[np.random.Generator] = None,
    init: Optional[SurrogateParams] = None,
) -> TrainResult:
    """Полнобатчевое обучение на train-узлах с фиксированным числом эпох (без ранней остановки)."""
    if labels.train_idx.size == 0:
        raise ShapeMismatch("train mask is empty")
    norm = norm if norm is not None else normalize_adjacency(graph)
    if init is None:
        rng = rng if rng is not None else substream(config.seed, "trainer")
        init = init_params(architecture, graph.feature_dim, labels.k_classes, config, rng)
    weights = [w.copy() for w in init.weights]
    optimizer = _optimizer(config)
    a_hat = ad.constant(norm.a_hat, name="a_hat")
    x = ad.constant(graph.features, name="features")
    losses: List[float] = []
    for epoch in range(config.epochs):
        nodes = [ad.parameter(w, name=f"W{l}") for l, w in enumerate(weights)]
        try:
            loss = training_loss(architecture, a_hat, x, nodes, labels, config.weight_decay)
        except NonFiniteValue as e:
            raise NonFiniteLoss("training diverged", epoch=epoch, architecture=architecture) from e
        value = loss.item()
        grads = ad.backward(loss, nodes)
        weights = optimizer.step(weights, [grads[node] for node in nodes])
        losses.append(value)
        logger.debug("epoch %d loss %.6f", epoch, value)
    params = SurrogateParams(architecture=architecture, weights=tuple(weights))
    logits = predict(params, norm, graph.features)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteLoss("training produced non-finite logits", architecture=architecture)
    train_acc = accuracy(logits, labels.labels, labels.train_idx)
    logger.debug("trained %s: final loss %.6f, train accuracy %.4f", architecture, losses[-1], train_acc)
    return TrainResult(params=params, losses=tuple(losses), train_accuracy=train_acc)


def train(
    graph: Graph,
    labels: LabelData,
    config: TrainConfig,
    architecture: str = ARCH_GCN,
    **kwargs,
) -> SurrogateParams:
    return fit(graph, labels, config, architecture, **kwargs).params


def pseudo_labels(params: SurrogateParams, norm: NormalizedView, features, labels: LabelData) -> LabelData:
    """Псевдометки = argmax логитов на чистом графе; на train-узлах Ŷ берёт истинные метки."""
    logits = predict(params, norm, features)
    return labels.with_pseudo_labels(np.argmax(logits, axis=1))

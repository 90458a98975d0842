"""
Атака отравлением структуры графа: жадный выбор рёбер по градиентной
значимости ∂L/∂A, обычная и гомофильно-ограниченная функции потерь,
случайный базовый метод DICE.

Соглашение о знаке: атакующий УВЕЛИЧИВАЕТ CE на псевдометках; значимость есть
градиент этой величины по A, выбор: argmax 𝒜ᵢⱼ·(1 − 2Aᵢⱼ).
"""
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import scipy.sparse as sp
from tqdm import tqdm

from . import autodiff as ad
from .config import EPSILON_UNRESTRICTED
from .exceptions import ConfigError, ExhaustedCandidates, NoAdmissiblePair, ReplayMismatch
from .graph import (
    ConsistencyMatrix,
    Graph,
    LabelData,
    consistency_matrix,
    flip_pair,
    intra_edge_count,
    normalize_adjacency,
)
from .models import (
    ACTION_ADD,
    ACTION_REMOVE,
    LOSS_CE,
    LOSS_RESTRICTED,
    AttackConfig,
    AttackTrace,
    PerturbationRecord,
    SweepReport,
    SweepRow,
)
from .seeding import substream
from .surrogate import SurrogateParams, fit, logits_expr, pseudo_labels
from .victim import evaluate_victim

from log import get_logger

logger = get_logger("gsattack.attack")

Pair = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    """Симметричная карта значимости 𝒜⁽ᵗ⁾ (диагональ обнулена) и веса потерь итерации."""

    matrix: np.ndarray
    loss_value: float
    lambda1: float = 1.0
    lambda2: float = 0.0


def _ratio(intra: int, total: int) -> Optional[float]:
    """Гомофилия трассы; для графа без рёбер не определена (None)."""
    return intra / total if total > 0 else None


def _fmt(h: Optional[float]) -> str:
    return "n/a" if h is None else f"{h:.4f}"


# ============== Функции потерь ==============

def loss_weights(h_clean: Optional[float], h_current: Optional[float], epsilon: float) -> Tuple[float, float]:
    """
    λ₁ = (1 − r)², λ₂ = r², r = clamp((h⁰ − hᵗ)/(ε·h⁰), 0, 1).
    Без рёбер в чистом графе ограничение не действует: (1, 0).
    Граф, потерявший все рёбра, считается с hᵗ = 0.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ConfigError("epsilon must lie in (0, 1]", epsilon=epsilon)
    if h_clean is None or h_clean <= 0.0:
        return 1.0, 0.0
    if h_current is None:
        h_current = 0.0
    r = (h_clean - h_current) / (epsilon * h_clean)
    r = min(max(r, 0.0), 1.0)
    return (1.0 - r) ** 2, r ** 2


def ce_targets(labels: LabelData, label_source: str = "self") -> Tuple[np.ndarray, np.ndarray]:
    if label_source == "train":
        return labels.labels, labels.train_idx
    if labels.merged_labels is None:
        raise ConfigError("pseudo-labels are required for the self-training attack loss")
    return labels.merged_labels, labels.test_idx


def attack_loss_ce(logits, labels: LabelData, label_source: str = "self") -> ad.Node:
    """Средняя CE предсказаний на test-узлах против псевдометок Y'_test (или на train против истинных меток)."""
    targets, index = ce_targets(labels, label_source)
    return ad.softmax_cross_entropy(logits, targets, index)


def restricted_loss(
    logits,
    labels: LabelData,
    a0,
    at,
    consistency: ConsistencyMatrix,
    epsilon: float,
    label_source: str = "self",
    weights: Optional[Tuple[float, float]] = None,
) -> ad.Node:
    """
    λ₁·CE − λ₂·L_H, L_H = (h_sl(A⁰) − h_sl(Aᵗ))².
    Градиент идёт только через h_sl(Aᵗ); λ₁, λ₂ и A⁰ считаются константами итерации.
    """
    at = at if isinstance(at, ad.Node) else ad.constant(at)
    if weights is None:
        merged = labels.merged_labels if labels.merged_labels is not None else labels.labels
        h_clean = _dense_homophily(a0, merged)
        h_current = _dense_homophily(at.value, merged)
        weights = loss_weights(h_clean, h_current, epsilon)
    lambda1, lambda2 = weights
    ce = attack_loss_ce(logits, labels, label_source)
    h_sl_clean = ad.homophily_ratio_relaxed(ad.constant(a0), consistency).item()
    h_sl_current = ad.homophily_ratio_relaxed(at, consistency)
    gap = ad.scalar_add(h_sl_current, ad.constant(-h_sl_clean))
    homophily_term = ad.sum_squares(gap)
    return ad.scalar_add(ad.scalar_scale(ce, lambda1), ad.scalar_scale(homophily_term, -lambda2))


def _dense_homophily(adjacency, labels: np.ndarray) -> Optional[float]:
    a = sp.csr_matrix(adjacency)
    return _ratio(intra_edge_count(a, labels), sp.triu(a, k=1).nnz)


# ============== Значимость и выбор ребра ==============

def saliency(
    params: SurrogateParams,
    adjacency: np.ndarray,
    features,
    labels: LabelData,
    loss: str = LOSS_CE,
    a0: Optional[np.ndarray] = None,
    consistency: Optional[ConsistencyMatrix] = None,
    epsilon: float = EPSILON_UNRESTRICTED,
    label_source: str = "self",
    weights: Optional[Tuple[float, float]] = None,
) -> SaliencyMap:
    """Градиент выбранной потери по плотному листу A, симметризованный: 𝒜ᵢⱼ = (gᵢⱼ + gⱼᵢ)/2."""
    a_leaf = ad.parameter(adjacency, name="A")
    a_hat = ad.sym_normalize(a_leaf)
    logits = logits_expr(params.architecture, a_hat, ad.constant(features), [ad.constant(w) for w in params.weights])
    if loss == LOSS_CE:
        objective = attack_loss_ce(logits, labels, label_source)
        lambda1, lambda2 = 1.0, 0.0
    else:
        if a0 is None:
            raise ConfigError("restricted loss needs the clean adjacency")
        if consistency is None:
            consistency = consistency_matrix(labels.merged_labels)
        if weights is None:
            merged = labels.merged_labels
            weights = loss_weights(_dense_homophily(a0, merged), _dense_homophily(adjacency, merged), epsilon)
        lambda1, lambda2 = weights
        objective = restricted_loss(logits, labels, a0, a_leaf, consistency, epsilon, label_source, weights)
    grad = ad.backward(objective, [a_leaf])[a_leaf]
    matrix = (grad + grad.T) / 2.0
    np.fill_diagonal(matrix, 0.0)
    return SaliencyMap(matrix=matrix, loss_value=objective.item(), lambda1=lambda1, lambda2=lambda2)


def select_perturbation(
    smap: SaliencyMap,
    adjacency,
    forbidden: Iterable[Pair] = (),
) -> Tuple[int, int, str]:
    """argmax по парам i < j вне forbidden оценки 𝒜ᵢⱼ·(1 − 2Aᵢⱼ); при равенстве берётся лексикографически меньшая пара."""
    a = adjacency.toarray() if sp.issparse(adjacency) else np.asarray(adjacency, dtype=np.float64)
    n = a.shape[0]
    score = smap.matrix * (1.0 - 2.0 * a)
    score[np.tril_indices(n)] = -np.inf
    for i, j in forbidden:
        i, j = min(i, j), max(i, j)
        score[i, j] = -np.inf
    flat = int(np.argmax(score))
    i, j = divmod(flat, n)
    if not np.isfinite(score[i, j]):
        raise NoAdmissiblePair("no admissible pair left to flip", n_nodes=n)
    action = ACTION_ADD if a[i, j] == 0 else ACTION_REMOVE
    return int(i), int(j), action


# ============== Жадная атака ==============

def ensure_pseudo_labels(graph: Graph, labels: LabelData, config: AttackConfig) -> LabelData:
    """Псевдометки с чистого графа; если уже есть, возвращаются как есть."""
    if labels.has_pseudo_labels:
        return labels
    norm = normalize_adjacency(graph)
    result = fit(graph, labels, config.train, config.surrogate, norm=norm, rng=substream(config.seed, "trainer"))
    logger.info("clean %s surrogate trained, train accuracy %.4f", config.surrogate, result.train_accuracy)
    return pseudo_labels(result.params, norm, graph.features, labels)


def run_attack(
    graph: Graph,
    labels: LabelData,
    config: AttackConfig,
    progress: bool = True,
) -> Tuple[Graph, AttackTrace]:
    budget = config.resolve_budget(graph.edge_count)
    n = graph.n_nodes
    if budget > n * (n - 1) // 2:
        raise NoAdmissiblePair("budget exceeds the number of node pairs", budget=budget, n_nodes=n)
    labels = ensure_pseudo_labels(graph, labels, config)
    merged, truth = labels.merged_labels, labels.labels
    restricted = not config.unrestricted
    consistency = consistency_matrix(merged) if restricted else None

    a0 = graph.adjacency.toarray()
    a = a0.copy()
    edges = graph.edge_count
    intra_p = intra_edge_count(graph.adjacency, merged)
    intra_g = intra_edge_count(graph.adjacency, truth)
    clean_h_p, clean_h_g = _ratio(intra_p, edges), _ratio(intra_g, edges)
    h_p = clean_h_p
    logger.info(
        "attack started: budget %d, loss %s, epsilon %.4g, surrogate %s, clean h_pseudo %s, h_gt %s",
        budget, config.loss, config.epsilon, config.surrogate, _fmt(clean_h_p), _fmt(clean_h_g),
    )

    forbidden: Set[Pair] = set()
    records: List[PerturbationRecord] = []
    params: Optional[SurrogateParams] = None
    for t in tqdm(range(1, budget + 1), desc="attack", unit="flip", disable=not progress):
        if params is None or (t - 1) % config.retrain_every == 0:
            current = graph.with_adjacency(sp.csr_matrix(a))
            init = params if config.warm_start else None
            params = fit(current, labels, config.train, config.surrogate, rng=substream(config.seed, "init", t), init=init).params
        weights = (1.0, 0.0) if not restricted else loss_weights(clean_h_p, h_p, config.epsilon)
        smap = saliency(
            params, a, graph.features, labels,
            loss=config.loss if restricted else LOSS_CE,
            a0=a0, consistency=consistency, epsilon=config.epsilon,
            label_source=config.label_source, weights=weights,
        )
        i, j, action = select_perturbation(smap, a, forbidden)
        sign = 1 if flip_pair(a, i, j) else -1
        forbidden.add((i, j))

        same_p, same_g = bool(merged[i] == merged[j]), bool(truth[i] == truth[j])
        edges += sign
        intra_p += sign * same_p
        intra_g += sign * same_g
        h_p, h_g = _ratio(intra_p, edges), _ratio(intra_g, edges)
        records.append(PerturbationRecord(
            iteration=t, i=i, j=j, action=action, saliency=float(smap.matrix[i, j]),
            intra_pseudo=same_p, intra_gt=same_g, h_pseudo=h_p, h_gt=h_g,
            lambda1=smap.lambda1, lambda2=smap.lambda2,
        ))
        logger.debug("iter %d: %s (%d, %d) saliency %.6g, h_pseudo %s", t, action, i, j, smap.matrix[i, j], _fmt(h_p))

    poisoned = graph.with_adjacency(sp.csr_matrix(a))
    trace = AttackTrace(
        records=records,
        clean_h_pseudo=clean_h_p,
        clean_h_gt=clean_h_g,
        clean_edge_count=graph.edge_count,
        method="saliency",
        config=config.model_dump(),
    )
    logger.info("attack finished: %d flips, h_pseudo %s, h_gt %s", len(records), _fmt(h_p), _fmt(_ratio(intra_g, edges)))
    return poisoned, trace


# ============== DICE ==============

def _inter_pair_total(labels: np.ndarray) -> int:
    counts = np.bincount(labels).astype(np.int64)
    return int((counts.sum() ** 2 - np.sum(counts ** 2)) // 2)


def _sample_inter_nonedge(
    rng: np.random.Generator,
    labels: np.ndarray,
    present: Set[Pair],
    max_attempts: int = 1000,
) -> Pair:
    n = labels.size
    for _ in range(max_attempts):
        i, j = (int(v) for v in rng.integers(0, n, size=2))
        if i == j or labels[i] == labels[j]:
            continue
        pair = (min(i, j), max(i, j))
        if pair not in present:
            return pair
    # плотный случай: перебор всех оставшихся пар
    rows, cols = np.triu_indices(n, k=1)
    inter = labels[rows] != labels[cols]
    candidates = [(int(r), int(c)) for r, c in zip(rows[inter], cols[inter]) if (int(r), int(c)) not in present]
    return candidates[int(rng.integers(len(candidates)))]


def dice_attack(
    graph: Graph,
    labels: LabelData,
    budget: int,
    seed: int = 0,
) -> Tuple[Graph, AttackTrace]:
    """
    Каждый из Δ флипов с вероятностью 1/2 удаляет случайное внутриклассовое ребро
    (по Ŷ), иначе добавляет случайное межклассовое. Если нужного вида кандидатов нет,
    берётся другой вид.
    """
    if budget < 0:
        raise ConfigError("budget must be non-negative", budget=budget)
    merged = labels.merged_labels
    if merged is None:
        logger.warning("dice: pseudo-labels missing, using ground-truth labels for class membership")
        merged = labels.labels
    truth = labels.labels
    rng = substream(seed, "dice")

    present: Set[Pair] = {(int(i), int(j)) for i, j in graph.edge_list()}
    intra_edges: List[Pair] = sorted(p for p in present if merged[p[0]] == merged[p[1]])
    inter_free = _inter_pair_total(merged) - (len(present) - len(intra_edges))

    edges = graph.edge_count
    intra_p = len(intra_edges)
    intra_g = intra_edge_count(graph.adjacency, truth)
    clean_h_p, clean_h_g = _ratio(intra_p, edges), _ratio(intra_g, edges)

    a = graph.adjacency.tolil(copy=True)
    records: List[PerturbationRecord] = []
    for t in range(1, budget + 1):
        remove = rng.random() < 0.5
        if remove and not intra_edges:
            remove = False
        if not remove and inter_free <= 0:
            remove = True
        if remove and not intra_edges:
            raise ExhaustedCandidates("no intra-class edges or inter-class non-edges left", iteration=t)
        if remove:
            k = int(rng.integers(len(intra_edges)))
            intra_edges[k], intra_edges[-1] = intra_edges[-1], intra_edges[k]
            i, j = intra_edges.pop()
            present.discard((i, j))
            action, sign = ACTION_REMOVE, -1
        else:
            i, j = _sample_inter_nonedge(rng, merged, present)
            present.add((i, j))
            inter_free -= 1
            action, sign = ACTION_ADD, 1
        flip_pair(a, i, j)
        same_p, same_g = bool(merged[i] == merged[j]), bool(truth[i] == truth[j])
        edges += sign
        intra_p += sign * same_p
        intra_g += sign * same_g
        records.append(PerturbationRecord(
            iteration=t, i=i, j=j, action=action, saliency=0.0,
            intra_pseudo=same_p, intra_gt=same_g,
            h_pseudo=_ratio(intra_p, edges), h_gt=_ratio(intra_g, edges),
        ))

    poisoned = graph.with_adjacency(a.tocsr())
    trace = AttackTrace(
        records=records,
        clean_h_pseudo=clean_h_p,
        clean_h_gt=clean_h_g,
        clean_edge_count=graph.edge_count,
        method="dice",
        config={"budget": budget, "seed": seed},
    )
    logger.info("dice finished: %d flips, %d additions", budget, sum(r.action == ACTION_ADD for r in records))
    return poisoned, trace


# ============== Повтор трассы и sweep ==============

def replay_trace(graph: Graph, trace: AttackTrace) -> Graph:
    """Применяет записи к чистому графу; каждое add требует отсутствующего ребра, remove требует существующего."""
    a = graph.adjacency.tolil(copy=True)
    for r in trace.records:
        present = bool(a[r.i, r.j])
        if present != (r.action == ACTION_REMOVE):
            raise ReplayMismatch(
                "record does not match the graph state",
                iteration=r.iteration, i=r.i, j=r.j, action=r.action,
            )
        flip_pair(a, r.i, r.j)
    return graph.with_adjacency(a.tocsr())


def sweep_epsilon(
    graph: Graph,
    labels: LabelData,
    epsilons: Sequence[float],
    config: AttackConfig,
    victim_runs: int,
    victim_seed: int = 0,
    progress: bool = True,
) -> SweepReport:
    """Ограниченная атака для каждого ε и оценка жертвы на каждом отравленном графе."""
    if not epsilons:
        raise ConfigError("at least one epsilon is required")
    # model_copy не валидирует, поэтому конфигурации собираются заново
    configs = [
        AttackConfig.model_validate({
            **config.model_dump(),
            "epsilon": float(epsilon),
            "loss": LOSS_CE if epsilon >= EPSILON_UNRESTRICTED else LOSS_RESTRICTED,
        })
        for epsilon in epsilons
    ]
    victim_train = config.train.model_copy(update={"seed": victim_seed})
    clean = evaluate_victim(graph, labels, victim_runs, victim_seed, train_config=victim_train)
    labels = ensure_pseudo_labels(graph, labels, config)
    merged = labels.merged_labels
    rows = []
    for run_config in configs:
        epsilon = run_config.epsilon
        poisoned, trace = run_attack(graph, labels, run_config, progress=progress)
        report = evaluate_victim(
            poisoned, labels, victim_runs, victim_seed,
            train_config=victim_train, graph_identity=f"poisoned:{trace.trace_hash()}",
        )
        rows.append(SweepRow(
            epsilon=epsilon,
            budget=trace.budget,
            accuracy_mean=report.mean,
            accuracy_std=report.std,
            h_gt=_dense_homophily(poisoned.adjacency, labels.labels),
            h_pseudo=_dense_homophily(poisoned.adjacency, merged),
        ))
        logger.info("sweep epsilon %.4g: accuracy %.4f ± %.4f", epsilon, report.mean, report.std)
    return SweepReport(
        clean=clean,
        clean_h_gt=_dense_homophily(graph.adjacency, labels.labels),
        clean_h_pseudo=_dense_homophily(graph.adjacency, merged),
        rows=rows,
    )

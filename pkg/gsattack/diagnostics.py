"""
Численная проверка аналитических утверждений об атаке:
модель распространения меток (LPA), ранжирование градиентом против дискретных
возмущений, сжатие попарных расстояний при сглаживании (спектр I − L_sym)
и статистика межклассовых флипов по трассе атаки.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.csgraph import connected_components
from tqdm import tqdm

from . import autodiff as ad
from .config import (
    BIPARTITE_TOL,
    EIGEN_TOL,
    GENERIC_COMPONENT_TOL,
    LEMMA1_DELTA,
    LEMMA1_TIE_FACTOR,
)
from .exceptions import BipartiteGraph, ConfigError, DisconnectedGraph
from .graph import Graph, LabelData, homophily_envelope, homophily_limits, normalize_adjacency
from .models import (
    ACTION_ADD,
    AttackTrace,
    DynamicsRow,
    InterclassStats,
    Lemma1Report,
    LpaReport,
    LpaScenario,
    SpectralReport,
)
from .seeding import substream
from .surrogate import glorot_uniform

from log import get_logger

logger = get_logger("gsattack.diagnostics")

MAX_TRACE_PAIRS = 2000


# ============== LPA ==============

def lpa_confidence(scenario: LpaScenario, which: str) -> float:
    """
    Уверенность в классе 1 после возмущения веса δ:
    delta1: добавлено межклассовое ребро, delta2: удалена часть внутриклассового.
    """
    n1, n2, delta = scenario.n1, scenario.n2, scenario.delta
    if which == "delta1":
        return n1 / (n1 + n2 + delta)
    if which == "delta2":
        return (n1 - delta) / (n1 - delta + n2)
    raise ConfigError(f"unknown perturbation kind: {which}", which=which)


def lpa_gap(scenario: LpaScenario) -> float:
    n1, n2, delta = scenario.n1, scenario.n2, scenario.delta
    return (delta * n2 - delta * n1 + delta ** 2) / ((n1 + n2) ** 2 - delta ** 2)


def lpa_report(scenario: LpaScenario) -> LpaReport:
    p1 = lpa_confidence(scenario, "delta1")
    p2 = lpa_confidence(scenario, "delta2")
    gap = lpa_gap(scenario)
    return LpaReport(
        scenario=scenario,
        p_delta1=p1,
        p_delta2=p2,
        gap=gap,
        identity_residual=abs(gap - (p1 - p2)),
        adding_inter_preferred=p1 < p2,
    )


# ============== Градиент против дискретного возмущения ==============

@dataclass(frozen=True, eq=False)
class Lemma1Instance:
    loss: Callable[[np.ndarray], float]
    point: np.ndarray
    gradient: Callable[[np.ndarray], np.ndarray]


def verify_lemma1(
    instances: Sequence[Lemma1Instance],
    delta_a: float = LEMMA1_DELTA,
    tie_factor: float = LEMMA1_TIE_FACTOR,
    progress: bool = False,
) -> Lemma1Report:
    """
    Для каждого экземпляра сравнивает argmin_k P(k) = L(a + δe_k) − L(a) с argmin_k ∇L(a)_k.
    Экземпляры, где разрыв двух наименьших компонент градиента не больше
    tie_factor·δ·(оценка кривизны), считаются ничьими и не оцениваются.
    """
    if delta_a <= 0:
        raise ConfigError("delta_a must be positive", delta_a=delta_a)
    agreements = evaluated = ties = 0
    for inst in tqdm(instances, desc="lemma1", unit="trial", disable=not progress):
        a = np.asarray(inst.point, dtype=np.float64)
        base = float(inst.loss(a))
        eye = np.eye(a.size)
        forward = np.array([inst.loss(a + delta_a * e) for e in eye])
        backward = np.array([inst.loss(a - delta_a * e) for e in eye])
        perturbation = forward - base
        curvature = float(np.max(np.abs(forward - 2.0 * base + backward))) / delta_a ** 2
        grad = np.asarray(inst.gradient(a), dtype=np.float64)

        ordered = np.sort(grad)
        gap = ordered[1] - ordered[0] if grad.size > 1 else np.inf
        noise = 64.0 * np.finfo(np.float64).eps * max(1.0, abs(base)) / delta_a
        if gap <= tie_factor * delta_a * curvature + noise:
            ties += 1
            continue
        evaluated += 1
        agreements += int(np.argmin(perturbation) == np.argmin(grad))

    rate = agreements / evaluated if evaluated else 0.0
    logger.info("gradient ranking agreement %.4f on %d instances (%d ties)", rate, evaluated, ties)
    return Lemma1Report(
        trials=len(instances),
        evaluated=evaluated,
        agreements=agreements,
        agreement_rate=rate,
        delta_a=delta_a,
        excluded_ties=ties,
    )


def _gcn_ce_slice(
    adjacency: np.ndarray,
    features: np.ndarray,
    weights: Tuple[np.ndarray, np.ndarray],
    targets: np.ndarray,
    pairs: np.ndarray,
) -> Lemma1Instance:
    index = np.arange(adjacency.shape[0])

    def build(v: np.ndarray) -> Tuple[ad.Node, ad.Node]:
        a = adjacency.copy()
        a[pairs[:, 0], pairs[:, 1]] = v
        a[pairs[:, 1], pairs[:, 0]] = v
        leaf = ad.parameter(a, name="A")
        a_hat = ad.sym_normalize(leaf)
        hidden = ad.relu(ad.matmul(a_hat, ad.matmul(features, weights[0])))
        logits = ad.matmul(a_hat, ad.matmul(hidden, weights[1]))
        return leaf, ad.softmax_cross_entropy(logits, targets, index)

    def loss(v: np.ndarray) -> float:
        return build(v)[1].item()

    def gradient(v: np.ndarray) -> np.ndarray:
        leaf, value = build(v)
        g = ad.backward(value, [leaf])[leaf]
        return g[pairs[:, 0], pairs[:, 1]] + g[pairs[:, 1], pairs[:, 0]]

    point = adjacency[pairs[:, 0], pairs[:, 1]].copy()
    return Lemma1Instance(loss=loss, point=point, gradient=gradient)


def random_lemma1_instances(
    count: int,
    seed: int = 0,
    n_nodes: int = 8,
    dims: int = 10,
    k_classes: int = 3,
    feature_dim: int = 4,
    hidden: int = 6,
) -> List[Lemma1Instance]:
    """Срезы CE случайного двухслойного GCN по dims элементам смежности."""
    total_pairs = n_nodes * (n_nodes - 1) // 2
    if dims > total_pairs:
        raise ConfigError("dims exceeds the number of node pairs", dims=dims, pairs=total_pairs)
    rows, cols = np.triu_indices(n_nodes, k=1)
    instances = []
    for trial in range(count):
        rng = substream(seed, "diagnostics", trial)
        keep = rng.random(rows.size) < 0.4
        adjacency = np.zeros((n_nodes, n_nodes))
        adjacency[rows[keep], cols[keep]] = 1.0
        adjacency += adjacency.T
        features = rng.normal(size=(n_nodes, feature_dim))
        weights = (glorot_uniform(rng, feature_dim, hidden), glorot_uniform(rng, hidden, k_classes))
        targets = rng.integers(0, k_classes, size=n_nodes)
        chosen = np.sort(rng.choice(total_pairs, size=dims, replace=False))
        pairs = np.stack([rows[chosen], cols[chosen]], axis=1)
        instances.append(_gcn_ce_slice(adjacency, features, weights, targets, pairs))
    return instances


# ============== Спектр и сглаживание ==============

def _check_structure(graph: Graph, allow_bipartite: bool) -> Tuple[bool, bool]:
    n_components, _ = connected_components(graph.adjacency, directed=False)
    if n_components != 1:
        raise DisconnectedGraph("graph must be connected", components=int(n_components))
    structural = graph.edge_count > 0 and nx.is_bipartite(nx.from_scipy_sparse_array(graph.adjacency))
    spectral = False
    if graph.edge_count > 0:
        degree = np.asarray(graph.adjacency.sum(axis=1)).ravel()
        inv_sqrt = 1.0 / np.sqrt(degree)
        plain = inv_sqrt[:, None] * graph.adjacency.toarray() * inv_sqrt[None, :]
        spectral = bool(eigh(plain, eigvals_only=True)[0] <= -1.0 + BIPARTITE_TOL)
    if structural != spectral:
        logger.warning("bipartiteness checks disagree: structural %s, spectral %s", structural, spectral)
    if structural and not allow_bipartite:
        raise BipartiteGraph("graph must be non-bipartite", n_nodes=graph.n_nodes)
    if structural:
        logger.warning("graph is bipartite; continuing in warning mode")
    return structural, spectral


def spectral_analysis(graph: Graph, allow_bipartite: bool = False) -> SpectralReport:
    """Собственные значения I − L_sym = Â по возрастанию и проверка вектора при λ = 1."""
    bipartite, bipartite_spectral = _check_structure(graph, allow_bipartite)
    norm = normalize_adjacency(graph)
    eigenvalues, vectors = eigh(norm.a_hat.toarray())
    leading = vectors[:, -1]
    if leading.sum() < 0:
        leading = -leading
    lambda_max_ok = bool(abs(eigenvalues[-1] - 1.0) <= EIGEN_TOL)
    lambda_min_ok = bool(eigenvalues[0] > -1.0)
    if not lambda_max_ok:
        logger.warning("largest eigenvalue %.12g differs from 1", eigenvalues[-1])
    if not lambda_min_ok:
        logger.warning("smallest eigenvalue %.12g is not above -1", eigenvalues[0])

    sqrt_degree = np.sqrt(norm.degree)
    inv_sqrt_degree = 1.0 / sqrt_degree
    # собственный вектор при λ = 1 пропорционален D̃^{1/2}·1, а не D̃^{-1/2}·1
    residual = float(np.linalg.norm(leading - sqrt_degree / np.linalg.norm(sqrt_degree)))
    residual_inverse = float(np.linalg.norm(leading - inv_sqrt_degree / np.linalg.norm(inv_sqrt_degree)))

    n = graph.n_nodes
    kappa_target = float(eigenvalues[-2] - 1.0) if n > 1 else None
    dominant = float(max(abs(eigenvalues[0]), eigenvalues[-2]) - 1.0) if n > 1 else None
    return SpectralReport(
        n_nodes=n,
        eigenvalues=eigenvalues.tolist(),
        leading_eigenvector=leading.tolist(),
        connected=True,
        bipartite=bipartite,
        bipartite_spectral=bipartite_spectral,
        lambda_min=float(eigenvalues[0]),
        lambda_max=float(eigenvalues[-1]),
        lambda_max_ok=lambda_max_ok,
        lambda_min_ok=lambda_min_ok,
        stationary_residual=residual,
        stationary_residual_inverse=residual_inverse,
        kappa_target=kappa_target,
        dominant_kappa_target=dominant,
    )


def _trace_pairs(n: int, pairs: Optional[Sequence[Tuple[int, int]]], max_pairs: int, rng) -> np.ndarray:
    if pairs is not None:
        chosen = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if chosen.size and (chosen.min() < 0 or chosen.max() >= n or np.any(chosen[:, 0] == chosen[:, 1])):
            raise ConfigError("pairs must reference two distinct existing nodes")
        return chosen
    rows, cols = np.triu_indices(n, k=1)
    if rows.size > max_pairs:
        keep = np.sort(rng.choice(rows.size, size=max_pairs, replace=False))
        rows, cols = rows[keep], cols[keep]
    return np.stack([rows, cols], axis=1)


def smoothing_trace(
    graph: Graph,
    features,
    tau_max: int,
    pairs: Optional[Sequence[Tuple[int, int]]] = None,
    rescale: bool = True,
    seed: int = 0,
    max_pairs: int = MAX_TRACE_PAIRS,
    allow_bipartite: bool = False,
) -> SpectralReport:
    """
    X⁽τ⁺¹⁾ = Â·X⁽τ⁾ для τ = 0…tau_max, попарные расстояния и κ_τ = d⁽τ⁺¹⁾/d⁽τ⁾ − 1.
    При rescale расстояния берутся по строкам D̃^{-1/2}·X⁽τ⁾: стационарная компонента
    в них не видна, поэтому она вычитается на каждом шаге.
    """
    if tau_max < 1:
        raise ConfigError("tau_max must be >= 1", tau_max=tau_max)
    report = spectral_analysis(graph, allow_bipartite)
    n = graph.n_nodes
    if n < 2:
        raise ConfigError("smoothing trace needs at least two nodes", n_nodes=n)
    norm = normalize_adjacency(graph)
    rng = substream(seed, "diagnostics")
    x = features.toarray() if sp.issparse(features) else np.array(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != n:
        raise ConfigError("features must have one row per node", n_nodes=n, rows=int(x.shape[0]))

    eigenvalues, vectors = eigh(norm.a_hat.toarray())
    stationary = vectors[:, -1]
    second = vectors[:, -2]
    regenerated = False
    if np.linalg.norm(second @ x) < GENERIC_COMPONENT_TOL:
        x = x + rng.normal(0.0, 1e-2, size=x.shape)
        regenerated = True
        logger.info("features regenerated: no component along the second eigenvector")

    chosen = _trace_pairs(n, pairs, max_pairs, rng)
    scale = 1.0 / np.sqrt(norm.degree) if rescale else np.ones(n)

    def distances(current: np.ndarray) -> np.ndarray:
        view = scale[:, None] * current
        return np.linalg.norm(view[chosen[:, 0]] - view[chosen[:, 1]], axis=1)

    if rescale:
        x = x - np.outer(stationary, stationary @ x)
    table = [distances(x)]
    for _ in range(tau_max):
        x = norm.a_hat @ x
        if rescale:
            x = x - np.outer(stationary, stationary @ x)
        table.append(distances(x))
    table = np.asarray(table)

    with np.errstate(divide="ignore", invalid="ignore"):
        kappas = np.where(table[:-1] > 0, table[1:] / table[:-1] - 1.0, np.nan)
    kappa_median = [float(np.nanmedian(row)) if np.any(np.isfinite(row)) else 0.0 for row in kappas]
    final = [None if not np.isfinite(v) else float(v) for v in kappas[-1]]
    target = report.dominant_kappa_target
    shrinkage = bool(np.all(table[-1] <= table[0] * (1.0 + 1e-12) + 1e-15))

    return report.model_copy(update={
        "rescaled": rescale,
        "features_regenerated": regenerated,
        "taus": list(range(tau_max + 1)),
        "pairs": chosen.tolist(),
        "distances": table.tolist(),
        "kappa_median": kappa_median,
        "final_kappas": final,
        "kappa_error": abs(kappa_median[-1] - target),
        "shrinkage_holds": shrinkage,
    })


# ============== Статистика трассы ==============

def homophily_dynamics(trace: AttackTrace) -> List[DynamicsRow]:
    """Траектория h_gt/h_pseudo и пределы, начиная с итерации 0 (чистый граф)."""
    h0, e_count = trace.clean_h_gt, trace.clean_edge_count
    rows = [DynamicsRow(
        iter=0, h_gt=h0, h_pseudo=trace.clean_h_pseudo,
        lower_limit=h0, upper_limit=h0, envelope_lower=h0, envelope_upper=h0,
    )]
    # при |E| = 0 пределы от h0 не зависят
    base = 0.0 if h0 is None else h0
    for r in trace.records:
        lower, upper = homophily_limits(base, e_count, r.iteration)
        env_lower, env_upper = homophily_envelope(base, e_count, r.iteration)
        rows.append(DynamicsRow(
            iter=r.iteration, h_gt=r.h_gt, h_pseudo=r.h_pseudo,
            lower_limit=lower, upper_limit=upper,
            envelope_lower=env_lower, envelope_upper=env_upper,
        ))
    return rows


def interclass_fraction(trace: AttackTrace, labels: Optional[LabelData] = None) -> InterclassStats:
    """Доли (добавления, удаления) × (внутри-, межклассовые) по Ŷ и по истинным меткам."""
    if not trace.records:
        raise ConfigError("trace is empty")
    counts = {key: 0 for key in (
        "add_inter_pseudo", "add_intra_pseudo", "remove_inter_pseudo", "remove_intra_pseudo",
        "add_inter_gt", "add_intra_gt", "remove_inter_gt", "remove_intra_gt",
    )}
    for r in trace.records:
        if labels is not None:
            merged = labels.merged_labels
            intra_p = bool(merged[r.i] == merged[r.j]) if merged is not None else r.intra_pseudo
            intra_g = bool(labels.labels[r.i] == labels.labels[r.j])
        else:
            intra_p, intra_g = r.intra_pseudo, r.intra_gt
        kind = "add" if r.action == ACTION_ADD else "remove"
        counts[f"{kind}_{'intra' if intra_p else 'inter'}_pseudo"] += 1
        counts[f"{kind}_{'intra' if intra_g else 'inter'}_gt"] += 1

    flips = len(trace.records)
    additions = counts["add_inter_pseudo"] + counts["add_intra_pseudo"]
    return InterclassStats(
        flips=flips,
        additions=additions,
        removals=flips - additions,
        **counts,
        addition_fraction=additions / flips,
        inter_fraction_of_additions_pseudo=counts["add_inter_pseudo"] / additions if additions else 0.0,
        inter_fraction_of_additions_gt=counts["add_inter_gt"] / additions if additions else 0.0,
        trajectory=homophily_dynamics(trace),
    )

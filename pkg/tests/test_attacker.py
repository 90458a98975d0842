import numpy as np
import pytest
from pydantic import ValidationError

from gsattack.attacker import (
    SaliencyMap,
    attack_loss_ce,
    ce_targets,
    dice_attack,
    ensure_pseudo_labels,
    loss_weights,
    replay_trace,
    restricted_loss,
    run_attack,
    saliency,
    select_perturbation,
    sweep_epsilon,
)
from gsattack import autodiff as ad
from gsattack.exceptions import ConfigError, ExhaustedCandidates, NoAdmissiblePair
from gsattack.graph import Graph, LabelData, consistency_matrix, generate_sbm, homophily
from gsattack.models import ACTION_ADD, ACTION_REMOVE, LOSS_RESTRICTED, AttackConfig, TrainConfig
from gsattack.surrogate import SurrogateParams, train

FAST = TrainConfig(epochs=10)


def attack_config(**kwargs) -> AttackConfig:
    return AttackConfig(train=FAST, **kwargs)


# ---------- веса потерь ----------

def test_loss_weights_schedule():
    assert loss_weights(0.8, 0.8, 0.1) == (1.0, 0.0)
    l1, l2 = loss_weights(0.8, 0.76, 0.1)
    assert l1 == pytest.approx(0.25) and l2 == pytest.approx(0.25)
    assert loss_weights(0.8, 0.5, 0.1) == (0.0, 1.0)
    # рост гомофилии не штрафуется
    assert loss_weights(0.8, 0.9, 0.1) == (1.0, 0.0)


@pytest.mark.parametrize("epsilon", [0.0, -0.1, 1.5])
def test_loss_weights_rejects_epsilon(epsilon):
    with pytest.raises(ConfigError):
        loss_weights(0.8, 0.8, epsilon)


def test_ce_targets_need_pseudo_labels(tiny_sbm):
    _, labels = tiny_sbm
    with pytest.raises(ConfigError):
        ce_targets(labels, "self")
    targets, index = ce_targets(labels, "train")
    assert np.array_equal(index, labels.train_idx)


# ---------- выбор пары ----------

def test_select_prefers_largest_score():
    m = np.array([[0.0, 2.0, -5.0], [2.0, 0.0, 3.0], [-5.0, 3.0, 0.0]])
    a = np.zeros((3, 3))
    assert select_perturbation(SaliencyMap(m, 0.0), a) == (1, 2, ACTION_ADD)
    # ребро (0, 2) с отрицательной значимостью выгодно удалить
    a[0, 2] = a[2, 0] = 1.0
    assert select_perturbation(SaliencyMap(m, 0.0), a) == (0, 2, ACTION_REMOVE)


def test_select_ties_break_lexicographically():
    m = np.ones((4, 4))
    np.fill_diagonal(m, 0.0)
    assert select_perturbation(SaliencyMap(m, 0.0), np.zeros((4, 4))) == (0, 1, ACTION_ADD)
    assert select_perturbation(SaliencyMap(m, 0.0), np.zeros((4, 4)), forbidden=[(1, 0)]) == (0, 2, ACTION_ADD)


def test_select_without_admissible_pair():
    m = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(NoAdmissiblePair):
        select_perturbation(SaliencyMap(m, 0.0), np.zeros((2, 2)), forbidden=[(0, 1)])


# ---------- значимость ----------

@pytest.fixture
def trained(tiny_sbm):
    graph, labels = tiny_sbm
    config = attack_config(surrogate="gcn")
    labels = ensure_pseudo_labels(graph, labels, config)
    params = train(graph, labels, FAST, "gcn")
    return graph, labels, params


def test_saliency_is_symmetric_with_zero_diagonal(trained):
    graph, labels, params = trained
    smap = saliency(params, graph.adjacency.toarray(), graph.features, labels)
    assert np.allclose(smap.matrix, smap.matrix.T)
    assert np.all(np.diag(smap.matrix) == 0.0)
    assert (smap.lambda1, smap.lambda2) == (1.0, 0.0)


def test_saliency_matches_symmetric_finite_difference(trained):
    graph, labels, params = trained
    a = graph.adjacency.toarray()
    smap = saliency(params, a, graph.features, labels)
    h = 1e-6
    for i, j in [(0, 1), (2, 9), (5, 14)]:
        plus, minus = a.copy(), a.copy()
        plus[i, j] += h
        plus[j, i] += h
        minus[i, j] -= h
        minus[j, i] -= h
        up = saliency(params, plus, graph.features, labels).loss_value
        down = saliency(params, minus, graph.features, labels).loss_value
        # возмущены обе симметричные позиции: разность даёт gᵢⱼ + gⱼᵢ = 2𝒜ᵢⱼ
        assert smap.matrix[i, j] == pytest.approx((up - down) / (4 * h), abs=1e-5)


def test_restricted_loss_reduces_to_parts(trained):
    graph, labels, params = trained
    a = graph.adjacency.toarray()
    from gsattack.surrogate import logits_expr

    logits = logits_expr("gcn", ad.sym_normalize(ad.constant(a)), ad.constant(graph.features), [ad.constant(w) for w in params.weights])
    consistency = consistency_matrix(labels.merged_labels)
    ce = attack_loss_ce(logits, labels).item()
    only_ce = restricted_loss(logits, labels, a, a, consistency, 0.1, weights=(1.0, 0.0)).item()
    assert only_ce == pytest.approx(ce)
    only_h = restricted_loss(logits, labels, a, a, consistency, 0.1, weights=(0.0, 1.0)).item()
    assert only_h == pytest.approx(0.0)


# ---------- жадная атака ----------

def test_run_attack_trace_is_consistent(tiny_sbm):
    graph, labels = tiny_sbm
    poisoned, trace = run_attack(graph, labels, attack_config(budget=3, surrogate="gcn"), progress=False)
    assert trace.budget == 3
    pairs = [(r.i, r.j) for r in trace.records]
    assert len(set(pairs)) == 3
    assert all(r.i < r.j for r in trace.records)
    replayed = replay_trace(graph, trace)
    assert (replayed.adjacency != poisoned.adjacency).nnz == 0
    assert poisoned.edge_count == graph.edge_count + sum(1 if r.action == ACTION_ADD else -1 for r in trace.records)
    assert trace.records[-1].h_gt == pytest.approx(homophily(poisoned, labels.labels))


def test_run_attack_is_deterministic(tiny_sbm):
    graph, labels = tiny_sbm
    config = attack_config(budget=2, seed=4)
    _, first = run_attack(graph, labels, config, progress=False)
    _, second = run_attack(graph, labels, config, progress=False)
    assert first.trace_hash() == second.trace_hash()


def test_restricted_attack_weights_follow_homophily(tiny_sbm):
    graph, labels = tiny_sbm
    config = attack_config(budget=3, loss=LOSS_RESTRICTED, epsilon=0.05, surrogate="gcn", retrain_every=2)
    _, trace = run_attack(graph, labels, config, progress=False)
    assert (trace.records[0].lambda1, trace.records[0].lambda2) == (1.0, 0.0)
    for previous, record in zip(trace.records, trace.records[1:]):
        expected = loss_weights(trace.clean_h_pseudo, previous.h_pseudo, 0.05)
        assert record.lambda1 == pytest.approx(expected[0])
        assert record.lambda2 == pytest.approx(expected[1])


def test_budget_larger_than_pair_count(tiny_sbm):
    graph, labels = tiny_sbm
    with pytest.raises(NoAdmissiblePair):
        run_attack(graph, labels, attack_config(budget=121), progress=False)


def test_ensure_pseudo_labels_is_idempotent(trained):
    graph, labels, _ = trained
    assert ensure_pseudo_labels(graph, labels, attack_config()) is labels


# ---------- DICE ----------

def test_dice_flips_follow_class_rule(small_sbm):
    graph, labels = small_sbm
    poisoned, trace = dice_attack(graph, labels, budget=20, seed=2)
    assert trace.budget == 20 and trace.method == "dice"
    for r in trace.records:
        if r.action == ACTION_ADD:
            assert not r.intra_pseudo
        else:
            assert r.intra_pseudo
    assert (replay_trace(graph, trace).adjacency != poisoned.adjacency).nnz == 0
    _, again = dice_attack(graph, labels, budget=20, seed=2)
    assert again.trace_hash() == trace.trace_hash()


def test_dice_exhausts_candidates():
    graph = Graph.from_edges(2, [(0, 1)], np.eye(2))
    labels = LabelData(labels=[0, 1], k_classes=2, train_idx=[0], test_idx=[1])
    with pytest.raises(ExhaustedCandidates):
        dice_attack(graph, labels, budget=1)


def test_dice_switches_kind_when_one_is_empty():
    # все межклассовые пары уже рёбра: остаются только удаления
    graph = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)], np.eye(4))
    labels = LabelData(labels=[0, 0, 1, 1], k_classes=2, train_idx=[0, 2], test_idx=[1, 3])
    _, trace = dice_attack(graph, labels, budget=1, seed=0)
    assert trace.records[0].action == ACTION_REMOVE
    assert (trace.records[0].i, trace.records[0].j) == (0, 1)


# ---------- sweep ----------

def test_sweep_epsilon_rows(tiny_sbm):
    graph, labels = tiny_sbm
    config = attack_config(budget=2, surrogate="gcn")
    report = sweep_epsilon(graph, labels, [0.5, 1.0], config, victim_runs=2, progress=False)
    assert [row.epsilon for row in report.rows] == [0.5, 1.0]
    assert all(row.budget == 2 for row in report.rows)
    assert report.clean.runs == 2


def test_sweep_validates_before_running(tiny_sbm):
    graph, labels = tiny_sbm
    with pytest.raises(ConfigError):
        sweep_epsilon(graph, labels, [], attack_config(budget=1), victim_runs=1)
    with pytest.raises(ValidationError):
        sweep_epsilon(graph, labels, [0.1, 1.5], attack_config(budget=1), victim_runs=1)


def test_restricted_saliency_matches_finite_difference(trained):
    graph, labels, params = trained
    a0 = graph.adjacency.toarray()
    a = a0.copy()
    a[0, 15] = a[15, 0] = 1.0 - a[0, 15]
    consistency = consistency_matrix(labels.merged_labels)

    def value(m):
        return saliency(
            params, m, graph.features, labels, loss=LOSS_RESTRICTED,
            a0=a0, consistency=consistency, epsilon=0.05, weights=(0.5, 0.5),
        )

    smap = value(a)
    h = 1e-5
    for i, j in [(0, 15), (3, 7), (1, 12)]:
        plus, minus = a.copy(), a.copy()
        plus[i, j] += h
        plus[j, i] += h
        minus[i, j] -= h
        minus[j, i] -= h
        numeric = (value(plus).loss_value - value(minus).loss_value) / (4 * h)
        assert smap.matrix[i, j] == pytest.approx(numeric, rel=1e-3, abs=1e-7)


# ---------- графы без рёбер ----------

def test_loss_weights_with_undefined_homophily():
    assert loss_weights(None, 0.5, 0.1) == (1.0, 0.0)
    # все рёбра удалены: ограничение полностью активно
    assert loss_weights(0.8, None, 0.1) == (0.0, 1.0)


def test_dice_zero_budget_on_edgeless_graph():
    graph = Graph.from_edges(4, [], np.eye(4))
    labels = LabelData(labels=[0, 0, 1, 1], k_classes=2, train_idx=[0, 2], test_idx=[1, 3])
    poisoned, trace = dice_attack(graph, labels, budget=0)
    assert poisoned.edge_count == 0
    assert trace.records == []
    assert trace.clean_h_gt is None and trace.clean_h_pseudo is None


def test_dice_adds_inter_edge_to_edgeless_graph():
    graph = Graph.from_edges(4, [], np.eye(4))
    labels = LabelData(labels=[0, 0, 1, 1], k_classes=2, train_idx=[0, 2], test_idx=[1, 3])
    poisoned, trace = dice_attack(graph, labels, budget=1, seed=3)
    record = trace.records[0]
    assert record.action == ACTION_ADD and not record.intra_gt
    assert poisoned.edge_count == 1
    assert record.h_gt == 0.0 and record.h_pseudo == 0.0


def test_run_attack_can_remove_last_edge():
    graph = Graph.from_edges(2, [(0, 1)], np.eye(2))
    labels = LabelData(labels=[0, 1], k_classes=2, train_idx=[0], test_idx=[1])
    poisoned, trace = run_attack(graph, labels, attack_config(budget=1, surrogate="gcn"), progress=False)
    record = trace.records[0]
    assert (record.i, record.j, record.action) == (0, 1, ACTION_REMOVE)
    assert record.h_gt is None and record.h_pseudo is None
    assert poisoned.edge_count == 0
    assert trace.clean_h_gt == 0.0


def test_restricted_attack_on_edgeless_graph_is_unconstrained():
    graph = Graph.from_edges(3, [], np.eye(3))
    labels = LabelData(labels=[0, 0, 1], k_classes=2, train_idx=[0, 2], test_idx=[1])
    config = attack_config(budget=2, loss=LOSS_RESTRICTED, epsilon=0.1, surrogate="gcn")
    _, trace = run_attack(graph, labels, config, progress=False)
    assert trace.budget == 2
    assert all((r.lambda1, r.lambda2) == (1.0, 0.0) for r in trace.records)


# ---------- значимость против настоящих флипов ----------

def test_top_scored_flips_change_loss_in_predicted_direction():
    graph, labels = generate_sbm(8, 2, 0.7, 0.2, seed=2, train_fraction=0.25)
    config = attack_config(surrogate="gcn")
    labels = ensure_pseudo_labels(graph, labels, config)
    params = train(graph, labels, FAST, "gcn")
    a = graph.adjacency.toarray()
    smap = saliency(params, a, graph.features, labels)
    score = smap.matrix * (1.0 - 2.0 * a)
    rows, cols = np.triu_indices(8, k=1)
    top = np.argsort(-score[rows, cols], kind="stable")[:5]
    for k in top:
        i, j = int(rows[k]), int(cols[k])
        flipped = a.copy()
        flipped[i, j] = flipped[j, i] = 1.0 - a[i, j]
        change = saliency(params, flipped, graph.features, labels).loss_value - smap.loss_value
        assert np.sign(change) == np.sign(score[i, j])


def test_zero_weight_surrogate_has_zero_saliency(tiny_sbm):
    graph, labels = tiny_sbm
    labels = ensure_pseudo_labels(graph, labels, attack_config(surrogate="gcn"))
    params = SurrogateParams("gcn", (np.zeros((graph.feature_dim, 4)), np.zeros((4, labels.k_classes))))
    smap = saliency(params, graph.adjacency.toarray(), graph.features, labels)
    assert np.all(smap.matrix == 0.0)


# ---------- траектория гомофилии ----------

@pytest.fixture
def homophilous_sbm():
    return generate_sbm(120, 2, 0.2, 0.01, seed=0)


def test_restricted_attack_keeps_homophily_bound(homophilous_sbm):
    graph, labels = homophilous_sbm
    epsilon = 0.02
    config = attack_config(budget=25, loss=LOSS_RESTRICTED, epsilon=epsilon, surrogate="gcn")
    _, trace = run_attack(graph, labels, config, progress=False)
    bound = (1.0 - epsilon) * trace.clean_h_pseudo - 0.005
    assert all(r.h_pseudo >= bound for r in trace.records)


def test_unrestricted_attack_lowers_homophily(homophilous_sbm):
    graph, labels = homophilous_sbm
    _, trace = run_attack(graph, labels, attack_config(budget=20, surrogate="gcn"), progress=False)
    values = [trace.clean_h_pseudo] + [r.h_pseudo for r in trace.records]
    steps = np.diff(values)
    assert np.count_nonzero(steps <= 0) >= 0.9 * steps.size

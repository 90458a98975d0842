"""Долгие прогоны: атака на SBM и опорные наборы (Cora/Citeseer по переменным окружения)."""
import os

import numpy as np
import pytest

from gsattack.attacker import dice_attack, ensure_pseudo_labels, run_attack
from gsattack.bundle import load_dataset
from gsattack.config import CITESEER_BUNDLE_ENV, CORA_BUNDLE_ENV
from gsattack.diagnostics import homophily_dynamics, interclass_fraction
from gsattack.graph import generate_sbm
from gsattack.models import LOSS_RESTRICTED, AttackConfig
from gsattack.victim import compare_reports, evaluate_victim

pytestmark = pytest.mark.slow


def bundle_or_skip(env: str):
    path = os.environ.get(env)
    if not path:
        pytest.skip(f"{env} is not set")
    return load_dataset(path)


def test_sbm_attack_prefers_inter_class_additions():
    graph, labels = generate_sbm(400, 4, 0.05, 0.005, seed=0)
    _, trace = run_attack(graph, labels, AttackConfig(budget_fraction=0.05), progress=False)
    stats = interclass_fraction(trace)
    assert stats.addition_fraction >= 0.7
    assert stats.inter_fraction_of_additions_pseudo >= 0.7
    rows = homophily_dynamics(trace)
    for row in rows:
        assert row.envelope_lower - 1e-12 <= row.h_gt <= row.envelope_upper + 1e-12

    # при t ≤ 2·intra − |E| удаление внутриклассового ребра не опускает h ниже нижнего предела;
    # верхний предел действует, пока не удалено ни одного межклассового ребра
    intra = trace.clean_h_gt * trace.clean_edge_count
    assert trace.budget <= 2 * intra - trace.clean_edge_count
    inter_removed = False
    for row, record in zip(rows[1:], trace.records):
        inter_removed |= record.action == "remove" and not record.intra_gt
        assert row.h_gt >= row.lower_limit - 1e-12
        if not inter_removed:
            assert row.h_gt <= row.upper_limit + 1e-12
    assert rows[-1].h_gt - rows[-1].lower_limit <= 0.01


def test_cora_clean_baseline():
    graph, labels = bundle_or_skip(CORA_BUNDLE_ENV)
    report = evaluate_victim(graph, labels, runs=10)
    assert 0.797 <= report.mean <= 0.837


def test_cora_attack_effectiveness():
    graph, labels = bundle_or_skip(CORA_BUNDLE_ENV)
    config = AttackConfig(budget_fraction=0.05)
    labels = ensure_pseudo_labels(graph, labels, config)
    poisoned, trace = run_attack(graph, labels, config, progress=False)
    clean = evaluate_victim(graph, labels, runs=10)
    attacked = evaluate_victim(poisoned, labels, runs=10, graph_identity=f"poisoned:{trace.trace_hash()}")
    comparison = compare_reports(clean, attacked)
    assert attacked.mean <= 0.77
    assert comparison.drop >= 0.05

    dice_graph, _ = dice_attack(graph, labels, trace.budget, seed=0)
    dice = evaluate_victim(dice_graph, labels, runs=10)
    assert dice.mean - attacked.mean >= 0.02


def test_cora_surrogate_ablation():
    graph, labels = bundle_or_skip(CORA_BUNDLE_ENV)
    multihop = AttackConfig(budget_fraction=0.05, surrogate="multihop")
    labels = ensure_pseudo_labels(graph, labels, multihop)
    accuracies = {}
    for surrogate in ["multihop", "gcn"]:
        config = multihop.model_copy(update={"surrogate": surrogate})
        poisoned, _ = run_attack(graph, labels, config, progress=False)
        accuracies[surrogate] = evaluate_victim(poisoned, labels, runs=10).mean
    assert accuracies["gcn"] - accuracies["multihop"] >= 0.01


def test_cora_restricted_attack_keeps_homophily():
    graph, labels = bundle_or_skip(CORA_BUNDLE_ENV)
    config = AttackConfig(budget_fraction=0.05, loss=LOSS_RESTRICTED, epsilon=0.02)
    labels = ensure_pseudo_labels(graph, labels, config)
    poisoned, trace = run_attack(graph, labels, config, progress=False)
    slack = 1.0 / (graph.edge_count + trace.budget)
    for record in trace.records:
        assert record.h_pseudo >= 0.98 * trace.clean_h_pseudo - slack
    assert trace.clean_h_gt - trace.records[-1].h_gt <= 0.030
    clean = evaluate_victim(graph, labels, runs=10)
    attacked = evaluate_victim(poisoned, labels, runs=10)
    assert clean.mean - attacked.mean >= 0.04


def test_citeseer_attack_lowers_accuracy():
    graph, labels = bundle_or_skip(CITESEER_BUNDLE_ENV)
    config = AttackConfig(budget_fraction=0.05)
    poisoned, _ = run_attack(graph, labels, config, progress=False)
    clean = evaluate_victim(graph, labels, runs=5)
    attacked = evaluate_victim(poisoned, labels, runs=5)
    assert np.mean(attacked.accuracies) < np.mean(clean.accuracies)

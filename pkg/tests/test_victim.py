import pytest

from gsattack.attacker import dice_attack
from gsattack.exceptions import ConfigError
from gsattack.models import EvalReport, TrainConfig
from gsattack.victim import compare_reports, evaluate_victim

FAST = TrainConfig(epochs=15)


def test_evaluate_victim_seeds_and_stats(small_sbm):
    graph, labels = small_sbm
    report = evaluate_victim(graph, labels, runs=3, base_seed=5, train_config=FAST)
    assert report.seeds == [5, 6, 7]
    assert report.runs == 3
    assert all(0.0 <= acc <= 1.0 for acc in report.accuracies)
    assert report.mean == pytest.approx(sum(report.accuracies) / 3)


def test_evaluate_victim_parallel_matches_serial(small_sbm):
    graph, labels = small_sbm
    serial = evaluate_victim(graph, labels, runs=3, train_config=FAST)
    parallel = evaluate_victim(graph, labels, runs=3, train_config=FAST, workers=3)
    assert serial.accuracies == parallel.accuracies


def test_evaluate_victim_rejects_zero_runs(small_sbm):
    graph, labels = small_sbm
    with pytest.raises(ConfigError):
        evaluate_victim(graph, labels, runs=0)


def test_compare_reports_pairs_by_seed(small_sbm):
    graph, labels = small_sbm
    poisoned, trace = dice_attack(graph, labels, budget=10, seed=1)
    clean = evaluate_victim(graph, labels, runs=2, train_config=FAST)
    dirty = evaluate_victim(poisoned, labels, runs=2, train_config=FAST, graph_identity=f"poisoned:{trace.trace_hash()}")
    comparison = compare_reports(clean, dirty)
    assert comparison.seeds == [0, 1]
    assert comparison.drop == pytest.approx(clean.mean - dirty.mean)
    assert len(comparison.paired_drops) == 2


def test_compare_reports_requires_same_seeds():
    a = EvalReport.from_runs([0, 1], [0.8, 0.9])
    b = EvalReport.from_runs([1, 2], [0.7, 0.6])
    with pytest.raises(ConfigError):
        compare_reports(a, b)


def test_eval_report_from_runs_sorts_by_seed():
    report = EvalReport.from_runs([3, 1, 2], [0.3, 0.1, 0.2])
    assert report.seeds == [1, 2, 3]
    assert report.accuracies == [0.1, 0.2, 0.3]
    assert report.std == pytest.approx(0.1)

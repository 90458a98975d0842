"""Оценка жертвы: переобучение GCN на чистом/отравленном графе по ансамблю seed."""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

from tqdm import tqdm

from .config import VICTIM_RUNS
from .exceptions import ConfigError
from .graph import Graph, LabelData, normalize_adjacency
from .models import ARCH_GCN, EvalReport, TrainConfig, VictimComparison
from .surrogate import accuracy, predict, train

from log import get_logger

logger = get_logger("gsattack.victim")


def evaluate_victim(
    graph: Graph,
    labels: LabelData,
    runs: int = VICTIM_RUNS,
    base_seed: int = 0,
    train_config: Optional[TrainConfig] = None,
    workers: int = 1,
    graph_identity: str = "clean",
    progress: bool = False,
) -> EvalReport:
    """
    Обучает runs жертв (GCN) с seed base_seed…base_seed+runs−1 на истинных
    train-метках; точность считается по test-узлам против истинных меток.
    """
    if runs < 1:
        raise ConfigError("victim runs must be >= 1", runs=runs)
    base = train_config or TrainConfig()
    norm = normalize_adjacency(graph)
    seeds = list(range(base_seed, base_seed + runs))

    def run_one(seed: int) -> float:
        params = train(graph, labels, base.model_copy(update={"seed": seed}), ARCH_GCN, norm=norm)
        return accuracy(predict(params, norm, graph.features), labels.labels, labels.test_idx)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            accuracies = list(pool.map(run_one, seeds))
    else:
        accuracies = [run_one(s) for s in tqdm(seeds, desc="victim", unit="run", disable=not progress)]

    report = EvalReport.from_runs(seeds, accuracies, graph_identity)
    logger.info("victim on %s: accuracy %.4f ± %.4f over %d runs", graph_identity, report.mean, report.std, report.runs)
    return report


def compare_reports(clean: EvalReport, poisoned: EvalReport) -> VictimComparison:
    if clean.seeds != poisoned.seeds:
        raise ConfigError("reports must share the same seeds", clean=clean.seeds, poisoned=poisoned.seeds)
    drops: List[float] = [c - p for c, p in zip(clean.accuracies, poisoned.accuracies)]
    return VictimComparison(
        seeds=clean.seeds,
        clean_mean=clean.mean,
        poisoned_mean=poisoned.mean,
        drop=clean.mean - poisoned.mean,
        paired_drops=drops,
        poisoned_lower_everywhere=all(d > 0 for d in drops),
    )

"""gsa sweep <bundle> --epsilons ...: ограниченная атака по сетке ε."""
import argparse
from pathlib import Path

from ..attacker import sweep_epsilon
from ..bundle import load_dataset
from ..services.report_service import write_json
from .registry import Command, add_attack_arguments, add_victim_arguments, resolve_run_config

DEFAULT_EPSILONS = [0.02, 0.05, 0.1, 1.0]


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("bundle")
    parser.add_argument("--epsilons", type=float, nargs="+", default=DEFAULT_EPSILONS)
    add_attack_arguments(parser)
    add_victim_arguments(parser)


def run(args: argparse.Namespace, out_dir: Path) -> dict:
    config = resolve_run_config(args, out_dir, dataset=args.bundle, epsilons=list(args.epsilons))
    graph, labels = load_dataset(args.bundle)
    report = sweep_epsilon(
        graph, labels, args.epsilons, config.attack_config(),
        config.victim_runs, victim_seed=config.seed, progress=not args.quiet,
    )
    write_json(out_dir / "sweep_report.json", report)
    return report.model_dump(mode="json")


command = Command("sweep", "restricted attack and victim accuracy over a grid of epsilon", add_arguments, run)

"""Описание подкоманды CLI и общие группы флагов."""
import argparse
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from ..config import BUDGET_FRACTION, EPOCHS, EPSILON_UNRESTRICTED, LEARNING_RATE, VICTIM_RUNS
from ..models import RunConfig
from ..services.report_service import write_run_config

from log import get_logger

logger = get_logger("gsattack.cli")

Handler = Callable[[argparse.Namespace, Path], Any]


@dataclass(frozen=True)
class Command:
    name: str
    help: str
    add_arguments: Callable[[argparse.ArgumentParser], None]
    handler: Handler


def add_training_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=EPOCHS)
    parser.add_argument("--lr", dest="learning_rate", type=float, default=LEARNING_RATE)
    parser.add_argument("--hidden", dest="hidden_width", type=int, default=None)


def add_attack_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--budget-fraction", type=float, default=BUDGET_FRACTION)
    parser.add_argument("--budget", type=int, default=None, help="явный бюджет Δ (важнее доли)")
    parser.add_argument("--epsilon", type=float, default=EPSILON_UNRESTRICTED)
    parser.add_argument("--surrogate", choices=["gcn", "multihop"], default="multihop")
    parser.add_argument("--loss", choices=["ce", "restricted"], default="ce")
    parser.add_argument("--retrain-every", type=int, default=1)
    parser.add_argument("--label-source", choices=["self", "train"], default="self")
    parser.add_argument("--warm-start", action="store_true")
    add_training_arguments(parser)


def add_victim_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--runs", dest="victim_runs", type=int, default=VICTIM_RUNS)
    parser.add_argument("--workers", type=int, default=1)


_CONFIG_FIELDS = (
    "budget_fraction", "budget", "epsilon", "surrogate", "loss", "retrain_every",
    "label_source", "warm_start", "method", "victim_runs", "epochs", "learning_rate", "hidden_width",
)


def resolve_run_config(
    args: argparse.Namespace,
    out_dir: Path,
    dataset: Optional[str] = None,
    **options: Any,
) -> RunConfig:
    """Проверяет конфигурацию до вычислений и пишет её в run_config.json."""
    fields = {name: getattr(args, name) for name in _CONFIG_FIELDS if getattr(args, name, None) is not None}
    config = RunConfig(
        subcommand=args.command if getattr(args, "target", None) is None else f"{args.command} {args.target}",
        dataset=dataset,
        output_dir=str(out_dir),
        seed=args.seed,
        options=options,
        **fields,
    )
    write_run_config(config, out_dir)
    logger.info("run config written to %s", out_dir)
    return config

"""gsa evaluate <bundle|poisoned>: точность жертвы-GCN по ансамблю seed."""
import argparse
from pathlib import Path

from ..bundle import load_dataset, load_poisoned
from ..config import PERTURBATIONS_FILE
from ..services.report_service import write_json
from ..victim import compare_reports, evaluate_victim
from .registry import Command, add_training_arguments, add_victim_arguments, resolve_run_config


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("bundle")
    parser.add_argument("--clean", default=None, help="чистый бандл для парного сравнения")
    add_victim_arguments(parser)
    add_training_arguments(parser)


def run(args: argparse.Namespace, out_dir: Path) -> dict:
    config = resolve_run_config(args, out_dir, dataset=args.bundle, clean=args.clean, workers=args.workers)
    bundle = Path(args.bundle)
    if (bundle / PERTURBATIONS_FILE).exists():
        graph, labels, trace = load_poisoned(bundle)
        identity = f"poisoned:{trace.trace_hash()}"
    else:
        graph, labels = load_dataset(bundle)
        identity = "clean"
    train_config = config.train_config()
    report = evaluate_victim(
        graph, labels, config.victim_runs, config.seed, train_config,
        workers=args.workers, graph_identity=identity, progress=not args.quiet,
    )
    write_json(out_dir / "eval_report.json", report)
    if args.clean is None:
        return report.model_dump(mode="json")

    clean_graph, clean_labels = load_dataset(args.clean)
    clean_report = evaluate_victim(
        clean_graph, clean_labels, config.victim_runs, config.seed, train_config,
        workers=args.workers, progress=not args.quiet,
    )
    comparison = compare_reports(clean_report, report)
    write_json(out_dir / "clean_report.json", clean_report)
    write_json(out_dir / "comparison.json", comparison)
    return {"report": report.model_dump(mode="json"), "comparison": comparison.model_dump(mode="json")}


command = Command("evaluate", "train GCN victims and report test accuracy", add_arguments, run)

"""gsa attack <bundle>: отравленный бандл + трасса флипов."""
import argparse
from pathlib import Path

from ..attacker import dice_attack, ensure_pseudo_labels, run_attack
from ..bundle import load_dataset, save_poisoned
from .registry import Command, add_attack_arguments, resolve_run_config


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("bundle")
    parser.add_argument("--method", choices=["saliency", "dice"], default="saliency")
    parser.add_argument("--poisoned", default=None, help="каталог отравленного бандла (по умолчанию <out>/poisoned)")
    add_attack_arguments(parser)


def run(args: argparse.Namespace, out_dir: Path) -> dict:
    target = Path(args.poisoned) if args.poisoned else out_dir / "poisoned"
    config = resolve_run_config(args, out_dir, dataset=args.bundle, poisoned=str(target))
    attack_config = config.attack_config()
    graph, labels = load_dataset(args.bundle)
    if config.method == "dice":
        labels = ensure_pseudo_labels(graph, labels, attack_config)
        poisoned, trace = dice_attack(graph, labels, attack_config.resolve_budget(graph.edge_count), config.seed)
    else:
        poisoned, trace = run_attack(graph, labels, attack_config, progress=not args.quiet)
    save_poisoned(poisoned, trace, target, labels=labels, clean_graph=graph)
    last = trace.records[-1] if trace.records else None
    return {
        "poisoned": str(target),
        "method": config.method,
        "flips": trace.budget,
        "trace_hash": trace.trace_hash(),
        "clean_h_gt": trace.clean_h_gt,
        "clean_h_pseudo": trace.clean_h_pseudo,
        "h_gt": last.h_gt if last else trace.clean_h_gt,
        "h_pseudo": last.h_pseudo if last else trace.clean_h_pseudo,
    }


command = Command("attack", "poison a bundle with the saliency attack or DICE", add_arguments, run)

"""gsa synth: стохастическая блочная модель -> бандл."""
import argparse
from pathlib import Path

from ..bundle import save_dataset
from ..config import SBM_FEATURE_NOISE, TRAIN_FRACTION
from ..graph import generate_sbm, homophily
from .registry import Command, resolve_run_config


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, required=True)
    parser.add_argument("--k", type=int, required=True)
    parser.add_argument("--p-intra", type=float, required=True)
    parser.add_argument("--p-inter", type=float, required=True)
    parser.add_argument("--noise", type=float, default=SBM_FEATURE_NOISE)
    parser.add_argument("--train-fraction", type=float, default=TRAIN_FRACTION)
    parser.add_argument("--bundle", default=None, help="каталог бандла (по умолчанию <out>/synth)")


def run(args: argparse.Namespace, out_dir: Path) -> dict:
    target = Path(args.bundle) if args.bundle else out_dir / "synth"
    resolve_run_config(
        args, out_dir, dataset=str(target),
        n=args.n, k=args.k, p_intra=args.p_intra, p_inter=args.p_inter,
        noise=args.noise, train_fraction=args.train_fraction,
    )
    graph, labels = generate_sbm(
        args.n, args.k, args.p_intra, args.p_inter, args.seed,
        noise=args.noise, train_fraction=args.train_fraction,
    )
    save_dataset(graph, labels, target, split_seed=args.seed)
    return {
        "bundle": str(target),
        "num_nodes": graph.n_nodes,
        "num_edges": graph.edge_count,
        "homophily": homophily(graph, labels.labels) if graph.edge_count else None,
    }


command = Command("synth", "generate a stochastic block model bundle", add_arguments, run)

"""gsa ingest <raw> <bundle>: сырые Planetoid/LINQS файлы -> бандл."""
import argparse
from pathlib import Path

from ..config import TRAIN_FRACTION
from ..services.ingest_service import ingest
from .registry import Command, resolve_run_config


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("raw", help="каталог с сырыми файлами")
    parser.add_argument("bundle", help="каталог бандла на выходе")
    parser.add_argument("--name", default=None, help="имя набора (cora, citeseer, ...)")
    parser.add_argument("--lcc", action="store_true", help="оставить наибольшую компоненту связности")
    parser.add_argument("--train-fraction", type=float, default=TRAIN_FRACTION)


def run(args: argparse.Namespace, out_dir: Path) -> dict:
    resolve_run_config(
        args, out_dir, dataset=args.raw,
        bundle=args.bundle, name=args.name, lcc=args.lcc, train_fraction=args.train_fraction,
    )
    graph, labels = ingest(args.raw, args.bundle, args.name, args.lcc, args.seed, args.train_fraction)
    return {
        "bundle": args.bundle,
        "num_nodes": graph.n_nodes,
        "num_edges": graph.edge_count,
        "num_classes": labels.k_classes,
        "feature_dim": graph.feature_dim,
    }


command = Command("ingest", "convert raw Planetoid/LINQS files into a bundle", add_arguments, run)

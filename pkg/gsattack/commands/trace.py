"""gsa trace <perturbations.csv>: CSV динамики гомофилии для внешних графиков."""
import argparse
from pathlib import Path

from ..bundle import read_trace
from ..diagnostics import homophily_dynamics
from ..services.report_service import write_dynamics_csv
from .registry import Command, resolve_run_config


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("perturbations", help="perturbations.csv (рядом должен лежать config.json)")
    parser.add_argument("--output", default=None, help="CSV на выходе (по умолчанию <out>/dynamics.csv)")


def run(args: argparse.Namespace, out_dir: Path) -> dict:
    target = Path(args.output) if args.output else out_dir / "dynamics.csv"
    resolve_run_config(args, out_dir, dataset=args.perturbations, output=str(target))
    rows = homophily_dynamics(read_trace(args.perturbations))
    write_dynamics_csv(rows, target)
    return {"csv": str(target), "rows": len(rows)}


command = Command("trace", "emit the homophily dynamics CSV of an attack trace", add_arguments, run)

"""
gsa diagnose <target>: численные проверки утверждений об атаке.
lpa: модель LPA; lemma1: градиент против дискретных возмущений;
theorem1: сжатие расстояний при сглаживании; interclass: доли флипов по трассе.
"""
import argparse
from pathlib import Path

from ..bundle import load_dataset, load_poisoned
from ..config import LEMMA1_DELTA, LEMMA1_TRIALS
from ..diagnostics import (
    MAX_TRACE_PAIRS,
    interclass_fraction,
    lpa_report,
    random_lemma1_instances,
    smoothing_trace,
    verify_lemma1,
)
from ..exceptions import ConfigError
from ..graph import generate_sbm
from ..models import LpaScenario
from ..services.report_service import write_json
from .registry import Command, resolve_run_config

TARGETS = ["lpa", "lemma1", "theorem1", "interclass"]


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("target", choices=TARGETS)
    parser.add_argument("--n1", type=float, default=3.0, help="lpa: соседи своего класса")
    parser.add_argument("--n2", type=float, default=2.0, help="lpa: соседи чужого класса")
    parser.add_argument("--delta", type=float, default=0.1, help="lpa: доля начального сигнала")
    parser.add_argument("--trials", type=int, default=LEMMA1_TRIALS)
    parser.add_argument("--delta-a", type=float, default=LEMMA1_DELTA)
    parser.add_argument("--dims", type=int, default=10)
    parser.add_argument("--bundle", default=None, help="theorem1: граф бандла вместо SBM; interclass: отравленный бандл")
    parser.add_argument("--sbm-n", type=int, default=30)
    parser.add_argument("--sbm-k", type=int, default=2)
    parser.add_argument("--p-intra", type=float, default=0.5)
    parser.add_argument("--p-inter", type=float, default=0.05)
    parser.add_argument("--tau-max", type=int, default=200)
    parser.add_argument("--raw", action="store_true", help="theorem1: расстояния без масштабирования D^{-1/2}")
    parser.add_argument("--allow-bipartite", action="store_true")
    parser.add_argument("--max-pairs", type=int, default=MAX_TRACE_PAIRS)


def _lpa(args: argparse.Namespace, out_dir: Path):
    report = lpa_report(LpaScenario(n1=args.n1, n2=args.n2, delta=args.delta))
    return write_json(out_dir / "lpa_report.json", report), report


def _lemma1(args: argparse.Namespace, out_dir: Path):
    if args.trials < 1:
        raise ConfigError("trials must be >= 1", trials=args.trials)
    instances = random_lemma1_instances(args.trials, seed=args.seed, dims=args.dims)
    report = verify_lemma1(instances, delta_a=args.delta_a, progress=not args.quiet)
    return write_json(out_dir / "lemma1_report.json", report), report


def _theorem1(args: argparse.Namespace, out_dir: Path):
    if args.bundle:
        graph, _ = load_dataset(args.bundle)
    else:
        graph, _ = generate_sbm(args.sbm_n, args.sbm_k, args.p_intra, args.p_inter, args.seed)
    report = smoothing_trace(
        graph, graph.features, args.tau_max,
        rescale=not args.raw, seed=args.seed, max_pairs=args.max_pairs,
        allow_bipartite=args.allow_bipartite,
    )
    return write_json(out_dir / "theorem1_report.json", report), report


def _interclass(args: argparse.Namespace, out_dir: Path):
    if not args.bundle:
        raise ConfigError("interclass needs --bundle with a poisoned bundle")
    _, labels, trace = load_poisoned(args.bundle)
    stats = interclass_fraction(trace, labels)
    return write_json(out_dir / "interclass_report.json", stats), stats


_HANDLERS = {"lpa": _lpa, "lemma1": _lemma1, "theorem1": _theorem1, "interclass": _interclass}


def run(args: argparse.Namespace, out_dir: Path) -> dict:
    resolve_run_config(args, out_dir, dataset=args.bundle, target=args.target)
    path, report = _HANDLERS[args.target](args, out_dir)
    return {"report": str(path), "result": report.model_dump(mode="json")}


command = Command("diagnose", "numerical checks of the attack analysis", add_arguments, run)

import json

import pandas as pd
import pytest

from gsattack.cli import EXIT_OK, EXIT_USAGE, build_parser, main


def run(capsys, out, *argv):
    code = main(["--out", str(out), "--quiet", *argv])
    payload = json.loads(capsys.readouterr().out)
    return code, payload


@pytest.fixture
def synth_bundle(tmp_path, capsys):
    code, payload = run(
        capsys, tmp_path / "synth_run", "--seed", "2",
        "synth", "--n", "24", "--k", "2", "--p-intra", "0.5", "--p-inter", "0.05",
    )
    assert code == EXIT_OK
    return tmp_path / "synth_run" / "synth", payload


def test_parser_lists_every_subcommand():
    parser = build_parser()
    argvs = {
        "ingest": ["raw", "bundle"],
        "synth": ["--n", "4", "--k", "2", "--p-intra", "0.5", "--p-inter", "0.1"],
        "attack": ["bundle"],
        "evaluate": ["bundle"],
        "diagnose": ["lpa"],
        "trace": ["perturbations.csv"],
        "sweep": ["bundle"],
    }
    for name, rest in argvs.items():
        assert parser.parse_args([name, *rest]).command == name


def test_synth_writes_bundle_and_run_files(synth_bundle):
    bundle, payload = synth_bundle
    assert payload["num_nodes"] == 24
    assert (bundle / "meta.json").exists()
    run_dir = bundle.parent
    assert (run_dir / "run.log").exists()
    config = json.loads((run_dir / "run_config.json").read_text())
    assert config["subcommand"] == "synth"
    assert config["seed"] == 2


def test_dice_attack_trace_and_evaluate(tmp_path, capsys, synth_bundle):
    bundle, _ = synth_bundle
    attack_dir = tmp_path / "attack"
    code, payload = run(
        capsys, attack_dir, "attack", str(bundle),
        "--method", "dice", "--budget", "4", "--epochs", "5", "--surrogate", "gcn",
    )
    assert code == EXIT_OK
    assert payload["flips"] == 4
    poisoned = attack_dir / "poisoned"
    assert (poisoned / "perturbations.csv").exists()

    code, payload = run(capsys, tmp_path / "trace", "trace", str(poisoned / "perturbations.csv"))
    assert code == EXIT_OK
    frame = pd.read_csv(payload["csv"])
    assert list(frame.columns) == ["iter", "h_gt", "h_pseudo", "lower_limit", "upper_limit"]
    assert len(frame) == 5

    code, payload = run(
        capsys, tmp_path / "eval", "evaluate", str(poisoned),
        "--clean", str(bundle), "--runs", "2", "--epochs", "5",
    )
    assert code == EXIT_OK
    assert payload["report"]["graph_identity"].startswith("poisoned:")
    assert payload["comparison"]["seeds"] == [0, 1]
    assert (tmp_path / "eval" / "comparison.json").exists()

    code, payload = run(capsys, tmp_path / "diag", "diagnose", "interclass", "--bundle", str(poisoned))
    assert code == EXIT_OK
    assert payload["result"]["flips"] == 4


def test_saliency_attack(tmp_path, capsys, synth_bundle):
    bundle, _ = synth_bundle
    code, payload = run(
        capsys, tmp_path / "attack", "attack", str(bundle),
        "--budget", "2", "--epochs", "5", "--surrogate", "gcn",
    )
    assert code == EXIT_OK
    assert payload["method"] == "saliency"
    assert payload["flips"] == 2


def test_diagnose_lpa(tmp_path, capsys):
    code, payload = run(capsys, tmp_path, "diagnose", "lpa", "--n1", "3", "--n2", "2", "--delta", "0.1")
    assert code == EXIT_OK
    assert payload["result"]["adding_inter_preferred"] is True
    assert (tmp_path / "lpa_report.json").exists()


def test_unknown_argument_is_config_error(tmp_path, capsys):
    code, payload = run(capsys, tmp_path, "synth", "--n", "10", "--bogus")
    assert code == EXIT_USAGE
    assert payload["error"] == "config_error"


def test_invalid_epsilon_is_config_error(tmp_path, capsys, synth_bundle):
    bundle, _ = synth_bundle
    code, payload = run(capsys, tmp_path / "bad", "attack", str(bundle), "--epsilon", "1.5")
    assert code == EXIT_USAGE
    assert payload["error"] == "config_error"


def test_missing_bundle_is_schema_error(tmp_path, capsys):
    code, payload = run(capsys, tmp_path, "evaluate", str(tmp_path / "nowhere"))
    assert code == EXIT_USAGE
    assert payload["error"] == "schema_error"
    assert payload["details"]["file"] == "meta.json"


def test_invalid_sbm_probabilities(tmp_path, capsys):
    code, payload = run(capsys, tmp_path, "synth", "--n", "10", "--k", "2", "--p-intra", "0.1", "--p-inter", "0.5")
    assert code == EXIT_USAGE
    assert payload["error"] == "invalid_probability"

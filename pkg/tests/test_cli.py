"""
Tests for the Command Line

Runs the subcommands end to end on a small synthetic corpus and checks the
exit code contract.
"""

import json

import pandas as pd
import pytest

from turntaking.cli.handler import build_parser, main
from turntaking.exceptions import EXIT_INPUT, EXIT_OK, EXIT_USAGE


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    """Three groups meeting twice, 60 s per session, written by the synth command."""
    directory = tmp_path_factory.mktemp("corpus")
    code = main(
        [
            "synth", "--out", str(directory), "--seed", "3",
            "--n-groups", "3", "--sessions-per-group", "2", "--duration", "60",
        ]
    )
    assert code == EXIT_OK
    return directory


@pytest.fixture(scope="module")
def next_dataset(corpus_dir, tmp_path_factory):
    """Next-speaker dataset built from the corpus."""
    out = tmp_path_factory.mktemp("build")
    code = main(
        ["build-dataset", "--data", str(corpus_dir), "--out", str(out), "--task", "next"]
    )
    assert code == EXIT_OK
    return out / "datasets" / "next.csv"


class TestParser:
    """Tests for argument parsing."""

    def test_subcommands(self):
        """Test that every stage is reachable."""
        parser = build_parser()
        required = {
            "features": ["--task", "next"],
            "build-dataset": ["--task", "next"],
            "train": ["--dataset", "d.csv", "--model", "gbm"],
            "evaluate": ["--dataset", "d.csv"],
            "interpret": ["--dataset", "d.csv"],
        }

        for command in ("synth", "validate", "label", "features", "build-dataset",
                        "train", "evaluate", "interpret", "pipeline"):
            args = parser.parse_args([command] + required.get(command, []))
            assert args.command == command

    def test_interpret_defaults(self):
        """Test the default family and surface negation."""
        args = build_parser().parse_args(["interpret", "--dataset", "d.csv"])

        assert args.model == "gbm"
        assert args.negate == "b"
        assert args.jobs == 1


class TestExitCodes:
    """Tests for the exit code contract."""

    def test_unknown_flag(self):
        """Test an argument the parser does not know."""
        assert main(["validate", "--colour", "red"]) == EXIT_USAGE

    def test_zero_jobs(self, corpus_dir, tmp_path):
        """Test a worker count of zero."""
        code = main(["validate", "--data", str(corpus_dir), "--out", str(tmp_path), "--jobs", "0"])

        assert code == EXIT_USAGE

    def test_missing_data_dir(self, tmp_path):
        """Test a data directory that does not exist."""
        code = main(["label", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path)])

        assert code == EXIT_INPUT

    def test_empty_data_dir(self, tmp_path):
        """Test a data directory without sessions."""
        (tmp_path / "empty").mkdir()

        code = main(["label", "--data", str(tmp_path / "empty"), "--out", str(tmp_path)])

        assert code == EXIT_INPUT

    def test_invalid_config(self, corpus_dir, tmp_path):
        """Test a config file with an unknown key."""
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"labeling": {"volume_treshold": 0.2}}))

        code = main(["validate", "--data", str(corpus_dir), "--config", str(config)])

        assert code == EXIT_INPUT

    def test_schema_mismatch(self, next_dataset, tmp_path):
        """Test evaluating a dataset under another triangle-length setting."""
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"features": {"vs_lengths": [1.0, 5.0]}}))

        code = main(
            ["evaluate", "--dataset", str(next_dataset), "--out", str(tmp_path),
             "--config", str(config), "--model", "logistic", "--cv", "week"]
        )

        assert code == EXIT_INPUT

    def test_too_few_sessions(self, next_dataset, tmp_path):
        """Test ten session folds over six sessions."""
        code = main(
            ["evaluate", "--dataset", str(next_dataset), "--out", str(tmp_path),
             "--model", "logistic", "--cv", "session"]
        )

        assert code == EXIT_INPUT


class TestStages:
    """Tests for the stage commands."""

    def test_synth_output(self, corpus_dir):
        """Test session directories and labeler scores."""
        sessions = sorted(p.name for p in corpus_dir.iterdir() if p.is_dir())
        scores = json.loads((corpus_dir / "labeling_scores.json").read_text())

        assert len(sessions) == 6
        assert scores["config_hash"]
        assert all(s["missed"] == 0 and s["spurious"] == 0 for s in scores["sessions"])

    def test_validate_and_label(self, corpus_dir, tmp_path, capsys):
        """Test the validation and labels documents."""
        assert main(["validate", "--data", str(corpus_dir), "--out", str(tmp_path)]) == EXIT_OK
        assert main(["label", "--data", str(corpus_dir), "--out", str(tmp_path)]) == EXIT_OK

        validation = json.loads((tmp_path / "validation.json").read_text())
        summary = json.loads((tmp_path / "labels" / "corpus_summary.json").read_text())

        assert validation["corpus"]["sessions"] == 6
        assert validation["corpus"]["groups"] == 3
        assert validation["corpus"]["weeks"] == [1, 2, 3, 4]
        assert len(list((tmp_path / "labels").glob("*.labels.json"))) == 6
        assert len(summary["sessions"]) == 6

    def test_features_table(self, corpus_dir, tmp_path):
        """Test the unbalanced candidate table."""
        code = main(
            ["features", "--data", str(corpus_dir), "--out", str(tmp_path), "--task", "turn"]
        )

        frame = pd.read_csv(tmp_path / "turn_features.csv")
        assert code == EXIT_OK
        assert frame.shape[1] == 6 + 383
        assert frame.shape[0] > 0

    def test_build_dataset(self, next_dataset):
        """Test a balanced dataset and its sidecar."""
        frame = pd.read_csv(next_dataset)
        sidecar = json.loads(next_dataset.with_name("next.meta.json").read_text())

        assert frame["label"].sum() * 2 == len(frame)
        assert sidecar["task"] == "next"
        assert sidecar["counts"]["rows"] == len(frame)
        assert sidecar["counts"]["sessions"] == 6

    def test_rebuild_byte_identical(self, corpus_dir, next_dataset, tmp_path):
        """Test that rebuilding with the same seed writes the same bytes."""
        code = main(
            ["build-dataset", "--data", str(corpus_dir), "--out", str(tmp_path), "--task", "next",
             "--jobs", "2"]
        )

        rebuilt = tmp_path / "datasets" / "next.csv"
        assert code == EXIT_OK
        assert rebuilt.read_bytes() == next_dataset.read_bytes()
        assert (
            rebuilt.with_name("next.meta.json").read_bytes()
            == next_dataset.with_name("next.meta.json").read_bytes()
        )

    def test_evaluate(self, next_dataset, tmp_path, capsys):
        """Test week cross-validation tables and stdout summary."""
        code = main(
            ["evaluate", "--dataset", str(next_dataset), "--out", str(tmp_path),
             "--model", "logistic", "--cv", "week"]
        )

        printed = json.loads(capsys.readouterr().out)
        summary = pd.read_csv(tmp_path / "evaluation" / "next_summary.csv")
        folds = pd.read_csv(tmp_path / "evaluation" / "next_folds.csv")
        assert code == EXIT_OK
        assert printed[0]["family"] == "logistic"
        assert 0.0 <= printed[0]["mean_auc"] <= 1.0
        assert list(summary["scheme"]) == ["week"]
        assert len(folds) == 4

    def test_train(self, next_dataset, tmp_path):
        """Test the model document."""
        code = main(
            ["train", "--dataset", str(next_dataset), "--out", str(tmp_path), "--model", "rf"]
        )

        document = json.loads((tmp_path / "models" / "next_rf.json").read_text())
        assert code == EXIT_OK
        assert document["family"] == "rf"

    def test_interpret(self, next_dataset, tmp_path):
        """Test importance and dependence tables."""
        code = main(
            ["interpret", "--dataset", str(next_dataset), "--out", str(tmp_path),
             "--model", "logistic", "--cv", "week", "--groups", "headline"]
        )

        directory = tmp_path / "interpretation"
        importance = pd.read_csv(directory / "next_logistic_importance.csv")
        curves = pd.read_csv(directory / "next_logistic_pd.csv")
        surface = pd.read_csv(directory / "next_logistic_pd2d.csv")
        assert code == EXIT_OK
        assert len(importance) == 26
        assert list(importance["mean_delta_auc"]) == sorted(importance["mean_delta_auc"])
        assert len(curves) == 2 * 20
        assert len(surface) == 20 * 20
        assert (surface["display_b"] == -surface["value_b"]).all()

"""
Tests for Artifacts

Tests JSON documents, tables with sidecars, datasets and model files.
"""

import json

import numpy as np
import pandas as pd
import pytest

from turntaking.config import FeatureConfig, PipelineConfig
from turntaking.learners.registry import SchemaMismatch, train_model
from turntaking.models import ModelFamily
from turntaking.services import artifacts
from turntaking.services.features import build_feature_schema, extract_sample
from turntaking.services.speech_labeling import label_session


class TestJson:
    """Tests for the JSON primitives."""

    def test_canonical_text(self):
        """Test sorted keys, indentation and trailing newline."""
        text = artifacts.dumps_json({"b": 1, "a": [1, 2]})

        assert text == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'

    def test_write_and_read(self, tmp_path):
        """Test parent creation and parsing."""
        path = artifacts.write_json(tmp_path / "deep" / "doc.json", {"x": 0.1})

        assert artifacts.read_json(path) == {"x": 0.1}

    def test_missing_file(self, tmp_path):
        """Test reading a file that does not exist."""
        with pytest.raises(FileNotFoundError):
            artifacts.read_json(tmp_path / "absent.json")


class TestTables:
    """Tests for CSV tables and sidecars."""

    def test_sidecar(self, tmp_path, config):
        """Test that the sidecar carries the config hash, row count and header."""
        frame = pd.DataFrame({"a": [1.0, 2.5], "b": ["x", "y"]})

        path = artifacts.write_table(frame, tmp_path / "t.csv", config, {"task": "next"})
        sidecar = artifacts.read_json(artifacts.meta_path(path))

        assert artifacts.meta_path(path).name == "t.meta.json"
        assert sidecar == {"config_hash": config.config_hash, "rows": 2, "task": "next"}
        assert path.read_text().splitlines()[0] == "a,b"

    def test_labels_document(self, tmp_path, four_users, config):
        """Test the per-session labels file."""
        labels = label_session(four_users)

        path = artifacts.write_labels(labels, tmp_path / "s01.labels.json", config)
        document = json.loads(path.read_text())

        assert document["session_id"] == "s01"
        assert document["config_hash"] == config.config_hash
        assert [t["category"] for t in document["transitions"]][:2] == [
            "Backchannel",
            "CleanTurnTaking",
        ]
        assert set(document["transitions"][0]) == {
            "category", "onset", "new_speaker", "prev_speaker", "trigger_duration"
        }

    def test_feature_table(self, tmp_path, four_users, config):
        """Test provenance columns ahead of the schema columns."""
        timeline = label_session(four_users).timeline
        vectors = [extract_sample(four_users, timeline, 9.0, "a", "b")]
        schema = build_feature_schema()

        path = artifacts.write_features(vectors, schema, tmp_path / "f.csv", config)
        frame = pd.read_csv(path)
        sidecar = artifacts.read_json(artifacts.meta_path(path))

        assert frame.shape == (1, 6 + 383)
        assert list(frame.columns[6:]) == schema.names
        assert sidecar["schema"]["schema_hash"] == schema.schema_hash


class TestDatasets:
    """Tests for dataset files."""

    def test_reload_exact(self, tmp_path, dataset_factory, config):
        """Test that a written dataset reloads with identical values."""
        dataset = dataset_factory(n_sessions=3, rows_per_session=4)

        path = artifacts.write_dataset(dataset, tmp_path / "next.csv", config)
        back = artifacts.read_dataset(path, build_feature_schema())

        np.testing.assert_array_equal(back.X, dataset.X)
        np.testing.assert_array_equal(back.y, dataset.y)
        assert back.provenance == dataset.provenance
        assert back.task == dataset.task
        assert back.header["config_hash"] == config.config_hash

    def test_schema_mismatch(self, tmp_path, dataset_factory, config):
        """Test reading a dataset under another feature configuration."""
        path = artifacts.write_dataset(dataset_factory(n_sessions=2), tmp_path / "d.csv", config)

        with pytest.raises(SchemaMismatch):
            artifacts.read_dataset(path, build_feature_schema(FeatureConfig(vs_lengths=(1.0,))))

    def test_tampered_schema(self, tmp_path, dataset_factory, config):
        """Test a sidecar whose schema no longer matches its hash."""
        path = artifacts.write_dataset(dataset_factory(n_sessions=2), tmp_path / "d.csv", config)
        sidecar = artifacts.read_json(artifacts.meta_path(path))
        sidecar["schema"]["features"] = sidecar["schema"]["features"][:-1]
        artifacts.write_json(artifacts.meta_path(path), sidecar)

        with pytest.raises(SchemaMismatch):
            artifacts.read_dataset(path)

    def test_byte_identical_rewrite(self, tmp_path, dataset_factory, config):
        """Test that writing the same dataset twice gives the same bytes."""
        dataset = dataset_factory(n_sessions=2, rows_per_session=3)

        first = artifacts.write_dataset(dataset, tmp_path / "a" / "d.csv", config)
        second = artifacts.write_dataset(dataset, tmp_path / "b" / "d.csv", config)

        assert first.read_bytes() == second.read_bytes()
        assert (
            artifacts.meta_path(first).read_bytes() == artifacts.meta_path(second).read_bytes()
        )


class TestModels:
    """Tests for model files."""

    def test_save_and_load(self, tmp_path, dataset_factory):
        """Test that a loaded model predicts exactly as the saved one."""
        dataset = dataset_factory(n_sessions=4, rows_per_session=10)
        config = PipelineConfig()
        model = train_model(ModelFamily.GBM, dataset.X, dataset.y, dataset.schema, seed=1)

        path = artifacts.save_model(model, tmp_path / "m.json", config)
        loaded = artifacts.load_model(path)

        assert artifacts.read_json(path)["config_hash"] == config.config_hash
        np.testing.assert_array_equal(loaded.predict_proba(dataset.X), model.predict_proba(dataset.X))

"""
Artifact Module

Reads and writes every file the pipeline emits.

- JSON documents: sorted keys, indent 2, trailing newline
- Tables: CSV via pandas next to a <stem>.meta.json sidecar holding the
  config hash, the schema hash and whatever header the stage provides
- Models: the self-describing TrainedModel document plus the config hash

No wall-clock time enters an artifact, so reruns are byte-identical.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import pandas as pd

from turntaking.config import PipelineConfig
from turntaking.learners.registry import SchemaMismatch, TrainedModel
from turntaking.logging_config import get_logger
from turntaking.models import FeatureSchema, Task, TransitionEvent
from turntaking.services.dataset_builder import PROVENANCE_COLUMNS, LabeledDataset
from turntaking.services.features import FeatureVector
from turntaking.services.speech_labeling import SessionLabels

logger = get_logger(__name__)

META_SUFFIX = ".meta.json"
_STRING_COLUMNS = {
    "session_id": str, "group_id": str, "main_user": str, "reference_user": str
}


# =============================================================================
# Primitives
# =============================================================================

def dumps_json(document: Any) -> str:
    """Canonical text of a JSON document."""
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def write_json(path: Path, document: Any) -> Path:
    """Write a JSON document, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(document), encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    """Parse a JSON document (FileNotFoundError if missing)."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


def meta_path(path: Path) -> Path:
    """Sidecar path of a table."""
    path = Path(path)
    return path.with_name(path.stem + META_SUFFIX)


def write_table(
    frame: pd.DataFrame,
    path: Path,
    config: PipelineConfig,
    header: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write a CSV table and its sidecar.

    Floats are written in shortest round-trip form.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    sidecar = dict(header or {})
    sidecar["config_hash"] = config.config_hash
    sidecar["rows"] = int(frame.shape[0])
    write_json(meta_path(path), sidecar)
    logger.debug("Wrote table", path=str(path), rows=int(frame.shape[0]))
    return path


# =============================================================================
# Labels and Features
# =============================================================================

def _transition_record(t: TransitionEvent) -> Dict[str, Any]:
    return {
        "category": t.category.value,
        "onset": t.onset,
        "new_speaker": t.new_speaker_id,
        "prev_speaker": t.previous_speaker_id,
        "trigger_duration": t.trigger_duration,
    }


def labels_document(labels: SessionLabels, config: PipelineConfig) -> Dict[str, Any]:
    """Transitions, timeline and summary of one session."""
    return {
        "session_id": labels.session_id,
        "config_hash": config.config_hash,
        "transitions": [_transition_record(t) for t in labels.transitions],
        "timeline": [s.model_dump() for s in labels.timeline.segments],
        "summary": labels.summary,
    }


def write_labels(labels: SessionLabels, path: Path, config: PipelineConfig) -> Path:
    """Write the labels document of one session."""
    return write_json(path, labels_document(labels, config))


def schema_document(schema: FeatureSchema) -> Dict[str, Any]:
    """name / group / kind listing with the schema hash."""
    return {
        "schema_hash": schema.schema_hash,
        "features": [f.model_dump(mode="json") for f in schema.features],
    }


def write_features(
    vectors: Sequence[FeatureVector],
    schema: FeatureSchema,
    path: Path,
    config: PipelineConfig,
) -> Path:
    """Wide table of feature vectors with a schema sidecar."""
    rows = [
        {**v.provenance.model_dump(), **dict(zip(schema.names, v.values.tolist()))}
        for v in vectors
    ]
    columns = list(PROVENANCE_COLUMNS) + schema.names
    frame = pd.DataFrame(rows, columns=columns)
    return write_table(frame, path, config, {"schema": schema_document(schema)})


# =============================================================================
# Datasets
# =============================================================================

def write_dataset(dataset: LabeledDataset, path: Path, config: PipelineConfig) -> Path:
    """Dataset table; the sidecar carries the build header and the schema."""
    header = dict(dataset.header)
    header["schema"] = schema_document(dataset.schema)
    header["schema_hash"] = dataset.schema_hash
    return write_table(dataset.to_frame(), path, config, header)


def read_dataset(path: Path, expected_schema: Optional[FeatureSchema] = None) -> LabeledDataset:
    """
    Load a dataset written by write_dataset.

    Raises:
        SchemaMismatch: If the stored schema is inconsistent with its hash, or
            differs from expected_schema
        FileNotFoundError: If the table or its sidecar is missing
    """
    path = Path(path)
    header = read_json(meta_path(path))
    schema = FeatureSchema.model_validate({"features": header["schema"]["features"]})
    if schema.schema_hash != header.get("schema_hash"):
        raise SchemaMismatch(f"Schema of {path} does not match its recorded hash")
    if expected_schema is not None and schema.schema_hash != expected_schema.schema_hash:
        raise SchemaMismatch(
            f"Dataset {path} uses schema {schema.schema_hash[:12]}, "
            f"expected {expected_schema.schema_hash[:12]}"
        )
    frame = pd.read_csv(path, dtype=_STRING_COLUMNS, float_precision="round_trip")
    build_header = {k: v for k, v in header.items() if k not in ("schema", "rows")}
    return LabeledDataset.from_frame(frame, Task(header["task"]), schema, build_header)


# =============================================================================
# Models
# =============================================================================

def save_model(model: TrainedModel, path: Path, config: PipelineConfig) -> Path:
    """Model document with the config hash."""
    document = model.to_document()
    document["config_hash"] = config.config_hash
    return write_json(path, document)


def load_model(path: Path) -> TrainedModel:
    """Inverse of save_model."""
    return TrainedModel.from_document(read_json(path))

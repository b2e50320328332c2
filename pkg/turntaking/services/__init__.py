"""
Services Package

This package contains the data-side stages of the pipeline:
- recording: Session ingest, validation, alignment, windows, serialization
- speech_labeling: Speech events, main speaker, turn transitions
- geometry: Body space, gaze angle, distance, visual shared space
- features: The fixed feature schema and sample extraction
- dataset_builder: Balanced datasets for the three prediction tasks
- synth: Synthetic sessions with known ground truth
- artifacts: Reproducible JSON/CSV artifact writing
"""

from turntaking.services.recording import (
    SessionRecording,
    load_recording,
    slice_window,
    validate_recording,
)
from turntaking.services.speech_labeling import SessionLabels, label_session
from turntaking.services.features import build_feature_schema, extract_sample
from turntaking.services.dataset_builder import LabeledDataset, build_dataset

__all__ = [
    "SessionRecording",
    "load_recording",
    "slice_window",
    "validate_recording",
    "SessionLabels",
    "label_session",
    "build_feature_schema",
    "extract_sample",
    "LabeledDataset",
    "build_dataset",
]

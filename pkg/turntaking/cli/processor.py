"""
Pipeline Processor Module

This module orchestrates the pipeline stages behind the command line:
synthesis, validation, labeling, feature extraction, dataset building,
training, evaluation and interpretation.

Design Decisions:
- One processor per invocation, holding the config, the output directory and
  the worker count
- Every stage writes its artifacts through services.artifacts, so each one
  carries the config hash and reruns are byte-identical
- All randomness is derived from the master seed, one stage key per use
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from turntaking.config import PipelineConfig, dump_pipeline_config
from turntaking.evaluation.cross_validation import folds_to_frame, reports_to_frame, run_cv
from turntaking.evaluation.dependence import (
    curve_to_frame,
    partial_dependence,
    partial_dependence_2d,
    surface_to_frame,
)
from turntaking.evaluation.importance import importance_to_frame, load_feature_groups, mda
from turntaking.learners.registry import TrainedModel, train_model
from turntaking.logging_config import bind_context, get_logger
from turntaking.models import (
    CorpusSummary,
    CVScheme,
    EvalReport,
    ImportanceTable,
    ModelFamily,
    Task,
    ValidationReport,
)
from turntaking.services import artifacts
from turntaking.services.dataset_builder import LabeledDataset, build_dataset, collect_samples
from turntaking.services.features import build_feature_schema
from turntaking.services.recording import (
    SessionRecording,
    discover_sessions,
    load_session_dir,
    validate_recording,
)
from turntaking.services.speech_labeling import SessionLabels, label_session
from turntaking.services.synth import SynthConfig, generate_corpus, verify_labeling, write_session

logger = get_logger(__name__)

DEFAULT_PD_FEATURES: Tuple[str, ...] = ("main_head_y_vel_mean", "main_lh_y_vel_mean")
DEFAULT_PD_PAIR: Tuple[str, str] = ("main_head_pitch_vel_max", "main_head_pitch_vel_min")


class EmptyCorpus(FileNotFoundError):
    """No session directory under the data directory."""
    pass


def load_corpus(data_dir: Path, config: PipelineConfig, jobs: int = 1) -> List[SessionRecording]:
    """
    Load every session under data_dir, in directory-name order.

    Raises:
        EmptyCorpus: If no session is found
    """
    directories = discover_sessions(data_dir)
    if not directories:
        raise EmptyCorpus(f"No session directories under {data_dir}")
    return Parallel(n_jobs=jobs)(
        delayed(load_session_dir)(directory, config.labeling) for directory in directories
    )


def summarize_corpus(recordings: Sequence[SessionRecording]) -> CorpusSummary:
    """Session, group and user counts with session-length statistics."""
    minutes = np.array([rec.duration / 60.0 for rec in recordings], dtype=np.float64)
    return CorpusSummary(
        sessions=len(recordings),
        groups=len({rec.manifest.group_id for rec in recordings}),
        users=len({uid for rec in recordings for uid in rec.user_ids}),
        weeks=sorted({rec.manifest.week for rec in recordings}),
        total_minutes=float(minutes.sum()) if minutes.size else 0.0,
        mean_minutes=float(minutes.mean()) if minutes.size else 0.0,
        std_minutes=float(minutes.std()) if minutes.size else 0.0,
    )


class PipelineProcessor:
    """
    Runs pipeline stages and writes their artifacts.

    Usage:
        processor = PipelineProcessor(config, out_dir, jobs=4)
        reports = processor.process(data_dir, [Task.NEXT_SPEAKER], [ModelFamily.GBM],
                                    [CVScheme.GROUP])
    """

    def __init__(self, config: PipelineConfig, out_dir: Path, jobs: int = 1):
        """
        Initialize the processor.

        Args:
            config: Pipeline configuration (its seed is the master seed)
            out_dir: Directory receiving artifacts
            jobs: Worker count for sessions and folds
        """
        self.config = config
        self.out_dir = Path(out_dir)
        self.jobs = jobs
        self._labels: Dict[str, SessionLabels] = {}

    # =========================================================================
    # Seeds
    # =========================================================================

    def dataset_seed(self, task: Task) -> int:
        """Sampling seed of one task."""
        return self.config.stage_seed(f"dataset:{task.value}")

    def evaluation_seed(self, task: Task) -> int:
        """Fold and model seed of one task's evaluation."""
        return self.config.stage_seed(f"evaluate:{task.value}")

    def training_seed(self, task: Task, family: ModelFamily) -> int:
        """Seed of a model trained on a full dataset."""
        return self.config.stage_seed(f"train:{task.value}:{family.value}")

    # =========================================================================
    # Stages
    # =========================================================================

    def write_config(self) -> Path:
        """Config document next to the artifacts."""
        path = self.out_dir / "config.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_pipeline_config(self.config), encoding="utf-8")
        return path

    def synthesize(
        self,
        template: Optional[SynthConfig] = None,
        n_groups: int = 10,
        sessions_per_group: int = 2,
    ) -> List[Path]:
        """Generate a corpus, write it, and score the labeler on it."""
        sessions = generate_corpus(
            self.config.seed, n_groups, sessions_per_group, template, jobs=self.jobs
        )
        directories = [
            write_session(session, self.out_dir / session.recording.session_id)
            for session in sessions
        ]
        scores = [
            verify_labeling(s.recording, s.truth, self.config.labeling) for s in sessions
        ]
        artifacts.write_json(
            self.out_dir / "labeling_scores.json",
            {
                "config_hash": self.config.config_hash,
                "sessions": [score.model_dump() for score in scores],
            },
        )
        logger.info(
            "Synthetic corpus written",
            sessions=len(directories),
            out_dir=str(self.out_dir),
            mean_accuracy=round(float(np.mean([s.accuracy for s in scores])), 4),
        )
        return directories

    def validate(self, recordings: Sequence[SessionRecording]) -> List[ValidationReport]:
        """Validation reports of every session, plus the corpus summary."""
        reports = [validate_recording(rec, self.config.labeling) for rec in recordings]
        artifacts.write_json(
            self.out_dir / "validation.json",
            {
                "config_hash": self.config.config_hash,
                "corpus": summarize_corpus(recordings).model_dump(),
                "sessions": [r.model_dump() for r in reports],
            },
        )
        return reports

    def label(self, recordings: Sequence[SessionRecording]) -> List[SessionLabels]:
        """Label every session and write one document per session."""
        labels = self._labels_of(recordings)
        for lab in labels:
            artifacts.write_labels(
                lab, self.out_dir / "labels" / f"{lab.session_id}.labels.json", self.config
            )
        artifacts.write_json(
            self.out_dir / "labels" / "corpus_summary.json",
            {
                "config_hash": self.config.config_hash,
                "corpus": summarize_corpus(recordings).model_dump(),
                "sessions": [lab.summary for lab in labels],
            },
        )
        return labels

    def features(self, recordings: Sequence[SessionRecording], task: Task) -> Path:
        """Unbalanced feature table of every candidate sample of a task."""
        vectors, _, skipped = collect_samples(
            task,
            recordings,
            self.dataset_seed(task),
            self.config,
            self._labels_of(recordings),
            self.jobs,
        )
        logger.info("Extracted features", task=task.value, samples=len(vectors),
                    skipped=dict(skipped))
        return artifacts.write_features(
            vectors,
            build_feature_schema(self.config.features),
            self.out_dir / f"{task.value}_features.csv",
            self.config,
        )

    def build(self, recordings: Sequence[SessionRecording], task: Task) -> LabeledDataset:
        """Balanced dataset of a task, written as datasets/<task>.csv."""
        dataset = build_dataset(
            task,
            recordings,
            self.dataset_seed(task),
            self.config,
            self._labels_of(recordings),
            self.jobs,
        )
        artifacts.write_dataset(dataset, self.dataset_path(task), self.config)
        return dataset

    def dataset_path(self, task: Task) -> Path:
        """Where build writes a task's dataset."""
        return self.out_dir / "datasets" / f"{task.value}.csv"

    def read_dataset(self, path: Path) -> LabeledDataset:
        """Load a dataset, requiring the schema of the current config."""
        return artifacts.read_dataset(path, build_feature_schema(self.config.features))

    def train(self, dataset: LabeledDataset, family: ModelFamily) -> TrainedModel:
        """Train on every row and write the model document."""
        model = train_model(
            family,
            dataset.X,
            dataset.y,
            dataset.schema,
            self.config.models,
            seed=self.training_seed(dataset.task, family),
        )
        artifacts.save_model(
            model,
            self.out_dir / "models" / f"{dataset.task.value}_{family.value}.json",
            self.config,
        )
        return model

    def evaluate(
        self,
        dataset: LabeledDataset,
        families: Sequence[ModelFamily],
        schemes: Sequence[CVScheme],
    ) -> List[EvalReport]:
        """Cross-validate every family under every scheme; write the tables."""
        seed = self.evaluation_seed(dataset.task)
        reports = [
            run_cv(dataset, family, scheme, seed, self.config, self.jobs)
            for scheme in schemes
            for family in families
        ]
        stem = self.out_dir / "evaluation" / dataset.task.value
        header = {"task": dataset.task.value, "schema_hash": dataset.schema_hash, "seed": seed}
        artifacts.write_table(
            reports_to_frame(reports), stem.with_name(f"{stem.name}_summary.csv"),
            self.config, header,
        )
        artifacts.write_table(
            folds_to_frame(reports), stem.with_name(f"{stem.name}_folds.csv"),
            self.config, header,
        )
        artifacts.write_json(
            stem.with_name(f"{stem.name}_reports.json"),
            [r.model_dump(mode="json") for r in reports],
        )
        return reports

    def interpret(
        self,
        dataset: LabeledDataset,
        family: ModelFamily,
        scheme: Optional[CVScheme] = None,
        groups: Optional[str] = None,
        pd_features: Sequence[str] = DEFAULT_PD_FEATURES,
        pd_pair: Optional[Tuple[str, str]] = DEFAULT_PD_PAIR,
        negate: Tuple[bool, bool] = (False, True),
    ) -> ImportanceTable:
        """
        MDA over the fold plan, then partial dependence on a model trained on
        the whole dataset.
        """
        evaluation = self.config.evaluation
        scheme = CVScheme(scheme or evaluation.scheme)
        seed = self.config.stage_seed(f"interpret:{dataset.task.value}:{family.value}")
        task = dataset.task.value
        directory = self.out_dir / "interpretation"
        header = {"task": task, "family": family.value, "scheme": scheme.value,
                  "schema_hash": dataset.schema_hash, "seed": seed}

        table = mda(
            dataset,
            family,
            load_feature_groups(groups or evaluation.feature_groups),
            scheme,
            evaluation.mda_repetitions,
            seed,
            self.config,
            self.jobs,
        )
        artifacts.write_table(
            importance_to_frame(table), directory / f"{task}_{family.value}_importance.csv",
            self.config, {**header, "baseline_auc": table.baseline_auc},
        )

        model = self.train(dataset, family)
        curves = [
            curve_to_frame(
                partial_dependence(
                    model, dataset, feature, evaluation.pd_grid_size, evaluation.pd_percentiles
                )
            )
            for feature in pd_features
        ]
        if curves:
            artifacts.write_table(
                pd.concat(curves, ignore_index=True),
                directory / f"{task}_{family.value}_pd.csv",
                self.config, header,
            )
        if pd_pair is not None:
            surface = partial_dependence_2d(
                model, dataset, pd_pair[0], pd_pair[1], evaluation.pd_grid_size,
                evaluation.pd_percentiles, negate_a=negate[0], negate_b=negate[1],
            )
            artifacts.write_table(
                surface_to_frame(surface), directory / f"{task}_{family.value}_pd2d.csv",
                self.config, header,
            )
        return table

    # =========================================================================
    # Full Run
    # =========================================================================

    def process(
        self,
        data_dir: Path,
        tasks: Sequence[Task],
        families: Sequence[ModelFamily],
        schemes: Sequence[CVScheme],
        interpret: bool = False,
    ) -> List[EvalReport]:
        """
        Validate, label, build, evaluate and optionally interpret.

        Returns:
            Evaluation reports in (task, scheme, family) order
        """
        bind_context(seed=self.config.seed, config_hash=self.config.config_hash[:12])
        logger.info(
            "Starting pipeline",
            data_dir=str(data_dir),
            tasks=[t.value for t in tasks],
            families=[f.value for f in families],
            schemes=[s.value for s in schemes],
        )

        try:
            self.write_config()

            # Step 1: Load and validate recordings
            recordings = load_corpus(data_dir, self.config, self.jobs)
            self.validate(recordings)

            # Step 2: Label speech and transitions
            self.label(recordings)

            reports: List[EvalReport] = []
            for task in tasks:
                # Step 3: Balanced dataset
                dataset = self.build(recordings, task)

                # Step 4: Cross-validation
                reports.extend(self.evaluate(dataset, families, schemes))

                # Step 5: Interpretation with the first family
                if interpret:
                    self.interpret(dataset, families[0], schemes[0])

            logger.info(
                "Pipeline completed",
                reports=len(reports),
                mean_auc={
                    f"{r.task.value}/{r.family.value}/{r.scheme.value}": round(r.mean_auc, 4)
                    for r in reports
                },
            )
            return reports

        except Exception as e:
            logger.error(
                "Pipeline failed",
                error=str(e),
                error_type=type(e).__name__,
            )
            raise

    def _labels_of(self, recordings: Sequence[SessionRecording]) -> List[SessionLabels]:
        missing = [rec for rec in recordings if rec.session_id not in self._labels]
        if missing:
            labeled = Parallel(n_jobs=self.jobs)(
                delayed(label_session)(rec, self.config.labeling) for rec in missing
            )
            for lab in labeled:
                self._labels[lab.session_id] = lab
        return [self._labels[rec.session_id] for rec in recordings]


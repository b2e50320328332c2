"""
Dataset Builder Module

Materializes balanced, labeled datasets for the three prediction tasks:

- turn: clean turn taking (positive) vs continuing speech (negative); the
  negative's main user is a random user other than the continuing speaker
- next: at every turn-taking onset, the upcoming speaker (positive) vs the
  users who are neither upcoming nor previous speaker (negative)
- timing: the window right before a turn-taking onset (positive) vs windows
  2..12 s earlier (negative) during which the upcoming speaker stayed silent

Design Decisions:
- Per-session candidate generation and feature extraction run in parallel;
  each session draws from its own generator seeded with
  [seed, task, session index], so results do not depend on the job count
- Balancing down-samples the majority class uniformly without replacement
  with a PCG64 generator named in the dataset header
- The reference user is always the speaker of the last turn before the
  sampled moment; samples where the labeled previous speaker disagrees, and
  samples without a usable window, are skipped and counted
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from turntaking.config import PipelineConfig
from turntaking.exceptions import PipelineInputError
from turntaking.logging_config import get_logger
from turntaking.models import (
    CVScheme,
    FeatureSchema,
    SampleProvenance,
    Task,
    TransitionCategory,
)
from turntaking.services.features import (
    FeatureVector,
    build_feature_schema,
    extract_sample,
    turns_before,
)
from turntaking.services.geometry import CoincidentHeads
from turntaking.services.recording import (
    SessionRecording,
    WindowOutOfRange,
    WindowTooSparse,
)
from turntaking.services.speech_labeling import SessionLabels, label_session

logger = get_logger(__name__)

GENERATOR_NAME = "PCG64"
PROVENANCE_COLUMNS: Tuple[str, ...] = (
    "session_id", "group_id", "week", "onset", "main_user", "reference_user"
)

_TASK_CODES = {Task.TURN_VS_CONTINUE: 1, Task.NEXT_SPEAKER: 2, Task.TIMING: 3}


class InsufficientEvents(PipelineInputError):
    """A task has no positive or no negative candidates."""
    pass


# =============================================================================
# Dataset Container
# =============================================================================

@dataclass
class LabeledDataset:
    """
    Feature rows with binary labels and grouping keys.

    Attributes:
        task: Prediction task
        X: (n, width) feature matrix aligned to schema
        y: (n,) labels in {0, 1}
        provenance: Per-row origin (session, group, week, onset, users)
        schema: Feature schema of X
        header: task, seed, counts, schema_hash, config_hash, generator
    """
    task: Task
    X: np.ndarray
    y: np.ndarray
    provenance: List[SampleProvenance]
    schema: FeatureSchema
    header: Dict[str, object] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        """Number of samples."""
        return int(self.y.shape[0])

    @property
    def schema_hash(self) -> str:
        """Hash of the feature schema."""
        return self.schema.schema_hash

    def entity_keys(self, scheme: CVScheme) -> List[str]:
        """Grouping key of every row under a cross-validation scheme."""
        if scheme == CVScheme.SESSION:
            return [p.session_id for p in self.provenance]
        if scheme == CVScheme.GROUP:
            return [p.group_id for p in self.provenance]
        return [str(p.week) for p in self.provenance]

    @property
    def weeks(self) -> np.ndarray:
        """Week of every row."""
        return np.array([p.week for p in self.provenance], dtype=np.int64)

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        """Rows at the given indices (header carried over)."""
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            task=self.task,
            X=self.X[indices],
            y=self.y[indices],
            provenance=[self.provenance[i] for i in indices],
            schema=self.schema,
            header=dict(self.header),
        )

    def to_frame(self) -> pd.DataFrame:
        """Wide table: provenance columns, label, then one column per feature."""
        meta = pd.DataFrame(
            [p.model_dump() for p in self.provenance], columns=list(PROVENANCE_COLUMNS)
        )
        meta["label"] = self.y.astype(np.int64)
        features = pd.DataFrame(self.X, columns=self.schema.names)
        return pd.concat([meta, features], axis=1)

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        task: Task,
        schema: FeatureSchema,
        header: Optional[Dict[str, object]] = None,
    ) -> "LabeledDataset":
        """Inverse of to_frame."""
        provenance = [
            SampleProvenance(
                session_id=str(row.session_id),
                group_id=str(row.group_id),
                week=int(row.week),
                onset=float(row.onset),
                main_user=str(row.main_user),
                reference_user=str(row.reference_user),
            )
            for row in frame[list(PROVENANCE_COLUMNS)].itertuples(index=False)
        ]
        return cls(
            task=task,
            X=frame[schema.names].to_numpy(dtype=np.float64),
            y=frame["label"].to_numpy(dtype=np.int64),
            provenance=provenance,
            schema=schema,
            header=dict(header or {}),
        )


# =============================================================================
# Candidates
# =============================================================================

@dataclass(frozen=True)
class Candidate:
    """A labeled moment waiting for feature extraction."""
    onset: float
    main_user: str
    ref_user: str
    label: int


def _previous_turn_speaker(labels: SessionLabels, t: float) -> Optional[str]:
    turns = turns_before(labels.timeline, t)
    return turns[0].speaker_id if turns else None


def turn_candidates(
    rec: SessionRecording, labels: SessionLabels, rng: np.random.Generator, skipped: Counter
) -> List[Candidate]:
    """Clean turn taking (1) and continuing speech (0) candidates of one session."""
    candidates: List[Candidate] = []
    for transition in labels.transitions:
        previous = transition.previous_speaker_id
        if transition.category == TransitionCategory.CLEAN_TURN_TAKING:
            main, label = transition.new_speaker_id, 1
        elif transition.category == TransitionCategory.CONTINUING_SPEECH:
            others = [uid for uid in sorted(rec.user_ids) if uid != previous]
            main, label = str(rng.choice(others)), 0
        else:
            continue
        if previous is None or _previous_turn_speaker(labels, transition.onset) != previous:
            skipped["reference_mismatch"] += 1
            continue
        candidates.append(Candidate(transition.onset, main, previous, label))
    return candidates


def next_speaker_candidates(
    rec: SessionRecording, labels: SessionLabels, rng: np.random.Generator, skipped: Counter
) -> List[Candidate]:
    """Upcoming speaker (1) vs uninvolved users (0) at every turn-taking onset."""
    candidates: List[Candidate] = []
    for transition in labels.transitions:
        if not transition.is_turn_taking:
            continue
        previous = transition.previous_speaker_id
        if previous is None or _previous_turn_speaker(labels, transition.onset) != previous:
            skipped["reference_mismatch"] += 1
            continue
        upcoming = transition.new_speaker_id
        candidates.append(Candidate(transition.onset, upcoming, previous, 1))
        for uid in sorted(rec.user_ids):
            if uid not in (upcoming, previous):
                candidates.append(Candidate(transition.onset, uid, previous, 0))
    return candidates


def timing_candidates(
    rec: SessionRecording,
    labels: SessionLabels,
    rng: np.random.Generator,
    skipped: Counter,
    offsets: Sequence[float] = (2.0, 4.0, 6.0, 8.0, 10.0, 12.0),
    window: float = 1.0,
) -> List[Candidate]:
    """
    Moments right before turn-taking onsets (1) and earlier moments (0).

    An earlier moment t' = onset - offset is admitted only if none of the
    upcoming speaker's events overlaps [t', onset). Its reference user is the
    speaker of the last turn before t'.
    """
    candidates: List[Candidate] = []
    for transition in labels.transitions:
        if not transition.is_turn_taking:
            continue
        previous = transition.previous_speaker_id
        onset = transition.onset
        if previous is None or _previous_turn_speaker(labels, onset) != previous:
            skipped["reference_mismatch"] += 1
            continue
        upcoming = transition.new_speaker_id
        candidates.append(Candidate(onset, upcoming, previous, 1))

        upcoming_events = labels.events_of(upcoming)
        for offset in offsets:
            moment = onset - offset
            if moment - window < rec.start - 1e-9:
                skipped["invalid_window"] += 1
                continue
            if any(e.start < onset and e.end > moment for e in upcoming_events):
                skipped["intervening_speech"] += 1
                continue
            ref = _previous_turn_speaker(labels, moment)
            if ref is None:
                skipped["no_previous_turn"] += 1
                continue
            if ref == upcoming:
                skipped["main_is_reference"] += 1
                continue
            candidates.append(Candidate(moment, upcoming, ref, 0))
    return candidates


# =============================================================================
# Extraction and Balancing
# =============================================================================

def _session_rows(
    task: Task,
    rec: SessionRecording,
    labels: SessionLabels,
    seed: int,
    session_index: int,
    config: PipelineConfig,
) -> Tuple[List[FeatureVector], List[int], Counter]:
    """Candidates and feature vectors of one session."""
    rng = np.random.default_rng([seed, _TASK_CODES[task], session_index])
    skipped: Counter = Counter()
    if task == Task.TURN_VS_CONTINUE:
        candidates = turn_candidates(rec, labels, rng, skipped)
    elif task == Task.NEXT_SPEAKER:
        candidates = next_speaker_candidates(rec, labels, rng, skipped)
    else:
        candidates = timing_candidates(
            rec, labels, rng, skipped, config.dataset.timing_offsets, config.features.window
        )

    vectors: List[FeatureVector] = []
    ys: List[int] = []
    for candidate in candidates:
        try:
            vector = extract_sample(
                rec, labels.timeline, candidate.onset, candidate.main_user,
                candidate.ref_user, config.features,
            )
        except (WindowOutOfRange, WindowTooSparse):
            skipped["invalid_window"] += 1
            continue
        except CoincidentHeads:
            skipped["coincident_heads"] += 1
            continue
        vectors.append(vector)
        ys.append(candidate.label)
    return vectors, ys, skipped


def _drop_duplicate_negatives(
    provenance: Sequence[SampleProvenance], y: np.ndarray
) -> np.ndarray:
    """Row mask removing negatives that repeat a positive (onset, main user)."""
    positives = {
        (round(p.onset, 6), p.session_id, p.main_user)
        for p, label in zip(provenance, y) if label == 1
    }
    return np.array(
        [
            label == 1 or (round(p.onset, 6), p.session_id, p.main_user) not in positives
            for p, label in zip(provenance, y)
        ],
        dtype=bool,
    )


def balance_indices(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Indices of a class-balanced subset, in original row order.

    The majority class is down-sampled uniformly without replacement.

    Raises:
        InsufficientEvents: If either class is empty
    """
    positives = np.flatnonzero(y == 1)
    negatives = np.flatnonzero(y == 0)
    if positives.size == 0 or negatives.size == 0:
        raise InsufficientEvents(
            f"Need both classes; found {positives.size} positive and {negatives.size} negative"
        )
    keep = min(positives.size, negatives.size)
    chosen = [
        rows if rows.size == keep else rng.choice(rows, size=keep, replace=False)
        for rows in (positives, negatives)
    ]
    return np.sort(np.concatenate(chosen))


def collect_samples(
    task: Task,
    recordings: Sequence[SessionRecording],
    seed: int,
    config: Optional[PipelineConfig] = None,
    labels: Optional[Sequence[SessionLabels]] = None,
    jobs: int = 1,
) -> Tuple[List[FeatureVector], np.ndarray, Counter]:
    """
    Every candidate of a task with its features, before de-duplication and
    balancing.

    Returns:
        (vectors, labels, skip counts) in session order
    """
    config = config or PipelineConfig()
    if labels is None:
        labels = [label_session(rec, config.labeling) for rec in recordings]

    results = Parallel(n_jobs=jobs)(
        delayed(_session_rows)(task, rec, lab, seed, index, config)
        for index, (rec, lab) in enumerate(zip(recordings, labels))
    )

    vectors: List[FeatureVector] = []
    ys: List[int] = []
    skipped: Counter = Counter()
    for session_vectors, session_ys, session_skipped in results:
        vectors.extend(session_vectors)
        ys.extend(session_ys)
        skipped.update(session_skipped)
    return vectors, np.array(ys, dtype=np.int64), skipped


def build_dataset(
    task: Task,
    recordings: Sequence[SessionRecording],
    seed: int,
    config: Optional[PipelineConfig] = None,
    labels: Optional[Sequence[SessionLabels]] = None,
    jobs: int = 1,
) -> LabeledDataset:
    """
    Build the balanced dataset of one task.

    Args:
        task: Prediction task
        recordings: Validated recordings, in a stable order
        seed: Sampling seed
        config: Pipeline configuration
        labels: Precomputed session labels aligned with recordings
        jobs: Parallel workers over sessions

    Returns:
        LabeledDataset with |positive| == |negative|

    Raises:
        InsufficientEvents: If either class has no candidate
    """
    config = config or PipelineConfig()
    schema = build_feature_schema(config.features)
    vectors, y, skipped = collect_samples(task, recordings, seed, config, labels, jobs)
    provenance = [v.provenance for v in vectors]
    X = (
        np.vstack([v.values for v in vectors])
        if vectors else np.zeros((0, schema.width), dtype=np.float64)
    )

    unique = _drop_duplicate_negatives(provenance, y)
    skipped["duplicate_negative"] += int(np.sum(~unique))
    candidates_pos = int(np.sum(y[unique] == 1))
    candidates_neg = int(np.sum(y[unique] == 0))

    rng = np.random.default_rng([seed, _TASK_CODES[task]])
    kept = np.flatnonzero(unique)[balance_indices(y[unique], rng)]

    header: Dict[str, object] = {
        "task": task.value,
        "seed": seed,
        "generator": GENERATOR_NAME,
        "schema_hash": schema.schema_hash,
        "config_hash": config.config_hash,
        "counts": {
            "rows": int(kept.size),
            "positive": int(np.sum(y[kept] == 1)),
            "negative": int(np.sum(y[kept] == 0)),
            "candidates_positive": candidates_pos,
            "candidates_negative": candidates_neg,
            "sessions": len(recordings),
            "skipped": {k: v for k, v in sorted(skipped.items()) if v},
        },
    }
    logger.info(
        "Built dataset",
        task=task.value,
        rows=int(kept.size),
        candidates_positive=candidates_pos,
        candidates_negative=candidates_neg,
        skipped=dict(skipped),
    )
    return LabeledDataset(
        task=task,
        X=X[kept],
        y=y[kept],
        provenance=[provenance[i] for i in kept],
        schema=schema,
        header=header,
    )


def build_turn_vs_continue(
    recordings: Sequence[SessionRecording], seed: int, **kwargs
) -> LabeledDataset:
    """Clean turn taking vs continuing speech."""
    return build_dataset(Task.TURN_VS_CONTINUE, recordings, seed, **kwargs)


def build_next_speaker(
    recordings: Sequence[SessionRecording], seed: int, **kwargs
) -> LabeledDataset:
    """Upcoming speaker vs uninvolved users."""
    return build_dataset(Task.NEXT_SPEAKER, recordings, seed, **kwargs)


def build_timing(recordings: Sequence[SessionRecording], seed: int, **kwargs) -> LabeledDataset:
    """Right before a turn-taking onset vs earlier silent moments."""
    return build_dataset(Task.TIMING, recordings, seed, **kwargs)

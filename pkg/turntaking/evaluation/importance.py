"""
Grouped Permutation Importance Module

Mean decrease in accuracy (MDA) per feature group: within each test fold the
columns of one group are shuffled jointly (rows permuted together), the fold
model re-scores the test rows, and the change in test AUC is recorded.
Results are averaged over folds and repetitions; negative values mean the
model relied on the group.

Feature groups are declared in JSON files as glob patterns over feature
names:

    {"name": "headline", "groups": [{"name": "main head pitch",
                                     "patterns": ["main_head_pitch_*"]}]}
"""

import json
from fnmatch import fnmatchcase
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from turntaking.config import PipelineConfig
from turntaking.evaluation.cross_validation import fold_auc, fold_seed
from turntaking.evaluation.folds import Fold, FoldPlan, make_folds
from turntaking.evaluation.metrics import SingleClassInput, auc_roc
from turntaking.exceptions import InvalidConfig, PipelineInputError
from turntaking.learners.registry import predict_proba, train_model
from turntaking.logging_config import get_logger
from turntaking.models import (
    CVScheme,
    FeatureSchema,
    ImportanceRow,
    ImportanceTable,
    ModelFamily,
)
from turntaking.services.dataset_builder import LabeledDataset

logger = get_logger(__name__)

BUILTIN_GROUP_FILES = {
    "headline": "feature_groups.json",
    "full": "feature_groups_full.json",
}

GroupPatterns = Dict[str, List[str]]


class UnknownFeatureGroup(PipelineInputError):
    """A feature group is not declared or matches no feature."""
    pass


# =============================================================================
# Feature Groups
# =============================================================================

def load_feature_groups(source: Union[str, Path] = "headline") -> GroupPatterns:
    """
    Load group declarations: 'headline', 'full' or a JSON file path.

    Returns:
        Ordered mapping group name -> glob patterns

    Raises:
        InvalidConfig: If the document is malformed
        FileNotFoundError: If a path does not exist
    """
    if str(source) in BUILTIN_GROUP_FILES:
        text = (
            resources.files("turntaking.resources")
            .joinpath(BUILTIN_GROUP_FILES[str(source)])
            .read_text(encoding="utf-8")
        )
    else:
        text = Path(source).read_text(encoding="utf-8")

    try:
        document = json.loads(text)
        groups = {str(g["name"]): [str(p) for p in g["patterns"]] for g in document["groups"]}
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise InvalidConfig(f"Invalid feature-group file {source}: {e}") from e
    if not groups:
        raise InvalidConfig(f"Feature-group file {source} declares no groups")
    return groups


def resolve_feature_groups(
    schema: FeatureSchema,
    groups: GroupPatterns,
    selected: Optional[Sequence[str]] = None,
) -> Dict[str, List[int]]:
    """
    Column indices of each (selected) group.

    Raises:
        UnknownFeatureGroup: A selected name is undeclared, or a group
            matches no column of the schema
    """
    names = list(selected) if selected is not None else list(groups)
    resolved: Dict[str, List[int]] = {}
    for name in names:
        if name not in groups:
            raise UnknownFeatureGroup(f"Feature group {name!r} is not declared")
        columns = [
            i for i, feature in enumerate(schema.names)
            if any(fnmatchcase(feature, pattern) for pattern in groups[name])
        ]
        if not columns:
            raise UnknownFeatureGroup(f"Feature group {name!r} matches no feature")
        resolved[name] = columns
    return resolved


# =============================================================================
# MDA
# =============================================================================

def _fold_deltas(
    dataset: LabeledDataset,
    fold: Fold,
    family: ModelFamily,
    columns: List[Tuple[str, List[int]]],
    repetitions: int,
    seed: int,
    config: PipelineConfig,
) -> Tuple[Optional[float], Dict[str, List[float]]]:
    """
    Base AUC of one fold and the AUC changes of every group and repetition.

    A fold with single-class test rows yields (None, {}).
    """
    model = train_model(
        family,
        dataset.X[fold.train],
        dataset.y[fold.train],
        dataset.schema,
        config.models,
        seed=fold_seed(seed, family, fold.index),
    )
    X_test = dataset.X[fold.test]
    y_test = dataset.y[fold.test]
    base = fold_auc(predict_proba(model, X_test, dataset.schema_hash), y_test, fold, family)
    if base is None:
        return None, {}

    deltas: Dict[str, List[float]] = {}
    for group_index, (name, cols) in enumerate(columns):
        deltas[name] = []
        for rep in range(repetitions):
            rng = np.random.default_rng([seed, fold.index, group_index, rep])
            permutation = rng.permutation(X_test.shape[0])
            shuffled = X_test.copy()
            shuffled[:, cols] = X_test[permutation][:, cols]
            score = auc_roc(predict_proba(model, shuffled, dataset.schema_hash), y_test)
            deltas[name].append(score - base)
    return base, deltas


def mda(
    dataset: LabeledDataset,
    family: ModelFamily,
    feature_groups: GroupPatterns,
    scheme: CVScheme,
    reps: int,
    seed: int,
    config: Optional[PipelineConfig] = None,
    jobs: int = 1,
    plan: Optional[FoldPlan] = None,
) -> ImportanceTable:
    """
    Grouped permutation importance.

    Args:
        dataset: Balanced labeled dataset
        family: Model family
        feature_groups: Group name -> glob patterns
        scheme: Fold scheme
        reps: Shuffles per group and fold
        seed: Evaluation seed
        config: Pipeline configuration
        jobs: Parallel workers over folds
        plan: Precomputed fold plan (defaults to make_folds)

    Returns:
        ImportanceTable in declaration order; folds with single-class test
        rows contribute no deltas

    Raises:
        UnknownFeatureGroup: If a group matches no feature
        SingleClassInput: If no fold has both classes among its test rows
    """
    config = config or PipelineConfig()
    family = ModelFamily(family)
    scheme = CVScheme(scheme)

    columns = list(resolve_feature_groups(dataset.schema, feature_groups).items())

    plan = plan or make_folds(dataset, scheme, seed, config.evaluation.n_folds)
    outcomes = Parallel(n_jobs=jobs)(
        delayed(_fold_deltas)(dataset, fold, family, columns, reps, seed, config)
        for fold in plan.folds
    )
    skipped = [fold.index for fold, (base, _) in zip(plan.folds, outcomes) if base is None]
    results = [outcome for outcome in outcomes if outcome[0] is not None]
    if not results:
        raise SingleClassInput(
            f"Every {scheme.value} fold of {dataset.task.value} has single-class test rows"
        )

    rows: List[ImportanceRow] = []
    for name, cols in columns:
        values = np.array([d for _, deltas in results for d in deltas[name]])
        rows.append(
            ImportanceRow(
                group=name,
                n_features=len(cols),
                mean_delta_auc=float(values.mean()),
                std_delta_auc=float(values.std()),
                n_evaluations=int(values.size),
            )
        )

    table = ImportanceTable(
        task=dataset.task,
        family=family,
        scheme=scheme,
        repetitions=reps,
        baseline_auc=float(np.mean([base for base, _ in results])),
        rows=rows,
        skipped_folds=skipped,
    )
    logger.info(
        "Permutation importance finished",
        task=dataset.task.value,
        family=family.value,
        groups=len(rows),
        skipped_folds=len(skipped),
        baseline_auc=round(table.baseline_auc, 4),
    )
    return table


def importance_to_frame(table: ImportanceTable) -> pd.DataFrame:
    """Importance rows, most important (most negative) first."""
    return pd.DataFrame([row.model_dump() for row in table.ranked()])

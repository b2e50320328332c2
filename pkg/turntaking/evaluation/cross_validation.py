"""
Cross-Validation Module

Runs a model family over a fold plan: per fold, standardize on the training
rows, train, score the test rows and compute the test AUC. Reports the mean
and the (population) standard deviation across folds. A fold whose test rows
hold a single class has no AUC; it is reported but left out of the mean.

Design Decisions:
- Folds run in parallel with joblib and are merged by fold index, so the
  report does not depend on the worker count
- Each fold trains with its own seed derived from the evaluation seed
"""

from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from turntaking.config import PipelineConfig, derive_seed
from turntaking.evaluation.folds import Fold, FoldPlan, make_folds
from turntaking.evaluation.metrics import SingleClassInput, auc_roc
from turntaking.learners.registry import predict_proba, train_model
from turntaking.logging_config import get_logger
from turntaking.models import CVScheme, EvalReport, FoldResult, ModelFamily
from turntaking.services.dataset_builder import LabeledDataset

logger = get_logger(__name__)


def fold_seed(seed: int, family: ModelFamily, fold: int) -> int:
    """Training seed of one fold."""
    return derive_seed(seed, f"{family.value}:fold{fold}")


def fold_auc(
    scores: np.ndarray, labels: np.ndarray, fold: Fold, family: ModelFamily
) -> Optional[float]:
    """Test AUC of a fold, or None (with a warning) when its test rows hold one class."""
    try:
        return auc_roc(scores, labels)
    except SingleClassInput:
        logger.warning(
            "Fold skipped: single-class test rows",
            fold=fold.index,
            family=family.value,
            test_entities=fold.test_entities,
            positives=int(np.sum(labels == 1)),
            n_test=int(labels.size),
        )
        return None


def _run_fold(
    dataset: LabeledDataset,
    fold: Fold,
    family: ModelFamily,
    seed: int,
    config: PipelineConfig,
) -> FoldResult:
    model = train_model(
        family,
        dataset.X[fold.train],
        dataset.y[fold.train],
        dataset.schema,
        config.models,
        seed=fold_seed(seed, family, fold.index),
    )
    scores = predict_proba(model, dataset.X[fold.test], dataset.schema_hash)
    return FoldResult(
        fold=fold.index,
        auc=fold_auc(scores, dataset.y[fold.test], fold, family),
        n_train=int(fold.train.size),
        n_test=int(fold.test.size),
        test_entities=fold.test_entities,
    )


def run_cv(
    dataset: LabeledDataset,
    family: ModelFamily,
    scheme: CVScheme,
    seed: int,
    config: Optional[PipelineConfig] = None,
    jobs: int = 1,
    plan: Optional[FoldPlan] = None,
) -> EvalReport:
    """
    Cross-validate one family under one scheme.

    Args:
        dataset: Balanced labeled dataset
        family: Model family
        scheme: Fold scheme
        seed: Evaluation seed (fold shuffling and model seeds)
        config: Pipeline configuration (model hyperparameters, fold count)
        jobs: Parallel workers over folds
        plan: Precomputed fold plan (defaults to make_folds)

    Returns:
        EvalReport with per-fold AUCs, mean and standard deviation

    Raises:
        SingleClassInput: If no fold has both classes among its test rows
    """
    config = config or PipelineConfig()
    family = ModelFamily(family)
    scheme = CVScheme(scheme)
    plan = plan or make_folds(dataset, scheme, seed, config.evaluation.n_folds)

    results: List[FoldResult] = Parallel(n_jobs=jobs)(
        delayed(_run_fold)(dataset, fold, family, seed, config) for fold in plan.folds
    )
    results = sorted(results, key=lambda r: r.fold)
    aucs = np.array([r.auc for r in results if r.auc is not None])
    skipped = [r.fold for r in results if r.auc is None]
    if aucs.size == 0:
        raise SingleClassInput(
            f"Every {scheme.value} fold of {dataset.task.value} has single-class test rows"
        )

    report = EvalReport(
        task=dataset.task,
        family=family,
        scheme=scheme,
        folds=results,
        mean_auc=float(aucs.mean()),
        std_auc=float(aucs.std()),
        skipped_folds=skipped,
        config_hash=config.config_hash,
        schema_hash=dataset.schema_hash,
    )
    logger.info(
        "Cross-validation finished",
        task=dataset.task.value,
        family=family.value,
        scheme=scheme.value,
        folds=len(results),
        skipped_folds=len(skipped),
        mean_auc=round(report.mean_auc, 4),
        std_auc=round(report.std_auc, 4),
    )
    return report


def run_comparison(
    dataset: LabeledDataset,
    families: Sequence[ModelFamily],
    schemes: Sequence[CVScheme],
    seed: int,
    config: Optional[PipelineConfig] = None,
    jobs: int = 1,
) -> List[EvalReport]:
    """Every family under every scheme, in the given order."""
    return [
        run_cv(dataset, family, scheme, seed, config, jobs)
        for scheme in schemes
        for family in families
    ]


def reports_to_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """One row per (task, family, scheme) with mean and std AUC."""
    return pd.DataFrame(
        [
            {
                "task": r.task.value,
                "family": r.family.value,
                "scheme": r.scheme.value,
                "folds": len(r.folds),
                "skipped_folds": len(r.skipped_folds),
                "mean_auc": r.mean_auc,
                "std_auc": r.std_auc,
            }
            for r in reports
        ]
    )


def folds_to_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """One row per fold of every report."""
    return pd.DataFrame(
        [
            {
                "task": r.task.value,
                "family": r.family.value,
                "scheme": r.scheme.value,
                "fold": f.fold,
                "auc": np.nan if f.auc is None else f.auc,
                "n_train": f.n_train,
                "n_test": f.n_test,
                "test_entities": ";".join(f.test_entities),
            }
            for r in reports
            for f in r.folds
        ]
    )

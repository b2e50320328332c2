"""
Cross-validation fold plans.

- session: sessions shuffled by seed, split into n_folds near-equal folds
- group: the same over groups
- week: leave one week out, one fold per week present
- week4: train on weeks 1-3, test on week 4

A grouping entity never appears on both sides of a fold.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from turntaking.exceptions import PipelineInputError
from turntaking.models import CVScheme
from turntaking.services.dataset_builder import LabeledDataset

HOLDOUT_WEEK = 4


class TooFewEntities(PipelineInputError):
    """Not enough sessions, groups or weeks for the requested folds."""
    pass


@dataclass(frozen=True)
class Fold:
    """Train and test row indices of one fold."""
    index: int
    train: np.ndarray
    test: np.ndarray
    test_entities: List[str]


@dataclass(frozen=True)
class FoldPlan:
    """All folds of one scheme."""
    scheme: CVScheme
    folds: List[Fold]

    def __len__(self) -> int:
        return len(self.folds)


def _plan_from_entity_folds(
    scheme: CVScheme, keys: np.ndarray, entity_folds: List[List[str]]
) -> FoldPlan:
    folds = []
    for index, entities in enumerate(entity_folds):
        in_test = np.isin(keys, entities)
        folds.append(
            Fold(
                index=index,
                train=np.flatnonzero(~in_test),
                test=np.flatnonzero(in_test),
                test_entities=sorted(entities),
            )
        )
    return FoldPlan(scheme=scheme, folds=folds)


def make_folds(
    dataset: LabeledDataset,
    scheme: CVScheme,
    seed: int,
    n_folds: int = 10,
) -> FoldPlan:
    """
    Deterministic fold plan for a dataset.

    Raises:
        TooFewEntities: Fewer sessions/groups than folds, fewer than two
            weeks, or no rows on one side of the week-4 holdout
    """
    scheme = CVScheme(scheme)
    keys = np.array(dataset.entity_keys(scheme))

    if scheme in (CVScheme.SESSION, CVScheme.GROUP):
        entities = sorted(set(keys.tolist()))
        if len(entities) < n_folds:
            raise TooFewEntities(
                f"{scheme.value} CV needs at least {n_folds} entities, found {len(entities)}"
            )
        order = np.random.default_rng(seed).permutation(len(entities))
        shuffled = [entities[i] for i in order]
        chunks = np.array_split(np.arange(len(shuffled)), n_folds)
        return _plan_from_entity_folds(
            scheme, keys, [[shuffled[i] for i in chunk] for chunk in chunks]
        )

    if scheme == CVScheme.WEEK:
        weeks = sorted(set(keys.tolist()), key=int)
        if len(weeks) < 2:
            raise TooFewEntities(f"Week CV needs at least 2 weeks, found {len(weeks)}")
        return _plan_from_entity_folds(scheme, keys, [[w] for w in weeks])

    week = dataset.weeks
    train = np.flatnonzero(week < HOLDOUT_WEEK)
    test = np.flatnonzero(week == HOLDOUT_WEEK)
    if train.size == 0 or test.size == 0:
        raise TooFewEntities(
            f"Week-4 holdout needs rows from weeks 1-3 and week 4; got {train.size} and {test.size}"
        )
    return FoldPlan(
        scheme=scheme,
        folds=[Fold(index=0, train=train, test=test, test_entities=[str(HOLDOUT_WEEK)])],
    )

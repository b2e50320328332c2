"""
Evaluation Package

- metrics: ROC-AUC
- folds: Session, group, week and week-4 fold plans
- cross_validation: Per-fold training and AUC reports
- importance: Grouped permutation importance (MDA)
- dependence: One- and two-feature partial dependence
"""

from turntaking.evaluation.cross_validation import run_comparison, run_cv
from turntaking.evaluation.dependence import partial_dependence, partial_dependence_2d
from turntaking.evaluation.folds import FoldPlan, make_folds
from turntaking.evaluation.importance import load_feature_groups, mda
from turntaking.evaluation.metrics import auc_roc

__all__ = [
    "run_comparison",
    "run_cv",
    "partial_dependence",
    "partial_dependence_2d",
    "FoldPlan",
    "make_folds",
    "load_feature_groups",
    "mda",
    "auc_roc",
]

"""Ranking losses, pairwise training, boosting and evaluation metrics."""

from .auc import auc_bruteforce, auc_fast
from .bbl import BiasConfig, bbl_bias, bbl_epsilon
from .boosting import Stump, StumpEnsemble, best_stump, ensemble_predict, train_smoothboost, weak_learner_margin
from .losses import ALL_LOSSES, LossKind, SurrogateLoss, surrogate_grad, surrogate_value
from .metrics import evaluate, mean_variance, variance_report
from .pairwise import (LinearModel, ScoredDataset, TrainConfig, TrainLog, model_auc, pair_gradient,
                       pairwise_loss, train_pairwise)

__all__ = [
    "auc_bruteforce", "auc_fast", "BiasConfig", "bbl_bias", "bbl_epsilon", "Stump", "StumpEnsemble",
    "best_stump", "ensemble_predict", "train_smoothboost", "weak_learner_margin", "ALL_LOSSES",
    "LossKind", "SurrogateLoss", "surrogate_grad", "surrogate_value", "evaluate", "mean_variance",
    "variance_report", "LinearModel", "ScoredDataset", "TrainConfig", "TrainLog", "model_auc",
    "pair_gradient", "pairwise_loss", "train_pairwise",
]

# progdx - Progressive single- to multi-modality sub-type diagnosis
# Copyright (C) 2026 progdx contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Diagnosis metrics: macro one-vs-rest Acc/Spe/Sens/AUC, Cost and AUC/Cost.

All four rates are reported as percentages. Cost is the mean decision stage.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, NamedTuple

import numpy as np
import numpy.typing as npt
from sklearn.metrics import confusion_matrix, roc_auc_score

from progdx.core.cohort import SubType
from progdx.core.exceptions import InputError

logger = logging.getLogger(__name__)

SCORE_SOURCES = ("decision", "final")


class MacroMetrics(NamedTuple):
    """Macro one-vs-rest metrics, in percent."""

    acc: float
    spe: float
    sens: float
    auc: float
    per_class: dict[str, dict[str, float]]


def auc_cost_ratio(auc: float, cost: float) -> float:
    """AUC percentage divided by the mean decision stage."""
    if cost <= 0:
        raise InputError(f"cost must be positive, got {cost}")
    return auc / cost


def _percent(value: float) -> float:
    return 100.0 * value


def macro_metrics(
    labels: npt.ArrayLike,
    predictions: npt.ArrayLike,
    scores: npt.ArrayLike,
    n_classes: int = len(SubType),
) -> MacroMetrics:
    """Accuracy plus macro one-vs-rest specificity, sensitivity and AUC.

    Classes that never occur in labels are skipped in the macro averages
    (a warning is logged). A class AUC needs both positives and negatives.

    Args:
        labels: True class codes, shape (n,)
        predictions: Predicted class codes, shape (n,)
        scores: Class probabilities, shape (n, n_classes)

    Returns:
        MacroMetrics with percentages and per-class values

    Raises:
        InputError: If the inputs are empty or their lengths differ
    """
    y = np.asarray(labels, dtype=np.int64)
    pred = np.asarray(predictions, dtype=np.int64)
    prob = np.asarray(scores, dtype=np.float64)
    if y.size == 0:
        raise InputError("no subjects to score")
    if pred.shape != y.shape or prob.shape != (y.size, n_classes):
        raise InputError(
            f"labels {y.shape}, predictions {pred.shape} and scores {prob.shape} do not match"
        )

    cm = confusion_matrix(y, pred, labels=list(range(n_classes)))
    total = cm.sum()
    per_class: dict[str, dict[str, float]] = {}
    sens_values: list[float] = []
    spe_values: list[float] = []
    auc_values: list[float] = []
    for c in range(n_classes):
        name = SubType(c).label if n_classes == len(SubType) else str(c)
        tp = cm[c, c]
        fn = cm[c, :].sum() - tp
        fp = cm[:, c].sum() - tp
        tn = total - tp - fn - fp
        if tp + fn == 0:
            logger.warning("Class %s does not occur in the labels; skipped in macro averages", name)
            continue
        sens = tp / (tp + fn)
        spe = tn / (tn + fp) if tn + fp > 0 else math.nan
        y_bin = (y == c).astype(int)
        auc = float(roc_auc_score(y_bin, prob[:, c])) if 0 < y_bin.sum() < y.size else math.nan

        per_class[name] = {"sens": _percent(sens), "spe": _percent(spe), "auc": _percent(auc)}
        sens_values.append(sens)
        spe_values.append(spe)
        auc_values.append(auc)

    return MacroMetrics(
        acc=_percent(float((pred == y).mean())),
        spe=_percent(_nanmean(spe_values)),
        sens=_percent(_nanmean(sens_values)),
        auc=_percent(_nanmean(auc_values)),
        per_class=per_class,
    )


def _nanmean(values: list[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else math.nan


def macro_auc(labels: npt.ArrayLike, scores: npt.ArrayLike) -> float:
    """Macro one-vs-rest AUC in percent, from scores alone."""
    prob = np.asarray(scores, dtype=np.float64)
    return macro_metrics(labels, prob.argmax(axis=1), prob).auc


@dataclass
class EvalReport:
    """Evaluation of one checkpoint at one threshold."""

    acc: float
    spe: float
    sens: float
    auc: float
    cost: float
    ratio: float
    n_test: int
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)
    stage_aucs: dict[str, float] = field(default_factory=dict)
    stage_counts: dict[str, int] = field(default_factory=dict)
    theta: float | None = None
    score_source: str = "decision"

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EvalReport":
        return cls(**data)

    def row(self) -> dict[str, float]:
        """The six headline columns."""
        return {
            "Acc": self.acc,
            "Spe": self.spe,
            "Sens": self.sens,
            "AUC": self.auc,
            "Cost": self.cost,
            "AUC/Cost": self.ratio,
        }


def build_report(
    labels: npt.ArrayLike,
    stage_probs: npt.ArrayLike,
    decision_stages: npt.ArrayLike,
    theta: float | None = None,
    score_source: str = "decision",
) -> EvalReport:
    """Assemble an EvalReport from per-stage probabilities and decision stages.

    Args:
        labels: True class codes, shape (n,)
        stage_probs: Probabilities per stage, shape (n, 3, n_classes)
        decision_stages: Stage (1..3) at which each subject was diagnosed
        theta: Threshold the decisions were made with
        score_source: "decision" scores AUC on the decision-stage
            probabilities, "final" on the stage-3 probabilities

    Raises:
        InputError: If score_source is unknown or the inputs are empty
    """
    if score_source not in SCORE_SOURCES:
        raise InputError(f"score_source must be one of {SCORE_SOURCES}, got {score_source!r}")
    y = np.asarray(labels, dtype=np.int64)
    probs = np.asarray(stage_probs, dtype=np.float64)
    stages = np.asarray(decision_stages, dtype=np.int64)
    if y.size == 0:
        raise InputError("no subjects to report on")

    rows = np.arange(y.size)
    decided = probs[rows, stages - 1]
    scores = decided if score_source == "decision" else probs[:, -1]
    metrics = macro_metrics(y, decided.argmax(axis=1), scores)

    stage_aucs: dict[str, float] = {}
    for k in range(probs.shape[1]):
        stage = probs[:, k]
        if np.isfinite(stage).all():
            stage_aucs[str(k + 1)] = macro_auc(y, stage)

    cost = float(stages.mean())
    return EvalReport(
        acc=metrics.acc,
        spe=metrics.spe,
        sens=metrics.sens,
        auc=metrics.auc,
        cost=cost,
        ratio=auc_cost_ratio(metrics.auc, cost),
        n_test=int(y.size),
        per_class=metrics.per_class,
        stage_aucs=stage_aucs,
        stage_counts={str(k + 1): int((stages == k + 1).sum()) for k in range(probs.shape[1])},
        theta=theta,
        score_source=score_source,
    )

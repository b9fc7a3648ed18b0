"""Unlearning evaluation: UA, RA, TA, loss-threshold MIA and Avg. Gap."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import LabeledBatch, MlpModel, per_sample_ce, predict
from .errors import DomainError

METRIC_KEYS = ("ua", "ta", "ra", "mia")


def accuracy(model: MlpModel, batch: LabeledBatch) -> float:
    if len(batch) == 0:
        raise DomainError("empty batch")
    return 100.0 * float(np.mean(predict(model, batch) == batch.labels))


@dataclass
class ThresholdAttacker:
    """Predicts *member* when a sample's loss is strictly below ``threshold``."""

    threshold: float
    balanced_accuracy: float
    degenerate: bool = False

    def is_member(self, losses) -> np.ndarray:
        return np.asarray(losses, dtype=np.float64) < self.threshold


def _candidates(values: np.ndarray) -> np.ndarray:
    u = np.unique(values)
    return np.concatenate([u[:1], 0.5 * (u[:-1] + u[1:])])


def train_attacker(retain_losses, test_losses, degenerate_tol: float = 1e-9) -> ThresholdAttacker:
    """Choose the threshold maximising balanced accuracy.

    Candidates are the smallest observed loss (nobody is a member) and every
    midpoint between consecutive distinct losses. Ties go to the smaller
    threshold. An attacker no better than 50% is flagged ``degenerate``.
    """
    members = np.sort(np.asarray(retain_losses, dtype=np.float64))
    others = np.sort(np.asarray(test_losses, dtype=np.float64))
    if members.size == 0 or others.size == 0:
        raise DomainError("both loss arrays must be non-empty")
    cand = _candidates(np.concatenate([members, others]))
    tpr = np.searchsorted(members, cand, side="left") / members.size
    tnr = 1.0 - np.searchsorted(others, cand, side="left") / others.size
    bal = 0.5 * (tpr + tnr)
    best = int(np.argmax(bal))  # first maximum = smallest threshold
    ba = float(bal[best])
    return ThresholdAttacker(float(cand[best]), 100.0 * ba, ba <= 0.5 + degenerate_tol)


def mia_score(attacker: ThresholdAttacker, model: MlpModel, forget_batch: LabeledBatch) -> float:
    """Percentage of forget samples the attacker calls non-members."""
    if len(forget_batch) == 0:
        raise DomainError("empty forget set")
    losses = per_sample_ce(model, forget_batch)
    return 100.0 * float(np.mean(~attacker.is_member(losses)))


@dataclass
class MetricsReport:
    ua: float
    ra: float
    ta: float
    mia: float
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def fit_attacker(model: MlpModel, splits) -> ThresholdAttacker:
    return train_attacker(per_sample_ce(model, splits.retain), per_sample_ce(model, splits.test))


def compute_metrics(model: MlpModel, splits, attacker: ThresholdAttacker | None = None) -> MetricsReport:
    """UA = 100 - acc(D_f), RA = acc(D_r), TA = acc(test), MIA on D_f.

    Without an explicit ``attacker`` one is fitted on this model's retain
    (member) and test (non-member) losses.
    """
    for name in ("retain", "forget", "test"):
        if len(getattr(splits, name)) == 0:
            raise DomainError(f"{name} split is empty")
    if attacker is None:
        attacker = fit_attacker(model, splits)
    return MetricsReport(
        ua=100.0 - accuracy(model, splits.forget),
        ra=accuracy(model, splits.retain),
        ta=accuracy(model, splits.test),
        mia=mia_score(attacker, model, splits.forget),
        counts={"retain": len(splits.retain), "forget": len(splits.forget), "test": len(splits.test)},
    )


@dataclass
class GapReport:
    gaps: dict
    avg_gap: float


def avg_gap(report, reference) -> GapReport:
    """Mean absolute difference over UA, TA, RA and MIA."""
    def get(r, k):
        return r[k] if isinstance(r, dict) else getattr(r, k)
    gaps = {k: abs(float(get(report, k)) - float(get(reference, k))) for k in METRIC_KEYS}
    return GapReport(gaps, float(np.mean([gaps[k] for k in METRIC_KEYS])))

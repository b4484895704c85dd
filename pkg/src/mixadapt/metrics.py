"""Segmentation scores over weighted samples, plus posterior validation.

The four scores (accuracy, balanced accuracy, mean IoU, balanced mean IoU)
are all derived from one weighted confusion matrix, so mixtures of test
sets are expressed purely through sample weights.  Partial matrices
accumulated in parallel merge by addition.

Balanced variants are computed on the groundtruth-balanced matrix: each
nonzero row rescaled to carry equal total weight.  For balanced accuracy
this is an identity (it equals mean per-class recall); the balanced mean
IoU is defined the same way by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllZeroWeightsError,
    EmptyMatrixError,
    EmptyStreamError,
    InvalidParamError,
    LengthMismatchError,
)


def weighted_confusion(gt, pred, weights=None, class_count: int | None = None) -> np.ndarray:
    """Accumulate a (K, K) matrix of weight sums; rows are groundtruth."""
    gt = np.asarray(gt, dtype=np.int64).ravel()
    pred = np.asarray(pred, dtype=np.int64).ravel()
    if gt.size != pred.size:
        raise LengthMismatchError(f"{gt.size} groundtruth labels vs {pred.size} predictions")
    if weights is None:
        weights = np.ones(gt.size)
    else:
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if weights.size != gt.size:
            raise LengthMismatchError(f"{weights.size} weights for {gt.size} samples")
        if np.any(weights < 0.0):
            raise AllZeroWeightsError("weights must be nonnegative")
    if gt.size == 0 or not np.any(weights > 0.0):
        raise AllZeroWeightsError("no sample carries positive weight")
    if class_count is None:
        class_count = int(max(gt.max(), pred.max())) + 1
    cm = np.zeros((class_count, class_count))
    np.add.at(cm, (gt, pred), weights)
    return cm


def _check_matrix(cm) -> np.ndarray:
    cm = np.asarray(cm, dtype=np.float64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise EmptyMatrixError(f"confusion matrix must be square, got shape {cm.shape}")
    if cm.sum() <= 0.0:
        raise EmptyMatrixError("confusion matrix carries no weight")
    return cm


def balance_rows(cm) -> np.ndarray:
    """Rescale each nonzero groundtruth row to carry equal total weight."""
    cm = _check_matrix(cm)
    rows = cm.sum(axis=1)
    out = cm.copy()
    nz = rows > 0.0
    out[nz] /= rows[nz, None]
    return out


def accuracy(cm) -> float:
    cm = _check_matrix(cm)
    return float(np.trace(cm) / cm.sum())


def balanced_accuracy(cm) -> float:
    """Mean per-class recall over classes that appear in the groundtruth."""
    cm = _check_matrix(cm)
    rows = cm.sum(axis=1)
    present = rows > 0.0
    recalls = np.diag(cm)[present] / rows[present]
    return float(recalls.mean())


def mean_iou(cm) -> float:
    """Macro-averaged intersection over union.

    Classes with no groundtruth mass and no predicted mass are excluded
    from the mean; scoring them 0 would punish absence rather than error.
    """
    cm = _check_matrix(cm)
    tp = np.diag(cm)
    union = cm.sum(axis=1) + cm.sum(axis=0) - tp
    present = union > 0.0
    return float((tp[present] / union[present]).mean())


def balanced_mean_iou(cm) -> float:
    """Mean IoU on the groundtruth-balanced matrix."""
    return mean_iou(balance_rows(cm))


SCORE_NAMES = ("accuracy", "balanced_accuracy", "mean_iou", "balanced_mean_iou")


def all_scores(cm) -> dict[str, float]:
    return {
        "accuracy": accuracy(cm),
        "balanced_accuracy": balanced_accuracy(cm),
        "mean_iou": mean_iou(cm),
        "balanced_mean_iou": balanced_mean_iou(cm),
    }


# --- posterior validation -------------------------------------------------------

@dataclass(frozen=True)
class PriorConsistency:
    """Per-class gap between mean posterior and reference priors."""

    deltas: np.ndarray
    max_abs_delta: float
    sample_count: int


def posterior_prior_consistency(posteriors, reference_priors) -> PriorConsistency:
    """Compare the class-by-class average posterior to reference priors.

    For a well-calibrated model over samples drawn from the reference
    distribution the averages converge to the priors.
    """
    posts = np.asarray(posteriors, dtype=np.float64)
    if posts.ndim != 2 or posts.shape[0] == 0:
        raise EmptyStreamError(f"expected a non-empty (N, K) stream, got shape {posts.shape}")
    ref = np.asarray(reference_priors, dtype=np.float64)
    if ref.shape != (posts.shape[1],):
        raise LengthMismatchError(f"priors shape {ref.shape} vs {posts.shape[1]} classes")
    deltas = posts.mean(axis=0) - ref
    return PriorConsistency(
        deltas=deltas,
        max_abs_delta=float(np.abs(deltas).max()),
        sample_count=posts.shape[0],
    )


@dataclass(frozen=True)
class CalibrationCurve:
    """Reliability curve for one class over equal-width probability bins.

    ``frequencies`` holds the weighted empirical rate of the class per
    bin and is NaN for empty bins; ``mean_predicted`` is the weighted
    average predicted probability per bin, the natural x-coordinate for
    reliability plots.
    """

    midpoints: np.ndarray
    frequencies: np.ndarray
    mean_predicted: np.ndarray
    weights: np.ndarray
    bin_count: int
    class_index: int


def reliability_bins(posteriors, gt, class_index: int, bin_count: int = 10,
                     weights=None) -> CalibrationCurve:
    """Bin predicted probabilities for one class and measure hit rates.

    Bins are half-open ``[lo, hi)`` with the last bin closed, so the
    binning is deterministic.
    """
    if bin_count < 2:
        raise InvalidParamError(f"bin_count must be >= 2, got {bin_count}")
    posts = np.asarray(posteriors, dtype=np.float64)
    if posts.ndim != 2 or posts.shape[0] == 0:
        raise EmptyStreamError(f"expected a non-empty (N, K) stream, got shape {posts.shape}")
    gt = np.asarray(gt, dtype=np.int64).ravel()
    if gt.size != posts.shape[0]:
        raise LengthMismatchError(f"{gt.size} labels for {posts.shape[0]} posteriors")
    if not 0 <= class_index < posts.shape[1]:
        raise InvalidParamError(f"class {class_index} out of range [0, {posts.shape[1]})")
    if weights is None:
        weights = np.ones(gt.size)
    else:
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if weights.size != gt.size:
            raise LengthMismatchError(f"{weights.size} weights for {gt.size} samples")

    predicted = posts[:, class_index]
    bins = np.minimum((predicted * bin_count).astype(np.int64), bin_count - 1)
    hits = (gt == class_index).astype(np.float64)

    weight_sums = np.bincount(bins, weights=weights, minlength=bin_count)
    hit_sums = np.bincount(bins, weights=weights * hits, minlength=bin_count)
    pred_sums = np.bincount(bins, weights=weights * predicted, minlength=bin_count)
    occupied = weight_sums > 0.0
    frequencies = np.full(bin_count, np.nan)
    mean_predicted = np.full(bin_count, np.nan)
    frequencies[occupied] = hit_sums[occupied] / weight_sums[occupied]
    mean_predicted[occupied] = pred_sums[occupied] / weight_sums[occupied]
    midpoints = (np.arange(bin_count) + 0.5) / bin_count
    return CalibrationCurve(
        midpoints=midpoints,
        frequencies=frequencies,
        mean_predicted=mean_predicted,
        weights=weight_sums,
        bin_count=bin_count,
        class_index=class_index,
    )


def reliability_check(curve: CalibrationCurve, confidence: float = 0.99) -> bool:
    """True when every occupied bin's hit count sits inside its binomial CI.

    Each bin is tested against the exact central binomial interval at the
    given confidence, under the hypothesis that hits are Bernoulli with
    the bin's mean predicted probability.  Assumes unit-weight samples
    (weight sums are counts).
    """
    from scipy.stats import binom

    for idx in range(curve.bin_count):
        n = int(round(curve.weights[idx]))
        if n < 1:
            continue
        p = float(np.clip(curve.mean_predicted[idx], 0.0, 1.0))
        hits = curve.frequencies[idx] * curve.weights[idx]
        lo, hi = binom.interval(confidence, n, p)
        if not lo - 0.5 <= hits <= hi + 0.5:
            return False
    return True


# --- reports ----------------------------------------------------------------------

REPORT_SCHEMA_VERSION = 1


@dataclass
class EvaluationReport:
    """Scores per method for one target mixture, serializable to JSON/CSV."""

    lam: list[float]
    scores: dict[str, dict[str, float]]
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "lambda": list(self.lam),
            "scores": {m: dict(s) for m, s in self.scores.items()},
            "metadata": dict(self.metadata),
        }

    def csv_rows(self) -> list[list[str]]:
        lam = " ".join(f"{v:.6g}" for v in self.lam)
        rows = []
        for method in sorted(self.scores):
            s = self.scores[method]
            rows.append([method, lam] + [f"{s[name]:.10g}" for name in SCORE_NAMES])
        return rows


CSV_HEADER = ["method", "lambda"] + list(SCORE_NAMES)


def reports_to_csv(reports) -> str:
    lines = [",".join(CSV_HEADER)]
    for report in reports:
        for row in report.csv_rows():
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"

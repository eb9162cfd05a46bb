"""Detection and estimation scores, pooled over Monte Carlo trials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dictionary import Dictionary
from .fusion import DetectionResult
from .scene import GroundTruth, row_sparse_channels


@dataclass(frozen=True)
class TrialScore:
    md_count: int
    fa_count: int
    offset_correct: int
    detected_active: int
    num_active: int
    num_inactive: int
    nmse_num: float
    nmse_den: float


@dataclass(frozen=True)
class Summary:
    trials: int
    p_md: float | None
    p_md_ci: tuple[float, float] | None
    fa_rate: float | None
    fa_ci: tuple[float, float] | None
    offset_accuracy: float | None
    nmse: float | None
    nmse_ci: tuple[float, float] | None
    nmse_trial_mean: float | None


def score_trial(result: DetectionResult, truth: GroundTruth, dictionary: Dictionary) -> TrialScore:
    """Score one attempt.

    NMSE sums over the true active rows at every AP: the numerator is the
    squared error of the (refined) estimates there, the denominator the true
    energy.  A missed row contributes its full energy; spurious rows of false
    alarms are left to the false-alarm rate.
    """
    N = dictionary.num_ues
    active = set(int(k) for k in truth.active_set)
    detected = {int(k): int(s) for k, s in zip(result.detected_set, result.detected_offsets)}
    md = sum(1 for k in active if k not in detected)
    fa = sum(1 for k in detected if k not in active)
    offset_correct = sum(1 for k, s in zip(truth.active_set, truth.start_offsets)
                         if detected.get(int(k)) == int(s))
    G = row_sparse_channels(dictionary, truth)
    est = result.channel_estimates
    if est is None:
        est = np.zeros_like(G)
    rows = dictionary.row_of(truth.active_set, truth.start_offsets)
    num = float(np.sum(np.abs(est[:, rows] - G[:, rows]) ** 2))
    den = float(np.sum(np.abs(G[:, rows]) ** 2))
    return TrialScore(md_count=md, fa_count=fa, offset_correct=offset_correct,
                      detected_active=len(active) - md, num_active=len(active),
                      num_inactive=N - len(active), nmse_num=num, nmse_den=den)


def wilson_interval(successes, total, confidence=0.95):
    if total == 0:
        return None
    ci = stats.binomtest(int(successes), int(total)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def ratio_interval(num, den, confidence=0.95):
    """Normal-approximation interval for a pooled ratio ``sum(num) / sum(den)``.

    Delta method over trials: ``var(R) ~ var(num - R den) / (n mean(den)^2)``.
    """
    num, den = np.asarray(num, float), np.asarray(den, float)
    n = num.size
    ratio = num.sum() / den.sum()
    if n < 2:
        return ratio, ratio
    resid = num - ratio * den
    se = np.sqrt(resid.var(ddof=1) / n) / den.mean()
    q = stats.norm.ppf(0.5 + confidence / 2)
    return float(max(ratio - q * se, 0.0)), float(ratio + q * se)


def aggregate(scores) -> Summary:
    scores = list(scores)
    if not scores:
        raise ValueError("cannot aggregate an empty list of trial scores")
    md = sum(s.md_count for s in scores)
    n_active = sum(s.num_active for s in scores)
    fa = sum(s.fa_count for s in scores)
    n_inactive = sum(s.num_inactive for s in scores)
    correct = sum(s.offset_correct for s in scores)
    detected_active = sum(s.detected_active for s in scores)

    num = np.array([s.nmse_num for s in scores])
    den = np.array([s.nmse_den for s in scores])
    keep = den > 0
    nmse = nmse_ci = nmse_mean = None
    if keep.any():
        nmse = float(num[keep].sum() / den[keep].sum())
        nmse_ci = ratio_interval(num[keep], den[keep])
        nmse_mean = float(np.mean(num[keep] / den[keep]))
    return Summary(
        trials=len(scores),
        p_md=md / n_active if n_active else None,
        p_md_ci=wilson_interval(md, n_active),
        fa_rate=fa / n_inactive if n_inactive else None,
        fa_ci=wilson_interval(fa, n_inactive),
        offset_accuracy=correct / detected_active if detected_active else None,
        nmse=nmse, nmse_ci=nmse_ci, nmse_trial_mean=nmse_mean,
    )

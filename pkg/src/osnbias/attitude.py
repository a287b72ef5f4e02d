"""Per-user attitude aggregation, polarity, and the mean +/- k*sigma bias rule."""
from __future__ import annotations

import math
from dataclasses import dataclass

POSITIVE = "positive"
NEGATIVE = "negative"
NEUTRAL = "neutral"

OVERLY_POSITIVE = "overly_positive"
OVERLY_NEGATIVE = "overly_negative"
NORMAL = "normal"


@dataclass(frozen=True)
class DistributionStats:
    mean: float
    std_dev: float  # population form (divisor N)
    k: float = 3.0
    n_users: int = 0


@dataclass(frozen=True)
class AttitudeRecord:
    user_id: str
    attitude: float
    polarity: str
    bias: str


def aggregate_attitude(scores, mode: str = "sum") -> float:
    """Aggregate a user's per-post sentiment scores into one attitude value.

    Default is the plain sum; ``mode="mean"`` divides by the number of posts.
    An empty score list gives attitude 0.
    """
    if mode not in ("sum", "mean"):
        raise ValueError(f"unknown attitude mode {mode!r}")
    if not scores:
        return 0.0
    total = float(sum(scores))
    return total / len(scores) if mode == "mean" else total


def classify_polarity(a: float) -> str:
    if a > 0:
        return POSITIVE
    if a < 0:
        return NEGATIVE
    return NEUTRAL


def fit_stats(attitudes, k: float = 3.0) -> DistributionStats:
    """Population mean and standard deviation of the attitude distribution."""
    n = len(attitudes)
    if n == 0:
        raise ValueError("no users")
    if k <= 0:
        raise ValueError("k must be positive")
    mean = sum(attitudes) / n
    var = sum((a - mean) ** 2 for a in attitudes) / n
    return DistributionStats(mean=mean, std_dev=math.sqrt(var), k=k, n_users=n)


def label_bias(a: float, stats: DistributionStats) -> str:
    """Label one attitude against the population: beyond mean +/- k*sigma is biased.

    Boundaries are inclusive, so a zero-variance population labels a == mean
    as overly positive.
    """
    if a >= stats.mean + stats.k * stats.std_dev:
        return OVERLY_POSITIVE
    if a <= stats.mean - stats.k * stats.std_dev:
        return OVERLY_NEGATIVE
    return NORMAL


def label_population(attitudes_by_user: dict, k: float = 3.0) -> tuple:
    """Fit stats over all users, then label each; returns (records, stats)."""
    stats = fit_stats(list(attitudes_by_user.values()), k=k)
    records = [
        AttitudeRecord(
            user_id=uid,
            attitude=a,
            polarity=classify_polarity(a),
            bias=label_bias(a, stats),
        )
        for uid, a in attitudes_by_user.items()
    ]
    return records, stats


def histogram(attitudes, n_bins: int) -> list:
    """Equal-width histogram over [min, max] as (lo, hi, count) triples.

    The maximum value falls in the last bin. A degenerate range (all values
    equal) falls back to bin width 1.
    """
    if not attitudes:
        raise ValueError("empty input")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    lo = min(attitudes)
    hi = max(attitudes)
    width = (hi - lo) / n_bins
    if width == 0:
        width = 1.0
    counts = [0] * n_bins
    for a in attitudes:
        idx = min(int((a - lo) / width), n_bins - 1)
        counts[idx] += 1
    return [(lo + i * width, lo + (i + 1) * width, counts[i]) for i in range(n_bins)]

"""Behavioral feature extraction, min-max normalization, and rank correlations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional

from .attitude import OVERLY_NEGATIVE, OVERLY_POSITIVE

FEATURE_ORDER = ("nr", "li", "nfr", "nfo")

SUBSETS = ("all", "overly_positive", "overly_negative", "above_mean", "below_mean")


@dataclass
class FeatureVector:
    user_id: str
    nr: int  # number of reviews/posts
    li: float  # lifespan in days
    nfr: int  # friends
    nfo: Optional[int]  # followers, absent for datasets without them
    s_score: float  # user attitude
    label: int  # 1 = biased
    normalized: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CorrelationMatrix:
    features: tuple
    values: tuple  # row tuples; None marks an undefined (constant-column) cell
    method: str


def extract_features(user, attitude_rec, dataset_end: datetime) -> FeatureVector:
    """Build the raw behavior features for one user.

    Lifespan runs from account creation (or first post, when creation is
    unknown) to the configured dataset end; a user with no timestamp at all
    gets lifespan 0.
    """
    anchor = user.created_at or user.first_post_at
    li = 0.0
    if anchor is not None:
        li = max(0.0, (dataset_end - anchor).total_seconds() / 86400.0)
    return FeatureVector(
        user_id=user.user_id,
        nr=user.post_count,
        li=li,
        nfr=user.friends_count,
        nfo=user.followers_count,
        s_score=attitude_rec.attitude,
        label=1 if attitude_rec.bias != "normal" else 0,
    )


def min_max_normalize(column) -> list:
    """Map a column onto [0, 1]; a constant column maps to all zeros."""
    if len(column) == 0:
        raise ValueError("empty column")
    lo = min(column)
    hi = max(column)
    if hi == lo:
        return [0.0] * len(column)
    span = hi - lo
    return [(x - lo) / span for x in column]


def pearson(x, y) -> float:
    """Sample correlation coefficient between two equal-length columns."""
    n = len(x)
    if n != len(y):
        raise ValueError("length mismatch")
    if n < 2:
        raise ValueError("need at least 2 observations")
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        raise ValueError("undefined correlation: constant column")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def rank(values) -> list:
    """Average ranks (1-based); ties share the mean of their rank positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for p in range(i, j + 1):
            ranks[order[p]] = avg
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation: Pearson applied to average ranks."""
    return pearson(rank(x), rank(y))


def _subset_filter(vectors, subset: str):
    if subset == "all":
        return list(vectors)
    if subset == OVERLY_POSITIVE:
        return [v for v in vectors if v.label == 1 and v.s_score > 0]
    if subset == OVERLY_NEGATIVE:
        return [v for v in vectors if v.label == 1 and v.s_score < 0]
    mean = sum(v.s_score for v in vectors) / len(vectors) if vectors else 0.0
    if subset == "above_mean":
        return [v for v in vectors if v.s_score > mean]
    if subset == "below_mean":
        return [v for v in vectors if v.s_score < mean]
    raise ValueError(f"unknown subset {subset!r}")


def correlation_matrix(vectors, method: str = "spearman",
                       subset: str = "all") -> CorrelationMatrix:
    """Pairwise correlations among behavior features and attitude.

    The followers column is included only when every vector carries it.
    Constant columns produce None cells rather than a made-up value.
    """
    if method not in ("pearson", "spearman"):
        raise ValueError(f"unknown method {method!r}")
    chosen = _subset_filter(vectors, subset)
    if len(chosen) < 2:
        raise ValueError(f"subset {subset!r} has {len(chosen)} users; need >= 2")
    names = ["nr", "li", "nfr"]
    if all(v.nfo is not None for v in chosen):
        names.append("nfo")
    names.append("s_score")
    columns = {name: [float(getattr(v, name)) for v in chosen] for name in names}
    corr = pearson if method == "pearson" else spearman
    values = []
    for a in names:
        row = []
        for b in names:
            try:
                row.append(corr(columns[a], columns[b]))
            except ValueError:
                row.append(None)
        values.append(tuple(row))
    return CorrelationMatrix(features=tuple(names), values=tuple(values),
                             method=method)

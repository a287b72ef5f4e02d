"""Seeded synthetic social-network population with planted behavior signals.

Each user gets latent standard-normal behavior factors; the latent attitude
is a linear combination of those factors (coefficients = configured effect
sizes) plus residual noise, so the factor-attitude correlations are the
effect sizes by construction. A configured fraction of users is made biased
by shifting their factors along the effect direction far enough to clear the
population's mean +/- 3 sigma band. Post texts are composed from the bundled
lexicon so that the scored, summed sentiment recovers each user's latent
attitude up to a small quantization error.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .ingest import FieldMap

DEFAULT_EFFECTS = {"nr": 0.7, "li": 0.15, "nfr": 0.2, "nfo": 0.2}

# words whose lexicon polarity is exactly +1 / -1; fillers are not in the lexicon
_POS_WORDS = ("good", "great", "nice", "tasty", "friendly", "fresh", "pleasant")
_NEG_WORDS = ("bad", "poor", "slow", "rude", "stale", "noisy", "bland")
_FILLERS = ("the", "service", "was", "and", "it", "we", "visited", "place",
            "this", "again")

# bias shift magnitude: 8 + 3*|N(0,1)|, comfortably beyond 3 sigma at small
# bias fractions
_SHIFT_BASE = 8.0
_SHIFT_SPREAD = 3.0

POSTS_FIELD_MAP = FieldMap(
    source_kind="json_lines",
    post_fields={"author_id": "uid", "text": "body", "timestamp": "ts"},
)
USERS_FIELD_MAP = FieldMap(
    source_kind="csv",
    user_fields={"user_id": "user_id", "friends_count": "friends",
                 "followers_count": "followers", "created_at": "created"},
)


@dataclass
class SynthConfig:
    n_users: int = 200
    seed: int = 0
    target_bias_fraction: float = 0.03
    effect_sizes: dict = field(default_factory=lambda: dict(DEFAULT_EFFECTS))
    noise_sd: float = 0.0
    posts_mean: float = 8.0
    posts_sd: float = 3.0
    include_followers: bool = True
    dataset_end: datetime = datetime(2021, 1, 1, tzinfo=timezone.utc)

    def __post_init__(self):
        if self.n_users < 10:
            raise ValueError("n_users must be >= 10")
        if not 0.0 < self.target_bias_fraction < 0.5:
            raise ValueError("target_bias_fraction must be in (0, 0.5)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if any(abs(e) >= 1 for e in self.effect_sizes.values()):
            raise ValueError("each effect size must satisfy |e| < 1")
        if sum(e * e for e in self.effect_sizes.values()) >= 1.0:
            raise ValueError("effect sizes jointly imply |r| >= 1")


@dataclass(frozen=True)
class TruthRow:
    user_id: str
    latent_attitude: float
    bias_label: int  # 1 = biased


_FACTORS = ("nr", "li", "nfr", "nfo")


def _draw_latents(cfg: SynthConfig) -> dict:
    """All label-relevant randomness, consumed in one fixed order."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_users
    g = {f: rng.standard_normal(n) for f in _FACTORS}
    eps = rng.standard_normal(n)
    biased = rng.random(n) < cfg.target_bias_fraction
    amp = _SHIFT_BASE + _SHIFT_SPREAD * np.abs(rng.standard_normal(n))
    sign = np.where(rng.random(n) < 0.5, 1.0, -1.0)

    effects = {f: cfg.effect_sizes.get(f, 0.0) for f in _FACTORS}
    sum_sq = sum(e * e for e in effects.values())
    shift = np.where(biased, sign * amp, 0.0)
    for f in _FACTORS:
        g[f] = g[f] + shift * effects[f] / sum_sq
    t0 = sum(effects[f] * g[f] for f in _FACTORS)  # zero-noise attitude
    sigma_e = math.sqrt(1.0 - sum_sq + cfg.noise_sd ** 2)
    t = t0 + sigma_e * eps
    return {"g": g, "t0": t0, "t": t}


def _bias_labels(t0: np.ndarray) -> np.ndarray:
    mu = float(np.mean(t0))
    sigma = float(np.std(t0))
    return ((t0 >= mu + 3 * sigma) | (t0 <= mu - 3 * sigma)).astype(int)


def planted_truth(cfg: SynthConfig) -> list:
    """Ground-truth table, re-derivable from the seed without writing files."""
    lat = _draw_latents(cfg)
    labels = _bias_labels(lat["t0"])
    return [
        TruthRow(user_id=f"u{i:06d}", latent_attitude=float(lat["t"][i]),
                 bias_label=int(labels[i]))
        for i in range(cfg.n_users)
    ]


def _feature_values(cfg: SynthConfig, g: dict) -> dict:
    nr = np.maximum(1, np.rint(cfg.posts_mean + cfg.posts_sd * g["nr"])).astype(int)
    li = np.maximum(1, np.rint(400 + 120 * g["li"])).astype(int)
    nfr = np.maximum(0, np.rint(80 + 25 * g["nfr"])).astype(int)
    nfo = np.maximum(0, np.rint(120 + 35 * g["nfo"])).astype(int)
    return {"nr": nr, "li": li, "nfr": nfr, "nfo": nfo}


def _compose_sentence(target: float, rng) -> tuple:
    """One sentence scoring approximately *target* under the bundled lexicon.

    Uses c unit-polarity words among n tokens, which scores sign * c/sqrt(n).
    Returns (tokens, achieved_score).
    """
    target = max(-25.0, min(25.0, target))
    if abs(target) < 0.05:
        tokens = [str(rng.choice(_FILLERS)) for _ in range(2)]
        return tokens, 0.0
    sgn = 1.0 if target > 0 else -1.0
    mag = abs(target)
    c = max(1, int(round(mag * mag)))
    n = max(c, int(round((c / mag) ** 2)))
    words = _POS_WORDS if sgn > 0 else _NEG_WORDS
    tokens = [str(rng.choice(words)) for _ in range(c)]
    tokens += [str(rng.choice(_FILLERS)) for _ in range(n - c)]
    return tokens, sgn * c / math.sqrt(n)


def generate_population(cfg: SynthConfig, out_dir) -> tuple:
    """Write posts.jsonl, users.csv, and truth.csv under *out_dir*.

    Returns (posts_path, users_path, truth) with truth identical to
    :func:`planted_truth` for the same config.
    """
    os.makedirs(out_dir, exist_ok=True)
    lat = _draw_latents(cfg)
    labels = _bias_labels(lat["t0"])
    feats = _feature_values(cfg, lat["g"])
    # cosmetic randomness (word choice, timestamps) kept separate from the
    # label-relevant stream so planted_truth stays byte-for-byte consistent
    deco = np.random.default_rng([cfg.seed, 1])

    posts_path = os.path.join(out_dir, "posts.jsonl")
    users_path = os.path.join(out_dir, "users.csv")
    truth_path = os.path.join(out_dir, "truth.csv")
    truth = []

    with open(posts_path + ".tmp", "w", encoding="utf-8") as pf, \
            open(users_path + ".tmp", "w", encoding="utf-8", newline="") as uf:
        writer = csv.writer(uf)
        writer.writerow(["user_id", "friends", "followers", "created"])
        for i in range(cfg.n_users):
            uid = f"u{i:06d}"
            n_posts = int(feats["nr"][i])
            li_days = int(feats["li"][i])
            created = cfg.dataset_end - timedelta(days=li_days)
            followers = str(int(feats["nfo"][i])) if cfg.include_followers else ""
            writer.writerow([uid, int(feats["nfr"][i]), followers,
                             created.isoformat()])
            remaining = float(lat["t"][i])
            for j in range(n_posts):
                # chunks of at most +/-4 per post; the last post absorbs the rest
                if j == n_posts - 1:
                    per_post = remaining
                else:
                    per_post = max(-4.0, min(4.0, remaining))
                tokens, achieved = _compose_sentence(per_post, deco)
                remaining -= achieved
                offset = float(deco.uniform(0, li_days * 86400.0))
                ts = created + timedelta(seconds=int(offset))
                pf.write(json.dumps({"uid": uid, "body": " ".join(tokens) + ".",
                                     "ts": ts.isoformat()}) + "\n")
            truth.append(TruthRow(user_id=uid,
                                  latent_attitude=float(lat["t"][i]),
                                  bias_label=int(labels[i])))
    os.replace(posts_path + ".tmp", posts_path)
    os.replace(users_path + ".tmp", users_path)

    with open(truth_path + ".tmp", "w", encoding="utf-8", newline="") as tf:
        writer = csv.writer(tf)
        writer.writerow(["user_id", "latent_attitude", "bias_label"])
        for row in truth:
            writer.writerow([row.user_id, repr(row.latent_attitude),
                             row.bias_label])
    os.replace(truth_path + ".tmp", truth_path)
    return posts_path, users_path, truth

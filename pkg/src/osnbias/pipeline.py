"""End-to-end pipeline: ingest -> score -> label -> features -> train -> evaluate.

Every stage is a pure function of (inputs, config, seed), and every artifact
is written atomically, so reruns with the same config produce byte-identical
CSV outputs.
"""
from __future__ import annotations

import csv
import importlib.resources
import json
import math
import os
from datetime import datetime, timezone

import numpy as np

from . import attitude as att
from . import evaluation as ev
from . import features as ft
from . import mlp
from . import synth as sy
from .ingest import FieldMap, build_user_table, read_posts, read_users
from .sentiment import load_lexicon, score_text


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


DEFAULT_TRAIN = {
    "hidden": [4, 2], "threshold": 0.01, "max_epochs": 1000, "rep": 1,
    "eta_plus": 1.2, "eta_minus": 0.5, "delta_zero": 0.1, "delta_max": 50.0,
    "delta_min": 1e-6, "init_scale": 0.5, "seed": 0, "class_threshold": 0.5,
    "balance": True,
}

REQUIRED_KEYS = ("output_dir", "lexicon")


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return normalize_config(cfg)


def normalize_config(cfg: dict) -> dict:
    for key in REQUIRED_KEYS:
        if key not in cfg:
            raise ConfigError(f"config is missing required key {key!r}")
    cfg.setdefault("k", 3.0)
    cfg.setdefault("attitude_mode", "sum")
    cfg.setdefault("histogram_bins", 40)
    cfg.setdefault("correlation", {"method": "spearman", "subsets": ["all"]})
    cfg.setdefault("train", {})
    cfg.setdefault("split", {"test_fraction": 0.2, "seed": 0})
    cfg.setdefault("target", "biased")
    return cfg


def _lexicon_path(cfg):
    if cfg["lexicon"] == "builtin":
        return importlib.resources.files("osnbias.data").joinpath("lexicon.tsv")
    return cfg["lexicon"]


def _field_map(doc: dict) -> FieldMap:
    kwargs = dict(doc)
    for key in ("period_start", "period_end"):
        if kwargs.get(key):
            kwargs[key] = datetime.fromisoformat(kwargs[key]).astimezone(timezone.utc)
    return FieldMap(**kwargs)


def _parse_end(cfg) -> datetime:
    value = cfg.get("dataset_end")
    if value is None:
        raise ConfigError("config is missing required key 'dataset_end'")
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def atomic_write_rows(path, header, rows) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def atomic_write_text(path, text) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


class PipelineRun:
    """Executes pipeline stages in order, caching intermediate state."""

    def __init__(self, cfg: dict):
        self.cfg = normalize_config(dict(cfg))
        self.out_dir = cfg["output_dir"]
        os.makedirs(self.out_dir, exist_ok=True)
        self.notes = []  # lines for the run report
        self.table = None
        self.scored_posts = None
        self.records = None
        self.stats = None
        self.vectors = None

    # -- synth ------------------------------------------------------------
    def stage_synth(self):
        doc = self.cfg.get("synth")
        if doc is None:
            raise StageError("synth", "config has no 'synth' section")
        kwargs = dict(doc)
        if "dataset_end" in kwargs:
            kwargs["dataset_end"] = datetime.fromisoformat(
                kwargs["dataset_end"]).astimezone(timezone.utc)
        scfg = sy.SynthConfig(**kwargs)
        synth_dir = os.path.join(self.out_dir, "synth")
        posts, users, truth = sy.generate_population(scfg, synth_dir)
        self.notes.append(f"synth: wrote {len(truth)} users to {synth_dir}")
        # make the generated files the dataset for downstream stages
        self.cfg.setdefault("dataset", {})
        self.cfg["dataset"].update({
            "posts": posts,
            "users": users,
            "posts_field_map": {
                "source_kind": "json_lines",
                "post_fields": dict(sy.POSTS_FIELD_MAP.post_fields),
            },
            "users_field_map": {
                "source_kind": "csv",
                "user_fields": dict(sy.USERS_FIELD_MAP.user_fields),
            },
        })
        if "dataset_end" not in self.cfg:
            self.cfg["dataset_end"] = scfg.dataset_end.isoformat()
        return synth_dir

    # -- ingest -----------------------------------------------------------
    def stage_ingest(self):
        ds = self.cfg.get("dataset")
        if ds is None:
            if "synth" in self.cfg:
                self.stage_synth()
                ds = self.cfg["dataset"]
            else:
                raise StageError("ingest", "config has no 'dataset' section")
        for key in ("posts", "users", "posts_field_map", "users_field_map"):
            if key not in ds:
                raise StageError("ingest", f"dataset config is missing key {key!r}")
        posts = read_posts(ds["posts"], _field_map(ds["posts_field_map"]))
        users = read_users(ds["users"], _field_map(ds["users_field_map"]))
        self.table = build_user_table(users, posts)
        self.notes.append(
            f"ingest: {len(self.table)} users; "
            f"posts accepted={posts.accepted} skipped={posts.skipped}; "
            f"profiles accepted={users.accepted} skipped={users.skipped}")
        atomic_write_rows(
            os.path.join(self.out_dir, "users.csv"),
            ["user_id", "friends_count", "followers_count", "created_at",
             "first_post_at", "last_post_at", "post_count"],
            [[u.user_id, u.friends_count, _fmt(u.followers_count),
              _fmt(u.created_at and u.created_at.isoformat()),
              _fmt(u.first_post_at and u.first_post_at.isoformat()),
              _fmt(u.last_post_at and u.last_post_at.isoformat()),
              u.post_count]
             for u in sorted(self.table.values(), key=lambda u: u.user_id)])
        return self.table

    # -- score ------------------------------------------------------------
    def stage_score(self):
        if self.table is None:
            self.stage_ingest()
        lex = load_lexicon(_lexicon_path(self.cfg))
        ds = self.cfg["dataset"]
        posts = read_posts(ds["posts"], _field_map(ds["posts_field_map"]))
        rows = []
        for u in self.table.values():
            u.sentiment_scores = []
        for post in posts:
            score = score_text(post.text, lex)
            self.table[post.author_id].sentiment_scores.append(score)
            rows.append([post.author_id, post.timestamp.isoformat(), repr(score)])
        self.scored_posts = rows
        atomic_write_rows(os.path.join(self.out_dir, "posts_scored.csv"),
                          ["author_id", "timestamp", "score"], rows)
        self.notes.append(f"score: scored {len(rows)} posts")
        return rows

    # -- label ------------------------------------------------------------
    def stage_label(self):
        if self.scored_posts is None:
            self.stage_score()
        mode = self.cfg["attitude_mode"]
        attitudes = {
            uid: att.aggregate_attitude(u.sentiment_scores, mode=mode)
            for uid, u in self.table.items()
        }
        self.records, self.stats = att.label_population(attitudes, k=self.cfg["k"])
        self.records.sort(key=lambda r: r.user_id)
        atomic_write_rows(
            os.path.join(self.out_dir, "attitudes.csv"),
            ["user_id", "attitude", "polarity", "bias"],
            [[r.user_id, repr(r.attitude), r.polarity, r.bias]
             for r in self.records])
        hist = att.histogram([r.attitude for r in self.records],
                             self.cfg["histogram_bins"])
        atomic_write_rows(os.path.join(self.out_dir, "histogram.csv"),
                          ["bin_low", "bin_high", "count"],
                          [[repr(lo), repr(hi), c] for lo, hi, c in hist])
        n_normal = sum(1 for r in self.records if r.bias == att.NORMAL)
        self.notes.append(
            f"label: mean={self.stats.mean:.6g} std={self.stats.std_dev:.6g} "
            f"k={self.stats.k} normal={n_normal}/{len(self.records)}")
        return self.records, self.stats

    # -- features ---------------------------------------------------------
    def stage_features(self):
        if self.records is None:
            self.stage_label()
        end = _parse_end(self.cfg)
        vectors = []
        for rec in self.records:
            vectors.append(ft.extract_features(self.table[rec.user_id], rec, end))
        names = ["nr", "li", "nfr"]
        if all(v.nfo is not None for v in vectors):
            names.append("nfo")
        for name in names:
            col = [float(getattr(v, name)) for v in vectors]
            for v, norm in zip(vectors, ft.min_max_normalize(col)):
                v.normalized[name] = norm
        self.vectors = vectors
        self.feature_names = names
        atomic_write_rows(
            os.path.join(self.out_dir, "features.csv"),
            ["user_id", "nr", "li", "nfr", "nfo", "s_score", "label"]
            + [f"norm_{n}" for n in names],
            [[v.user_id, v.nr, repr(v.li), v.nfr, _fmt(v.nfo), repr(v.s_score),
              v.label] + [repr(v.normalized[n]) for n in names]
             for v in vectors])
        return vectors

    # -- correlate --------------------------------------------------------
    def stage_correlate(self):
        if self.vectors is None:
            self.stage_features()
        doc = self.cfg["correlation"]
        method = doc.get("method", "spearman")
        outputs = []
        for subset in doc.get("subsets", ["all"]):
            try:
                matrix = ft.correlation_matrix(self.vectors, method=method,
                                               subset=subset)
            except ValueError as exc:
                self.notes.append(f"correlate: subset {subset!r} skipped ({exc})")
                continue
            path = os.path.join(self.out_dir,
                                f"correlations_{subset}_{method}.csv")
            atomic_write_rows(
                path, ["feature", *matrix.features],
                [[name] + [("" if v is None else repr(v)) for v in row]
                 for name, row in zip(matrix.features, matrix.values)])
            self.notes.append(
                f"correlate: subset {subset!r} n="
                f"{len(ft._subset_filter(self.vectors, subset))} -> {path}")
            outputs.append(path)
        return outputs

    # -- train ------------------------------------------------------------
    def _matrix_and_target(self):
        if self.vectors is None:
            self.stage_features()
        vectors = self.vectors
        if self.cfg["target"] == "among_biased":
            vectors = [v for v in vectors if v.label == 1]
            if len(vectors) < 2:
                raise StageError("train", "too few biased users for among-biased mode")
            y = np.array([1 if v.s_score > 0 else 0 for v in vectors])
        elif self.cfg["target"] == "biased":
            y = np.array([v.label for v in vectors])
        else:
            raise ConfigError(f"unknown target {self.cfg['target']!r}")
        X = np.array([[v.normalized[n] for n in self.feature_names]
                      for v in vectors])
        ids = [v.user_id for v in vectors]
        return X, y, ids

    def _split(self, y):
        doc = self.cfg["split"]
        frac = float(doc.get("test_fraction", 0.2))
        rng = np.random.default_rng(int(doc.get("seed", 0)))
        train_idx, test_idx = [], []
        for cls in np.unique(y):
            idx = np.flatnonzero(y == cls)
            rng.shuffle(idx)
            n_test = max(1, int(round(len(idx) * frac)))
            test_idx.extend(idx[:n_test])
            train_idx.extend(idx[n_test:])
        return np.sort(np.array(train_idx)), np.sort(np.array(test_idx))

    def stage_train(self):
        X, y, _ = self._matrix_and_target()
        if len(np.unique(y)) < 2:
            raise StageError("train", "degenerate target: only one class present")
        train_idx, test_idx = self._split(y)
        self.split_ = (train_idx, test_idx)
        params = {**DEFAULT_TRAIN, **self.cfg["train"]}
        clf = mlp.BiasClassifier(**params)
        try:
            clf.fit(X[train_idx], y[train_idx])
        except ValueError as exc:
            raise StageError("train", str(exc)) from exc
        self.classifier_ = clf
        bounds = {}
        for name in self.feature_names:
            col = [float(getattr(v, name)) for v in self.vectors]
            bounds[name] = (min(col), max(col))
        mlp.save_model(os.path.join(self.out_dir, "model.json"), clf.network_,
                       self.feature_names, bounds,
                       class_threshold=params["class_threshold"])
        atomic_write_rows(os.path.join(self.out_dir, "train_history.csv"),
                          ["epoch", "sse"],
                          [[i + 1, repr(s)]
                           for i, s in enumerate(clf.history_.sse)])
        self.notes.append(
            f"train: {len(train_idx)} train / {len(test_idx)} test; "
            f"epochs={clf.history_.epochs_run} "
            f"stop={clf.history_.stop_reason} "
            f"final_sse={clf.history_.sse[-1]:.6g}")
        return clf

    # -- evaluate ---------------------------------------------------------
    def stage_evaluate(self):
        if not hasattr(self, "classifier_"):
            self.stage_train()
        X, y, _ = self._matrix_and_target()
        _, test_idx = self.split_
        X_test, y_test = X[test_idx], y[test_idx]
        pred = self.classifier_.predict(X_test)
        counts = ev.contingency(pred, y_test, row_normalize=False)
        normalized = ev.contingency(pred, y_test, row_normalize=True)
        plain = ev.accuracy(counts)
        balanced = ev.accuracy(normalized)
        gw = ev.generalized_weights(self.classifier_.network_, X_test)
        atomic_write_rows(
            os.path.join(self.out_dir, "gw.csv"),
            ["observation", *self.feature_names],
            [[i] + [repr(float(v)) for v in row] for i, row in enumerate(gw)])
        rows = []
        for label, m in (("counts", counts), ("row_percent", normalized)):
            (nn, np_), (pn, pp) = m.cells
            rows.append([label, repr(nn), repr(np_), repr(pn), repr(pp)])
        rows.append(["accuracy_plain_percent", repr(plain), "", "", ""])
        rows.append(["accuracy_row_normalized_percent", repr(balanced), "", "", ""])
        atomic_write_rows(
            os.path.join(self.out_dir, "evaluation.csv"),
            ["row", "obs_neg_pred_neg", "obs_neg_pred_pos",
             "obs_pos_pred_neg", "obs_pos_pred_pos"], rows)
        lines = ["evaluation (held-out test set)",
                 f"contingency counts: {counts.cells}",
                 f"contingency row %:  {normalized.cells}",
                 f"plain accuracy: {plain:.4f}%",
                 f"row-normalized accuracy (balanced): {balanced:.4f}%",
                 "generalized weights (per feature min/median/max):"]
        for j, name in enumerate(self.feature_names):
            col = gw[:, j]
            lines.append(f"  {name}: {col.min():.6g} / "
                         f"{float(np.median(col)):.6g} / {col.max():.6g}")
        atomic_write_text(os.path.join(self.out_dir, "evaluation.txt"),
                          "\n".join(lines) + "\n")
        self.notes.append(f"evaluate: plain={plain:.4f}% balanced={balanced:.4f}%")
        self.results_ = {"plain_accuracy": plain, "balanced_accuracy": balanced,
                         "counts": counts, "normalized": normalized}
        return self.results_

    # -- report -----------------------------------------------------------
    def write_report(self):
        lines = ["osnbias run report",
                 "config:",
                 json.dumps(self.cfg, indent=2, sort_keys=True, default=str),
                 "stages:"]
        lines += [f"  {note}" for note in self.notes]
        lines.append(f"completed at {datetime.now(timezone.utc).isoformat()}")
        atomic_write_text(os.path.join(self.out_dir, "report.txt"),
                          "\n".join(lines) + "\n")


COMMANDS = ("synth", "ingest", "score", "label", "correlate", "train",
            "evaluate", "pipeline")


def run(command: str, cfg: dict) -> PipelineRun:
    """Run one subcommand (and whatever earlier stages it needs)."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown subcommand {command!r}")
    runner = PipelineRun(cfg)
    if command == "synth":
        runner.stage_synth()
    elif command == "ingest":
        runner.stage_ingest()
    elif command == "score":
        runner.stage_score()
    elif command == "label":
        runner.stage_label()
    elif command == "correlate":
        runner.stage_correlate()
    elif command == "train":
        runner.stage_train()
    elif command == "evaluate":
        runner.stage_evaluate()
    else:
        runner.stage_correlate()
        runner.stage_evaluate()
    runner.write_report()
    return runner

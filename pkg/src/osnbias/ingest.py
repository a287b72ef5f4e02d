"""Streaming ingestion of posts and user profiles from JSON-lines / CSV files.

Field names differ per dataset, so a :class:`FieldMap` tells the readers which
source column feeds which canonical field. Malformed rows are skipped and
tallied; a stream where more than half the rows fail is treated as a schema
mismatch.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterator, Optional


class IngestError(Exception):
    """Unrecoverable ingestion failure (unreadable file, schema mismatch)."""


class SchemaMismatchError(IngestError):
    """More than half of the rows in a file failed to parse."""


REQUIRED_POST_FIELDS = ("author_id", "text", "timestamp")


@dataclass(frozen=True)
class FieldMap:
    """Maps canonical field names onto source columns/keys for one dataset.

    ``timestamp_format`` is either ``"iso"``, ``"epoch"`` (seconds), or a
    ``strptime`` format string. Optional ``period_start``/``period_end``
    bounds cause out-of-period posts to be skipped and tallied.
    """

    source_kind: str  # "json_lines" or "csv"
    post_fields: dict = field(default_factory=dict)
    user_fields: dict = field(default_factory=dict)
    timestamp_format: str = "iso"
    period_start: Optional[datetime] = None
    period_end: Optional[datetime] = None

    def __post_init__(self):
        if self.source_kind not in ("json_lines", "csv"):
            raise ValueError(f"unknown source_kind {self.source_kind!r}")
        if self.post_fields:
            missing = [f for f in REQUIRED_POST_FIELDS if f not in self.post_fields]
            if missing:
                raise ValueError(f"post_fields missing mappings: {missing}")
        if self.user_fields and "user_id" not in self.user_fields:
            raise ValueError("user_fields must map user_id")


@dataclass(frozen=True)
class RawPost:
    author_id: str
    text: str
    timestamp: datetime


@dataclass
class UserRecord:
    user_id: str
    friends_count: int = 0
    followers_count: Optional[int] = None
    created_at: Optional[datetime] = None
    first_post_at: Optional[datetime] = None
    last_post_at: Optional[datetime] = None
    post_count: int = 0
    sentiment_scores: list = field(default_factory=list)
    # profile snapshot time, used to pick the freshest duplicate row
    snapshot_at: Optional[datetime] = None


def parse_timestamp(value, fmt: str) -> datetime:
    if value is None or value == "":
        raise ValueError("empty timestamp")
    if fmt == "epoch":
        dt = datetime.fromtimestamp(float(value), tz=timezone.utc)
    elif fmt == "iso":
        dt = datetime.fromisoformat(str(value))
    else:
        dt = datetime.strptime(str(value), fmt)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _iter_rows(path, source_kind: str) -> Iterator:
    """Yield raw row dicts; yields None for an unparseable row."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with fh:
        if source_kind == "csv":
            for row in csv.DictReader(fh):
                yield row
        else:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    yield None
                    continue
                yield obj if isinstance(obj, dict) else None


class RecordStream:
    """Iterator over parsed records with skip accounting.

    ``skipped`` / ``accepted`` counters update as the stream is consumed.
    Raises :class:`SchemaMismatchError` on exhaustion when more than half of
    the rows were malformed.
    """

    def __init__(self, make_gen):
        self.accepted = 0
        self.skipped = 0
        self._gen = make_gen(self)

    def __iter__(self):
        return self

    def __next__(self):
        try:
            return next(self._gen)
        except StopIteration:
            total = self.accepted + self.skipped
            if total and self.skipped * 2 > total:
                raise SchemaMismatchError(
                    f"{self.skipped}/{total} rows malformed: schema mismatch"
                ) from None
            raise


def read_posts(path, fmap: FieldMap) -> RecordStream:
    """Stream RawPosts from *path*; malformed rows are skipped and tallied."""

    def gen(stream):
        for row in _iter_rows(path, fmap.source_kind):
            post = _parse_post(row, fmap) if row is not None else None
            if post is None:
                stream.skipped += 1
            else:
                stream.accepted += 1
                yield post

    return RecordStream(gen)


def _parse_post(row, fmap: FieldMap) -> Optional[RawPost]:
    try:
        author = str(row[fmap.post_fields["author_id"]])
        text = str(row[fmap.post_fields["text"]])
        ts = parse_timestamp(row[fmap.post_fields["timestamp"]], fmap.timestamp_format)
    except (KeyError, ValueError, TypeError, OverflowError):
        return None
    if not author:
        return None
    if fmap.period_start is not None and ts < fmap.period_start:
        return None
    if fmap.period_end is not None and ts > fmap.period_end:
        return None
    return RawPost(author_id=author, text=text, timestamp=ts)


def read_users(path, fmap: FieldMap) -> RecordStream:
    """Stream partial UserRecords (profile rows); duplicates are not merged here."""

    def gen(stream):
        for row in _iter_rows(path, fmap.source_kind):
            user = _parse_user(row, fmap) if row is not None else None
            if user is None:
                stream.skipped += 1
            else:
                stream.accepted += 1
                yield user

    return RecordStream(gen)


def _opt_int(row, key) -> Optional[int]:
    if key is None or key not in row or row[key] in (None, ""):
        return None
    return int(float(row[key]))


def _parse_user(row, fmap: FieldMap) -> Optional[UserRecord]:
    fields = fmap.user_fields
    try:
        uid = str(row[fields["user_id"]])
        if not uid:
            return None
        friends = _opt_int(row, fields.get("friends_count"))
        followers = _opt_int(row, fields.get("followers_count"))
        if friends is not None and friends < 0:
            return None
        if followers is not None and followers < 0:
            return None
        created = snapshot = None
        key = fields.get("created_at")
        if key is not None and row.get(key) not in (None, ""):
            created = parse_timestamp(row[key], fmap.timestamp_format)
        key = fields.get("snapshot_at")
        if key is not None and row.get(key) not in (None, ""):
            snapshot = parse_timestamp(row[key], fmap.timestamp_format)
    except (KeyError, ValueError, TypeError, OverflowError):
        return None
    return UserRecord(
        user_id=uid,
        friends_count=friends if friends is not None else 0,
        followers_count=followers,
        created_at=created,
        snapshot_at=snapshot,
    )


def build_user_table(users, posts) -> dict:
    """Merge profile rows and posts into one UserRecord per user id.

    Duplicate profile rows: the row with the latest snapshot timestamp wins
    (file order breaks ties / missing snapshots). Users seen only in posts get
    default profile values. Post aggregation is order-insensitive.
    """
    table: dict[str, UserRecord] = {}
    best_key: dict[str, tuple] = {}
    for seq, user in enumerate(users):
        key = (user.snapshot_at or datetime.min.replace(tzinfo=timezone.utc), seq)
        if user.user_id not in table or key >= best_key[user.user_id]:
            prior = table.get(user.user_id)
            if prior is not None:
                # keep post aggregates accumulated so far
                user.post_count = prior.post_count
                user.first_post_at = prior.first_post_at
                user.last_post_at = prior.last_post_at
            table[user.user_id] = user
            best_key[user.user_id] = key
    for post in posts:
        rec = table.get(post.author_id)
        if rec is None:
            rec = UserRecord(user_id=post.author_id)
            table[post.author_id] = rec
        rec.post_count += 1
        if rec.first_post_at is None or post.timestamp < rec.first_post_at:
            rec.first_post_at = post.timestamp
        if rec.last_post_at is None or post.timestamp > rec.last_post_at:
            rec.last_post_at = post.timestamp
    return table

import json
from datetime import datetime, timezone

import pytest

from osnbias.ingest import (FieldMap, IngestError, SchemaMismatchError,
                            UserRecord, build_user_table, read_posts,
                            read_users)

POST_MAP = FieldMap(source_kind="json_lines",
                    post_fields={"author_id": "uid", "text": "body",
                                 "timestamp": "ts"})
USER_MAP = FieldMap(source_kind="csv",
                    user_fields={"user_id": "user_id",
                                 "friends_count": "friends",
                                 "followers_count": "followers",
                                 "created_at": "created"})


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


def utc(s):
    return datetime.fromisoformat(s).replace(tzinfo=timezone.utc)


class TestFieldMap:
    def test_requires_post_mappings(self):
        with pytest.raises(ValueError, match="missing"):
            FieldMap(source_kind="json_lines", post_fields={"author_id": "u"})

    def test_requires_user_id(self):
        with pytest.raises(ValueError, match="user_id"):
            FieldMap(source_kind="csv", user_fields={"friends_count": "f"})

    def test_unknown_source_kind(self):
        with pytest.raises(ValueError):
            FieldMap(source_kind="parquet")


class TestReadPosts:
    def test_three_rows_in_order(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        write_jsonl(path, [
            {"uid": "a", "body": "hi", "ts": "2020-01-01T00:00:00"},
            {"uid": "b", "body": "yo", "ts": "2020-01-02T00:00:00"},
            {"uid": "a", "body": "ok", "ts": "2020-01-03T00:00:00"},
        ])
        posts = list(read_posts(path, POST_MAP))
        assert [p.author_id for p in posts] == ["a", "b", "a"]
        assert posts[0].text == "hi"
        assert posts[0].timestamp == utc("2020-01-01T00:00:00")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        path.write_text("")
        stream = read_posts(path, POST_MAP)
        assert list(stream) == []
        assert stream.skipped == 0

    def test_bad_timestamp_skipped_and_tallied(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        write_jsonl(path, [
            {"uid": "a", "body": "1", "ts": "2020-01-01T00:00:00"},
            {"uid": "b", "body": "2", "ts": "not a date"},
            {"uid": "c", "body": "3", "ts": "2020-01-03T00:00:00"},
            {"uid": "d", "body": "4", "ts": "2020-01-04T00:00:00"},
        ])
        stream = read_posts(path, POST_MAP)
        posts = list(stream)
        assert len(posts) == 3
        assert stream.skipped == 1

    def test_unreadable_file_fatal(self, tmp_path):
        with pytest.raises(IngestError):
            list(read_posts(tmp_path / "missing.jsonl", POST_MAP))

    def test_majority_malformed_is_schema_mismatch(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        write_jsonl(path, [
            {"uid": "a", "body": "1", "ts": "2020-01-01T00:00:00"},
            {"wrong": 1}, {"wrong": 2}, {"wrong": 3},
        ])
        with pytest.raises(SchemaMismatchError):
            list(read_posts(path, POST_MAP))

    def test_period_bounds_filter(self, tmp_path):
        fmap = FieldMap(source_kind="json_lines",
                        post_fields=POST_MAP.post_fields,
                        period_start=utc("2020-01-01T00:00:00"),
                        period_end=utc("2020-01-31T00:00:00"))
        path = tmp_path / "posts.jsonl"
        write_jsonl(path, [
            {"uid": "a", "body": "in", "ts": "2020-01-15T00:00:00"},
            {"uid": "a", "body": "out", "ts": "2021-06-15T00:00:00"},
        ])
        stream = read_posts(path, fmap)
        assert [p.text for p in stream] == ["in"]
        assert stream.skipped == 1

    def test_epoch_timestamps(self, tmp_path):
        fmap = FieldMap(source_kind="json_lines",
                        post_fields=POST_MAP.post_fields,
                        timestamp_format="epoch")
        path = tmp_path / "posts.jsonl"
        write_jsonl(path, [{"uid": "a", "body": "x", "ts": 0}])
        posts = list(read_posts(path, fmap))
        assert posts[0].timestamp == utc("1970-01-01T00:00:00")


class TestReadUsers:
    def test_basic_profile_rows(self, tmp_path):
        path = tmp_path / "users.csv"
        path.write_text("user_id,friends,followers,created\n"
                        "a,3,10,2020-01-01T00:00:00\n"
                        "b,3,,\n")
        users = list(read_users(path, USER_MAP))
        assert users[0].friends_count == 3
        assert users[0].followers_count == 10
        assert users[1].followers_count is None
        assert users[1].created_at is None

    def test_unmapped_followers_absent(self, tmp_path):
        fmap = FieldMap(source_kind="csv",
                        user_fields={"user_id": "user_id",
                                     "friends_count": "friends"})
        path = tmp_path / "users.csv"
        path.write_text("user_id,friends\na,5\n")
        users = list(read_users(path, fmap))
        assert users[0].followers_count is None
        assert users[0].friends_count == 5

    def test_duplicates_both_yielded(self, tmp_path):
        path = tmp_path / "users.csv"
        path.write_text("user_id,friends,followers,created\na,1,,\na,2,,\n")
        users = list(read_users(path, USER_MAP))
        assert len(users) == 2


class TestBuildUserTable:
    def make_posts(self, specs):
        from osnbias.ingest import RawPost
        return [RawPost(author_id=a, text="t", timestamp=utc(ts))
                for a, ts in specs]

    def test_post_counts(self):
        users = [UserRecord(user_id="a"), UserRecord(user_id="b")]
        posts = self.make_posts([("a", "2020-01-01T00:00:00"),
                                 ("a", "2020-01-02T00:00:00"),
                                 ("b", "2020-01-03T00:00:00")])
        table = build_user_table(users, posts)
        assert table["a"].post_count == 2
        assert table["b"].post_count == 1
        assert table["a"].first_post_at == utc("2020-01-01T00:00:00")
        assert table["a"].last_post_at == utc("2020-01-02T00:00:00")

    def test_poster_without_profile_gets_defaults(self):
        table = build_user_table([], self.make_posts([("x", "2020-01-01T00:00:00")]))
        assert table["x"].friends_count == 0
        assert table["x"].followers_count is None

    def test_latest_snapshot_wins(self):
        u1 = UserRecord(user_id="a", followers_count=10,
                        snapshot_at=utc("2020-01-01T00:00:00"))
        u2 = UserRecord(user_id="a", followers_count=12,
                        snapshot_at=utc("2020-02-01T00:00:00"))
        for order in ([u1, u2], [u2, u1]):
            table = build_user_table(order, [])
            assert table["a"].followers_count == 12

    def test_zero_post_users_retained(self):
        table = build_user_table([UserRecord(user_id="quiet")], [])
        assert table["quiet"].post_count == 0

    def test_post_count_conservation(self):
        posts = self.make_posts([("a", "2020-01-01T00:00:00")] * 5
                                + [("b", "2020-01-02T00:00:00")] * 2)
        table = build_user_table([], posts)
        assert sum(u.post_count for u in table.values()) == 7

    def test_post_order_insensitive(self):
        posts = self.make_posts([("a", "2020-01-03T00:00:00"),
                                 ("b", "2020-01-01T00:00:00"),
                                 ("a", "2020-01-02T00:00:00")])
        t1 = build_user_table([], list(posts))
        t2 = build_user_table([], list(reversed(posts)))
        assert t1 == t2

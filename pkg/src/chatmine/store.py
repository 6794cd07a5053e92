"""Persistent store for replays, messages, labels, scores, and snapshots.

A single-file embedded SQLite database holds everything; the schema is
versioned in a ``meta`` table and migrated forward-only on open.  All
access is funneled through one lock (single writer, many readers), which
is plenty at desk scale and keeps SQLite happy across threads.

The store owns the anonymization boundary: each player gets a random
128-bit GUID on first sight, the account-id/display-name mapping stays
private inside the database file, and ``anonymized_export`` emits rows
keyed by GUID with every stored display name or account id scrubbed out
of the chat text (replaced by the owning player's GUID).

Label storage is tri-state per attribute: SQL ``NULL`` is *unknown*,
``0``/``1`` are resolved false/true — writing unknown reads back unknown,
distinct from false.  Chat text is stored verbatim, profanity, star-masks
and all; classification normalizes transiently, never at rest.

Cyberbullying scores (``cs``/``pcs``) are absent until a rescan computes
them; label writes through ``set_manual_labels``/``clear_unknowns``
rescore the affected match synchronously.
"""

from __future__ import annotations

import csv
import io
import json
import re
import sqlite3
import threading
import uuid
from dataclasses import dataclass
from typing import Iterable, Sequence

from .labels import ATTRIBUTES, InvalidLabels, LabelSet
from .replay import ReplayDocument, extract_chat, extract_deaths
from .scoring import MatchMessage, cs_for_match
from .util import content_hash, utc_now_iso

__all__ = [
    "ChatStore",
    "Conflict",
    "DeathRow",
    "EXPORT_FORMATS",
    "ExportIO",
    "MatchSummary",
    "MessageRow",
    "NotFound",
    "PlayerRow",
    "REALMS",
    "SCHEMA_VERSION",
    "SnapshotRow",
]

REALMS = ("NA", "EU")
EXPORT_FORMATS = ("csv", "jsonl")
SCHEMA_VERSION = 1

_AUTO_COLS = tuple(f"auto_{attr}" for attr in ATTRIBUTES)
_MANUAL_COLS = tuple(f"manual_{attr}" for attr in ATTRIBUTES)
_LABEL_COLS = _AUTO_COLS + _MANUAL_COLS

_EXPORT_HEADER = ("match_id", "player_guid", "clock", "text") + ATTRIBUTES + ("cs", "pcs")


class NotFound(LookupError):
    """The referenced message or match does not exist."""


class Conflict(Exception):
    """A concurrent save beat this one; carries the winning row."""

    def __init__(self, message: str, current: "MessageRow"):
        super().__init__(message)
        self.current = current


class ExportIO(Exception):
    """Export serialization or output write failed."""


@dataclass(frozen=True)
class PlayerRow:
    player_guid: str
    account_id: int
    display_name: str
    realm: str


@dataclass(frozen=True)
class MessageRow:
    message_id: str
    match_id: str
    player_guid: str
    author_account_id: int
    clock: float
    text: str
    auto_labels: LabelSet
    manual_labels: LabelSet
    cs: int | None
    pcs: int | None
    version: int
    seq: int


@dataclass(frozen=True)
class DeathRow:
    match_id: str
    victim_account_id: int
    killer_account_id: int
    clock: float
    seq: int


@dataclass(frozen=True)
class SnapshotRow:
    snapshot_id: int
    account_id: int
    match_id: str | None
    battles: int
    experience_total: int
    win_rate: float
    captured_at: str


@dataclass(frozen=True)
class MatchSummary:
    match_id: str
    source_id: str
    message_count: int
    unclassified_messages: int

    @property
    def classified(self) -> bool:
        """A match counts as classified once every message has all eight
        manual labels resolved (vacuously true with no messages)."""
        return self.unclassified_messages == 0


def _label_columns_sql(prefix_cols: Sequence[str]) -> str:
    return ",\n    ".join(
        f"{col} INTEGER CHECK ({col} IN (0, 1))" for col in prefix_cols
    )


_SCHEMA_V1 = [
    """
    CREATE TABLE players (
        player_guid TEXT PRIMARY KEY,
        account_id INTEGER NOT NULL UNIQUE CHECK (account_id > 0),
        display_name TEXT NOT NULL,
        realm TEXT NOT NULL CHECK (realm IN ('NA', 'EU'))
    )
    """,
    """
    CREATE TABLE replays (
        match_id TEXT PRIMARY KEY,
        content_hash TEXT NOT NULL UNIQUE,
        source_id TEXT NOT NULL,
        ingested_at TEXT NOT NULL
    )
    """,
    """
    CREATE TABLE roster (
        match_id TEXT NOT NULL REFERENCES replays(match_id),
        account_id INTEGER NOT NULL,
        vehicle TEXT NOT NULL,
        team INTEGER NOT NULL,
        PRIMARY KEY (match_id, account_id)
    )
    """,
    f"""
    CREATE TABLE messages (
        message_id TEXT PRIMARY KEY,
        match_id TEXT NOT NULL REFERENCES replays(match_id),
        player_guid TEXT NOT NULL REFERENCES players(player_guid),
        author_account_id INTEGER NOT NULL,
        clock REAL NOT NULL,
        text TEXT NOT NULL,
        seq INTEGER NOT NULL,
        {_label_columns_sql(_LABEL_COLS)},
        cs INTEGER,
        pcs INTEGER,
        version INTEGER NOT NULL DEFAULT 0
    )
    """,
    "CREATE INDEX idx_messages_match ON messages(match_id, seq)",
    """
    CREATE TABLE deaths (
        match_id TEXT NOT NULL REFERENCES replays(match_id),
        victim_account_id INTEGER NOT NULL,
        killer_account_id INTEGER NOT NULL,
        clock REAL NOT NULL,
        seq INTEGER NOT NULL
    )
    """,
    "CREATE INDEX idx_deaths_match ON deaths(match_id, victim_account_id)",
    """
    CREATE TABLE snapshots (
        snapshot_id INTEGER PRIMARY KEY,
        account_id INTEGER NOT NULL,
        match_id TEXT REFERENCES replays(match_id),
        battles INTEGER NOT NULL CHECK (battles >= 0),
        experience_total INTEGER NOT NULL CHECK (experience_total >= 0),
        win_rate REAL NOT NULL CHECK (win_rate >= 0 AND win_rate <= 1),
        captured_at TEXT NOT NULL
    )
    """,
    "CREATE INDEX idx_snapshots_account ON snapshots(account_id)",
    """
    CREATE TABLE annotations (
        annotation_id INTEGER PRIMARY KEY,
        message_id TEXT NOT NULL REFERENCES messages(message_id),
        annotator_id TEXT NOT NULL,
        saved_at TEXT NOT NULL,
        labels_json TEXT NOT NULL
    )
    """,
    """
    CREATE TABLE harvested_urls (
        url TEXT PRIMARY KEY,
        fetched_at TEXT NOT NULL,
        status TEXT NOT NULL
    )
    """,
]

#: Forward-only migrations: (target version, statements to get there).
_MIGRATIONS: list[tuple[int, list[str]]] = [(1, _SCHEMA_V1)]


def _tri_to_sql(value: bool | None) -> int | None:
    if value is None:
        return None
    return 1 if value else 0


def _tri_from_sql(value: int | None) -> bool | None:
    if value is None:
        return None
    return bool(value)


class ChatStore:
    """All persistence behind one serialized connection."""

    def __init__(self, path: str = ":memory:"):
        self._path = path
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA foreign_keys = ON")
        self._migrate()

    # ------------------------------------------------------------- schema

    def _migrate(self) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL)"
            )
            current = self.schema_version
            known = _MIGRATIONS[-1][0]
            if current > known:
                raise RuntimeError(
                    f"database schema version {current} is newer than this "
                    f"code understands ({known}); refusing to open"
                )
            for version, statements in _MIGRATIONS:
                if version <= current:
                    continue
                for statement in statements:
                    self._conn.execute(statement)
                self._conn.execute(
                    "INSERT INTO meta (key, value) VALUES ('schema_version', ?) "
                    "ON CONFLICT(key) DO UPDATE SET value = excluded.value",
                    (str(version),),
                )

    @property
    def schema_version(self) -> int:
        row = self._conn.execute(
            "SELECT value FROM meta WHERE key = 'schema_version'"
        ).fetchone()
        return int(row["value"]) if row else 0

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # ------------------------------------------------------------- players

    def upsert_player(self, account_id: int, display_name: str, realm: str = "EU") -> str:
        """Create-or-return: the same account id always maps to the same
        GUID; name and realm are refreshed to the latest values."""
        with self._lock, self._conn:
            return self._upsert_player_locked(account_id, display_name, realm)

    def _upsert_player_locked(self, account_id: int, display_name: str, realm: str) -> str:
        if account_id <= 0:
            raise ValueError("account_id must be positive")
        if realm not in REALMS:
            raise ValueError(f"unknown realm {realm!r}; expected one of {REALMS}")
        row = self._conn.execute(
            "SELECT player_guid FROM players WHERE account_id = ?", (account_id,)
        ).fetchone()
        if row is not None:
            self._conn.execute(
                "UPDATE players SET display_name = ?, realm = ? WHERE account_id = ?",
                (display_name, realm, account_id),
            )
            return row["player_guid"]
        guid = uuid.uuid4().hex
        self._conn.execute(
            "INSERT INTO players (player_guid, account_id, display_name, realm) "
            "VALUES (?, ?, ?, ?)",
            (guid, account_id, display_name, realm),
        )
        return guid

    def get_player(self, account_id: int) -> PlayerRow:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM players WHERE account_id = ?", (account_id,)
            ).fetchone()
        if row is None:
            raise NotFound(f"no player with account id {account_id}")
        return PlayerRow(
            player_guid=row["player_guid"],
            account_id=row["account_id"],
            display_name=row["display_name"],
            realm=row["realm"],
        )

    def player_count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) AS n FROM players").fetchone()["n"]

    # ------------------------------------------------------------- replays

    def has_replay_content(self, blob: bytes) -> bool:
        digest = content_hash(blob)
        with self._lock:
            row = self._conn.execute(
                "SELECT 1 FROM replays WHERE content_hash = ?", (digest,)
            ).fetchone()
        return row is not None

    def ingest_replay(
        self,
        document: ReplayDocument,
        blob: bytes,
        source_id: str | None = None,
        realm: str = "EU",
        ingested_at: str | None = None,
    ) -> bool:
        """Persist one decoded replay: roster, chat, deaths.

        Returns False without touching anything when the same bytes (by
        content hash) or the same match id were ingested before.
        """
        digest = content_hash(blob)
        source = source_id if source_id is not None else document.source_id
        stamp = ingested_at if ingested_at is not None else utc_now_iso()
        with self._lock, self._conn:
            dupe = self._conn.execute(
                "SELECT 1 FROM replays WHERE content_hash = ? OR match_id = ?",
                (digest, document.match_id),
            ).fetchone()
            if dupe is not None:
                return False
            self._conn.execute(
                "INSERT INTO replays (match_id, content_hash, source_id, ingested_at) "
                "VALUES (?, ?, ?, ?)",
                (document.match_id, digest, source, stamp),
            )
            guids: dict[int, str] = {}
            for player in document.players:
                guids[player.account_id] = self._upsert_player_locked(
                    player.account_id, player.display_name, realm
                )
                self._conn.execute(
                    "INSERT INTO roster (match_id, account_id, vehicle, team) "
                    "VALUES (?, ?, ?, ?)",
                    (document.match_id, player.account_id, player.vehicle, player.team),
                )
            for seq, message in enumerate(extract_chat(document)):
                author = message.author_account_id
                if author not in guids:
                    guids[author] = self._upsert_player_locked(
                        author, f"unknown#{author}", realm
                    )
                self._conn.execute(
                    "INSERT INTO messages (message_id, match_id, player_guid, "
                    "author_account_id, clock, text, seq) VALUES (?, ?, ?, ?, ?, ?, ?)",
                    (
                        message.message_id,
                        document.match_id,
                        guids[author],
                        author,
                        message.clock,
                        message.text,
                        seq,
                    ),
                )
            for seq, death in enumerate(extract_deaths(document)):
                self._conn.execute(
                    "INSERT INTO deaths (match_id, victim_account_id, "
                    "killer_account_id, clock, seq) VALUES (?, ?, ?, ?, ?)",
                    (
                        document.match_id,
                        death.victim_account_id,
                        death.killer_account_id,
                        death.clock,
                        seq,
                    ),
                )
            return True

    def replay_count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) AS n FROM replays").fetchone()["n"]

    # ------------------------------------------------------------- messages

    def _row_to_message(self, row: sqlite3.Row) -> MessageRow:
        auto = LabelSet(**{
            attr: _tri_from_sql(row[f"auto_{attr}"]) for attr in ATTRIBUTES
        })
        manual = LabelSet(**{
            attr: _tri_from_sql(row[f"manual_{attr}"]) for attr in ATTRIBUTES
        })
        return MessageRow(
            message_id=row["message_id"],
            match_id=row["match_id"],
            player_guid=row["player_guid"],
            author_account_id=row["author_account_id"],
            clock=row["clock"],
            text=row["text"],
            auto_labels=auto,
            manual_labels=manual,
            cs=row["cs"],
            pcs=row["pcs"],
            version=row["version"],
            seq=row["seq"],
        )

    _MESSAGE_ORDER = (
        "ORDER BY (SELECT rowid FROM replays WHERE replays.match_id = messages.match_id), "
        "messages.seq"
    )

    def iter_messages(self, match_id: str | None = None) -> list[MessageRow]:
        """Every stored message in ingestion order (replay, then packet)."""
        with self._lock:
            if match_id is None:
                rows = self._conn.execute(
                    f"SELECT * FROM messages {self._MESSAGE_ORDER}"
                ).fetchall()
            else:
                rows = self._conn.execute(
                    "SELECT * FROM messages WHERE match_id = ? ORDER BY seq",
                    (match_id,),
                ).fetchall()
        return [self._row_to_message(row) for row in rows]

    def message_count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) AS n FROM messages").fetchone()["n"]

    def get_message(self, message_id: str) -> MessageRow:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM messages WHERE message_id = ?", (message_id,)
            ).fetchone()
        if row is None:
            raise NotFound(f"no message {message_id!r}")
        return self._row_to_message(row)

    def get_match_messages(self, match_id: str) -> list[MessageRow]:
        """A match's messages in clock order (ties by ingestion)."""
        with self._lock:
            exists = self._conn.execute(
                "SELECT 1 FROM replays WHERE match_id = ?", (match_id,)
            ).fetchone()
            if exists is None:
                raise NotFound(f"no match {match_id!r}")
            rows = self._conn.execute(
                "SELECT * FROM messages WHERE match_id = ? ORDER BY clock, seq",
                (match_id,),
            ).fetchall()
        return [self._row_to_message(row) for row in rows]

    # ------------------------------------------------------------- labels

    @staticmethod
    def _check_merged(manual: LabelSet, auto: LabelSet, message_id: str) -> None:
        try:
            manual.merged_over(auto)
        except InvalidLabels as exc:
            raise InvalidLabels(
                f"message {message_id!r}: manual and automatic labels merge "
                f"into an invalid set: {exc}"
            ) from exc

    def _write_labels(self, message_id: str, prefix: str, labels: LabelSet) -> None:
        assignments = ", ".join(f"{prefix}_{attr} = ?" for attr in ATTRIBUTES)
        values = [_tri_to_sql(labels.get(attr)) for attr in ATTRIBUTES]
        self._conn.execute(
            f"UPDATE messages SET {assignments}, version = version + 1 "
            "WHERE message_id = ?",
            (*values, message_id),
        )

    def set_auto_labels(self, message_id: str, labels: LabelSet) -> MessageRow:
        """Store machine-produced labels; the message's manual labels must
        still merge cleanly over them."""
        with self._lock, self._conn:
            current = self.get_message(message_id)
            self._check_merged(current.manual_labels, labels, message_id)
            if labels == current.auto_labels:
                return current
            self._write_labels(message_id, "auto", labels)
            return self.get_message(message_id)

    def set_manual_labels(
        self,
        message_id: str,
        labels: LabelSet,
        annotator_id: str = "",
        saved_at: str | None = None,
        expected_version: int | None = None,
    ) -> MessageRow:
        """Persist an annotator's labels and rescore the match.

        With ``expected_version`` given, a mismatch raises ``Conflict``
        carrying the current row (optimistic concurrency); without it the
        write is last-write-wins.  Re-applying identical labels is a
        no-op: no version bump, no duplicate history row.
        """
        with self._lock, self._conn:
            current = self.get_message(message_id)
            if expected_version is not None and expected_version != current.version:
                raise Conflict(
                    f"message {message_id!r} is at version {current.version}, "
                    f"patch expected {expected_version}",
                    current,
                )
            self._check_merged(labels, current.auto_labels, message_id)
            if labels == current.manual_labels:
                return current
            self._write_labels(message_id, "manual", labels)
            self._conn.execute(
                "INSERT INTO annotations (message_id, annotator_id, saved_at, "
                "labels_json) VALUES (?, ?, ?, ?)",
                (
                    message_id,
                    annotator_id,
                    saved_at if saved_at is not None else utc_now_iso(),
                    json.dumps(labels.as_dict(), sort_keys=True),
                ),
            )
            self._rescore_match_locked(current.match_id)
            return self.get_message(message_id)

    def clear_unknowns(self, message_id: str) -> MessageRow:
        """Resolve every unknown manual label to its effective value:
        the automatic prefill where one exists, otherwise false.

        Persisted label pairs always merge cleanly (the write paths
        enforce it), so the resolved set cannot claim both positive and
        negative.
        """
        with self._lock, self._conn:
            current = self.get_message(message_id)
            resolved = {}
            for attr in ATTRIBUTES:
                value = current.manual_labels.get(attr)
                if value is None:
                    auto = current.auto_labels.get(attr)
                    value = auto if auto is not None else False
                resolved[attr] = value
            labels = LabelSet(**resolved)
            if labels == current.manual_labels:
                return current
            self._write_labels(message_id, "manual", labels)
            self._rescore_match_locked(current.match_id)
            return self.get_message(message_id)

    def annotation_count(self, message_id: str | None = None) -> int:
        with self._lock:
            if message_id is None:
                row = self._conn.execute("SELECT COUNT(*) AS n FROM annotations").fetchone()
            else:
                row = self._conn.execute(
                    "SELECT COUNT(*) AS n FROM annotations WHERE message_id = ?",
                    (message_id,),
                ).fetchone()
        return row["n"]

    # ------------------------------------------------------------- scoring

    def rescore_match(self, match_id: str, label_source: str = "merged") -> None:
        """Recompute cs/pcs for every message of one match."""
        with self._lock, self._conn:
            self._rescore_match_locked(match_id, label_source)

    def _rescore_match_locked(self, match_id: str, label_source: str = "merged") -> None:
        scored = cs_for_match(
            [
                MatchMessage(
                    message_id=row.message_id,
                    author_account_id=row.author_account_id,
                    clock=row.clock,
                    auto_labels=row.auto_labels,
                    manual_labels=row.manual_labels,
                )
                for row in self.iter_messages(match_id)
            ],
            label_source=label_source,
        )
        for item in scored:
            self._conn.execute(
                "UPDATE messages SET cs = ?, pcs = ? WHERE message_id = ?",
                (item.cs, item.pcs, item.message_id),
            )

    def rescore_all(self, label_source: str = "merged") -> int:
        """Rescore every match; returns how many matches were processed."""
        with self._lock:
            rows = self._conn.execute("SELECT match_id FROM replays ORDER BY rowid").fetchall()
        for row in rows:
            self.rescore_match(row["match_id"], label_source)
        return len(rows)

    # ------------------------------------------------------------- matches

    def list_matches(
        self,
        only_unclassified: bool = False,
        page: int = 1,
        page_size: int = 50,
    ) -> tuple[list[MatchSummary], int]:
        """Match summaries in ingestion order plus the total match count
        for the active filter."""
        if page < 1 or page_size < 1:
            raise ValueError("page and page_size must be >= 1")
        unresolved = " OR ".join(f"m.manual_{attr} IS NULL" for attr in ATTRIBUTES)
        query = f"""
            SELECT r.match_id AS match_id, r.source_id AS source_id,
                   COUNT(m.message_id) AS message_count,
                   COALESCE(SUM(CASE WHEN m.message_id IS NOT NULL
                                      AND ({unresolved}) THEN 1 ELSE 0 END), 0)
                       AS unclassified_messages
            FROM replays r LEFT JOIN messages m ON m.match_id = r.match_id
            GROUP BY r.match_id
            {{filter}}
            ORDER BY r.rowid
        """
        clause = "HAVING unclassified_messages > 0" if only_unclassified else ""
        with self._lock:
            rows = self._conn.execute(query.format(filter=clause)).fetchall()
        summaries = [
            MatchSummary(
                match_id=row["match_id"],
                source_id=row["source_id"],
                message_count=row["message_count"],
                unclassified_messages=row["unclassified_messages"],
            )
            for row in rows
        ]
        start = (page - 1) * page_size
        return summaries[start : start + page_size], len(summaries)

    # ------------------------------------------------------------- deaths

    def iter_deaths(self, match_id: str | None = None) -> list[DeathRow]:
        with self._lock:
            if match_id is None:
                rows = self._conn.execute(
                    "SELECT * FROM deaths ORDER BY match_id, seq"
                ).fetchall()
            else:
                rows = self._conn.execute(
                    "SELECT * FROM deaths WHERE match_id = ? ORDER BY seq", (match_id,)
                ).fetchall()
        return [
            DeathRow(
                match_id=row["match_id"],
                victim_account_id=row["victim_account_id"],
                killer_account_id=row["killer_account_id"],
                clock=row["clock"],
                seq=row["seq"],
            )
            for row in rows
        ]

    # ------------------------------------------------------------- snapshots

    def add_snapshot(
        self,
        account_id: int,
        battles: int,
        experience_total: int,
        win_rate: float,
        captured_at: str | None = None,
        match_id: str | None = None,
    ) -> int:
        """Record one player-statistics snapshot; ``match_id`` ties it to
        the replay whose ingestion triggered it."""
        if account_id <= 0:
            raise ValueError("account_id must be positive")
        if battles < 0 or experience_total < 0:
            raise ValueError("battles and experience_total must be non-negative")
        if not 0.0 <= win_rate <= 1.0:
            raise ValueError("win_rate must lie in [0, 1]")
        with self._lock, self._conn:
            cursor = self._conn.execute(
                "INSERT INTO snapshots (account_id, match_id, battles, "
                "experience_total, win_rate, captured_at) VALUES (?, ?, ?, ?, ?, ?)",
                (
                    account_id,
                    match_id,
                    battles,
                    experience_total,
                    win_rate,
                    captured_at if captured_at is not None else utc_now_iso(),
                ),
            )
            return cursor.lastrowid

    def iter_snapshots(self, account_id: int | None = None) -> list[SnapshotRow]:
        with self._lock:
            if account_id is None:
                rows = self._conn.execute(
                    "SELECT * FROM snapshots ORDER BY snapshot_id"
                ).fetchall()
            else:
                rows = self._conn.execute(
                    "SELECT * FROM snapshots WHERE account_id = ? ORDER BY snapshot_id",
                    (account_id,),
                ).fetchall()
        return [
            SnapshotRow(
                snapshot_id=row["snapshot_id"],
                account_id=row["account_id"],
                match_id=row["match_id"],
                battles=row["battles"],
                experience_total=row["experience_total"],
                win_rate=row["win_rate"],
                captured_at=row["captured_at"],
            )
            for row in rows
        ]

    # ------------------------------------------------------------- harvest log

    def record_url(self, url: str, status: str = "ok", fetched_at: str | None = None) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO harvested_urls (url, fetched_at, status) VALUES (?, ?, ?) "
                "ON CONFLICT(url) DO UPDATE SET fetched_at = excluded.fetched_at, "
                "status = excluded.status",
                (url, fetched_at if fetched_at is not None else utc_now_iso(), status),
            )

    def url_seen(self, url: str) -> bool:
        with self._lock:
            return (
                self._conn.execute(
                    "SELECT 1 FROM harvested_urls WHERE url = ?", (url,)
                ).fetchone()
                is not None
            )

    def filter_unseen(self, urls: Iterable[str]) -> list[str]:
        """The subset of ``urls`` not yet recorded, original order kept."""
        return [url for url in urls if not self.url_seen(url)]

    # ------------------------------------------------------------- export

    def _scrubber(self) -> tuple[re.Pattern | None, dict[str, str], re.Pattern | None, dict[str, str]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT player_guid, account_id, display_name FROM players"
            ).fetchall()
        by_name = {
            row["display_name"].casefold(): row["player_guid"]
            for row in rows
            if row["display_name"].strip()
        }
        by_id = {str(row["account_id"]): row["player_guid"] for row in rows}
        name_re = None
        if by_name:
            alternation = "|".join(
                re.escape(name) for name in sorted(by_name, key=len, reverse=True)
            )
            name_re = re.compile(alternation, re.IGNORECASE)
        id_re = None
        if by_id:
            alternation = "|".join(
                re.escape(acct) for acct in sorted(by_id, key=len, reverse=True)
            )
            id_re = re.compile(rf"(?<!\d)(?:{alternation})(?!\d)")
        return name_re, by_name, id_re, by_id

    def _scrub_factory(self):
        name_re, by_name, id_re, by_id = self._scrubber()

        def scrub(text: str) -> str:
            if name_re is not None:
                text = name_re.sub(
                    lambda m: by_name[m.group(0).casefold()], text
                )
            if id_re is not None:
                text = id_re.sub(lambda m: by_id[m.group(0)], text)
            return text

        return scrub

    def anonymized_export(self, format: str = "csv") -> bytes:
        """Serialize every message with the player GUID in place of any
        identity: no stored display name or account id survives, not even
        inside chat text (occurrences become the owning player's GUID).

        CSV columns, in order: match_id, player_guid, clock, text, the
        eight manual labels (``1``/``0``/empty for unknown), cs, pcs.
        JSONL mirrors the same keys with true/false/null labels.
        """
        if format not in EXPORT_FORMATS:
            raise ValueError(f"unknown export format {format!r}; expected one of {EXPORT_FORMATS}")
        scrub = self._scrub_factory()
        rows = self.iter_messages()
        try:
            if format == "csv":
                buffer = io.StringIO()
                writer = csv.writer(buffer, lineterminator="\n")
                writer.writerow(_EXPORT_HEADER)
                for row in rows:
                    record = [row.match_id, row.player_guid, row.clock, scrub(row.text)]
                    for attr in ATTRIBUTES:
                        value = row.manual_labels.get(attr)
                        record.append("" if value is None else ("1" if value else "0"))
                    record.append("" if row.cs is None else row.cs)
                    record.append("" if row.pcs is None else row.pcs)
                    writer.writerow(record)
                return buffer.getvalue().encode("utf-8")
            lines = []
            for row in rows:
                payload: dict[str, object] = {
                    "match_id": row.match_id,
                    "player_guid": row.player_guid,
                    "clock": row.clock,
                    "text": scrub(row.text),
                }
                for attr in ATTRIBUTES:
                    payload[attr] = row.manual_labels.get(attr)
                payload["cs"] = row.cs
                payload["pcs"] = row.pcs
                lines.append(json.dumps(payload, ensure_ascii=False))
            return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
        except (TypeError, ValueError, UnicodeError) as exc:
            raise ExportIO(f"export serialization failed: {exc}") from exc

    def export_to_path(self, path: str, format: str = "csv") -> int:
        """Write an anonymized export to a file; returns the byte count."""
        payload = self.anonymized_export(format)
        try:
            with open(path, "wb") as handle:
                handle.write(payload)
        except OSError as exc:
            raise ExportIO(f"cannot write export to {path!r}: {exc}") from exc
        return len(payload)

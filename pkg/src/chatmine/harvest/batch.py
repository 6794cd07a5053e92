"""Unattended collection runs: crawl → download → decode → persist → stats.

Each run touches at most ``max_files_per_run`` new files (harvested URLs
are remembered, so consecutive runs walk further down the listing), keeps
a minimum gap between requests to the same host, and pulls one statistics
snapshot per roster player of every replay it persists.  Runs are meant
for a scheduler, so a failure wave — more than half of all attempts, once
at least ``_FAILURE_BUDGET_FLOOR`` files have been tried — aborts the run
instead of hammering a site that is down or has changed shape.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from urllib.parse import urlsplit

import requests

from ..replay import DEFAULT_SCHEMA, DEFAULT_TEST_KEY, ReplayError, decode_replay, extract_chat
from .crawler import ReplayLink, crawl_listing
from .wgapi import AuthError, RateLimited, fetch_player_stats

__all__ = ["BatchPolicy", "BatchReport", "HostPacer", "run_batch"]

log = logging.getLogger(__name__)

_TIMEOUT_S = 60.0
_FAILURE_BUDGET_FLOOR = 20


class HostPacer:
    """Reserves request start times so same-host requests stay spaced.

    Each caller claims the next free slot for its host under the lock and
    sleeps out its own delay outside it, which keeps gaps ≥ the delay even
    when many download threads share the pacer.
    """

    def __init__(self, delay_s: float, clock=time.monotonic, sleep=time.sleep) -> None:
        if delay_s < 0:
            raise ValueError("delay must be non-negative")
        self._delay = delay_s
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_free: dict[str, float] = {}

    def wait(self, url: str) -> float:
        """Block until this request may start; returns the wait imposed."""
        host = urlsplit(url).netloc
        with self._lock:
            now = self._clock()
            start = max(now, self._next_free.get(host, now))
            self._next_free[host] = start + self._delay
            delay = start - now
        if delay > 0:
            self._sleep(delay)
        return delay


@dataclass(frozen=True)
class BatchPolicy:
    max_files_per_run: int = 1000
    request_delay_ms: int = 250
    max_parallel_downloads: int = 4

    def __post_init__(self) -> None:
        if self.max_files_per_run < 1:
            raise ValueError("max_files_per_run must be at least 1")
        if self.request_delay_ms < 0:
            raise ValueError("request_delay_ms must be non-negative")
        if self.max_parallel_downloads < 1:
            raise ValueError("max_parallel_downloads must be at least 1")


@dataclass(frozen=True)
class BatchReport:
    links_seen: int  # links handed to the download stage
    downloaded: int  # HTTP fetches that returned replay bytes
    decoded: int  # downloads that decoded into a valid document
    failed: int  # fetch or decode failures
    aborted: bool = False  # failure budget tripped before the queue drained

    def __str__(self) -> str:
        tail = " (aborted: failure budget exceeded)" if self.aborted else ""
        return (
            f"links_seen={self.links_seen} downloaded={self.downloaded} "
            f"decoded={self.decoded} failed={self.failed}{tail}"
        )


def _download(
    session: requests.Session, pacer: HostPacer, link: ReplayLink
) -> tuple[ReplayLink, bytes | None, str]:
    pacer.wait(link.url)
    try:
        response = session.get(link.url, timeout=_TIMEOUT_S)
    except requests.RequestException as exc:
        return link, None, str(exc)
    if response.status_code != 200:
        return link, None, f"status {response.status_code}"
    return link, response.content, ""


def _snapshot_players(store, document, api_base: str, app_id: str, *,
                      session: requests.Session, pacer: HostPacer) -> None:
    """Fetch and persist one snapshot per roster player of this replay.

    Chat authors are roster members in well-formed replays; authors that
    are not (defensive placeholder rows) are still attempted.
    """
    account_ids = [player.account_id for player in document.players]
    roster = set(account_ids)
    for packet_author in _chat_authors(document):
        if packet_author not in roster:
            account_ids.append(packet_author)
            roster.add(packet_author)
    if not account_ids:
        return
    try:
        batch = fetch_player_stats(
            account_ids, api_base, app_id, session=session, pacer=pacer
        )
    except (AuthError, RateLimited, requests.RequestException, ValueError) as exc:
        log.warning("stats fetch failed for %s: %s", document.match_id, exc)
        return
    for snapshot in batch:
        store.add_snapshot(
            snapshot.account_id,
            battles=snapshot.battles,
            experience_total=snapshot.experience_total,
            win_rate=snapshot.win_rate,
            captured_at=snapshot.captured_at,
            match_id=document.match_id,
        )


def _chat_authors(document) -> list[int]:
    return [message.author_account_id for message in extract_chat(document)]


def run_batch(
    store,
    policy: BatchPolicy,
    *,
    base_url: str,
    pages: tuple[int, int],
    api_base: str,
    app_id: str,
    key: bytes = DEFAULT_TEST_KEY,
    schema=DEFAULT_SCHEMA,
    realm: str = "EU",
    session: requests.Session | None = None,
    pacer: HostPacer | None = None,
) -> BatchReport:
    """One collection run: at most ``policy.max_files_per_run`` new replays
    downloaded, decoded, persisted, and their players snapshotted.

    Re-runs are no-ops for anything already harvested: URLs are remembered
    on success, and replay content is deduplicated by hash.  Per-file
    failures are tallied, not raised; the run aborts early only when more
    than half of all attempts have failed (after a floor of
    ``_FAILURE_BUDGET_FLOOR`` attempts) or the store itself breaks.
    """
    http = session if session is not None else requests.Session()
    pace = pacer if pacer is not None else HostPacer(policy.request_delay_ms / 1000.0)

    links = crawl_listing(base_url, pages, store=store, session=http, pacer=pace)
    queue = links[: policy.max_files_per_run]

    downloaded = decoded = failed = attempted = 0
    aborted = False
    with ThreadPoolExecutor(max_workers=policy.max_parallel_downloads) as pool:
        for link, blob, error in pool.map(
            lambda item: _download(http, pace, item), queue
        ):
            attempted += 1
            if blob is None:
                failed += 1
                log.warning("download failed: %s (%s)", link.url, error)
            else:
                downloaded += 1
                try:
                    document = decode_replay(blob, key, schema=schema, source_id=link.url)
                except ReplayError as exc:
                    failed += 1
                    log.warning("undecodable replay %s: %s", link.url, exc)
                    # Corruption is deterministic; remember the URL so the
                    # next run spends its budget elsewhere.  Fetch failures
                    # stay unrecorded and get retried.
                    store.record_url(link.url, status="decode-error")
                else:
                    decoded += 1
                    if store.ingest_replay(document, blob, realm=realm):
                        _snapshot_players(
                            store, document, api_base, app_id,
                            session=http, pacer=pace,
                        )
                    store.record_url(link.url)
            if attempted >= _FAILURE_BUDGET_FLOOR and failed * 2 > attempted:
                aborted = True
                pool.shutdown(wait=False, cancel_futures=True)
                break
    if aborted:
        log.error(
            "aborting run: %d of %d attempts failed — site down or changed?",
            failed, attempted,
        )
    return BatchReport(
        links_seen=attempted,
        downloaded=downloaded,
        decoded=decoded,
        failed=failed,
        aborted=aborted,
    )

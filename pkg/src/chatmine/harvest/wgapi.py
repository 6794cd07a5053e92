"""Client for a WG-style public statistics API.

``GET {api_base}/account/info?application_id=…&account_id=1,2,3`` returns
``{"status": "ok", "data": {"<id>": {"statistics": {"all": {...}}}}}``;
ids the service cannot resolve come back as ``null`` entries.  Requests
are batched at 100 ids apiece, the service's documented ceiling.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterator

import requests

from ..util import utc_now_iso

__all__ = [
    "AuthError",
    "MAX_IDS_PER_REQUEST",
    "PlayerSnapshot",
    "RateLimited",
    "SnapshotBatch",
    "fetch_player_stats",
]

log = logging.getLogger(__name__)

MAX_IDS_PER_REQUEST = 100

_TIMEOUT_S = 30.0
_RATE_LIMIT_RETRIES = 3
_DEFAULT_RETRY_AFTER_S = 1.0


class AuthError(RuntimeError):
    """The service rejected the application id."""


class RateLimited(RuntimeError):
    """The service asked us to slow down and retries ran out."""

    def __init__(self, message: str, retry_after: float = _DEFAULT_RETRY_AFTER_S) -> None:
        super().__init__(message)
        self.retry_after = retry_after


@dataclass(frozen=True)
class PlayerSnapshot:
    account_id: int
    battles: int
    experience_total: int
    win_rate: float
    captured_at: str = field(default_factory=utc_now_iso)

    def __post_init__(self) -> None:
        if self.account_id <= 0:
            raise ValueError("account_id must be positive")
        if self.battles < 0 or self.experience_total < 0:
            raise ValueError("battles and experience_total must be non-negative")
        if not 0.0 <= self.win_rate <= 1.0:
            raise ValueError("win_rate must lie in [0, 1]")


@dataclass(frozen=True)
class SnapshotBatch:
    """Snapshots for the resolvable ids plus the ids that came back empty."""

    snapshots: tuple[PlayerSnapshot, ...]
    missing: tuple[int, ...] = ()

    def __iter__(self) -> Iterator[PlayerSnapshot]:
        return iter(self.snapshots)

    def __len__(self) -> int:
        return len(self.snapshots)


def _chunked(ids: list[int], size: int) -> list[list[int]]:
    return [ids[i : i + size] for i in range(0, len(ids), size)]


def _parse_entry(account_id: int, entry) -> PlayerSnapshot | None:
    if entry is None:
        return None
    stats = entry["statistics"]["all"]
    battles = int(stats["battles"])
    wins = int(stats.get("wins", 0))
    return PlayerSnapshot(
        account_id=account_id,
        battles=battles,
        experience_total=int(stats["xp"]),
        win_rate=(wins / battles) if battles else 0.0,
    )


def _request_chunk(
    http: requests.Session,
    api_base: str,
    app_id: str,
    chunk: list[int],
    sleep,
) -> dict:
    url = f"{api_base.rstrip('/')}/account/info"
    params = {
        "application_id": app_id,
        "account_id": ",".join(str(account_id) for account_id in chunk),
    }
    for attempt in range(_RATE_LIMIT_RETRIES + 1):
        response = http.get(url, params=params, timeout=_TIMEOUT_S)
        if response.status_code == 429:
            retry_after = float(response.headers.get("Retry-After", _DEFAULT_RETRY_AFTER_S))
            if attempt == _RATE_LIMIT_RETRIES:
                raise RateLimited("rate limit retries exhausted", retry_after)
            log.info("rate limited; retrying in %.1fs", retry_after)
            sleep(retry_after)
            continue
        response.raise_for_status()
        body = response.json()
        if body.get("status") == "error":
            error = body.get("error") or {}
            message = str(error.get("message", "unknown error"))
            if "APPLICATION_ID" in message:
                raise AuthError(message)
            if "LIMIT" in message:
                if attempt == _RATE_LIMIT_RETRIES:
                    raise RateLimited(message)
                sleep(_DEFAULT_RETRY_AFTER_S)
                continue
            raise ValueError(f"stats service error: {message}")
        return body.get("data") or {}
    raise RateLimited("rate limit retries exhausted")  # pragma: no cover


def fetch_player_stats(
    account_ids: list[int],
    api_base: str,
    app_id: str,
    *,
    session: requests.Session | None = None,
    pacer=None,
    sleep=time.sleep,
) -> SnapshotBatch:
    """One snapshot per resolvable account id, ≤ 100 ids per HTTP request.

    Unresolvable ids are reported in the result's ``missing`` tuple, not
    raised.  Duplicate ids are collapsed; input order is preserved.
    """
    if not account_ids:
        raise ValueError("account_ids must be non-empty")
    unique_ids: list[int] = []
    seen: set[int] = set()
    for account_id in account_ids:
        if account_id <= 0:
            raise ValueError(f"account ids must be positive: {account_id}")
        if account_id not in seen:
            seen.add(account_id)
            unique_ids.append(account_id)

    http = session if session is not None else requests.Session()
    snapshots: list[PlayerSnapshot] = []
    missing: list[int] = []
    for chunk in _chunked(unique_ids, MAX_IDS_PER_REQUEST):
        if pacer is not None:
            pacer.wait(api_base)
        data = _request_chunk(http, api_base, app_id, chunk, sleep)
        for account_id in chunk:
            snapshot = _parse_entry(account_id, data.get(str(account_id)))
            if snapshot is None:
                missing.append(account_id)
            else:
                snapshots.append(snapshot)
    if missing:
        log.info("stats service could not resolve %d account id(s): %s",
                 len(missing), ", ".join(map(str, missing)))
    return SnapshotBatch(snapshots=tuple(snapshots), missing=tuple(missing))

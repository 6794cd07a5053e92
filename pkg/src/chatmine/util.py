"""Small shared helpers: content hashing and timestamps."""

from __future__ import annotations

import hashlib
from datetime import datetime, timezone

__all__ = ["content_hash", "utc_now_iso"]


def content_hash(blob: bytes) -> str:
    """Stable hex digest identifying a byte payload (dedup key)."""
    return hashlib.sha256(blob).hexdigest()


def utc_now_iso() -> str:
    """Current UTC time as an ISO-8601 string with second precision."""
    return datetime.now(timezone.utc).isoformat(timespec="seconds")

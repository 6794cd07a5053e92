"""Descriptive analyses over the labeled corpus.

Two read-only aggregations, both emitted as small CSV tables:

* ``death_delta`` — for every abusive message whose author died in that
  match, the time between the message and the author's *first* death
  (``delta = message clock - first death clock``).  A message at exactly
  the death clock counts as *not* after (strictly ``delta > 0``).
  Messages by authors who never died in the match are tallied separately
  and excluded from the percentage.
* ``experience_rates`` — abusive messages bucketed by the author's
  experience points at the time of that match's snapshot, divided by the
  number of distinct players whose snapshots fall in the bucket.  A
  bucket populated by players with zero abusive messages still gets a
  row (rate 0).  When a player has several snapshots for one match, the
  most recent wins; a message whose (match, author) pair has no snapshot
  cannot be bucketed and is counted in ``skipped_messages``.

Both use the effective labels (manual over automatic prefill); only
``is_abusive = true`` counts as abusive.  Defaults: 30-second histogram
bins and 500,000-XP buckets, both caller-tunable.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

__all__ = [
    "DEFAULT_BIN_WIDTH_S",
    "DEFAULT_XP_BUCKET",
    "DeathDeltaHistogram",
    "ExperienceRateRow",
    "ExperienceRateTable",
    "NoLabeledData",
    "death_delta",
    "death_delta_csv",
    "experience_rates",
    "experience_rates_csv",
]

DEFAULT_BIN_WIDTH_S = 30.0
DEFAULT_XP_BUCKET = 500_000


class NoLabeledData(ValueError):
    """The store lacks the labels or snapshots this analysis needs."""


@dataclass(frozen=True)
class DeathDeltaHistogram:
    bin_width: float
    bins: tuple[tuple[float, int], ...]  # (lower bound, count), ascending
    pct_after_death: float
    n_messages: int  # abusive messages whose author died in the match
    no_death_messages: int  # abusive messages by authors who never died

    def __post_init__(self) -> None:
        if sum(count for _, count in self.bins) != self.n_messages:
            raise ValueError("histogram counts must sum to n_messages")
        if not 0.0 <= self.pct_after_death <= 1.0:
            raise ValueError("pct_after_death must lie in [0, 1]")


@dataclass(frozen=True)
class ExperienceRateRow:
    bucket_low: int
    abusive_count: int
    player_count: int

    @property
    def rate(self) -> float:
        return self.abusive_count / self.player_count


@dataclass(frozen=True)
class ExperienceRateTable:
    bucket_width: int
    rows: tuple[ExperienceRateRow, ...]  # ascending by bucket_low
    skipped_messages: int  # abusive messages without a usable snapshot


def _is_abusive(row) -> bool:
    return row.manual_labels.merged_over(row.auto_labels).is_abusive is True


def death_delta(store, bin_width: float = DEFAULT_BIN_WIDTH_S) -> DeathDeltaHistogram:
    """Histogram of abusive-message timing relative to the author's first
    death in the match."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    abusive = [row for row in store.iter_messages() if _is_abusive(row)]
    if not abusive:
        raise NoLabeledData("no messages labeled abusive")

    first_death: dict[tuple[str, int], float] = {}
    for death in store.iter_deaths():
        key = (death.match_id, death.victim_account_id)
        if key not in first_death or death.clock < first_death[key]:
            first_death[key] = death.clock

    deltas: list[float] = []
    no_death = 0
    for row in abusive:
        death_clock = first_death.get((row.match_id, row.author_account_id))
        if death_clock is None:
            no_death += 1
        else:
            deltas.append(row.clock - death_clock)

    counts: dict[float, int] = {}
    for delta in deltas:
        low = math.floor(delta / bin_width) * bin_width
        counts[low] = counts.get(low, 0) + 1
    after = sum(1 for delta in deltas if delta > 0)
    return DeathDeltaHistogram(
        bin_width=bin_width,
        bins=tuple(sorted(counts.items())),
        pct_after_death=after / len(deltas) if deltas else 0.0,
        n_messages=len(deltas),
        no_death_messages=no_death,
    )


def experience_rates(store, bucket_width: int = DEFAULT_XP_BUCKET) -> ExperienceRateTable:
    """Abusive messages per distinct player, bucketed by experience."""
    if bucket_width < 1:
        raise ValueError("bucket_width must be at least 1")
    snapshots = store.iter_snapshots()
    if not snapshots:
        raise NoLabeledData("no player snapshots recorded")
    abusive = [row for row in store.iter_messages() if _is_abusive(row)]
    if not abusive:
        raise NoLabeledData("no messages labeled abusive")

    # Most recent snapshot wins per (match, account); iteration order is
    # insertion order, so later rows overwrite earlier ones.
    xp_at_match: dict[tuple[str | None, int], int] = {}
    for snapshot in snapshots:
        xp_at_match[(snapshot.match_id, snapshot.account_id)] = snapshot.experience_total

    players_per_bucket: dict[int, set[int]] = {}
    for (match_id, account_id), experience in xp_at_match.items():
        bucket = (experience // bucket_width) * bucket_width
        players_per_bucket.setdefault(bucket, set()).add(account_id)

    abusive_per_bucket: dict[int, int] = {}
    skipped = 0
    for row in abusive:
        experience = xp_at_match.get((row.match_id, row.author_account_id))
        if experience is None:
            skipped += 1
            continue
        bucket = (experience // bucket_width) * bucket_width
        abusive_per_bucket[bucket] = abusive_per_bucket.get(bucket, 0) + 1

    rows = tuple(
        ExperienceRateRow(
            bucket_low=bucket,
            abusive_count=abusive_per_bucket.get(bucket, 0),
            player_count=len(players),
        )
        for bucket, players in sorted(players_per_bucket.items())
    )
    return ExperienceRateTable(
        bucket_width=bucket_width, rows=rows, skipped_messages=skipped
    )


def death_delta_csv(histogram: DeathDeltaHistogram) -> bytes:
    """CSV rows (bin_low_s,count), deterministic for a given histogram."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("bin_low_s", "count"))
    for low, count in histogram.bins:
        writer.writerow((low, count))
    return buffer.getvalue().encode("utf-8")


def experience_rates_csv(table: ExperienceRateTable) -> bytes:
    """CSV rows (bucket_low_xp,abusive,players,rate)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("bucket_low_xp", "abusive", "players", "rate"))
    for row in table.rows:
        writer.writerow((row.bucket_low, row.abusive_count, row.player_count, row.rate))
    return buffer.getvalue().encode("utf-8")

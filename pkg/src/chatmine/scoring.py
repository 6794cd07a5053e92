"""Cyberbullying score (CS) and its automatic-label proxy (PCS).

Point values per message:

* positive: −1, a further −3 when aimed at a specific player (floor −4)
* negative: +1, +1 noob-related, +2 strong/filtered language, +2 racist,
  +3 specific target (cap +9)

Repeat offenders escalate: within one match, an author's k-th negative
message (0-based) gains +k. PCS applies the same idea to automatic labels
only and never sees specific_target, because the rule engine cannot
detect it.

Unknown labels score as false throughout: absence of evidence scores
nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .labels import ALL_UNKNOWN, InvalidLabels, LabelSet

LABEL_SOURCES = ("merged", "manual", "auto")

BASE_MIN = -4
BASE_MAX = 9


@dataclass(frozen=True)
class MatchMessage:
    """Scoring input: one chat message plus both label sets."""

    message_id: str
    author_account_id: int
    clock: float
    auto_labels: LabelSet = ALL_UNKNOWN
    manual_labels: LabelSet = ALL_UNKNOWN


@dataclass(frozen=True)
class ScoredMessage:
    message_id: str
    base_score: int
    repetition_bonus: int
    cs: int
    pcs: int


def base_score(labels: LabelSet) -> int:
    """Point value of one message before repetition escalation."""
    if labels.is_positive is True and labels.is_negative is True:
        raise InvalidLabels("is_positive and is_negative are mutually exclusive")
    if labels.is_positive is True:
        return -1 + (-3 if labels.specific_target is True else 0)
    if labels.is_negative is True:
        return (
            1
            + (1 if labels.noob_related is True else 0)
            + (2 if labels.has_bad_language is True or labels.filtered_text is True else 0)
            + (2 if labels.is_racist is True else 0)
            + (3 if labels.specific_target is True else 0)
        )
    return 0


def repetition_bonuses(messages: Iterable[tuple[int, float, bool]]) -> list[int]:
    """Bonus per message for a clock-ordered (author, clock, is_negative)
    sequence: each author's k-th negative message gets k, everything else 0."""
    counters: dict[int, int] = {}
    bonuses = []
    for author, _clock, is_negative in messages:
        if is_negative:
            bonus = counters.get(author, 0)
            counters[author] = bonus + 1
            bonuses.append(bonus)
        else:
            bonuses.append(0)
    return bonuses


def pcs(labels: LabelSet, repetition_bonus: int) -> int:
    """Proxy score from automatic labels; specific_target plays no part."""
    return (
        (1 if labels.is_negative is True else 0)
        + (1 if labels.noob_related is True else 0)
        + (2 if labels.has_bad_language is True or labels.filtered_text is True else 0)
        + (2 if labels.is_racist is True else 0)
        + repetition_bonus
    )


def effective_labels(message: MatchMessage, label_source: str) -> LabelSet:
    if label_source == "manual":
        return message.manual_labels
    if label_source == "auto":
        return message.auto_labels
    if label_source == "merged":
        try:
            return message.manual_labels.merged_over(message.auto_labels)
        except InvalidLabels as exc:
            raise InvalidLabels(f"{message.message_id}: {exc}") from None
    raise ValueError(f"label_source must be one of {LABEL_SOURCES}")


def cs_for_match(messages: Sequence[MatchMessage],
                 label_source: str = "merged") -> list[ScoredMessage]:
    """Score one match's messages, returned in clock order (ties keep the
    caller's ordering, which is ingestion order)."""
    ordered = sorted(messages, key=lambda m: m.clock)

    chosen = [effective_labels(m, label_source) for m in ordered]
    cs_bonuses = repetition_bonuses(
        (m.author_account_id, m.clock, labels.is_negative is True)
        for m, labels in zip(ordered, chosen)
    )
    pcs_bonuses = repetition_bonuses(
        (m.author_account_id, m.clock, m.auto_labels.is_negative is True)
        for m in ordered
    )

    scored = []
    for message, labels, cs_bonus, pcs_bonus in zip(ordered, chosen,
                                                    cs_bonuses, pcs_bonuses):
        try:
            base = base_score(labels)
        except InvalidLabels as exc:
            raise InvalidLabels(f"{message.message_id}: {exc}") from None
        scored.append(ScoredMessage(
            message_id=message.message_id,
            base_score=base,
            repetition_bonus=cs_bonus,
            cs=base + cs_bonus,
            pcs=pcs(message.auto_labels, pcs_bonus),
        ))
    return scored

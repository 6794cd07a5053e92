"""Agreement metrics between two labelling systems.

Confusion matrices, the diagnostic odds ratio DOR = (tp·tn)/(fn·fp), and the
F-score 2tp/(2tp+fp+fn), plus the published reference matrices this
implementation reproduces as regression anchors. Pairs where either side is
unknown are excluded from comparison and counted, never imputed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .labels import ATTRIBUTES, LabelSet
from .scoring import MatchMessage, cs_for_match

CORRECTIONS = ("none", "haldane")


class NoOverlap(ValueError):
    """No message pair had the attribute resolved on both sides."""


class ZeroDenominator(ArithmeticError):
    """DOR undefined: fn·fp = 0 without a continuity correction."""


class UndefinedMetric(ArithmeticError):
    """F-score undefined: tp, fp and fn are all zero."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int
    attribute: str = ""
    systems: tuple[str, str] = ("reference", "candidate")
    excluded: int = 0  # pairs skipped because either side was unknown

    def __post_init__(self) -> None:
        for cell in ("tp", "tn", "fp", "fn", "excluded"):
            if getattr(self, cell) < 0:
                raise ValueError(f"{cell} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def cells(self) -> dict[str, int]:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion_from_flags(reference: Sequence[bool], candidate: Sequence[bool],
                         attribute: str = "",
                         systems: tuple[str, str] = ("reference", "candidate"),
                         excluded: int = 0) -> ConfusionMatrix:
    """Tally already-binarized aligned outcome flags."""
    if len(reference) != len(candidate):
        raise ValueError("reference and candidate must have equal length")
    if not reference:
        raise NoOverlap(f"no comparable pairs for {attribute or 'flags'}")
    tp = tn = fp = fn = 0
    for ref, cand in zip(reference, candidate):
        if ref and cand:
            tp += 1
        elif not ref and not cand:
            tn += 1
        elif ref:
            fn += 1
        else:
            fp += 1
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn, attribute=attribute,
                           systems=systems, excluded=excluded)


def confusion(reference: Sequence[LabelSet], candidate: Sequence[LabelSet],
              attribute: str,
              systems: tuple[str, str] = ("reference", "candidate")) -> ConfusionMatrix:
    """Compare one attribute across aligned label sets, excluding pairs where
    either side left it unknown."""
    if attribute not in ATTRIBUTES:
        raise KeyError(attribute)
    if len(reference) != len(candidate):
        raise ValueError("reference and candidate must have equal length")
    ref_flags: list[bool] = []
    cand_flags: list[bool] = []
    excluded = 0
    for ref_set, cand_set in zip(reference, candidate):
        ref = ref_set.get(attribute)
        cand = cand_set.get(attribute)
        if ref is None or cand is None:
            excluded += 1
            continue
        ref_flags.append(ref)
        cand_flags.append(cand)
    if not ref_flags:
        raise NoOverlap(f"no message has {attribute} resolved on both sides")
    return confusion_from_flags(ref_flags, cand_flags, attribute, systems, excluded)


def dor(m: ConfusionMatrix, correction: str = "none") -> float:
    """Diagnostic odds ratio. haldane adds 0.5 to every cell first, making
    zero-cell matrices finite."""
    if correction == "none":
        if m.fn * m.fp == 0:
            raise ZeroDenominator(
                f"fn={m.fn}, fp={m.fp}: use correction='haldane' for zero cells")
        return (m.tp * m.tn) / (m.fn * m.fp)
    if correction == "haldane":
        return ((m.tp + 0.5) * (m.tn + 0.5)) / ((m.fn + 0.5) * (m.fp + 0.5))
    raise ValueError(f"correction must be one of {CORRECTIONS}")


def f_score(m: ConfusionMatrix) -> float:
    denominator = 2 * m.tp + m.fp + m.fn
    if denominator == 0:
        raise UndefinedMetric("tp, fp and fn are all zero")
    return 2 * m.tp / denominator


# ------------------------------------------------------- published anchors

@dataclass(frozen=True)
class PublishedMatrix:
    """A reference matrix published for this pipeline, kept as a regression
    anchor. ``printed_dor`` is the value as printed at the source's own
    precision; ``footnote`` records where that print disagrees with what the
    cells actually give."""

    key: str
    description: str
    matrix: ConfusionMatrix
    printed_dor: float
    footnote: str | None = None


PUBLISHED_MATRICES: tuple[PublishedMatrix, ...] = (
    PublishedMatrix(
        key="racist_keywords",
        description="manual is_racist vs keyword rules",
        matrix=ConfusionMatrix(tp=18, tn=5021, fn=20, fp=2,
                               attribute="is_racist", systems=("manual", "auto")),
        printed_dor=2259,
    ),
    PublishedMatrix(
        key="bad_language_keywords",
        description="manual has_bad_language vs keyword rules",
        matrix=ConfusionMatrix(tp=342, tn=4557, fn=150, fp=11,
                               attribute="has_bad_language", systems=("manual", "auto")),
        printed_dor=946,
        footnote="printed as 946, but these cells give 944.54; the cells are "
                 "kept authoritative",
    ),
    PublishedMatrix(
        key="negative_keywords",
        description="manual is_negative vs keyword rules",
        matrix=ConfusionMatrix(tp=389, tn=4132, fn=494, fp=2,
                               attribute="is_negative", systems=("manual", "auto")),
        printed_dor=1627,
        footnote="the printed working shows a denominator factor of 48, yet "
                 "the printed result 1627 matches fp=2; the cells are kept "
                 "authoritative",
    ),
    PublishedMatrix(
        key="noob_keywords",
        description="manual noob_related vs keyword rules",
        matrix=ConfusionMatrix(tp=46, tn=5011, fn=5, fp=1,
                               attribute="noob_related", systems=("manual", "auto")),
        printed_dor=46101,
    ),
    PublishedMatrix(
        key="cs_vs_pcs",
        description="manual score positive (CS>0) vs proxy score positive (PCS>0)",
        matrix=ConfusionMatrix(tp=654, tn=3987, fn=23, fp=399,
                               attribute="", systems=("manual-cs", "proxy-pcs")),
        printed_dor=284,
    ),
    PublishedMatrix(
        key="abusive_vs_twinword",
        description="manual is_abusive vs Twinword-style negative polarity",
        matrix=ConfusionMatrix(tp=309, tn=1592, fn=127, fp=1279,
                               attribute="is_abusive", systems=("manual", "twinword")),
        printed_dor=3,
    ),
    PublishedMatrix(
        key="abusive_vs_azure",
        description="manual is_abusive vs Azure-style negative polarity",
        matrix=ConfusionMatrix(tp=156, tn=204, fn=33, fp=145,
                               attribute="is_abusive", systems=("manual", "azure")),
        printed_dor=6.6,
    ),
)


def published_matrix(key: str) -> PublishedMatrix:
    for entry in PUBLISHED_MATRICES:
        if entry.key == key:
            return entry
    raise KeyError(key)


def reproduction_report() -> list[dict]:
    """Recompute the DOR of every published anchor matrix next to the value
    printed at the source."""
    rows = []
    for entry in PUBLISHED_MATRICES:
        rows.append({
            "key": entry.key,
            "description": entry.description,
            "cells": entry.matrix.cells(),
            "computed_dor": dor(entry.matrix),
            "printed_dor": entry.printed_dor,
            "footnote": entry.footnote,
        })
    return rows


# ------------------------------------------------------- store-level report

def evaluation_report(store, correction: str = "none") -> dict:
    """Per-attribute manual-vs-auto agreement over every stored message, plus
    the binary score comparison (manual CS > 0 vs proxy PCS > 0) over
    messages whose manual is_negative is resolved."""
    rows = list(store.iter_messages())

    manual_sets = [r.manual_labels for r in rows]
    auto_sets = [r.auto_labels for r in rows]
    attributes: dict[str, dict] = {}
    for attribute in ATTRIBUTES:
        try:
            m = confusion(manual_sets, auto_sets, attribute, systems=("manual", "auto"))
        except NoOverlap:
            attributes[attribute] = {"error": "no-overlap"}
            continue
        entry: dict = {"cells": m.cells(), "excluded": m.excluded, "total": m.total}
        try:
            entry["dor"] = dor(m, correction)
        except ZeroDenominator:
            entry["dor"] = None
            entry["dor_error"] = "zero-denominator"
        try:
            entry["f_score"] = f_score(m)
        except UndefinedMetric:
            entry["f_score"] = None
        attributes[attribute] = entry

    by_match: dict[str, list] = {}
    for row in rows:
        by_match.setdefault(row.match_id, []).append(row)
    ref_flags: list[bool] = []
    cand_flags: list[bool] = []
    excluded = 0
    for group in by_match.values():
        scored = cs_for_match(
            [MatchMessage(message_id=r.message_id,
                          author_account_id=r.author_account_id,
                          clock=r.clock,
                          auto_labels=r.auto_labels,
                          manual_labels=r.manual_labels)
             for r in group],
            label_source="manual",
        )
        by_id = {s.message_id: s for s in scored}
        for r in group:
            if r.manual_labels.is_negative is None:
                excluded += 1
                continue
            s = by_id[r.message_id]
            ref_flags.append(s.cs > 0)
            cand_flags.append(s.pcs > 0)

    score_comparison: dict
    try:
        m = confusion_from_flags(ref_flags, cand_flags, attribute="cs_vs_pcs",
                                 systems=("manual-cs", "proxy-pcs"),
                                 excluded=excluded)
        score_comparison = {"cells": m.cells(), "excluded": m.excluded,
                            "total": m.total}
        try:
            score_comparison["dor"] = dor(m, correction)
        except ZeroDenominator:
            score_comparison["dor"] = None
            score_comparison["dor_error"] = "zero-denominator"
    except NoOverlap:
        score_comparison = {"error": "no-overlap"}

    return {"attributes": attributes, "cs_vs_pcs": score_comparison,
            "message_count": len(rows)}

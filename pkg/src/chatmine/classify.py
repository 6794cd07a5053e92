"""Keyword rule engine producing automatic tri-state labels.

Matching is caseless (casefold on both sides). Two engine modes:

* ``boundary`` (default) — terms of three characters or fewer only match at
  word boundaries, so "class" never trips "ass"; longer terms match as
  substrings unless their lexicon demands boundaries for everything.
* ``paper-faithful`` — every term is a plain substring, reproducing the
  original study's behaviour, false hits and all ("you nob").

The engine never resolves is_abusive or specific_target: detecting those
takes human judgement, so automatic label sets leave them unknown.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .labels import ATTRIBUTES, InvalidLabels, LabelSet

log = logging.getLogger(__name__)

MATCH_SUBSTRING = "substring"
MATCH_WORD_BOUNDARY = "word_boundary"
_MATCH_MODES = (MATCH_SUBSTRING, MATCH_WORD_BOUNDARY)

MODE_BOUNDARY = "boundary"
MODE_PAPER_FAITHFUL = "paper-faithful"
ENGINE_MODES = (MODE_BOUNDARY, MODE_PAPER_FAITHFUL)

# Lexicon roles the engine requires, and the lexicon-hit attribute each feeds.
REQUIRED_LEXICONS = ("swears", "racist", "noob", "positive", "negative")

# In boundary mode, terms this short are always boundary-matched.
_SHORT_TERM = 3

_FILTERED = re.compile(r"\*{2,}")


class EmptyLexicon(ValueError):
    pass


@dataclass(frozen=True)
class Lexicon:
    name: str
    entries: frozenset[str]
    match_mode: str = MATCH_SUBSTRING

    def __post_init__(self) -> None:
        if not self.entries:
            raise EmptyLexicon(f"lexicon {self.name!r} has no entries")
        if self.match_mode not in _MATCH_MODES:
            raise ValueError(f"match_mode must be one of {_MATCH_MODES}")
        for term in self.entries:
            if not term or any(c.isupper() for c in term):
                raise ValueError(f"lexicon terms must be non-empty lowercase: {term!r}")


def load_lexicon(path: str | Path, name: str | None = None,
                 match_mode: str = MATCH_SUBSTRING) -> Lexicon:
    """One term per line; ``#`` lines are comments; terms are casefolded and
    deduplicated."""
    path = Path(path)
    entries = set()
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        entries.add(line.casefold())
    if not entries:
        raise EmptyLexicon(f"{path} contains no terms")
    return Lexicon(name=name or path.stem, entries=frozenset(entries),
                   match_mode=match_mode)


def load_lexicon_dir(directory: str | Path) -> dict[str, Lexicon]:
    """Load ``<role>.txt`` for every required role from a directory."""
    directory = Path(directory)
    return {role: load_lexicon(directory / f"{role}.txt") for role in REQUIRED_LEXICONS}


def default_lexicons() -> dict[str, Lexicon]:
    """The seed lexicons shipped with the package."""
    base = resources.files("chatmine") / "lexicons"
    out = {}
    for role in REQUIRED_LEXICONS:
        text = (base / f"{role}.txt").read_text(encoding="utf-8")
        entries = frozenset(
            line.strip().casefold()
            for line in text.splitlines()
            if line.strip() and not line.strip().startswith("#")
        )
        out[role] = Lexicon(name=role, entries=entries)
    return out


@dataclass
class Classifier:
    """Compiled rule engine over a full set of role-named lexicons."""

    lexicons: Mapping[str, Lexicon]
    mode: str = MODE_BOUNDARY
    _patterns: dict[str, re.Pattern] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in ENGINE_MODES:
            raise ValueError(f"mode must be one of {ENGINE_MODES}")
        missing = [r for r in REQUIRED_LEXICONS if r not in self.lexicons]
        if missing:
            raise ValueError(f"missing lexicons: {missing}")
        self._patterns = {
            role: self._compile(self.lexicons[role]) for role in REQUIRED_LEXICONS
        }

    def _compile(self, lexicon: Lexicon) -> re.Pattern:
        parts = []
        for term in sorted(lexicon.entries):
            escaped = re.escape(term)
            bounded = self.mode == MODE_BOUNDARY and (
                len(term) <= _SHORT_TERM
                or lexicon.match_mode == MATCH_WORD_BOUNDARY
            )
            parts.append(rf"(?<!\w){escaped}(?!\w)" if bounded else escaped)
        return re.compile("|".join(parts))

    def _hits(self, role: str, folded: str) -> bool:
        return self._patterns[role].search(folded) is not None

    def classify(self, text: str) -> LabelSet:
        """Classify one message. is_abusive and specific_target stay unknown;
        a negative hit always beats a positive one."""
        if not text:
            raise ValueError("text must be non-empty")
        folded = text.casefold()
        noob = self._hits("noob", folded)
        bad = self._hits("swears", folded)
        racist = self._hits("racist", folded)
        filtered = _FILTERED.search(text) is not None
        negative = noob or bad or racist or filtered or self._hits("negative", folded)
        positive = self._hits("positive", folded) and not negative
        return LabelSet(
            is_abusive=None,
            is_positive=positive,
            is_negative=negative,
            has_bad_language=bad,
            is_racist=racist,
            noob_related=noob,
            specific_target=None,
            filtered_text=filtered,
        )


def classify_message(text: str, lexicons: Mapping[str, Lexicon],
                     mode: str = MODE_BOUNDARY) -> LabelSet:
    """One-shot convenience wrapper; build a Classifier for bulk work."""
    return Classifier(lexicons, mode).classify(text)


def classify_corpus(store, classifier: Classifier) -> dict[str, int]:
    """Write auto labels for every stored message; returns how many messages
    resolved true per attribute. Re-running is idempotent.

    A message whose existing manual labels contradict the new automatic
    ones (the store rejects merges claiming both positive and negative)
    keeps its previous auto labels and is logged, not fatal.
    """
    counts = dict.fromkeys(ATTRIBUTES, 0)
    for row in store.iter_messages():
        labels = classifier.classify(row.text)
        try:
            store.set_auto_labels(row.message_id, labels)
        except InvalidLabels as exc:
            log.warning("skipping auto labels for %s: %s", row.message_id, exc)
            continue
        for attr in ATTRIBUTES:
            if labels.get(attr) is True:
                counts[attr] += 1
    return counts

"""Tri-state message label sets.

Every chat message carries eight descriptive attributes. Each attribute is
tri-state: True, False, or None (= unknown / not yet judged). Automatic
classification resolves only the attributes it can detect; the rest stay
unknown until a human annotator settles them.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

# Canonical attribute order. Exports, reports, and the annotation API all
# follow this order.
ATTRIBUTES: tuple[str, ...] = (
    "is_abusive",
    "is_positive",
    "is_negative",
    "has_bad_language",
    "is_racist",
    "noob_related",
    "specific_target",
    "filtered_text",
)

TriState = bool | None


class InvalidLabels(ValueError):
    """Raised when a label set violates the positive/negative exclusion."""


@dataclass(frozen=True)
class LabelSet:
    is_abusive: TriState = None
    is_positive: TriState = None
    is_negative: TriState = None
    has_bad_language: TriState = None
    is_racist: TriState = None
    noob_related: TriState = None
    specific_target: TriState = None
    filtered_text: TriState = None

    def __post_init__(self) -> None:
        if self.is_positive is True and self.is_negative is True:
            raise InvalidLabels("is_positive and is_negative are mutually exclusive")

    def get(self, attribute: str) -> TriState:
        if attribute not in ATTRIBUTES:
            raise KeyError(attribute)
        return getattr(self, attribute)

    def with_value(self, attribute: str, value: TriState) -> "LabelSet":
        if attribute not in ATTRIBUTES:
            raise KeyError(attribute)
        return replace(self, **{attribute: value})

    def as_dict(self) -> dict[str, TriState]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def resolved(self) -> bool:
        """True when every attribute has a definite value."""
        return all(getattr(self, a) is not None for a in ATTRIBUTES)

    def merged_over(self, fallback: "LabelSet") -> "LabelSet":
        """Per-attribute merge: this set where resolved, else ``fallback``."""
        values = {}
        for a in ATTRIBUTES:
            own = getattr(self, a)
            values[a] = own if own is not None else getattr(fallback, a)
        return LabelSet(**values)

    @classmethod
    def from_dict(cls, data: dict[str, TriState]) -> "LabelSet":
        unknown = set(data) - set(ATTRIBUTES)
        if unknown:
            raise KeyError(f"unknown label attributes: {sorted(unknown)}")
        return cls(**{a: data[a] for a in ATTRIBUTES if a in data})


ALL_UNKNOWN = LabelSet()

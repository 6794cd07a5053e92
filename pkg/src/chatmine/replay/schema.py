"""Packet schema: which packet types carry chat/death events and how their
payloads are laid out.

Real replay layouts drift between game versions, so everything the extractors
need to know lives in one schema object that can be loaded from a plain
``key = value`` config file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass(frozen=True)
class PacketSchema:
    chat_type_id: int = 35
    death_type_id: int = 36
    # chat payload: { author u64, text_len u32, text bytes }
    chat_author_offset: int = 0
    chat_text_len_offset: int = 8
    chat_text_offset: int = 12
    # death payload: { victim u64, killer u64 }
    death_victim_offset: int = 0
    death_killer_offset: int = 8

    def __post_init__(self) -> None:
        if self.chat_type_id == self.death_type_id:
            raise ValueError("chat_type_id and death_type_id must differ")
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")


DEFAULT_SCHEMA = PacketSchema()

_INT_FIELDS = {f.name for f in fields(PacketSchema)}


def load_schema(path: str | Path) -> PacketSchema:
    """Read a schema config file: one ``key = value`` per line, ``#`` comments."""
    values: dict[str, int] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _INT_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown schema field {key!r}")
        try:
            values[key] = int(value.strip(), 0)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {value.strip()!r} is not an integer") from exc
    return PacketSchema(**values)

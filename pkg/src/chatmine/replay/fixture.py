"""Synthetic replay encoder.

Produces files in the exact layout codec.py decodes, so round-trip tests and
the local fixture server never need real game files. Clocks are snapped to
f32 on construction because that is all the wire format can carry.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass

from .codec import MAGIC, encrypt_stream
from .schema import DEFAULT_SCHEMA, PacketSchema

# Never ship or assume the real game key; tests and fixtures use this one.
DEFAULT_TEST_KEY = bytes(range(16))


class SpecInvalid(ValueError):
    pass


def _f32(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


@dataclass(frozen=True)
class FixturePlayer:
    account_id: int
    display_name: str
    vehicle: str = "medium-1"
    team: int = 1


@dataclass(frozen=True)
class FixtureChat:
    clock: float
    author_account_id: int
    text: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "clock", _f32(self.clock))


@dataclass(frozen=True)
class FixtureDeath:
    clock: float
    victim_account_id: int
    killer_account_id: int = 0  # 0 = environment

    def __post_init__(self) -> None:
        object.__setattr__(self, "clock", _f32(self.clock))


@dataclass(frozen=True)
class RawPacket:
    packet_type: int
    clock: float
    payload: bytes

    def __post_init__(self) -> None:
        object.__setattr__(self, "clock", _f32(self.clock))


@dataclass(frozen=True)
class FixtureSpec:
    match_id: str
    players: tuple[FixturePlayer, ...]
    chats: tuple[FixtureChat, ...] = ()
    deaths: tuple[FixtureDeath, ...] = ()
    extra_meta: tuple[str, ...] = ()
    raw_packets: tuple[RawPacket, ...] = ()

    def sorted_chats(self) -> list[FixtureChat]:
        return sorted(self.chats, key=lambda c: c.clock)

    def sorted_deaths(self) -> list[FixtureDeath]:
        return sorted(self.deaths, key=lambda d: d.clock)


def _validate(spec: FixtureSpec) -> None:
    if not spec.match_id:
        raise SpecInvalid("match_id required")
    seen_ids = set()
    for p in spec.players:
        if p.account_id <= 0:
            raise SpecInvalid(f"account_id must be positive: {p.account_id}")
        if p.team not in (1, 2):
            raise SpecInvalid(f"team must be 1 or 2: {p.team}")
        if p.account_id in seen_ids:
            raise SpecInvalid(f"duplicate account_id {p.account_id}")
        seen_ids.add(p.account_id)
    for c in spec.chats:
        if c.clock < 0:
            raise SpecInvalid(f"chat clock must be >= 0: {c.clock}")
        if not c.text.strip():
            raise SpecInvalid("chat text must be non-empty")
    for d in spec.deaths:
        if d.clock < 0:
            raise SpecInvalid(f"death clock must be >= 0: {d.clock}")
        if d.victim_account_id == d.killer_account_id and d.killer_account_id != 0:
            raise SpecInvalid("victim may equal killer only for environment kills")
    for r in spec.raw_packets:
        if r.clock < 0:
            raise SpecInvalid(f"raw packet clock must be >= 0: {r.clock}")


def encode_fixture(
    spec: FixtureSpec,
    key: bytes = DEFAULT_TEST_KEY,
    schema: PacketSchema = DEFAULT_SCHEMA,
) -> bytes:
    """Encode a fixture spec to replay bytes. Deterministic: the same spec
    always yields identical bytes."""
    _validate(spec)

    roster = {
        "match_id": spec.match_id,
        "players": [
            {"account_id": p.account_id, "name": p.display_name,
             "vehicle": p.vehicle, "team": p.team}
            for p in spec.players
        ],
    }
    meta_blocks = [json.dumps(roster, ensure_ascii=False), *spec.extra_meta]

    records: list[tuple[float, int, bytes]] = []
    for c in spec.chats:
        text = c.text.encode("utf-8")
        payload = struct.pack("<QI", c.author_account_id, len(text)) + text
        records.append((c.clock, schema.chat_type_id, payload))
    for d in spec.deaths:
        payload = struct.pack("<QQ", d.victim_account_id, d.killer_account_id)
        records.append((d.clock, schema.death_type_id, payload))
    for r in spec.raw_packets:
        records.append((r.clock, r.packet_type, r.payload))
    records.sort(key=lambda rec: rec[0])  # stable: listing order kept on ties

    stream = bytearray()
    for clock, type_id, payload in records:
        stream += struct.pack("<IIf", len(payload), type_id, clock)
        stream += payload

    out = bytearray()
    out += struct.pack("<II", MAGIC, len(meta_blocks))
    for block in meta_blocks:
        raw = block.encode("utf-8")
        out += struct.pack("<I", len(raw))
        out += raw
    out += encrypt_stream(zlib.compress(bytes(stream), level=6), key)
    return bytes(out)

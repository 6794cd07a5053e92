"""Binary replay decoding.

File layout (all integers little-endian):

    magic    u32 = 0x12323411
    nblocks  u32
    nblocks times: { length u32, UTF-8 text }   # metadata documents (JSON)
    remainder: encrypted packet stream

The packet stream is deflate-compressed (RFC 1950) and then encrypted with
Blowfish in 8-byte blocks chained by plaintext XOR: plaintext block i is
XORed with plaintext block i-1 before encryption (the first block is used
as-is) and the final partial block is zero-padded. The padding must decrypt
back to zeros — nonzero tail bytes are treated as tampering. Each packet
record is

    { payload_size u32, packet_type u32, clock f32, payload }

Payload interpretation (which type id is chat, field offsets) comes from a
PacketSchema; see schema.py.

Error taxonomy: structural problems raise a ReplayError subclass carrying the
byte offset where decoding stopped (for packet errors, the offset is within
the inflated stream). A ragged partial packet header at the very end of the
stream is salvage territory instead: the parsed prefix is kept and a warning
logged.
"""

from __future__ import annotations

import json
import logging
import math
import struct
import zlib
from dataclasses import dataclass

from cryptography.hazmat.decrepit.ciphers.algorithms import Blowfish
from cryptography.hazmat.primitives.ciphers import Cipher, modes

from .schema import DEFAULT_SCHEMA, PacketSchema

log = logging.getLogger(__name__)

MAGIC = 0x12323411
KEY_LEN = 16
BLOCK = 8
_PACKET_HEADER = struct.Struct("<IIf")

# Decompression cap; a corrupt or hostile size field must not allocate
# unboundedly.
MAX_INFLATED = 512 * 1024 * 1024


class ReplayError(Exception):
    """Base for structural decode failures. ``offset`` is the byte position
    at which the problem was detected."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class BadMagic(ReplayError):
    pass


class TruncatedBlock(ReplayError):
    pass


class DecryptionFailure(ReplayError):
    pass


class MalformedPacket(ReplayError):
    pass


@dataclass(frozen=True)
class Packet:
    packet_type: int
    clock: float
    payload: bytes


@dataclass(frozen=True)
class PlayerInfo:
    account_id: int
    display_name: str
    vehicle: str
    team: int


@dataclass(frozen=True)
class ChatMessage:
    message_id: str
    match_id: str
    author_account_id: int
    clock: float
    text: str
    unresolved: bool = False


@dataclass(frozen=True)
class DeathEvent:
    match_id: str
    victim_account_id: int
    killer_account_id: int  # 0 = environment
    clock: float
    unresolved: bool = False


@dataclass
class ReplayDocument:
    source_id: str
    meta_blocks: list[str]
    packets: list[Packet]
    players: list[PlayerInfo]
    match_id: str = ""


# ---------------------------------------------------------------- crypto

def _require_key(key: bytes) -> None:
    if len(key) != KEY_LEN:
        raise ValueError(f"key must be exactly {KEY_LEN} bytes, got {len(key)}")


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def encrypt_stream(plain: bytes, key: bytes) -> bytes:
    """Blowfish-encrypt with plaintext-XOR chaining; pads the final partial
    block with zeros."""
    _require_key(key)
    if len(plain) % BLOCK:
        plain = plain + bytes(BLOCK - len(plain) % BLOCK)
    chained = bytearray(len(plain))
    prev = bytes(BLOCK)
    for i in range(0, len(plain), BLOCK):
        block = plain[i : i + BLOCK]
        chained[i : i + BLOCK] = _xor(block, prev)
        prev = block
    enc = Cipher(Blowfish(key), modes.ECB()).encryptor()
    return enc.update(bytes(chained)) + enc.finalize()


def decrypt_stream(encrypted: bytes, key: bytes) -> bytes:
    """Inverse of encrypt_stream. Length must be a multiple of 8."""
    _require_key(key)
    if len(encrypted) % BLOCK:
        raise ValueError("ciphertext length must be a multiple of 8")
    dec = Cipher(Blowfish(key), modes.ECB()).decryptor()
    raw = dec.update(encrypted) + dec.finalize()
    out = bytearray(len(raw))
    prev = bytes(BLOCK)
    for i in range(0, len(raw), BLOCK):
        block = _xor(raw[i : i + BLOCK], prev)
        out[i : i + BLOCK] = block
        prev = block
    return bytes(out)


def _inflate(data: bytes, offset: int) -> bytes:
    """Inflate the decrypted stream. Only block-alignment zero padding may
    follow the deflate stream end; anything else means the ciphertext was
    tampered with or the key is wrong."""
    d = zlib.decompressobj()
    out = bytearray()
    try:
        out += d.decompress(data, MAX_INFLATED)
        while d.unconsumed_tail:
            if len(out) >= MAX_INFLATED:
                raise DecryptionFailure("inflated payload exceeds size cap", offset)
            out += d.decompress(d.unconsumed_tail, MAX_INFLATED)
        out += d.flush()
    except zlib.error as exc:
        raise DecryptionFailure(f"inflate failed after decrypt: {exc}", offset) from None
    if not d.eof:
        raise DecryptionFailure("deflate stream truncated", offset)
    if len(d.unused_data) >= BLOCK or any(d.unused_data):
        raise DecryptionFailure("garbage after deflate stream end", offset)
    return bytes(out)


# ---------------------------------------------------------------- decode

def decode_replay(
    data: bytes,
    key: bytes,
    schema: PacketSchema = DEFAULT_SCHEMA,
    source_id: str = "",
) -> ReplayDocument:
    """Decode a replay file into metadata blocks plus the full packet stream.

    Unknown packet types are retained with their raw payloads, never dropped.
    Raises BadMagic / TruncatedBlock / DecryptionFailure / MalformedPacket,
    each carrying a byte offset.
    """
    _require_key(key)
    n = len(data)
    if n < 8:
        raise TruncatedBlock("file shorter than fixed header", 0)
    magic, nblocks = struct.unpack_from("<II", data, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic 0x{magic:08x}", 0)
    pos = 8
    # Each block needs at least a 4-byte length; bounds the loop before it runs.
    if nblocks > (n - pos) // 4:
        raise TruncatedBlock(f"block count {nblocks} exceeds file size", 4)
    meta_blocks: list[str] = []
    for _ in range(nblocks):
        if pos + 4 > n:
            raise TruncatedBlock("metadata block length missing", pos)
        (block_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if block_len > n - pos:
            raise TruncatedBlock(f"metadata block of {block_len} bytes exceeds file", pos - 4)
        meta_blocks.append(data[pos : pos + block_len].decode("utf-8", errors="replace"))
        pos += block_len

    encrypted = data[pos:]
    if len(encrypted) % BLOCK:
        raise TruncatedBlock("encrypted region is not a multiple of 8 bytes",
                             pos + len(encrypted) // BLOCK * BLOCK)
    stream = _inflate(decrypt_stream(encrypted, key), pos)

    packets: list[Packet] = []
    spos = 0
    send = len(stream)
    while spos < send:
        if send - spos < _PACKET_HEADER.size:
            log.warning("replay %s: %d trailing bytes after last complete packet, kept prefix",
                        source_id or "<bytes>", send - spos)
            break
        payload_size, packet_type, clock = _PACKET_HEADER.unpack_from(stream, spos)
        if payload_size > send - spos - _PACKET_HEADER.size:
            raise MalformedPacket(
                f"packet size field {payload_size} exceeds remaining {send - spos - _PACKET_HEADER.size} bytes",
                spos)
        if math.isnan(clock) or clock < 0:
            raise MalformedPacket(f"packet clock {clock!r} invalid", spos)
        payload = stream[spos + _PACKET_HEADER.size : spos + _PACKET_HEADER.size + payload_size]
        packets.append(Packet(packet_type=packet_type, clock=clock, payload=payload))
        spos += _PACKET_HEADER.size + payload_size

    # Clock order is part of the document contract; stable sort keeps byte
    # order on ties.
    packets.sort(key=lambda p: p.clock)

    match_id, players = _parse_meta(meta_blocks)
    return ReplayDocument(
        source_id=source_id,
        meta_blocks=meta_blocks,
        packets=packets,
        players=players,
        match_id=match_id or source_id,
    )


def _parse_meta(meta_blocks: list[str]) -> tuple[str, list[PlayerInfo]]:
    """Pull match id and player roster out of the first JSON block carrying
    a roster. Unusable blocks are skipped, not fatal."""
    for block in meta_blocks:
        try:
            doc = json.loads(block)
        except (json.JSONDecodeError, UnicodeDecodeError):
            continue
        if not isinstance(doc, dict) or "players" not in doc:
            continue
        players = []
        raw_players = doc.get("players")
        if not isinstance(raw_players, list):
            continue
        for entry in raw_players:
            try:
                players.append(PlayerInfo(
                    account_id=int(entry["account_id"]),
                    display_name=str(entry["name"]),
                    vehicle=str(entry.get("vehicle", "")),
                    team=int(entry.get("team", 1)),
                ))
            except (KeyError, TypeError, ValueError):
                log.warning("skipping malformed roster entry: %r", entry)
        return str(doc.get("match_id", "")), players
    return "", []


# ---------------------------------------------------------------- extract

def extract_chat(doc: ReplayDocument, schema: PacketSchema = DEFAULT_SCHEMA) -> list[ChatMessage]:
    """One ChatMessage per chat packet, in clock order. Authors not present in
    the roster are flagged unresolved, never dropped."""
    known = {p.account_id for p in doc.players}
    messages: list[ChatMessage] = []
    index = 0
    for packet in doc.packets:
        if packet.packet_type != schema.chat_type_id:
            continue
        parsed = _parse_chat_payload(packet.payload, schema)
        if parsed is None:
            log.warning("replay %s: malformed chat payload at clock %s, skipped",
                        doc.source_id, packet.clock)
            continue
        author, text = parsed
        if not text.strip():
            log.warning("replay %s: empty chat text at clock %s, skipped", doc.source_id, packet.clock)
            continue
        messages.append(ChatMessage(
            message_id=f"{doc.match_id}:{index}",
            match_id=doc.match_id,
            author_account_id=author,
            clock=packet.clock,
            text=text,
            unresolved=author not in known,
        ))
        index += 1
    return messages


def _parse_chat_payload(payload: bytes, schema: PacketSchema) -> tuple[int, str] | None:
    end = schema.chat_text_len_offset + 4
    if len(payload) < max(schema.chat_author_offset + 8, end, schema.chat_text_offset):
        return None
    (author,) = struct.unpack_from("<Q", payload, schema.chat_author_offset)
    (text_len,) = struct.unpack_from("<I", payload, schema.chat_text_len_offset)
    start = schema.chat_text_offset
    if start + text_len > len(payload):
        return None
    return author, payload[start : start + text_len].decode("utf-8", errors="replace")


def extract_deaths(doc: ReplayDocument, schema: PacketSchema = DEFAULT_SCHEMA) -> list[DeathEvent]:
    """One DeathEvent per death packet, in clock order."""
    known = {p.account_id for p in doc.players}
    events: list[DeathEvent] = []
    for packet in doc.packets:
        if packet.packet_type != schema.death_type_id:
            continue
        need = max(schema.death_victim_offset, schema.death_killer_offset) + 8
        if len(packet.payload) < need:
            log.warning("replay %s: malformed death payload at clock %s, skipped",
                        doc.source_id, packet.clock)
            continue
        (victim,) = struct.unpack_from("<Q", packet.payload, schema.death_victim_offset)
        (killer,) = struct.unpack_from("<Q", packet.payload, schema.death_killer_offset)
        if victim == killer and killer != 0:
            log.warning("replay %s: self-kill without environment killer at clock %s, skipped",
                        doc.source_id, packet.clock)
            continue
        events.append(DeathEvent(
            match_id=doc.match_id,
            victim_account_id=victim,
            killer_account_id=killer,
            clock=packet.clock,
            unresolved=victim not in known,
        ))
    return events

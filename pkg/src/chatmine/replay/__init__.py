from .codec import (
    BadMagic,
    ChatMessage,
    DeathEvent,
    DecryptionFailure,
    MalformedPacket,
    Packet,
    PlayerInfo,
    ReplayDocument,
    ReplayError,
    TruncatedBlock,
    decode_replay,
    decrypt_stream,
    encrypt_stream,
    extract_chat,
    extract_deaths,
)
from .fixture import (
    DEFAULT_TEST_KEY,
    FixtureChat,
    FixtureDeath,
    FixturePlayer,
    FixtureSpec,
    RawPacket,
    SpecInvalid,
    encode_fixture,
)
from .schema import DEFAULT_SCHEMA, PacketSchema, load_schema

__all__ = [
    "BadMagic",
    "ChatMessage",
    "DEFAULT_SCHEMA",
    "DEFAULT_TEST_KEY",
    "DeathEvent",
    "DecryptionFailure",
    "FixtureChat",
    "FixtureDeath",
    "FixturePlayer",
    "FixtureSpec",
    "MalformedPacket",
    "Packet",
    "PacketSchema",
    "PlayerInfo",
    "RawPacket",
    "ReplayDocument",
    "ReplayError",
    "SpecInvalid",
    "TruncatedBlock",
    "decode_replay",
    "decrypt_stream",
    "encode_fixture",
    "encrypt_stream",
    "extract_chat",
    "extract_deaths",
    "load_schema",
]

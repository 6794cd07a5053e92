"""Replay codec: crypto anchors, round-trips, error taxonomy, fuzz, perf."""

from __future__ import annotations

import json
import math
import random
import struct
import time
import zlib

import pytest
from cryptography.hazmat.decrepit.ciphers.algorithms import Blowfish
from cryptography.hazmat.primitives.ciphers import Cipher, modes
from hypothesis import given, settings
from hypothesis import strategies as st

from chatmine.replay import (
    DEFAULT_SCHEMA,
    DEFAULT_TEST_KEY,
    BadMagic,
    DecryptionFailure,
    FixtureChat,
    FixtureDeath,
    FixturePlayer,
    FixtureSpec,
    MalformedPacket,
    PacketSchema,
    RawPacket,
    ReplayDocument,
    ReplayError,
    SpecInvalid,
    TruncatedBlock,
    decode_replay,
    decrypt_stream,
    encode_fixture,
    encrypt_stream,
    extract_chat,
    extract_deaths,
    load_schema,
)
from chatmine.replay.codec import MAGIC

from replay_strategies import (
    encrypted_region_start,
    fixture_specs,
    mutate_encrypted_byte,
    random_fixture_spec,
)

KEY = DEFAULT_TEST_KEY


def make_spec(**overrides) -> FixtureSpec:
    base = dict(
        match_id="m-1",
        players=(
            FixturePlayer(account_id=101, display_name="alpha"),
            FixturePlayer(account_id=202, display_name="beta", team=2),
        ),
        chats=(FixtureChat(clock=1.0, author_account_id=101, text="hello"),),
    )
    base.update(overrides)
    return FixtureSpec(**base)


def encode_raw_stream(stream: bytes, key: bytes = KEY) -> bytes:
    """File with zero meta blocks around an arbitrary packet stream; lets
    tests craft byte sequences encode_fixture refuses to produce."""
    return struct.pack("<II", MAGIC, 0) + encrypt_stream(zlib.compress(stream), key)


# ---------------------------------------------------------------- crypto

# Published Blowfish ECB test vectors (key, plaintext, ciphertext).
BLOWFISH_VECTORS = [
    ("0000000000000000", "0000000000000000", "4EF997456198DD78"),
    ("FFFFFFFFFFFFFFFF", "FFFFFFFFFFFFFFFF", "51866FD5B85ECB8A"),
    ("3000000000000000", "1000000000000001", "7D856F9A613063F2"),
    ("1111111111111111", "1111111111111111", "2466DD878B963C9D"),
]


@pytest.mark.parametrize("key_hex,plain_hex,cipher_hex", BLOWFISH_VECTORS)
def test_blowfish_published_vectors(key_hex, plain_hex, cipher_hex):
    enc = Cipher(Blowfish(bytes.fromhex(key_hex)), modes.ECB()).encryptor()
    got = enc.update(bytes.fromhex(plain_hex)) + enc.finalize()
    assert got.hex().upper() == cipher_hex


def test_blowfish_16_byte_key_frozen_block():
    # Pins the exact 16-byte-key behaviour the codec relies on.
    enc = Cipher(Blowfish(KEY), modes.ECB()).encryptor()
    got = enc.update(bytes.fromhex("0011223344556677")) + enc.finalize()
    assert got.hex() == "0263249aa34d999e"


def test_encrypt_stream_frozen_bytes():
    # 20 bytes -> zero-padded to 24; chaining covered bit-exactly.
    ct = encrypt_stream(bytes(range(20)), KEY)
    assert ct.hex() == "866f5e72e59a195195fcb249bf3d4145be7638f5188edf3c"
    assert decrypt_stream(ct, KEY)[:20] == bytes(range(20))


@given(st.binary(max_size=200))
def test_stream_crypto_roundtrip(plain):
    out = decrypt_stream(encrypt_stream(plain, KEY), KEY)
    assert out[: len(plain)] == plain
    assert len(out) % 8 == 0
    assert all(b == 0 for b in out[len(plain):])


def test_stream_crypto_rejects_bad_inputs():
    with pytest.raises(ValueError):
        encrypt_stream(b"x", b"short-key")
    with pytest.raises(ValueError):
        decrypt_stream(b"123456789", KEY)  # not a multiple of 8


# ---------------------------------------------------------------- round-trip

def chat_tuples(messages):
    return [(m.clock, m.author_account_id, m.text) for m in messages]


def death_tuples(events):
    return [(e.clock, e.victim_account_id, e.killer_account_id) for e in events]


def assert_roundtrip(spec: FixtureSpec):
    doc = decode_replay(encode_fixture(spec), KEY, source_id=spec.match_id)
    assert doc.match_id == spec.match_id
    assert [(p.account_id, p.display_name, p.vehicle, p.team) for p in doc.players] == [
        (p.account_id, p.display_name, p.vehicle, p.team) for p in spec.players
    ]
    assert chat_tuples(extract_chat(doc)) == [
        (c.clock, c.author_account_id, c.text) for c in spec.sorted_chats()
    ]
    assert death_tuples(extract_deaths(doc)) == [
        (d.clock, d.victim_account_id, d.killer_account_id) for d in spec.sorted_deaths()
    ]


def test_minimal_spec_roundtrip():
    assert_roundtrip(make_spec())


def test_zero_packet_fixture():
    spec = make_spec(chats=(), extra_meta=('{"note":"empty"}',))
    doc = decode_replay(encode_fixture(spec), KEY)
    assert doc.packets == []
    assert len(doc.meta_blocks) == 2 and json.loads(doc.meta_blocks[1]) == {"note": "empty"}
    assert extract_chat(doc) == [] and extract_deaths(doc) == []


def test_chat_tie_order_stable():
    spec = make_spec(chats=(
        FixtureChat(clock=1.0, author_account_id=101, text="first"),
        FixtureChat(clock=2.0, author_account_id=202, text="second"),
        FixtureChat(clock=2.0, author_account_id=101, text="third"),
    ))
    msgs = extract_chat(decode_replay(encode_fixture(spec), KEY))
    assert [m.text for m in msgs] == ["first", "second", "third"]
    assert [m.message_id for m in msgs] == ["m-1:0", "m-1:1", "m-1:2"]


def test_astral_plane_text_preserved():
    text = "𝕘𝕘 🫡 \U0001F974 end"
    spec = make_spec(chats=(FixtureChat(clock=0.5, author_account_id=101, text=text),))
    (msg,) = extract_chat(decode_replay(encode_fixture(spec), KEY))
    assert msg.text == text


def test_fifteen_deaths_and_duplicates_retained():
    deaths = tuple(
        FixtureDeath(clock=float(i), victim_account_id=101, killer_account_id=202)
        for i in range(13)
    ) + (
        FixtureDeath(clock=20.0, victim_account_id=202, killer_account_id=0),
        FixtureDeath(clock=20.0, victim_account_id=202, killer_account_id=0),
    )
    events = extract_deaths(decode_replay(encode_fixture(make_spec(deaths=deaths)), KEY))
    assert len(events) == 15
    assert sum(1 for e in events if e.victim_account_id == 202) == 2


def test_determinism():
    spec = make_spec(deaths=(FixtureDeath(clock=3.0, victim_account_id=202,
                                          killer_account_id=101),))
    assert encode_fixture(spec) == encode_fixture(spec)


def test_unknown_packet_types_retained():
    raw = RawPacket(packet_type=99, clock=4.0, payload=b"\x01\x02\x03")
    doc = decode_replay(encode_fixture(make_spec(raw_packets=(raw,))), KEY)
    kept = [p for p in doc.packets if p.packet_type == 99]
    assert kept and kept[0].payload == b"\x01\x02\x03"


def test_unresolved_author_and_victim_flagged():
    spec = make_spec(
        chats=(FixtureChat(clock=1.0, author_account_id=999, text="who?"),),
        deaths=(FixtureDeath(clock=2.0, victim_account_id=888, killer_account_id=101),),
    )
    doc = decode_replay(encode_fixture(spec), KEY)
    (msg,) = extract_chat(doc)
    (death,) = extract_deaths(doc)
    assert msg.unresolved and death.unresolved


def test_blank_text_and_malformed_payloads_skipped(caplog):
    blank = struct.pack("<QI", 101, 3) + b" \t "
    short_chat = b"\x01\x02"
    self_kill = struct.pack("<QQ", 101, 101)
    short_death = b"\x00" * 4
    spec = make_spec(
        chats=(FixtureChat(clock=5.0, author_account_id=101, text="kept"),),
        raw_packets=(
            RawPacket(packet_type=35, clock=1.0, payload=blank),
            RawPacket(packet_type=35, clock=2.0, payload=short_chat),
            RawPacket(packet_type=36, clock=3.0, payload=self_kill),
            RawPacket(packet_type=36, clock=4.0, payload=short_death),
        ),
    )
    doc = decode_replay(encode_fixture(spec), KEY)
    with caplog.at_level("WARNING"):
        msgs = extract_chat(doc)
        deaths = extract_deaths(doc)
    assert [m.text for m in msgs] == ["kept"]
    assert msgs[0].message_id == "m-1:0"  # skipped packets don't burn ids
    assert deaths == []
    assert len(caplog.records) == 4


@settings(deadline=None)
@given(fixture_specs())
def test_roundtrip_property(spec):
    assert_roundtrip(spec)


@settings(deadline=None)
@given(fixture_specs())
def test_extracted_clocks_monotonic(spec):
    doc = decode_replay(encode_fixture(spec), KEY)
    for seq in (extract_chat(doc), extract_deaths(doc)):
        clocks = [item.clock for item in seq]
        assert clocks == sorted(clocks)
    packet_clocks = [p.clock for p in doc.packets]
    assert packet_clocks == sorted(packet_clocks)


# ---------------------------------------------------------------- errors

def test_bad_magic():
    blob = bytearray(encode_fixture(make_spec()))
    blob[0] ^= 0xFF
    with pytest.raises(BadMagic) as err:
        decode_replay(bytes(blob), KEY)
    assert err.value.offset == 0


def test_file_shorter_than_header():
    with pytest.raises(TruncatedBlock):
        decode_replay(b"\x11\x34\x32", KEY)


def test_block_count_beyond_file():
    blob = struct.pack("<II", MAGIC, 2**31)
    with pytest.raises(TruncatedBlock) as err:
        decode_replay(blob, KEY)
    assert err.value.offset == 4


def test_block_length_beyond_file():
    blob = struct.pack("<III", MAGIC, 1, 5000) + b"tiny"
    with pytest.raises(TruncatedBlock):
        decode_replay(blob, KEY)


def test_ragged_encrypted_region():
    blob = encode_fixture(make_spec()) + b"\x00\x01\x02"
    with pytest.raises(TruncatedBlock):
        decode_replay(blob, KEY)


def test_wrong_key_is_decryption_failure():
    blob = encode_fixture(make_spec())
    with pytest.raises(DecryptionFailure) as err:
        decode_replay(blob, bytes(16))
    assert err.value.offset == encrypted_region_start(blob)


def test_key_length_precondition():
    with pytest.raises(ValueError):
        decode_replay(encode_fixture(make_spec()), b"\x00" * 8)


def test_payload_size_beyond_stream():
    stream = struct.pack("<IIf", 100, 35, 1.0) + b"\xAA"
    with pytest.raises(MalformedPacket) as err:
        decode_replay(encode_raw_stream(stream), KEY)
    assert err.value.offset == 0


def test_nan_and_negative_clocks_rejected():
    for bad_clock in (math.nan, -2.5):
        stream = struct.pack("<IIf", 0, 35, bad_clock)
        with pytest.raises(MalformedPacket):
            decode_replay(encode_raw_stream(stream), KEY)


def test_trailing_ragged_header_salvaged(caplog):
    good = struct.pack("<IIf", 4, 99, 1.5) + b"full"
    with caplog.at_level("WARNING"):
        doc = decode_replay(encode_raw_stream(good + b"\x07\x07\x07"), KEY)
    assert len(doc.packets) == 1 and doc.packets[0].payload == b"full"
    assert any("trailing" in r.message for r in caplog.records)


def test_errors_carry_offsets():
    for exc_type in (BadMagic, TruncatedBlock, DecryptionFailure, MalformedPacket):
        err = exc_type("boom", 17)
        assert isinstance(err, ReplayError)
        assert err.offset == 17
        assert "17" in str(err)


# ---------------------------------------------------------------- fuzz

def test_encrypted_region_mutations_fail_structurally():
    rng = random.Random(0xC0DEC)
    blobs = [encode_fixture(random_fixture_spec(rng, i)) for i in range(10)]
    for round_ in range(200):
        blob = blobs[round_ % len(blobs)]
        with pytest.raises(ReplayError):
            decode_replay(mutate_encrypted_byte(blob, rng), KEY)


@settings(deadline=None)
@given(st.one_of(
    st.binary(max_size=1024),
    st.binary(max_size=1024).map(
        lambda tail: struct.pack("<II", MAGIC, 0) + tail),
    st.binary(max_size=1024).map(
        lambda tail: struct.pack("<III", MAGIC, 1, min(len(tail), 9)) + tail),
))
def test_decode_total_on_arbitrary_bytes(data):
    try:
        doc = decode_replay(data, KEY)
    except ReplayError:
        return
    assert isinstance(doc, ReplayDocument)


# ---------------------------------------------------------------- perf

def test_10k_event_decode_under_one_second():
    chats = tuple(
        FixtureChat(clock=float(i) / 8, author_account_id=101, text=f"msg {i}")
        for i in range(10_000)
    )
    blob = encode_fixture(make_spec(chats=chats))
    start = time.perf_counter()
    doc = decode_replay(blob, KEY)
    msgs = extract_chat(doc)
    elapsed = time.perf_counter() - start
    assert len(msgs) == 10_000
    assert elapsed < 1.0, f"decode+extract took {elapsed:.2f}s"


# ---------------------------------------------------------------- fixtures

def test_spec_validation_errors():
    player = FixturePlayer(account_id=1, display_name="a")
    cases = [
        dict(match_id="", players=(player,)),
        dict(match_id="m", players=(FixturePlayer(account_id=0, display_name="z"),)),
        dict(match_id="m", players=(FixturePlayer(account_id=1, display_name="z", team=3),)),
        dict(match_id="m", players=(player, FixturePlayer(account_id=1, display_name="b"))),
        dict(match_id="m", players=(player,),
             chats=(FixtureChat(clock=-1.0, author_account_id=1, text="x"),)),
        dict(match_id="m", players=(player,),
             chats=(FixtureChat(clock=1.0, author_account_id=1, text="   "),)),
        dict(match_id="m", players=(player,),
             deaths=(FixtureDeath(clock=1.0, victim_account_id=1, killer_account_id=1),)),
    ]
    for kwargs in cases:
        with pytest.raises(SpecInvalid):
            encode_fixture(FixtureSpec(**kwargs))


def test_environment_kill_allowed():
    spec = make_spec(deaths=(FixtureDeath(clock=1.0, victim_account_id=101),))
    (event,) = extract_deaths(decode_replay(encode_fixture(spec), KEY))
    assert event.killer_account_id == 0


# ---------------------------------------------------------------- schema

def test_default_schema_ids():
    assert DEFAULT_SCHEMA.chat_type_id == 35
    assert DEFAULT_SCHEMA.death_type_id == 36


def test_schema_load(tmp_path):
    cfg = tmp_path / "schema.cfg"
    cfg.write_text(
        "# game build 9.15\n"
        "chat_type_id = 0x23\n"
        "death_type_id = 37\n"
        "\n"
        "chat_text_offset = 12\n",
        encoding="utf-8",
    )
    schema = load_schema(cfg)
    assert schema.chat_type_id == 35
    assert schema.death_type_id == 37
    assert schema.chat_author_offset == 0  # untouched default


def test_schema_load_rejects_garbage(tmp_path):
    for body in ("nonsense line\n", "mystery_field = 1\n", "chat_type_id = soon\n"):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(body, encoding="utf-8")
        with pytest.raises(ValueError):
            load_schema(cfg)


def test_schema_invariants():
    with pytest.raises(ValueError):
        PacketSchema(chat_type_id=5, death_type_id=5)
    with pytest.raises(ValueError):
        PacketSchema(chat_author_offset=-1)


def test_custom_schema_roundtrip():
    schema = PacketSchema(chat_type_id=70, death_type_id=71)
    spec = make_spec()
    doc = decode_replay(encode_fixture(spec, schema=schema), KEY, schema=schema)
    assert [m.text for m in extract_chat(doc, schema)] == ["hello"]
    # Decoding with the default schema finds no type-35 packets.
    doc_default = decode_replay(encode_fixture(spec, schema=schema), KEY)
    assert extract_chat(doc_default) == []

import hashlib
import struct
import zlib

import pytest

from neurorelay.meshnet.envelope import (
    ENVELOPE_OVERHEAD, BadEnvelopeChecksum, BadEnvelopeField,
    BadEnvelopeLength, BadEnvelopeMagic, Envelope, Kind, decode_envelope,
    encode_envelope, node_hash,
)

RESOLVER = {node_hash(n): n for n in ("or-node-1", "oversight")}


def oracle_encode(env: Envelope) -> bytes:
    """Independent field-at-a-time serializer."""
    def h(node):
        return hashlib.blake2b(node.encode(), digest_size=8).digest()

    body = (b"NNE1" + bytes([int(env.kind)]) + h(env.source) + h(env.destination)
            + struct.pack("<Q", env.sequence) + struct.pack("<I", len(env.payload))
            + env.payload)
    return body + struct.pack("<I", zlib.crc32(body))


def make_env(**kw):
    defaults = dict(kind=Kind.CHAT, source="or-node-1", destination="oversight",
                    sequence=7, payload=b'{"text":"hello"}')
    defaults.update(kw)
    return Envelope(**defaults)


def test_matches_oracle():
    env = make_env()
    assert encode_envelope(env) == oracle_encode(env)


def test_overhead_is_exactly_37():
    env = make_env(payload=b"")
    assert len(encode_envelope(env)) == 37 == ENVELOPE_OVERHEAD
    env = make_env(payload=b"x" * 100)
    assert len(encode_envelope(env)) == 137


def test_roundtrip():
    for kind in Kind:
        payload = b"\x00" * 4608 if kind == Kind.EPOCH_DATA else b"payload"
        env = make_env(kind=kind, payload=payload, sequence=2 ** 40)
        assert decode_envelope(encode_envelope(env), RESOLVER) == env


def test_epoch_data_payload_must_be_whole_records():
    with pytest.raises(BadEnvelopeField):
        make_env(kind=Kind.EPOCH_DATA, payload=b"")
    with pytest.raises(BadEnvelopeField):
        make_env(kind=Kind.EPOCH_DATA, payload=b"x" * 4607)
    make_env(kind=Kind.EPOCH_DATA, payload=b"x" * 9216)  # k = 2 is fine


def test_decode_rejects_corruption():
    wire = bytearray(encode_envelope(make_env()))
    with pytest.raises(BadEnvelopeLength):
        decode_envelope(wire[:20], RESOLVER)
    with pytest.raises(BadEnvelopeLength):
        decode_envelope(bytes(wire) + b"x", RESOLVER)
    bad_magic = bytearray(wire)
    bad_magic[0] ^= 0xFF
    with pytest.raises(BadEnvelopeMagic):
        decode_envelope(bytes(bad_magic), RESOLVER)
    for pos in range(4, len(wire)):
        flipped = bytearray(wire)
        flipped[pos] ^= 0x01
        # length-field corruption trips the length check, all else the crc
        expected = BadEnvelopeLength if 29 <= pos < 33 else BadEnvelopeChecksum
        with pytest.raises(expected):
            decode_envelope(bytes(flipped), RESOLVER)

"""Codec tests for the 4608-byte epoch record.

The layout oracle below serializes a record scalar-by-scalar with manual
offsets, independently of the production encoder, so a packing mistake in
either one shows up as a byte diff.
"""

import struct
import zlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neurorelay import wirerec
from neurorelay.wirerec import (
    AnnotationTooLong, BadChecksum, BadFieldRange, BadLength, BadMagic,
    EpochRecord, Modality, OversizePayload, RECORD_SIZE, decode_record,
    encode_record,
)

GOLDEN = Path(__file__).parent / "data" / "golden_record.bin"


def oracle_encode(rec: EpochRecord) -> bytes:
    """Field-at-a-time serializer used only as a test oracle."""
    buf = bytearray(RECORD_SIZE)
    buf[0:4] = b"NNR1"
    buf[4:6] = struct.pack("<H", 1)
    buf[6] = int(rec.modality)
    buf[7] = rec.channel_count
    buf[8:10] = struct.pack("<H", rec.samples_per_channel)
    buf[10:14] = struct.pack("<f", rec.stim_rate)
    buf[14:22] = struct.pack("<Q", rec.timestamp_ms)
    buf[22:26] = struct.pack("<I", rec.sweep_count)
    for i in range(8):
        buf[26 + 4 * i: 30 + 4 * i] = struct.pack("<f", rec.amp_gain[i])
        buf[58 + 4 * i: 62 + 4 * i] = struct.pack("<f", rec.locut_hz[i])
        buf[90 + 4 * i: 94 + 4 * i] = struct.pack("<f", rec.hicut_hz[i])
    buf[122:138] = rec.case_id.encode("ascii").ljust(16, b" ")
    ann = rec.annotation.encode("utf-8")
    buf[138:140] = struct.pack("<H", len(ann))
    buf[140:140 + len(ann)] = ann
    pos = 512
    for ch in range(rec.channel_count):
        for j in range(rec.samples_per_channel):
            buf[pos:pos + 4] = struct.pack("<f", float(rec.samples[ch, j]))
            pos += 4
    crc = zlib.crc32(bytes(buf[0:508]) + bytes(buf[512:]))
    buf[508:512] = struct.pack("<I", crc)
    return bytes(buf)


def make_record(**kw) -> EpochRecord:
    defaults = dict(
        modality=Modality.BAEP, channel_count=2, samples_per_channel=16,
        stim_rate=11.3, timestamp_ms=1_700_000_123_456, sweep_count=500,
        case_id="b16204", annotation="first baseline",
        amp_gain=(1.0, 2.5, 1, 1, 1, 1, 1, 1),
        locut_hz=(30.0,) * 8, hicut_hz=(3000.0,) * 8,
    )
    defaults.update(kw)
    if "samples" not in defaults:
        ch, n = defaults["channel_count"], defaults["samples_per_channel"]
        defaults["samples"] = np.arange(ch * n, dtype=np.float32).reshape(ch, n) * 0.25
    return EpochRecord(**defaults)


@st.composite
def records(draw):
    channel_count = draw(st.integers(1, 8))
    samples_per_channel = draw(st.integers(1, 1024 // channel_count))
    samples = draw(
        st.lists(
            st.floats(-1e6, 1e6, width=32),
            min_size=channel_count * samples_per_channel,
            max_size=channel_count * samples_per_channel,
        ))
    case_alpha = st.characters(min_codepoint=0x21, max_codepoint=0x7E)
    annotation = draw(st.text(max_size=60).filter(
        lambda s: len(s.encode("utf-8")) <= 256))
    return EpochRecord(
        modality=draw(st.sampled_from(list(Modality))),
        channel_count=channel_count,
        samples_per_channel=samples_per_channel,
        stim_rate=draw(st.floats(0, 1e4, width=32)),
        timestamp_ms=draw(st.integers(0, 2 ** 63)),
        sweep_count=draw(st.integers(1, 2 ** 32 - 1)),
        samples=np.array(samples, dtype=np.float32).reshape(channel_count, samples_per_channel),
        case_id=draw(st.text(alphabet=case_alpha, max_size=16)),
        annotation=annotation,
        amp_gain=tuple(draw(st.lists(st.floats(0, 1e5, width=32), min_size=8, max_size=8))),
        locut_hz=tuple(draw(st.lists(st.floats(0, 1e5, width=32), min_size=8, max_size=8))),
        hicut_hz=tuple(draw(st.lists(st.floats(0, 1e5, width=32), min_size=8, max_size=8))),
    )


def test_length_always_4608():
    for rec in (make_record(), make_record(channel_count=8, samples_per_channel=128),
                make_record(channel_count=1, samples_per_channel=1)):
        assert len(encode_record(rec)) == 4608


def test_matches_scalar_oracle():
    rec = make_record()
    assert encode_record(rec) == oracle_encode(rec)


def test_minimal_record_layout():
    rec = make_record(
        modality=Modality.BAEP, channel_count=1, samples_per_channel=1,
        stim_rate=0.0, timestamp_ms=0, sweep_count=1, case_id="", annotation="",
        amp_gain=(0.0,) * 8, locut_hz=(0.0,) * 8, hicut_hz=(0.0,) * 8,
        samples=np.array([[2.5]], dtype=np.float32))
    buf = encode_record(rec)
    assert buf[512:516] == struct.pack("<f", 2.5)
    assert buf[516:4604] == b"\x00" * (4604 - 516)
    assert buf == oracle_encode(rec)


def test_uniform_payload_bytes():
    rec = make_record(channel_count=4, samples_per_channel=256,
                      samples=np.ones((4, 256), dtype=np.float32))
    buf = encode_record(rec)
    assert buf[512:4608] == struct.pack("<f", 1.0) * 1024
    assert buf == oracle_encode(rec)


@settings(max_examples=300, deadline=None)
@given(records())
def test_roundtrip_identity(rec):
    assert decode_record(encode_record(rec)) == rec


def test_encode_is_pure():
    rec = make_record()
    assert encode_record(rec) == encode_record(rec)


def test_golden_record_stable():
    buf = encode_record(golden_fixture())
    assert GOLDEN.exists(), "golden record file missing; regenerate with tests/data/make_goldens.py"
    assert buf == GOLDEN.read_bytes()


def golden_fixture() -> EpochRecord:
    t = np.arange(256, dtype=np.float32)
    samples = np.stack([
        np.sin(t / 7.0).astype(np.float32) * 3.5,
        np.cos(t / 11.0).astype(np.float32) * 1.25,
    ])
    return EpochRecord(
        modality=Modality.MEDIAN_SEP, channel_count=2, samples_per_channel=256,
        stim_rate=4.7, timestamp_ms=1_690_000_000_000, sweep_count=300,
        case_id="b16204", annotation="incision",
        amp_gain=(10.0, 10.0, 1, 1, 1, 1, 1, 1),
        locut_hz=(30.0,) * 8, hicut_hz=(1500.0,) * 8, samples=samples)


def test_decode_rejects_wrong_lengths():
    buf = encode_record(make_record())
    for n in (0, 1, 4607, 4609, 9216):
        with pytest.raises(BadLength):
            decode_record(buf[:n] if n < 4608 else buf + b"\x00" * (n - 4608))


def test_all_zero_buffer_is_bad_magic():
    with pytest.raises(BadMagic):
        decode_record(b"\x00" * 4608)


def test_single_byte_corruption_detected():
    buf = bytearray(encode_record(make_record()))
    # every byte position must make decode fail: the magic with BadMagic,
    # everything else (including the crc field itself) with BadChecksum
    for pos in range(4608):
        corrupt = bytearray(buf)
        corrupt[pos] ^= 0x01
        with pytest.raises(BadMagic if pos < 4 else BadChecksum):
            decode_record(bytes(corrupt))


def _recrc(buf: bytearray) -> bytes:
    crc = zlib.crc32(bytes(buf[0:508]) + bytes(buf[512:]))
    buf[508:512] = struct.pack("<I", crc)
    return bytes(buf)


def test_field_range_checks_after_checksum():
    base = bytearray(encode_record(make_record()))
    bad_channel = bytearray(base)
    bad_channel[7] = 0
    with pytest.raises(BadFieldRange):
        decode_record(_recrc(bad_channel))
    bad_channel[7] = 9
    with pytest.raises(BadFieldRange):
        decode_record(_recrc(bad_channel))
    bad_mod = bytearray(base)
    bad_mod[6] = 77
    with pytest.raises(BadFieldRange):
        decode_record(_recrc(bad_mod))
    bad_ann = bytearray(base)
    bad_ann[138:140] = struct.pack("<H", 257)
    with pytest.raises(BadFieldRange):
        decode_record(_recrc(bad_ann))
    oversize = bytearray(base)
    oversize[7] = 8
    oversize[8:10] = struct.pack("<H", 129)
    with pytest.raises(BadFieldRange):
        decode_record(_recrc(oversize))


def test_construction_guards():
    with pytest.raises(OversizePayload):
        make_record(channel_count=8, samples_per_channel=129,
                    samples=np.zeros((8, 129), dtype=np.float32))
    with pytest.raises(AnnotationTooLong):
        make_record(annotation="x" * 257)
    # 256 bytes exactly is legal
    rec = make_record(annotation="x" * 256)
    assert decode_record(encode_record(rec)) == rec


def test_spc_zero_rejected_on_decode():
    buf = bytearray(encode_record(make_record()))
    buf[8:10] = struct.pack("<H", 0)
    with pytest.raises(BadFieldRange):
        decode_record(_recrc(buf))

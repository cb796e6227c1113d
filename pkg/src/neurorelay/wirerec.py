"""Fixed 4608-byte epoch record codec.

One record is one 512-byte header block followed by eight 512-byte blocks of
little-endian float32 samples (1024 slots, channel-major). The layout is the
wire and archive contract for the whole system and is frozen byte-exactly:

    offset  size  field
    ------  ----  -----
       0      4   magic "NNR1"
       4      2   format version, u16 (= 1)
       6      1   modality code, u8 (1..6)
       7      1   channel_count, u8 (1..8)
       8      2   samples_per_channel, u16 (>= 1)
      10      4   stim_rate, f32, stimuli/second (0 for continuous)
      14      8   timestamp_ms, u64, ms since Unix epoch
      22      4   sweep_count, u32 (>= 1; < expected average size marks a partial)
      26     32   amp_gain[8], f32 each
      58     32   locut_hz[8], f32 each
      90     32   hicut_hz[8], f32 each
     122     16   case_id, printable ASCII, space-padded
     138      2   annotation byte length, u16 (<= 256)
     140    256   annotation, UTF-8, zero-padded
     396    112   reserved, zero
     508      4   CRC-32 (IEEE) over bytes 0..507 and 512..4607, u32
     512   4096   samples, f32 little-endian, channel-major, unused slots zero

All multi-byte values are little-endian.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

MAGIC = b"NNR1"
FORMAT_VERSION = 1
RECORD_SIZE = 4608
HEADER_SIZE = 512
SAMPLE_CAPACITY = 1024
MAX_CHANNELS = 8
MAX_ANNOTATION_BYTES = 256
CASE_ID_BYTES = 16

_HEADER_FMT = "<4sHBBHfQI8f8f8f16sH256s"
_HEADER_STRUCT = struct.Struct(_HEADER_FMT)
_CRC_OFFSET = 508


class Modality(IntEnum):
    BAEP = 1
    MEDIAN_SEP = 2
    PERONEAL_SEP = 3
    VEP = 4
    EEG = 5
    EMG = 6


CONTINUOUS_MODALITIES = frozenset({Modality.EEG, Modality.EMG})


class RecordError(Exception):
    """Base for codec failures."""


class OversizePayload(RecordError):
    pass


class AnnotationTooLong(RecordError):
    pass


class BadLength(RecordError):
    pass


class BadMagic(RecordError):
    pass


class BadChecksum(RecordError):
    pass


class BadFieldRange(RecordError):
    pass


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(eq=False)
class EpochRecord:
    """One completed (or partial) average plus its acquisition metadata.

    Construction normalizes every real-valued field to float32 precision so
    that decode(encode(rec)) == rec holds field-for-field.
    """

    modality: Modality
    channel_count: int
    samples_per_channel: int
    stim_rate: float
    timestamp_ms: int
    sweep_count: int
    samples: np.ndarray
    case_id: str = ""
    annotation: str = ""
    amp_gain: tuple = field(default=(1.0,) * MAX_CHANNELS)
    locut_hz: tuple = field(default=(0.0,) * MAX_CHANNELS)
    hicut_hz: tuple = field(default=(0.0,) * MAX_CHANNELS)

    def __post_init__(self):
        self.modality = Modality(self.modality)
        self.channel_count = int(self.channel_count)
        self.samples_per_channel = int(self.samples_per_channel)
        if not 1 <= self.channel_count <= MAX_CHANNELS:
            raise BadFieldRange(f"channel_count {self.channel_count} not in 1..8")
        if self.samples_per_channel < 1:
            raise BadFieldRange("samples_per_channel must be >= 1")
        if self.channel_count * self.samples_per_channel > SAMPLE_CAPACITY:
            raise OversizePayload(
                f"{self.channel_count} ch x {self.samples_per_channel} samples "
                f"exceeds the {SAMPLE_CAPACITY}-value capacity")
        if len(self.annotation.encode("utf-8")) > MAX_ANNOTATION_BYTES:
            raise AnnotationTooLong(
                f"annotation is {len(self.annotation.encode('utf-8'))} bytes, max {MAX_ANNOTATION_BYTES}")
        if self.stim_rate < 0 or not np.isfinite(self.stim_rate):
            raise BadFieldRange("stim_rate must be a finite nonnegative real")
        if not 0 <= self.timestamp_ms < 2 ** 64:
            raise BadFieldRange("timestamp_ms must fit u64")
        if not 1 <= self.sweep_count < 2 ** 32:
            raise BadFieldRange("sweep_count must be in 1..2^32-1")
        cid = self.case_id
        if len(cid) > CASE_ID_BYTES or cid != cid.strip():
            raise BadFieldRange("case_id must be <= 16 chars with no edge whitespace")
        if not all(0x20 <= ord(c) <= 0x7E for c in cid):
            raise BadFieldRange("case_id must be printable ASCII")
        self.stim_rate = _f32(self.stim_rate)
        for name in ("amp_gain", "locut_hz", "hicut_hz"):
            vals = tuple(getattr(self, name))
            if len(vals) != MAX_CHANNELS:
                raise BadFieldRange(f"{name} must have exactly {MAX_CHANNELS} entries")
            setattr(self, name, tuple(_f32(v) for v in vals))
        arr = np.ascontiguousarray(self.samples, dtype=np.float32)
        if arr.shape != (self.channel_count, self.samples_per_channel):
            raise BadFieldRange(
                f"samples shape {arr.shape} != ({self.channel_count}, {self.samples_per_channel})")
        self.samples = arr

    def __eq__(self, other):
        if not isinstance(other, EpochRecord):
            return NotImplemented
        return (self.modality == other.modality
                and self.channel_count == other.channel_count
                and self.samples_per_channel == other.samples_per_channel
                and self.stim_rate == other.stim_rate
                and self.timestamp_ms == other.timestamp_ms
                and self.sweep_count == other.sweep_count
                and self.case_id == other.case_id
                and self.annotation == other.annotation
                and self.amp_gain == other.amp_gain
                and self.locut_hz == other.locut_hz
                and self.hicut_hz == other.hicut_hz
                and np.array_equal(self.samples, other.samples))


def encode_record(rec: EpochRecord) -> bytes:
    """Serialize to exactly RECORD_SIZE bytes."""
    if rec.channel_count * rec.samples_per_channel > SAMPLE_CAPACITY:
        raise OversizePayload("sample payload exceeds capacity")
    ann = rec.annotation.encode("utf-8")
    if len(ann) > MAX_ANNOTATION_BYTES:
        raise AnnotationTooLong(f"annotation is {len(ann)} bytes")
    case = rec.case_id.encode("ascii").ljust(CASE_ID_BYTES, b" ")
    header = bytearray(HEADER_SIZE)
    _HEADER_STRUCT.pack_into(
        header, 0,
        MAGIC, FORMAT_VERSION, int(rec.modality), rec.channel_count,
        rec.samples_per_channel, rec.stim_rate, rec.timestamp_ms, rec.sweep_count,
        *rec.amp_gain, *rec.locut_hz, *rec.hicut_hz,
        case, len(ann), ann)
    payload = bytearray(RECORD_SIZE - HEADER_SIZE)
    flat = rec.samples.reshape(-1)
    payload[: flat.nbytes] = flat.astype("<f4", copy=False).tobytes()
    crc = zlib.crc32(bytes(header[:_CRC_OFFSET]) + bytes(payload))
    struct.pack_into("<I", header, _CRC_OFFSET, crc)
    out = bytes(header) + bytes(payload)
    assert len(out) == RECORD_SIZE
    return out


def decode_record(buf: bytes) -> EpochRecord:
    """Parse and validate one record. Checksum is verified before any field
    is interpreted; only the magic and length are looked at first."""
    if len(buf) != RECORD_SIZE:
        raise BadLength(f"record must be {RECORD_SIZE} bytes, got {len(buf)}")
    if buf[:4] != MAGIC:
        raise BadMagic(f"bad magic {buf[:4]!r}")
    (stored_crc,) = struct.unpack_from("<I", buf, _CRC_OFFSET)
    actual_crc = zlib.crc32(buf[:_CRC_OFFSET] + buf[HEADER_SIZE:])
    if stored_crc != actual_crc:
        raise BadChecksum(f"crc mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")
    fields = _HEADER_STRUCT.unpack_from(buf, 0)
    (_, version, mod_code, channel_count, samples_per_channel, stim_rate,
     timestamp_ms, sweep_count) = fields[:8]
    amp_gain = fields[8:16]
    locut = fields[16:24]
    hicut = fields[24:32]
    case_raw, ann_len, ann_raw = fields[32], fields[33], fields[34]
    if version != FORMAT_VERSION:
        raise BadFieldRange(f"unsupported format version {version}")
    try:
        modality = Modality(mod_code)
    except ValueError:
        raise BadFieldRange(f"unknown modality code {mod_code}") from None
    if not 1 <= channel_count <= MAX_CHANNELS:
        raise BadFieldRange(f"channel_count {channel_count} not in 1..8")
    if samples_per_channel < 1:
        raise BadFieldRange("samples_per_channel must be >= 1")
    if channel_count * samples_per_channel > SAMPLE_CAPACITY:
        raise BadFieldRange("declared sample payload exceeds capacity")
    if ann_len > MAX_ANNOTATION_BYTES:
        raise BadFieldRange(f"annotation length {ann_len} > {MAX_ANNOTATION_BYTES}")
    if stim_rate < 0 or not np.isfinite(stim_rate):
        raise BadFieldRange("stim_rate must be a finite nonnegative real")
    if sweep_count < 1:
        raise BadFieldRange("sweep_count must be >= 1")
    try:
        annotation = ann_raw[:ann_len].decode("utf-8")
    except UnicodeDecodeError:
        raise BadFieldRange("annotation is not valid UTF-8") from None
    try:
        case_id = case_raw.decode("ascii").rstrip(" ")
    except UnicodeDecodeError:
        raise BadFieldRange("case_id is not ASCII") from None
    n = channel_count * samples_per_channel
    flat = np.frombuffer(buf, dtype="<f4", count=n, offset=HEADER_SIZE)
    samples = flat.reshape(channel_count, samples_per_channel).copy()
    return EpochRecord(
        modality=modality, channel_count=channel_count,
        samples_per_channel=samples_per_channel, stim_rate=stim_rate,
        timestamp_ms=timestamp_ms, sweep_count=sweep_count, samples=samples,
        case_id=case_id, annotation=annotation,
        amp_gain=amp_gain, locut_hz=locut, hicut_hz=hicut)

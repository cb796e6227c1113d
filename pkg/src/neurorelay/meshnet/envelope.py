"""Transport envelope codec.

Wire layout, all little-endian:

    offset  size  field
       0      4   magic "NNE1"
       4      1   kind, u8
       5      8   source node id hash, u64
      13      8   destination node id hash, u64
      21      8   sequence, u64
      29      4   payload length, u32
      33      n   payload
    33 + n    4   CRC-32 (IEEE) over bytes 0..33+n-1, u32

Fixed overhead is 37 bytes per envelope. Node ids travel as 8-byte blake2b
hashes; receivers resolve them through the naming registry, so patient-free
case payloads are the only application data on the wire.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Callable, Mapping

from ..wirerec import RECORD_SIZE

MAGIC = b"NNE1"
ENVELOPE_OVERHEAD = 37
_HEADER = struct.Struct("<4sBQQQI")


class Kind(IntEnum):
    ANNOUNCE = 1
    CASE_LIST = 2
    EPOCH_REQUEST = 3
    EPOCH_DATA = 4
    ANNOTATION = 5
    CHAT = 6
    CAPTURE_FRAME = 7
    ACK = 8


class EnvelopeError(Exception):
    pass


class BadEnvelopeLength(EnvelopeError):
    pass


class BadEnvelopeMagic(EnvelopeError):
    pass


class BadEnvelopeChecksum(EnvelopeError):
    pass


class BadEnvelopeField(EnvelopeError):
    pass


class UnknownNodeHash(EnvelopeError):
    pass


@lru_cache(maxsize=1024)
def node_hash(node_id: str) -> int:
    digest = hashlib.blake2b(node_id.encode("utf-8"), digest_size=8).digest()
    return struct.unpack("<Q", digest)[0]


@dataclass(frozen=True)
class Envelope:
    kind: Kind
    source: str
    destination: str
    sequence: int
    payload: bytes = b""

    def __post_init__(self):
        if self.kind == Kind.EPOCH_DATA:
            if len(self.payload) == 0 or len(self.payload) % RECORD_SIZE:
                raise BadEnvelopeField(
                    "EpochData payload must be k x 4608 bytes, k >= 1")
        if not 0 <= self.sequence < 2 ** 64:
            raise BadEnvelopeField("sequence must fit u64")

    @property
    def wire_size(self) -> int:
        return ENVELOPE_OVERHEAD + len(self.payload)


def encode_envelope(env: Envelope) -> bytes:
    head = _HEADER.pack(MAGIC, int(env.kind), node_hash(env.source),
                        node_hash(env.destination), env.sequence, len(env.payload))
    body = head + env.payload
    return body + struct.pack("<I", zlib.crc32(body))


def decode_envelope(buf: bytes,
                    resolver: Mapping[int, str] | Callable[[int], str | None]) -> Envelope:
    if len(buf) < ENVELOPE_OVERHEAD:
        raise BadEnvelopeLength(f"{len(buf)} bytes is below minimum {ENVELOPE_OVERHEAD}")
    if buf[:4] != MAGIC:
        raise BadEnvelopeMagic(f"bad magic {buf[:4]!r}")
    magic, kind_code, src_hash, dst_hash, sequence, length = _HEADER.unpack_from(buf, 0)
    if len(buf) != ENVELOPE_OVERHEAD + length:
        raise BadEnvelopeLength(f"length field {length} disagrees with {len(buf)} bytes")
    (stored_crc,) = struct.unpack_from("<I", buf, len(buf) - 4)
    if zlib.crc32(buf[:-4]) != stored_crc:
        raise BadEnvelopeChecksum("crc mismatch")
    try:
        kind = Kind(kind_code)
    except ValueError:
        raise BadEnvelopeField(f"unknown kind {kind_code}") from None
    lookup = resolver if callable(resolver) else resolver.get
    source = lookup(src_hash)
    destination = lookup(dst_hash)
    if source is None or destination is None:
        raise UnknownNodeHash("envelope names a node the registry does not know")
    return Envelope(kind=kind, source=source, destination=destination,
                    sequence=sequence,
                    payload=bytes(buf[33:33 + length]))

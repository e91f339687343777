"""Binary datagram protocol between bracelet nodes and the gateway.

Frame layout, big-endian throughout:

    magic 0xEB 0xCA      2 bytes
    version 0x01         1 byte
    node_id              2 bytes (unsigned)
    seq                  2 bytes (unsigned, wrapping counter)
    timestamp_ms         8 bytes (unsigned, Unix epoch milliseconds)
    sample count         1 byte  (1..8)
    per sample:
        kind code        1 byte  (0x01..0x05)
        value_x10        2 bytes (signed, physical value x 10)
    crc16                2 bytes (CRC-16/CCITT-FALSE over all preceding bytes)

Total frame length is exactly 18 + 3 * count. Datagrams are fire-and-forget;
there is no ACK or retransmission path.
"""

from __future__ import annotations

import binascii
import struct
from dataclasses import dataclass
from enum import Enum

MAGIC = b"\xeb\xca"
VERSION = 0x01
HEADER_LEN = 16  # magic + version + node_id + seq + timestamp_ms + count
CRC_LEN = 2
SAMPLE_LEN = 3
MAX_SAMPLES = 8
SEQ_MODULO = 1 << 16
DEDUP_WINDOW = 64

_HEADER = struct.Struct(">2sBHHQB")
_SAMPLE = struct.Struct(">Bh")
_CRC = struct.Struct(">H")


class VitalKind(Enum):
    """Vital-sign channels carried on the wire, keyed by their 1-byte codes."""

    BODY_TEMPERATURE = 0x01  # degrees C
    HEART_RATE = 0x02        # bpm
    SYSTOLIC_BP = 0x03       # mmHg
    DIASTOLIC_BP = 0x04      # mmHg
    BLOOD_GLUCOSE = 0x05     # mg/dL

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "VitalKind":
        try:
            return cls[label.upper()]
        except KeyError:
            raise KeyError(f"unknown vital kind {label!r}") from None


UNITS = {
    VitalKind.BODY_TEMPERATURE: "degC",
    VitalKind.HEART_RATE: "bpm",
    VitalKind.SYSTOLIC_BP: "mmHg",
    VitalKind.DIASTOLIC_BP: "mmHg",
    VitalKind.BLOOD_GLUCOSE: "mg/dL",
}


class ProtocolError(ValueError):
    pass


class InvalidPacket(ProtocolError):
    pass


class DecodeError(ProtocolError):
    pass


class Truncated(DecodeError):
    pass


class BadMagic(DecodeError):
    pass


class UnsupportedVersion(DecodeError):
    pass


class BadLength(DecodeError):
    """Frame length inconsistent with the declared sample count."""


class CrcMismatch(DecodeError):
    pass


class UnknownKind(DecodeError):
    pass


class DuplicateKind(DecodeError):
    pass


@dataclass(frozen=True)
class VitalSample:
    kind: VitalKind
    value_x10: int

    @property
    def value(self) -> float:
        return self.value_x10 / 10


@dataclass(frozen=True)
class TelemetryPacket:
    node_id: int
    seq: int
    timestamp_ms: int
    samples: tuple[VitalSample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no XOR-out."""
    return binascii.crc_hqx(data, 0xFFFF)


def encode_packet(packet: TelemetryPacket) -> bytes:
    """Serialize a packet into a wire frame, appending the CRC."""
    count = len(packet.samples)
    if not 1 <= count <= MAX_SAMPLES:
        raise InvalidPacket(f"sample count {count} outside 1..{MAX_SAMPLES}")
    kinds = [s.kind for s in packet.samples]
    if len(set(kinds)) != count:
        raise InvalidPacket("duplicate vital kind in packet")
    if not 0 <= packet.node_id < SEQ_MODULO:
        raise InvalidPacket(f"node_id {packet.node_id} outside u16 range")
    if not 0 <= packet.seq < SEQ_MODULO:
        raise InvalidPacket(f"seq {packet.seq} outside u16 range")
    if not 0 <= packet.timestamp_ms < 1 << 64:
        raise InvalidPacket(f"timestamp_ms {packet.timestamp_ms} outside u64 range")
    parts = [_HEADER.pack(MAGIC, VERSION, packet.node_id, packet.seq,
                          packet.timestamp_ms, count)]
    for sample in packet.samples:
        if not -32768 <= sample.value_x10 <= 32767:
            raise InvalidPacket(f"value_x10 {sample.value_x10} outside i16 range")
        parts.append(_SAMPLE.pack(sample.kind.value, sample.value_x10))
    body = b"".join(parts)
    return body + _CRC.pack(crc16(body))


def decode_packet(frame: bytes) -> TelemetryPacket:
    """Parse and verify a wire frame; exact inverse of encode_packet.

    Raises a DecodeError subclass on any structural or integrity defect;
    corrupted frames are never silently accepted.
    """
    if len(frame) < len(MAGIC):
        raise Truncated(f"{len(frame)}-byte frame shorter than magic")
    if frame[:2] != MAGIC:
        raise BadMagic(f"bad magic {frame[:2].hex()}")
    if len(frame) < 3:
        raise Truncated("frame ends before version byte")
    if frame[2] != VERSION:
        raise UnsupportedVersion(f"version {frame[2]:#04x}")
    if len(frame) < HEADER_LEN:
        raise Truncated(f"{len(frame)}-byte frame shorter than {HEADER_LEN}-byte header")
    _, _, node_id, seq, timestamp_ms, count = _HEADER.unpack_from(frame)
    if not 1 <= count <= MAX_SAMPLES:
        raise BadLength(f"declared sample count {count} outside 1..{MAX_SAMPLES}")
    expected = HEADER_LEN + SAMPLE_LEN * count + CRC_LEN
    if len(frame) < expected:
        raise Truncated(f"{len(frame)}-byte frame shorter than declared {expected}")
    if len(frame) > expected:
        raise BadLength(f"{len(frame)}-byte frame longer than declared {expected}")
    (stated,) = _CRC.unpack_from(frame, expected - CRC_LEN)
    if crc16(frame[: expected - CRC_LEN]) != stated:
        raise CrcMismatch(f"crc {stated:#06x} does not match frame contents")
    samples = []
    seen: set[int] = set()
    for i in range(count):
        code, value_x10 = _SAMPLE.unpack_from(frame, HEADER_LEN + SAMPLE_LEN * i)
        try:
            kind = VitalKind(code)
        except ValueError:
            raise UnknownKind(f"kind code {code:#04x}") from None
        if code in seen:
            raise DuplicateKind(f"kind {kind.label} repeats")
        seen.add(code)
        samples.append(VitalSample(kind, value_x10))
    return TelemetryPacket(node_id, seq, timestamp_ms, tuple(samples))


@dataclass(frozen=True)
class Fresh:
    """Sequence number not seen before; gap counts numbers skipped since the
    previous highest (0 for in-order and for late fills)."""

    gap: int


@dataclass(frozen=True)
class Duplicate:
    pass


SeqVerdict = Fresh | Duplicate


class SequenceTracker:
    """Per-node duplicate detection over a sliding window of recent sequence
    numbers, using serial-number (wraparound-aware) comparison.

    Bit i of a node's mask marks (highest - i) mod 2^16 as seen. Anything
    older than the window is reported Duplicate: losing a very late frame is
    tolerated, double-counting one is not.
    """

    def __init__(self, window: int = DEDUP_WINDOW):
        if not 1 <= window <= SEQ_MODULO // 2:
            raise ValueError(f"window {window} outside 1..{SEQ_MODULO // 2}")
        self._window = window
        self._nodes: dict[int, tuple[int, int]] = {}

    def check(self, node_id: int, seq: int) -> SeqVerdict:
        state = self._nodes.get(node_id)
        if state is None:
            self._nodes[node_id] = (seq, 1)
            return Fresh(gap=0)
        highest, mask = state
        delta = (seq - highest) % SEQ_MODULO
        if delta == 0:
            return Duplicate()
        if delta < SEQ_MODULO // 2:  # seq advances the window
            if delta >= self._window:
                mask = 1
            else:
                mask = ((mask << delta) | 1) & ((1 << self._window) - 1)
            self._nodes[node_id] = (seq, mask)
            return Fresh(gap=delta - 1)
        back = SEQ_MODULO - delta  # seq trails the highest seen
        if back >= self._window:
            return Duplicate()
        bit = 1 << back
        if mask & bit:
            return Duplicate()
        self._nodes[node_id] = (highest, mask | bit)
        return Fresh(gap=0)

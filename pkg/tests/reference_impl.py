"""Independent reference implementations used as test oracles.

Everything here is deliberately written from the documented rules, not by
calling into wardwatch, so that tests compare two separate routes to the
same answer.
"""

from __future__ import annotations

import struct


def reference_crc16(data: bytes) -> int:
    """Bitwise CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    return crc


def raw_parse_frame(frame: bytes) -> tuple[int, int, int, list[tuple[int, int]]]:
    """Parse a frame with bare struct calls (no wardwatch imports).

    Returns (node_id, seq, timestamp_ms, [(kind_code, value_x10), ...]).
    Assumes the frame is structurally valid; verifies the CRC.
    """
    magic, version, node_id, seq, timestamp_ms, count = struct.unpack_from(
        ">2sBHHQB", frame
    )
    assert magic == b"\xeb\xca" and version == 1
    assert len(frame) == 18 + 3 * count
    (stated,) = struct.unpack_from(">H", frame, len(frame) - 2)
    assert reference_crc16(frame[:-2]) == stated, "reference CRC disagrees"
    samples = []
    for i in range(count):
        code, value_x10 = struct.unpack_from(">Bh", frame, 16 + 3 * i)
        samples.append((code, value_x10))
    return node_id, seq, timestamp_ms, samples


def reference_debounce(
    bands: list[str],
    n_warning_raise: int = 3,
    n_critical_raise: int = 1,
    m_clear: int = 5,
) -> list[tuple[int, str, str]]:
    """Brute-force replay of the debounce rules over a band sequence.

    bands are "normal" / "warning" / "critical" per received sample (trend
    violations are folded into "warning" by the caller). Returns
    (sample index, "raise" | "clear", band) events in order:

    - a sample is out-of-normal iff its band is not normal
    - consecutive out-of-normal samples are counted; the count resets on a
      normal sample, and the consecutive-normal count resets likewise
    - with no condition active, a critical sample raises once the
      out-of-normal streak reaches n_critical_raise, and a warning sample
      raises once the streak reaches n_warning_raise
    - while a condition is active, out-of-normal samples extend it silently
    - m_clear consecutive normal samples clear an active condition
    """
    events: list[tuple[int, str, str]] = []
    oon = 0
    normal = 0
    active = False
    for i, band in enumerate(bands):
        if band != "normal":
            oon += 1
            normal = 0
            if not active:
                if band == "critical":
                    if oon >= n_critical_raise:
                        events.append((i, "raise", "critical"))
                        active = True
                elif oon >= n_warning_raise:
                    events.append((i, "raise", "warning"))
                    active = True
        else:
            normal += 1
            oon = 0
            if active and normal >= m_clear:
                events.append((i, "clear", "normal"))
                active = False
    return events


def brute_force_band_coverage(intervals: list[tuple[float | None, float | None]]) -> bool:
    """Sweep every representable scaled value (value_x10 in -32768..32767)
    and report whether each falls in exactly one interval.

    Intervals are (lower, upper) with None meaning unbounded; membership is
    lower-inclusive, upper-exclusive. Uses numpy so the full 65,536-point
    sweep stays cheap.
    """
    import numpy as np

    values = np.arange(-32768, 32768, dtype=np.int64) / 10
    counts = np.zeros(values.shape, dtype=np.int64)
    for lower, upper in intervals:
        mask = np.ones(values.shape, dtype=bool)
        if lower is not None:
            mask &= values >= lower
        if upper is not None:
            mask &= values < upper
        counts += mask
    return bool((counts == 1).all())

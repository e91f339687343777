"""Rule-based classification of vital readings and the alert state machine.

A knowledge base holds one band table per enabled vital kind (a partition of
the whole value range into Normal/Warning/Critical intervals), sudden-change
trend rules, and debounce parameters. Band intervals are lower-inclusive,
upper-exclusive. The per-patient state machine raises one alert event per
episode and clears it after a run of normal samples.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping

from .protocol import VitalKind


class Band(IntEnum):
    NORMAL = 0
    WARNING = 1
    CRITICAL = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Band":
        try:
            return cls[label.upper()]
        except KeyError:
            raise KeyError(f"unknown band {label!r}") from None


class UnknownKindError(LookupError):
    """No band table is configured for the requested vital kind."""


class ValidationError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(errors))


@dataclass(frozen=True)
class BandTable:
    """Partition of the value range: bands[i] covers [breakpoints[i-1],
    breakpoints[i]) with the outermost intervals unbounded."""

    kind: VitalKind
    breakpoints: tuple[float, ...]
    bands: tuple[Band, ...]

    def classify(self, value: float) -> Band:
        return self.bands[bisect_right(self.breakpoints, value)]

    def intervals(self) -> list[tuple[float | None, float | None, Band]]:
        bounds = [None, *self.breakpoints, None]
        return [
            (bounds[i], bounds[i + 1], band) for i, band in enumerate(self.bands)
        ]


@dataclass(frozen=True)
class BandInterval:
    """One proposed interval; None bounds mean unbounded."""

    lower: float | None
    upper: float | None
    band: Band


@dataclass(frozen=True)
class TrendRule:
    kind: VitalKind
    window_s: float
    max_abs_delta: float


@dataclass(frozen=True)
class DebounceConfig:
    n_warning_raise: int = 3
    n_critical_raise: int = 1
    m_clear: int = 5


@dataclass(frozen=True)
class KnowledgeBase:
    tables: Mapping[VitalKind, BandTable]
    trends: Mapping[VitalKind, TrendRule]
    debounce: DebounceConfig
    revision: int
    author: str
    updated_at: str  # ISO-8601

    def __post_init__(self) -> None:
        object.__setattr__(self, "tables", dict(self.tables))
        object.__setattr__(self, "trends", dict(self.trends))


@dataclass(frozen=True)
class KbProposal:
    """Physician-submitted revision: band intervals per kind plus rule
    parameters. Intervals may be invalid; validation reports every defect."""

    tables: Mapping[VitalKind, tuple[BandInterval, ...]]
    trends: Mapping[VitalKind, TrendRule]
    debounce: DebounceConfig


DEFAULT_KB_UPDATED_AT = "2026-01-01T00:00:00Z"

# clinically conventional adult bands; intervals are lower-inclusive
_DEFAULT_BANDS = {
    VitalKind.BODY_TEMPERATURE: (35.0, 36.0, 37.5, 38.5),
    VitalKind.HEART_RATE: (50.0, 60.0, 100.0, 120.0),
    VitalKind.SYSTOLIC_BP: (80.0, 90.0, 140.0, 180.0),
    VitalKind.DIASTOLIC_BP: (50.0, 60.0, 90.0, 120.0),
    VitalKind.BLOOD_GLUCOSE: (54.0, 70.0, 140.0, 200.0),
}
_BAND_ORDER = (Band.CRITICAL, Band.WARNING, Band.NORMAL, Band.WARNING, Band.CRITICAL)

_DEFAULT_TRENDS = {
    VitalKind.BODY_TEMPERATURE: 1.0,
    VitalKind.HEART_RATE: 25.0,
    VitalKind.SYSTOLIC_BP: 30.0,
    VitalKind.DIASTOLIC_BP: 20.0,
    VitalKind.BLOOD_GLUCOSE: 40.0,
}


def default_kb() -> KnowledgeBase:
    tables = {
        kind: BandTable(kind, breakpoints, _BAND_ORDER)
        for kind, breakpoints in _DEFAULT_BANDS.items()
    }
    trends = {
        kind: TrendRule(kind, window_s=60.0, max_abs_delta=delta)
        for kind, delta in _DEFAULT_TRENDS.items()
    }
    return KnowledgeBase(
        tables=tables,
        trends=trends,
        debounce=DebounceConfig(),
        revision=1,
        author="system",
        updated_at=DEFAULT_KB_UPDATED_AT,
    )


def classify(kind: VitalKind, value: float, kb: KnowledgeBase) -> Band:
    table = kb.tables.get(kind)
    if table is None:
        raise UnknownKindError(f"no band table for {kind.label}")
    return table.classify(value)


@dataclass(frozen=True)
class TrendViolation:
    kind: VitalKind
    delta: float
    span_s: float


def trend_check(
    kind: VitalKind,
    window: list[tuple[float, float]],
    kb: KnowledgeBase,
) -> TrendViolation | None:
    """window is (timestamp_s, value) sorted by timestamp. A violation is a
    max-minus-min excursion strictly above the rule's bound within the
    trailing window_s of the newest sample."""
    rule = kb.trends.get(kind)
    if rule is None or len(window) < 2:
        return None
    horizon = window[-1][0] - rule.window_s
    values = [v for t, v in window if t >= horizon]
    delta = max(values) - min(values)
    if delta > rule.max_abs_delta:
        times = [t for t, v in window if t >= horizon]
        return TrendViolation(kind, delta=delta, span_s=window[-1][0] - times[0])
    return None


@dataclass
class KindState:
    """Tracking for one (patient, kind): recent samples for trend checks,
    consecutive counters, and whether a condition episode is active."""

    window: deque = field(default_factory=deque)
    out_of_normal: int = 0
    normal: int = 0
    active: bool = False


@dataclass(frozen=True)
class AlertEvent:
    patient_id: int
    kind: VitalKind
    band: Band  # band at raise: CRITICAL, or WARNING for band/trend warnings
    reason: str  # "band" or "trend"
    value_x10: int
    timestamp_ms: int


@dataclass(frozen=True)
class ClearEvent:
    patient_id: int
    kind: VitalKind
    timestamp_ms: int


def update_state(
    state: KindState,
    patient_id: int,
    kind: VitalKind,
    timestamp_ms: int,
    value_x10: int,
    band: Band,
    kb: KnowledgeBase,
) -> AlertEvent | ClearEvent | None:
    """Feed one classified sample through the debounce state machine.

    Mutates state in place and returns the raised/cleared event, if any.
    Sample timestamps per (patient, kind) must be non-decreasing;
    "consecutive" counts received samples, not wall-clock slots.
    """
    value = value_x10 / 10
    ts_s = timestamp_ms / 1000
    rule = kb.trends.get(kind)
    state.window.append((ts_s, value))
    if rule is None:
        while len(state.window) > 1:
            state.window.popleft()
    else:
        horizon = ts_s - rule.window_s
        while state.window and state.window[0][0] < horizon:
            state.window.popleft()
    violation = trend_check(kind, list(state.window), kb)

    if band is not Band.NORMAL or violation is not None:
        state.out_of_normal += 1
        state.normal = 0
        if state.active:
            return None  # episode extends silently
        debounce = kb.debounce
        if band is Band.CRITICAL:
            if state.out_of_normal >= debounce.n_critical_raise:
                state.active = True
                return AlertEvent(patient_id, kind, Band.CRITICAL, "band",
                                  value_x10, timestamp_ms)
        elif state.out_of_normal >= debounce.n_warning_raise:
            state.active = True
            reason = "band" if band is Band.WARNING else "trend"
            return AlertEvent(patient_id, kind, Band.WARNING, reason,
                              value_x10, timestamp_ms)
        return None

    state.normal += 1
    state.out_of_normal = 0
    if state.active and state.normal >= kb.debounce.m_clear:
        state.active = False
        return ClearEvent(patient_id, kind, timestamp_ms)
    return None


class ExpertEngine:
    """Stateful wrapper: per-(patient, kind) debounce state plus the live
    knowledge base. Deterministic; samples for one (patient, kind) must be
    applied in timestamp order."""

    def __init__(self, kb: KnowledgeBase | None = None):
        self.kb = kb if kb is not None else default_kb()
        self._states: dict[tuple[int, VitalKind], KindState] = {}

    def classify(self, kind: VitalKind, value: float) -> Band:
        return classify(kind, value, self.kb)

    def process(
        self,
        patient_id: int,
        kind: VitalKind,
        timestamp_ms: int,
        value_x10: int,
        band: Band,
    ) -> AlertEvent | ClearEvent | None:
        state = self._states.setdefault((patient_id, kind), KindState())
        return update_state(state, patient_id, kind, timestamp_ms, value_x10, band, self.kb)

    def apply_kb_update(self, proposal: KbProposal, author: str, now_iso: str) -> KnowledgeBase:
        self.kb = apply_kb_update(self.kb, proposal, author, now_iso)
        return self.kb


def validate_proposal(proposal: KbProposal) -> list[str]:
    errors: list[str] = []
    for kind, intervals in proposal.tables.items():
        errors.extend(_validate_intervals(kind, intervals))
    for kind, rule in proposal.trends.items():
        if rule.window_s <= 0:
            errors.append(f"trend {kind.label}: nonpositive window_s {rule.window_s}")
        if rule.max_abs_delta <= 0:
            errors.append(
                f"trend {kind.label}: nonpositive max_abs_delta {rule.max_abs_delta}"
            )
    debounce = proposal.debounce
    for name in ("n_warning_raise", "n_critical_raise", "m_clear"):
        if getattr(debounce, name) < 1:
            errors.append(f"debounce: nonpositive {name} {getattr(debounce, name)}")
    return errors


def _validate_intervals(kind: VitalKind, intervals) -> list[str]:
    errors: list[str] = []
    if not intervals:
        return [f"bands {kind.label}: no intervals"]
    resolved = [
        (
            -math.inf if iv.lower is None else iv.lower,
            math.inf if iv.upper is None else iv.upper,
            iv.band,
        )
        for iv in intervals
    ]
    for lower, upper, _ in resolved:
        if not lower < upper:
            errors.append(
                f"bands {kind.label}: non-ascending breakpoints "
                f"(interval [{lower}, {upper}) is empty)"
            )
    ordered = sorted(resolved, key=lambda iv: (iv[0], iv[1]))
    if ordered[0][0] != -math.inf:
        errors.append(
            f"bands {kind.label}: gap below {ordered[0][0]} (range must start unbounded)"
        )
    if ordered[-1][1] != math.inf:
        errors.append(
            f"bands {kind.label}: gap above {ordered[-1][1]} (range must end unbounded)"
        )
    for (_, upper_a, _), (lower_b, _, _) in zip(ordered, ordered[1:]):
        if lower_b > upper_a:
            errors.append(f"bands {kind.label}: gap between {upper_a} and {lower_b}")
        elif lower_b < upper_a:
            errors.append(f"bands {kind.label}: overlap between {lower_b} and {upper_a}")
    return errors


def apply_kb_update(
    kb: KnowledgeBase, proposal: KbProposal, author: str, now_iso: str
) -> KnowledgeBase:
    """Validate and apply a proposed revision; the current kb is untouched
    on rejection."""
    errors = validate_proposal(proposal)
    if errors:
        raise ValidationError(errors)
    tables = {}
    for kind, intervals in proposal.tables.items():
        ordered = sorted(
            intervals, key=lambda iv: -math.inf if iv.lower is None else iv.lower
        )
        breakpoints = tuple(iv.lower for iv in ordered[1:])
        bands = tuple(iv.band for iv in ordered)
        tables[kind] = BandTable(kind, breakpoints, bands)
    return KnowledgeBase(
        tables=tables,
        trends=dict(proposal.trends),
        debounce=proposal.debounce,
        revision=kb.revision + 1,
        author=author,
        updated_at=now_iso,
    )


def kb_as_proposal(kb: KnowledgeBase) -> KbProposal:
    """Express the current tables as an (always valid) interval proposal."""
    tables = {
        kind: tuple(BandInterval(lo, hi, band) for lo, hi, band in table.intervals())
        for kind, table in kb.tables.items()
    }
    return KbProposal(tables=tables, trends=dict(kb.trends), debounce=kb.debounce)

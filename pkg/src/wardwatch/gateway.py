"""The gateway: ingests impaired telemetry, classifies it through the rule
engine, persists everything, streams events to subscribers, and routes and
escalates alerts to nurse/physician notification sinks.

Ingestion is fire-and-forget for the sender; duplicate and undecodable
frames touch no state beyond metrics. One lock serializes mutation, which
both keeps per-patient event order equal to commit order and makes the whole
pipeline deterministic under a simulated clock.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field
from enum import Enum

from . import protocol
from .engine import (
    AlertEvent,
    Band,
    ClearEvent,
    ExpertEngine,
    KbProposal,
    KnowledgeBase,
    UnknownKindError,
)
from .protocol import Duplicate, SequenceTracker, VitalKind, UNITS
from .store import DuplicateReading, PatientStore, ReadingRecord, UnknownPatient


class WallClock:
    def now(self) -> float:
        return time.time()


class SimulatedClock:
    """Deterministic clock for simulation and escalation-timing tests."""

    def __init__(self, start_s: float = 0.0):
        self._now = start_s

    def now(self) -> float:
        return self._now

    def advance_to(self, t_s: float) -> None:
        if t_s > self._now:
            self._now = t_s

    def advance(self, dt_s: float) -> None:
        self._now += dt_s


class Role(Enum):
    NURSE = "nurse"
    PHYSICIAN = "physician"


class AlertState(Enum):
    OPEN = "open"
    ACKED = "acked"
    CLOSED = "closed"


class UnknownAlert(LookupError):
    pass


@dataclass(frozen=True)
class RoutingRules:
    """Severity -> roles; critical must reach at least everyone warning does."""

    warning: frozenset = frozenset({Role.NURSE})
    critical: frozenset = frozenset({Role.NURSE, Role.PHYSICIAN})

    def __post_init__(self) -> None:
        if not self.warning <= self.critical:
            raise ValueError("critical routing must be a superset of warning routing")

    def roles_for(self, band: Band) -> frozenset:
        return self.critical if band is Band.CRITICAL else self.warning


@dataclass(frozen=True)
class EscalationPolicy:
    critical_interval_s: float = 120.0
    warning_interval_s: float = 300.0
    max_renotifications: int = 5

    def interval_for(self, band: Band) -> float:
        return (
            self.critical_interval_s if band is Band.CRITICAL
            else self.warning_interval_s
        )


@dataclass
class Alert:
    alert_id: int
    patient_id: int
    kind: VitalKind
    band: Band
    reason: str  # band | trend
    value_x10: int
    timestamp_ms: int
    raised_at_s: float
    state: AlertState = AlertState.OPEN
    acked_by: str | None = None
    acked_role: str | None = None
    acked_at_s: float | None = None
    closed_at_s: float | None = None
    cleared_unacked: bool = False
    renotify_count: int = 0
    escalation_exhausted: bool = False
    last_notified_s: float = 0.0

    def as_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "patient_id": self.patient_id,
            "kind": self.kind.label,
            "band": self.band.label,
            "reason": self.reason,
            "value": self.value_x10 / 10,
            "timestamp_ms": self.timestamp_ms,
            "raised_at_s": self.raised_at_s,
            "state": self.state.value,
            "acked_by": self.acked_by,
            "acked_role": self.acked_role,
            "acked_at_s": self.acked_at_s,
            "closed_at_s": self.closed_at_s,
            "cleared_unacked": self.cleared_unacked,
            "renotify_count": self.renotify_count,
            "escalation_exhausted": self.escalation_exhausted,
        }


@dataclass(frozen=True)
class NotificationMessage:
    alert_id: int
    role: Role
    patient_id: int
    kind: VitalKind
    band: Band
    text: str
    emitted_at_s: float
    attempt: int


class DispositionKind(Enum):
    STORED = "stored"
    DUPLICATE = "duplicate"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Disposition:
    kind: DispositionKind
    reason: str | None = None


@dataclass
class Subscription:
    """One stream consumer; events arrive in commit order."""

    events: queue.Queue = field(default_factory=queue.Queue)

    def get(self, timeout: float | None = None):
        return self.events.get(timeout=timeout)


METRIC_KEYS = [
    "frames_received",
    "frames_duplicate",
    "frames_rejected",
    "readings_stored",
    "alerts_raised",
    "alerts_acked",
    "alerts_escalated",
    "alerts_closed",
    "samples_unclassified",
    "samples_unregistered",
]


class Gateway:
    def __init__(
        self,
        store: PatientStore,
        node_map: dict[int, int],
        kb: KnowledgeBase | None = None,
        clock=None,
        sinks: list | None = None,
        routing: RoutingRules | None = None,
        escalation: EscalationPolicy | None = None,
    ):
        self.store = store
        self.node_map = dict(node_map)
        self.clock = clock if clock is not None else WallClock()
        self.sinks = list(sinks) if sinks else []
        self.routing = routing if routing is not None else RoutingRules()
        self.escalation = escalation if escalation is not None else EscalationPolicy()
        if kb is None:
            kb = store.load_kb()  # falls back to defaults when absent
        self.engine = ExpertEngine(kb)
        self.tracker = SequenceTracker()
        self._lock = threading.RLock()
        self._alerts: dict[int, Alert] = {}
        self._active_alert: dict[tuple[int, VitalKind], int] = {}
        self._subscribers: list[Subscription] = []
        self._metrics = {key: 0 for key in METRIC_KEYS}
        self._restore_alerts()
        self.store.save_kb(self.engine.kb)

    # -- ingestion -----------------------------------------------------------

    def ingest(self, frame: bytes, arrival_s: float | None = None) -> Disposition:
        """Decode, deduplicate, classify, persist, stream, and alert."""
        now = self.clock.now() if arrival_s is None else arrival_s
        with self._lock:
            self._metrics["frames_received"] += 1
            try:
                packet = protocol.decode_packet(frame)
            except protocol.DecodeError as err:
                self._metrics["frames_rejected"] += 1
                return Disposition(DispositionKind.REJECTED, type(err).__name__)
            patient_id = self.node_map.get(packet.node_id)
            if patient_id is None:
                self._metrics["frames_rejected"] += 1
                return Disposition(DispositionKind.REJECTED, "UnknownNode")
            verdict = self.tracker.check(packet.node_id, packet.seq)
            if isinstance(verdict, Duplicate):
                self._metrics["frames_duplicate"] += 1
                return Disposition(DispositionKind.DUPLICATE)
            for sample in packet.samples:
                self._process_sample(packet, patient_id, sample, now)
            return Disposition(DispositionKind.STORED)

    def _process_sample(self, packet, patient_id: int, sample, now: float) -> None:
        try:
            band = self.engine.classify(sample.kind, sample.value)
        except UnknownKindError:
            self._metrics["samples_unclassified"] += 1
            return
        reading = ReadingRecord(
            patient_id=patient_id,
            node_id=packet.node_id,
            seq=packet.seq,
            timestamp_ms=packet.timestamp_ms,
            kind=sample.kind,
            value_x10=sample.value_x10,
            band=band,
        )
        try:
            self.store.append_reading(reading)
        except DuplicateReading:
            # seq wrapped past the 64-entry window onto an already-stored key
            self._metrics["frames_duplicate"] += 1
            return
        except UnknownPatient:
            # node maps to a patient nobody registered: config error upstream
            self._metrics["samples_unregistered"] += 1
            return
        self._metrics["readings_stored"] += 1
        self._publish(
            {
                "type": "reading_stored",
                "patient_id": patient_id,
                "node_id": packet.node_id,
                "seq": packet.seq,
                "kind": sample.kind.label,
                "value": sample.value_x10 / 10,
                "value_x10": sample.value_x10,
                "band": band.label,
                "timestamp_ms": packet.timestamp_ms,
            }
        )
        event = self.engine.process(
            patient_id, sample.kind, packet.timestamp_ms, sample.value_x10, band
        )
        if isinstance(event, AlertEvent):
            self._raise_alert(event, now)
        elif isinstance(event, ClearEvent):
            self._clear_alert(event, now)

    # -- alert lifecycle -------------------------------------------------------

    def _raise_alert(self, event: AlertEvent, now: float) -> None:
        # a dangling alert for this key (possible after a restart wiped the
        # engine's episode state) is closed before the new one opens
        stale_id = self._active_alert.get((event.patient_id, event.kind))
        if stale_id is not None:
            self._clear_alert(
                ClearEvent(event.patient_id, event.kind, event.timestamp_ms), now
            )
        alert = Alert(
            alert_id=self._next_alert_id(),
            patient_id=event.patient_id,
            kind=event.kind,
            band=event.band,
            reason=event.reason,
            value_x10=event.value_x10,
            timestamp_ms=event.timestamp_ms,
            raised_at_s=now,
            last_notified_s=now,
        )
        self._alerts[alert.alert_id] = alert
        self._active_alert[(event.patient_id, event.kind)] = alert.alert_id
        self._metrics["alerts_raised"] += 1
        self.store.append_alert_event(
            {
                "event": "raised",
                "alert_id": alert.alert_id,
                "patient_id": alert.patient_id,
                "kind": alert.kind.label,
                "band": alert.band.label,
                "t_s": f"{now:.3f}",
                "value_x10": alert.value_x10,
                "timestamp_ms": alert.timestamp_ms,
                "reason": alert.reason,
            }
        )
        self._publish({"type": "alert_raised", "alert": alert.as_dict()})
        self._notify(alert, now, attempt=1)

    def _clear_alert(self, event: ClearEvent, now: float) -> None:
        alert_id = self._active_alert.pop((event.patient_id, event.kind), None)
        if alert_id is None:
            return
        alert = self._alerts[alert_id]
        if alert.state is AlertState.CLOSED:
            return
        alert.cleared_unacked = alert.state is AlertState.OPEN
        alert.state = AlertState.CLOSED
        alert.closed_at_s = now
        self._metrics["alerts_closed"] += 1
        self.store.append_alert_event(
            {
                "event": "closed",
                "alert_id": alert.alert_id,
                "patient_id": alert.patient_id,
                "kind": alert.kind.label,
                "band": alert.band.label,
                "t_s": f"{now:.3f}",
                "timestamp_ms": event.timestamp_ms,
                "reason": "cleared-unacked" if alert.cleared_unacked else "cleared",
            }
        )
        self._publish({"type": "alert_cleared", "alert": alert.as_dict()})

    def ack_alert(self, alert_id: int, user: str, role: str | None = None) -> Alert:
        """Open -> Acked; acking again is an idempotent no-op."""
        with self._lock:
            alert = self._alerts.get(alert_id)
            if alert is None:
                raise UnknownAlert(f"no alert {alert_id}")
            if alert.state is not AlertState.OPEN:
                return alert
            now = self.clock.now()
            alert.state = AlertState.ACKED
            alert.acked_by = user
            alert.acked_role = role
            alert.acked_at_s = now
            self._metrics["alerts_acked"] += 1
            self.store.append_alert_event(
                {
                    "event": "acked",
                    "alert_id": alert.alert_id,
                    "patient_id": alert.patient_id,
                    "kind": alert.kind.label,
                    "band": alert.band.label,
                    "t_s": f"{now:.3f}",
                    "actor": user,
                    "role": role or "-",
                }
            )
            self._publish({"type": "alert_acked", "alert": alert.as_dict()})
            return alert

    def escalate(self, now_s: float | None = None) -> list[NotificationMessage]:
        """Renotify every Open alert whose interval has lapsed; call this
        periodically. Catches up multiple lapsed rounds after a clock jump,
        stamping each round at its scheduled time."""
        now = self.clock.now() if now_s is None else now_s
        emitted: list[NotificationMessage] = []
        with self._lock:
            for alert in self._alerts.values():
                if alert.state is not AlertState.OPEN or alert.escalation_exhausted:
                    continue
                interval = self.escalation.interval_for(alert.band)
                while (
                    not alert.escalation_exhausted
                    and now - alert.last_notified_s >= interval
                ):
                    due_at = alert.last_notified_s + interval
                    alert.renotify_count += 1
                    alert.last_notified_s = due_at
                    self._metrics["alerts_escalated"] += 1
                    if alert.renotify_count >= self.escalation.max_renotifications:
                        alert.escalation_exhausted = True
                    self.store.append_alert_event(
                        {
                            "event": "escalated",
                            "alert_id": alert.alert_id,
                            "patient_id": alert.patient_id,
                            "kind": alert.kind.label,
                            "band": alert.band.label,
                            "t_s": f"{due_at:.3f}",
                            "reason": str(alert.renotify_count)
                            + ("-exhausted" if alert.escalation_exhausted else ""),
                        }
                    )
                    emitted.extend(
                        self._notify(alert, due_at, attempt=alert.renotify_count + 1)
                    )
        return emitted

    def _notify(self, alert: Alert, now: float, attempt: int) -> list[NotificationMessage]:
        messages = []
        for role in sorted(self.routing.roles_for(alert.band), key=lambda r: r.value):
            value = alert.value_x10 / 10
            unit = UNITS[alert.kind]
            message = NotificationMessage(
                alert_id=alert.alert_id,
                role=role,
                patient_id=alert.patient_id,
                kind=alert.kind,
                band=alert.band,
                text=(
                    f"[{alert.band.label}] patient {alert.patient_id} "
                    f"{alert.kind.label} {value:g} {unit} needs attention "
                    f"(alert {alert.alert_id}, attempt {attempt})"
                ),
                emitted_at_s=now,
                attempt=attempt,
            )
            for sink in self.sinks:
                sink.deliver(message)
            messages.append(message)
        return messages

    # -- knowledge base --------------------------------------------------------

    def apply_kb_update(self, proposal: KbProposal, author: str, now_iso: str) -> KnowledgeBase:
        with self._lock:
            kb = self.engine.apply_kb_update(proposal, author, now_iso)
            self.store.save_kb(kb)
            self._publish(
                {
                    "type": "kb_updated",
                    "revision": kb.revision,
                    "author": kb.author,
                    "updated_at": kb.updated_at,
                }
            )
            return kb

    # -- queries ----------------------------------------------------------------

    def alerts(self, state: AlertState | None = None) -> list[Alert]:
        with self._lock:
            found = sorted(self._alerts.values(), key=lambda a: a.alert_id)
        if state is not None:
            found = [a for a in found if a.state is state]
        return found

    def get_alert(self, alert_id: int) -> Alert:
        with self._lock:
            alert = self._alerts.get(alert_id)
            if alert is None:
                raise UnknownAlert(f"no alert {alert_id}")
            return alert

    def metrics(self) -> dict[str, int]:
        with self._lock:
            return dict(self._metrics)

    def flush_metrics(self) -> None:
        self.store.write_metrics(self.metrics())

    # -- streaming ----------------------------------------------------------------

    def subscribe(self) -> Subscription:
        subscription = Subscription()
        with self._lock:
            self._subscribers.append(subscription)
        return subscription

    def unsubscribe(self, subscription: Subscription) -> None:
        with self._lock:
            if subscription in self._subscribers:
                self._subscribers.remove(subscription)

    def _publish(self, event: dict) -> None:
        for subscription in self._subscribers:
            subscription.events.put(event)

    # -- boot ----------------------------------------------------------------------

    def _next_alert_id(self) -> int:
        return max(self._alerts, default=0) + 1

    def _restore_alerts(self) -> None:
        """Fold the persisted alert event log back into live Alert state."""
        for event in self.store.alert_events():
            kind = event.get("event")
            alert_id = int(event["alert_id"])
            if kind == "raised":
                self._alerts[alert_id] = Alert(
                    alert_id=alert_id,
                    patient_id=int(event["patient_id"]),
                    kind=VitalKind.from_label(event["kind"]),
                    band=Band.from_label(event["band"]),
                    reason=event.get("reason", "band"),
                    value_x10=int(event["value_x10"]),
                    timestamp_ms=int(event["timestamp_ms"]),
                    raised_at_s=float(event["t_s"]),
                    last_notified_s=float(event["t_s"]),
                )
                self._active_alert[
                    (self._alerts[alert_id].patient_id, self._alerts[alert_id].kind)
                ] = alert_id
            elif kind == "acked" and alert_id in self._alerts:
                alert = self._alerts[alert_id]
                if alert.state is AlertState.OPEN:
                    alert.state = AlertState.ACKED
                    alert.acked_by = event.get("actor")
                    role = event.get("role")
                    alert.acked_role = None if role in (None, "-") else role
                    alert.acked_at_s = float(event["t_s"])
            elif kind == "escalated" and alert_id in self._alerts:
                alert = self._alerts[alert_id]
                reason = event.get("reason", "0")
                count = int(str(reason).split("-")[0])
                alert.renotify_count = max(alert.renotify_count, count)
                alert.last_notified_s = float(event["t_s"])
                if str(reason).endswith("exhausted"):
                    alert.escalation_exhausted = True
            elif kind == "closed" and alert_id in self._alerts:
                alert = self._alerts[alert_id]
                alert.cleared_unacked = event.get("reason") == "cleared-unacked"
                alert.state = AlertState.CLOSED
                alert.closed_at_s = float(event["t_s"])
                self._active_alert.pop((alert.patient_id, alert.kind), None)

"""Deterministic stand-in for the hardware bracelets.

Each simulated node emits one telemetry packet per sample period carrying all
of its enabled vital channels. A channel value is baseline + slow sinusoidal
drift + any scripted anomaly delta (linearly ramped in and out) + Gaussian
noise from a dedicated per-(node, kind) stream, so runs are reproducible for
a given seed regardless of node count or ordering.

The network hop is modeled separately: frames are independently dropped,
duplicated at most once, and delayed uniformly, again from a seeded stream.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .protocol import TelemetryPacket, VitalKind, VitalSample, encode_packet
from .textconf import ParseError, parse_sections

_CHANNEL_FIELDS = (
    "baseline",
    "noise_stddev",
    "circadian_amplitude",
    "circadian_period_s",
    "circadian_phase_s",
)


class ScenarioInvalid(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class ChannelProfile:
    baseline: float
    noise_stddev: float = 0.0
    circadian_amplitude: float = 0.0
    circadian_period_s: float = 86400.0
    circadian_phase_s: float = 0.0


@dataclass(frozen=True)
class NodeProfile:
    node_id: int
    patient_id: int
    channels: Mapping[VitalKind, ChannelProfile]
    sample_period_s: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", dict(self.channels))


@dataclass(frozen=True)
class AnomalyEvent:
    node_id: int
    kind: VitalKind
    start_s: float
    duration_s: float
    delta: float
    ramp_s: float = 0.0

    def gain(self, t_s: float) -> float:
        """Linear on/off ramp; 1.0 across the plateau, 0 outside the event."""
        end = self.start_s + self.duration_s
        if t_s < self.start_s or t_s >= end:
            return 0.0
        if self.ramp_s > 0:
            if t_s < self.start_s + self.ramp_s:
                return (t_s - self.start_s) / self.ramp_s
            if t_s > end - self.ramp_s:
                return (end - t_s) / self.ramp_s
        return 1.0


@dataclass(frozen=True)
class ImpairmentConfig:
    loss_prob: float = 0.0
    dup_prob: float = 0.0
    delay_ms_min: float = 0.0
    delay_ms_max: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    duration_s: float
    nodes: tuple[NodeProfile, ...]
    events: tuple[AnomalyEvent, ...] = ()
    impairment: ImpairmentConfig = ImpairmentConfig()
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "events", tuple(self.events))

    def violations(self) -> list[str]:
        problems: list[str] = []
        if self.duration_s <= 0:
            problems.append(f"duration_s {self.duration_s} must be positive")
        if not self.nodes:
            problems.append("scenario has no nodes")
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            problems.append("node ids are not unique")
        for node in self.nodes:
            if node.sample_period_s <= 0:
                problems.append(
                    f"node {node.node_id}: sample_period_s must be positive"
                )
            if not node.channels:
                problems.append(f"node {node.node_id}: no channels enabled")
            for kind, ch in node.channels.items():
                if ch.noise_stddev < 0:
                    problems.append(
                        f"node {node.node_id} {kind.label}: negative noise_stddev"
                    )
                if ch.circadian_amplitude != 0 and ch.circadian_period_s <= 0:
                    problems.append(
                        f"node {node.node_id} {kind.label}: drift period must be "
                        "positive when amplitude is nonzero"
                    )
        known = set(ids)
        for event in self.events:
            if event.node_id not in known:
                problems.append(f"event references unknown node {event.node_id}")
            if event.duration_s <= 0:
                problems.append("event duration_s must be positive")
            elif not 0 <= event.ramp_s <= event.duration_s / 2:
                problems.append(
                    f"event ramp_s {event.ramp_s} outside 0..duration/2"
                )
            if event.start_s + event.duration_s > self.duration_s:
                problems.append(
                    f"event on node {event.node_id} ends at "
                    f"{event.start_s + event.duration_s}, past duration_s"
                )
        imp = self.impairment
        if not 0 <= imp.loss_prob <= 1:
            problems.append(f"loss_prob {imp.loss_prob} outside [0, 1]")
        if not 0 <= imp.dup_prob <= 1:
            problems.append(f"dup_prob {imp.dup_prob} outside [0, 1]")
        if imp.delay_ms_min > imp.delay_ms_max:
            problems.append("delay_ms_min exceeds delay_ms_max")
        return problems

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise ScenarioInvalid(problems)

    def node_patient_map(self) -> dict[int, int]:
        return {n.node_id: n.patient_id for n in self.nodes}


def channel_stream(seed: int, node_id: int, kind: VitalKind) -> random.Random:
    """Noise stream dedicated to one (node, kind); string seeding keeps the
    derivation stable across processes."""
    return random.Random(f"{seed}/{node_id}/{kind.value}")


def to_value_x10(value: float) -> int:
    """Round to the nearest 0.1 (ties toward +inf) and clamp to i16."""
    scaled = math.floor(value * 10 + 0.5)
    return max(-32768, min(32767, scaled))


def next_sample(
    profile: NodeProfile,
    events: Iterable[AnomalyEvent],
    t_s: float,
    streams: Mapping[VitalKind, random.Random],
) -> list[VitalSample]:
    """One sample per enabled channel, in wire-code order."""
    samples = []
    for kind in VitalKind:
        ch = profile.channels.get(kind)
        if ch is None:
            continue
        value = ch.baseline
        if ch.circadian_amplitude:
            value += ch.circadian_amplitude * math.sin(
                2 * math.pi * (t_s + ch.circadian_phase_s) / ch.circadian_period_s
            )
        for event in events:
            if event.node_id == profile.node_id and event.kind is kind:
                value += event.delta * event.gain(t_s)
        if ch.noise_stddev:
            value += streams[kind].gauss(0.0, ch.noise_stddev)
        samples.append(VitalSample(kind, to_value_x10(value)))
    return samples


def run_fleet(scenario: Scenario) -> list[tuple[float, TelemetryPacket]]:
    """Emit every node's packets for the scenario, ordered by send time with
    ties broken by node id. Fully deterministic for a given seed."""
    scenario.validate()
    emitted: list[tuple[float, TelemetryPacket]] = []
    for node in sorted(scenario.nodes, key=lambda n: n.node_id):
        streams = {
            kind: channel_stream(scenario.seed, node.node_id, kind)
            for kind in node.channels
        }
        events = [e for e in scenario.events if e.node_id == node.node_id]
        count = int(scenario.duration_s / node.sample_period_s + 1e-9)
        for seq in range(count):
            t_s = seq * node.sample_period_s
            samples = next_sample(node, events, t_s, streams)
            packet = TelemetryPacket(
                node_id=node.node_id,
                seq=seq % 65536,
                timestamp_ms=round(t_s * 1000),
                samples=tuple(samples),
            )
            emitted.append((t_s, packet))
    emitted.sort(key=lambda item: (item[0], item[1].node_id))
    return emitted


def apply_impairment(
    stream: Iterable[tuple[float, TelemetryPacket]],
    config: ImpairmentConfig,
) -> list[tuple[float, bytes]]:
    """Model the lossy wireless hop: drop, duplicate at most once, delay.

    Returns encoded frames ordered by arrival time; ties keep send order.
    """
    rng = random.Random(f"impairment/{config.seed}")
    delivered: list[tuple[float, bytes]] = []
    for send_s, packet in stream:
        if rng.random() < config.loss_prob:
            continue
        copies = 2 if rng.random() < config.dup_prob else 1
        frame = encode_packet(packet)
        for _ in range(copies):
            delay_ms = rng.uniform(config.delay_ms_min, config.delay_ms_max)
            delivered.append((send_s + delay_ms / 1000.0, frame))
    delivered.sort(key=lambda item: item[0])
    return delivered


def load_scenario(text: str) -> Scenario:
    """Parse a scenario document and validate every invariant."""
    sections = parse_sections(text)
    duration_s = 0.0
    seed = 0
    nodes: list[NodeProfile] = []
    events: list[AnomalyEvent] = []
    impairment = ImpairmentConfig()
    saw_scenario = False
    for section in sections:
        if section.name == "scenario":
            saw_scenario = True
            duration_s = section.require_float("duration_s")
            seed = section.get_int("seed", 0)
        elif section.name == "node":
            nodes.append(_parse_node(section))
        elif section.name == "event":
            events.append(
                AnomalyEvent(
                    node_id=section.require_int("node_id"),
                    kind=_kind_value(section, "kind"),
                    start_s=section.require_float("start_s"),
                    duration_s=section.require_float("duration_s"),
                    delta=section.require_float("delta"),
                    ramp_s=section.get_float("ramp_s", 0.0),
                )
            )
        elif section.name == "impairment":
            impairment = ImpairmentConfig(
                loss_prob=section.get_float("loss_prob", 0.0),
                dup_prob=section.get_float("dup_prob", 0.0),
                delay_ms_min=section.get_float("delay_ms_min", 0.0),
                delay_ms_max=section.get_float("delay_ms_max", 0.0),
                seed=section.get_int("seed", 0),
            )
        else:
            raise ParseError(f"unknown section [{section.header}]", section.line)
    if not saw_scenario:
        raise ParseError("missing [scenario] section")
    scenario = Scenario(
        duration_s=duration_s,
        nodes=tuple(nodes),
        events=tuple(events),
        impairment=impairment,
        seed=seed,
    )
    scenario.validate()
    return scenario


def load_scenario_file(path) -> Scenario:
    with open(path, encoding="utf-8") as handle:
        return load_scenario(handle.read())


def _parse_node(section) -> NodeProfile:
    if section.arg is None:
        raise ParseError("[node] header needs a node id", section.line)
    try:
        node_id = int(section.arg)
    except ValueError:
        raise ParseError(f"node id {section.arg!r} is not an integer", section.line) from None
    channels: dict[VitalKind, dict[str, float]] = {}
    for key in section.entries:
        if "." not in key:
            continue
        kind_label, _, field_name = key.partition(".")
        try:
            kind = VitalKind.from_label(kind_label)
        except KeyError:
            raise ParseError(
                f"unknown vital kind {kind_label!r}", section.entry_lines[key], key
            ) from None
        if field_name not in _CHANNEL_FIELDS:
            raise ParseError(
                f"unknown channel field {field_name!r}", section.entry_lines[key], key
            )
        channels.setdefault(kind, {})[field_name] = section.require_float(key)
    for kind, fields in channels.items():
        if "baseline" not in fields:
            raise ParseError(
                f"channel {kind.label} on node {node_id} has no baseline",
                section.line,
            )
    return NodeProfile(
        node_id=node_id,
        patient_id=section.require_int("patient_id"),
        channels={kind: ChannelProfile(**fields) for kind, fields in channels.items()},
        sample_period_s=section.get_float("sample_period_s", 1.0),
    )


def _kind_value(section, key: str) -> VitalKind:
    label = section.require(key)
    try:
        return VitalKind.from_label(label)
    except KeyError:
        raise ParseError(
            f"unknown vital kind {label!r}", section.entry_lines[key], key
        ) from None

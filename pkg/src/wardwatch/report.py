"""Outcome summaries computed straight from a store directory's log files.

The report never consults live gateway state, so two invocations over the
same directory agree byte for byte.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .store import unescape_text

BANDS = ("normal", "warning", "critical")


@dataclass
class PatientSummary:
    patient_id: int
    readings: dict[str, int] = field(default_factory=lambda: {b: 0 for b in BANDS})
    alerts: dict[str, int] = field(default_factory=lambda: {"warning": 0, "critical": 0})
    acked: int = 0
    ack_latencies_s: list[float] = field(default_factory=list)
    escalations: int = 0
    exhausted: int = 0

    @property
    def total_readings(self) -> int:
        return sum(self.readings.values())

    @property
    def total_alerts(self) -> int:
        return sum(self.alerts.values())


@dataclass
class ReportSummary:
    patients: dict[int, PatientSummary]
    frame_metrics: dict[str, int]
    t_from_s: float | None = None
    t_to_s: float | None = None

    def totals(self) -> PatientSummary:
        total = PatientSummary(patient_id=-1)
        for summary in self.patients.values():
            for band in BANDS:
                total.readings[band] += summary.readings[band]
            for severity in ("warning", "critical"):
                total.alerts[severity] += summary.alerts[severity]
            total.acked += summary.acked
            total.ack_latencies_s.extend(summary.ack_latencies_s)
            total.escalations += summary.escalations
            total.exhausted += summary.exhausted
        return total


def compute_report(
    store_dir: str | Path,
    t_from_s: float | None = None,
    t_to_s: float | None = None,
) -> ReportSummary:
    root = Path(store_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"store directory {root} does not exist")
    patients: dict[int, PatientSummary] = {}

    def summary_for(patient_id: int) -> PatientSummary:
        return patients.setdefault(patient_id, PatientSummary(patient_id))

    def in_window(t_s: float) -> bool:
        if t_from_s is not None and t_s < t_from_s:
            return False
        if t_to_s is not None and t_s > t_to_s:
            return False
        return True

    readings_dir = root / "readings"
    if readings_dir.is_dir():
        for path in sorted(readings_dir.glob("*.log")):
            patient_id = int(path.stem)
            for line in path.read_text(encoding="utf-8").splitlines():
                timestamp_ms, _node, _seq, _kind, _value, band = line.split("\t")
                if not in_window(int(timestamp_ms) / 1000):
                    continue
                summary_for(patient_id).readings[band] += 1

    raised_at: dict[int, tuple[int, float]] = {}  # alert_id -> (patient, t_s)
    alerts_path = root / "alerts.log"
    if alerts_path.exists():
        for line in alerts_path.read_text(encoding="utf-8").splitlines():
            cols = [unescape_text(c) for c in line.split("\t")]
            event, alert_id, patient_id, _kind, band, t_s = cols[:6]
            reason = cols[8] if len(cols) > 8 else "-"
            patient = int(patient_id)
            t = float(t_s)
            if event == "raised":
                raised_at[int(alert_id)] = (patient, t)
                if in_window(t):
                    summary_for(patient).alerts[band] += 1
            elif event == "acked":
                origin = raised_at.get(int(alert_id))
                if origin is not None and in_window(origin[1]):
                    summary = summary_for(patient)
                    summary.acked += 1
                    summary.ack_latencies_s.append(t - origin[1])
            elif event == "escalated":
                origin = raised_at.get(int(alert_id))
                if origin is not None and in_window(origin[1]):
                    summary = summary_for(patient)
                    summary.escalations += 1
                    if reason.endswith("exhausted"):
                        summary.exhausted += 1

    return ReportSummary(
        patients=dict(sorted(patients.items())),
        frame_metrics=_read_metrics(root),
        t_from_s=t_from_s,
        t_to_s=t_to_s,
    )


def _read_metrics(root: Path) -> dict[str, int]:
    path = root / "metrics.tsv"
    metrics: dict[str, int] = {}
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition("\t")
            metrics[key] = int(value)
    return metrics


def _latency_cell(latencies: list[float]) -> str:
    if not latencies:
        return "-"
    return (
        f"{min(latencies):.1f}/"
        f"{statistics.median(latencies):.1f}/"
        f"{max(latencies):.1f}"
    )


def render_text(summary: ReportSummary) -> str:
    headers = [
        "patient", "readings", "normal", "warning", "critical",
        "alerts", "warn", "crit", "acked", "ack s min/med/max",
        "escal", "exhausted",
    ]
    rows = []
    for patient_id, s in summary.patients.items():
        rows.append([
            str(patient_id), str(s.total_readings),
            str(s.readings["normal"]), str(s.readings["warning"]),
            str(s.readings["critical"]), str(s.total_alerts),
            str(s.alerts["warning"]), str(s.alerts["critical"]),
            str(s.acked), _latency_cell(s.ack_latencies_s),
            str(s.escalations), str(s.exhausted),
        ])
    total = summary.totals()
    rows.append([
        "TOTAL", str(total.total_readings),
        str(total.readings["normal"]), str(total.readings["warning"]),
        str(total.readings["critical"]), str(total.total_alerts),
        str(total.alerts["warning"]), str(total.alerts["critical"]),
        str(total.acked), _latency_cell(total.ack_latencies_s),
        str(total.escalations), str(total.exhausted),
    ])
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(r[i].ljust(widths[i]) for i in range(len(r))) for r in rows)
    if summary.frame_metrics:
        lines.append("")
        lines.append("frame metrics: " + "  ".join(
            f"{key}={value}" for key, value in sorted(summary.frame_metrics.items())
        ))
    return "\n".join(lines) + "\n"


REPORT_TSV_HEADER = [
    "patient_id", "readings_total", "readings_normal", "readings_warning",
    "readings_critical", "alerts_total", "alerts_warning", "alerts_critical",
    "acked", "ack_latency_min_s", "ack_latency_median_s", "ack_latency_max_s",
    "escalations", "exhausted",
]


def render_tsv(summary: ReportSummary) -> str:
    def row(label, s: PatientSummary) -> str:
        latencies = s.ack_latencies_s
        stats = (
            [f"{min(latencies):.3f}", f"{statistics.median(latencies):.3f}",
             f"{max(latencies):.3f}"]
            if latencies else ["", "", ""]
        )
        return "\t".join([
            str(label), str(s.total_readings), str(s.readings["normal"]),
            str(s.readings["warning"]), str(s.readings["critical"]),
            str(s.total_alerts), str(s.alerts["warning"]),
            str(s.alerts["critical"]), str(s.acked), *stats,
            str(s.escalations), str(s.exhausted),
        ])

    lines = ["\t".join(REPORT_TSV_HEADER)]
    lines.extend(row(pid, s) for pid, s in summary.patients.items())
    lines.append(row("total", summary.totals()))
    for key, value in sorted(summary.frame_metrics.items()):
        lines.append(f"# metric\t{key}\t{value}")
    return "\n".join(lines) + "\n"

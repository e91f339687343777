"""Plain-text patient database.

One directory per store, inspectable with standard tools:

    patients.tsv              demographics snapshot (rewritten atomically)
    kb.txt                    knowledge base (kb_io format)
    readings/<patient_id>.log append-only: timestamp_ms, node_id, seq, kind,
                              value_x10, band
    alerts.log                append-only alert lifecycle events
    notes.log                 append-only notes (abnormal readings and manual)
    prescriptions.log         append-only prescriptions
    journal.log               append-only history/medication/condition entries
    metrics.tsv               gateway counter snapshot

Readings are append-only and deduplicated on (patient, node, seq, kind); a
duplicate reaching the store signals a pipeline bug upstream, so it is an
error rather than a silent upsert. Text fields are tab-separated with
backslash escapes for tab/newline/backslash.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import IO

from . import kb_io
from .engine import Band, KnowledgeBase
from .protocol import VitalKind

PATIENTS_HEADER = [
    "id", "last_name", "first_name", "address", "mobile_phone", "home_phone",
    "social_insurance_number", "date_of_birth", "height_ft", "weight_lb",
    "email", "ec_name", "ec_phone", "ec_address", "ec_relationship",
]

JOURNAL_CATEGORIES = ("history", "medication", "condition")


class StoreError(Exception):
    pass


class UnknownPatient(StoreError):
    def __init__(self, patient_id: int):
        self.patient_id = patient_id
        super().__init__(f"unknown patient {patient_id}")


class DuplicateReading(StoreError):
    pass


class ValidationError(StoreError):
    pass


def escape_text(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def unescape_text(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


@dataclass(frozen=True)
class EmergencyContact:
    name: str = ""
    phone: str = ""
    address: str = ""
    relationship: str = ""


@dataclass(frozen=True)
class PatientRecord:
    id: int
    last_name: str
    first_name: str
    address: str = ""
    mobile_phone: str = ""
    home_phone: str = ""
    social_insurance_number: str = ""
    date_of_birth: str = ""  # ISO-8601 (YYYY-MM-DD)
    height_ft: float | None = None
    weight_lb: float | None = None
    email: str = ""
    emergency_contact: EmergencyContact = EmergencyContact()


@dataclass(frozen=True)
class ReadingRecord:
    patient_id: int
    node_id: int
    seq: int
    timestamp_ms: int
    kind: VitalKind
    value_x10: int
    band: Band

    @property
    def value(self) -> float:
        return self.value_x10 / 10


@dataclass(frozen=True)
class NoteRecord:
    patient_id: int
    created_at_s: float
    text: str
    reading_ref: str | None = None  # "node:seq:kind" for abnormal readings


@dataclass(frozen=True)
class PrescriptionRecord:
    patient_id: int
    physician_registration_number: str
    text: str
    created_at_s: float


@dataclass(frozen=True)
class JournalEntry:
    patient_id: int
    category: str  # history | medication | condition
    text: str
    created_at_s: float


def normalize_dob(raw: str, date_format: str) -> str:
    """Normalize a slash-separated date to ISO-8601. The source format is
    ambiguous between day-first and month-first, so callers must say which."""
    raw = raw.strip()
    if not raw:
        return ""
    if "-" in raw and "/" not in raw:
        return datetime.strptime(raw, "%Y-%m-%d").date().isoformat()
    if date_format == "DMY":
        parsed = datetime.strptime(raw, "%d/%m/%Y")
    elif date_format == "MDY":
        parsed = datetime.strptime(raw, "%m/%d/%Y")
    else:
        raise ValidationError(f"date_format must be DMY or MDY, got {date_format!r}")
    return parsed.date().isoformat()


def _validate_patient(record: PatientRecord) -> None:
    problems = []
    if not isinstance(record.id, int) or record.id < 0:
        problems.append(f"id {record.id!r} must be a non-negative integer")
    if not record.last_name.strip():
        problems.append("last_name is empty")
    if not record.first_name.strip():
        problems.append("first_name is empty")
    for label, value in (
        ("last_name", record.last_name), ("first_name", record.first_name),
        ("address", record.address), ("mobile_phone", record.mobile_phone),
        ("home_phone", record.home_phone),
        ("social_insurance_number", record.social_insurance_number),
        ("date_of_birth", record.date_of_birth), ("email", record.email),
    ):
        if "\t" in value or "\n" in value:
            problems.append(f"{label} contains tab or newline")
    if problems:
        raise ValidationError("; ".join(problems))


class PatientStore:
    """Readers share a lock-protected in-memory view; writes go through to
    the append-only logs (or snapshot rewrite) before returning."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "readings").mkdir(exist_ok=True)
        self._lock = threading.RLock()
        self._patients: dict[int, PatientRecord] = {}
        self._readings: dict[int, list[ReadingRecord]] = {}
        self._reading_keys: set[tuple[int, int, int, VitalKind]] = set()
        self._notes: list[NoteRecord] = []
        self._prescriptions: list[PrescriptionRecord] = []
        self._journal: list[JournalEntry] = []
        self._alert_events: list[dict] = []
        self._reading_handles: dict[int, IO[str]] = {}
        self._load()

    # -- lifecycle ---------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            for handle in self._reading_handles.values():
                handle.close()
            self._reading_handles.clear()

    def __enter__(self) -> "PatientStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def kb_path(self) -> Path:
        return self.root / "kb.txt"

    def load_kb(self) -> KnowledgeBase | None:
        if not self.kb_path.exists():
            return None
        return kb_io.load_kb_file(self.kb_path)

    def save_kb(self, kb: KnowledgeBase) -> None:
        with self._lock:
            kb_io.save_kb_file(kb, self.kb_path)

    # -- patients ----------------------------------------------------------

    def upsert_patient(self, record: PatientRecord) -> PatientRecord:
        _validate_patient(record)
        with self._lock:
            self._patients[record.id] = record
            self._rewrite_patients()
            return record

    def get_patient(self, patient_id: int) -> PatientRecord:
        with self._lock:
            record = self._patients.get(patient_id)
            if record is None:
                raise UnknownPatient(patient_id)
            return record

    def has_patient(self, patient_id: int) -> bool:
        with self._lock:
            return patient_id in self._patients

    def find_patients(
        self, name: str | None = None, patient_id: int | None = None
    ) -> list[PatientRecord]:
        """Conjunctive filters: id exact, name case-insensitive against the
        start of any first/last name word (so "Ali" finds Ali but not the
        'ali' inside Khalid); no filters returns the whole roster by id."""
        with self._lock:
            records = sorted(self._patients.values(), key=lambda r: r.id)
        if patient_id is not None:
            records = [r for r in records if r.id == patient_id]
        if name:
            needle = name.lower().strip()
            if " " in needle:
                records = [
                    r
                    for r in records
                    if needle in f"{r.first_name} {r.last_name}".lower()
                    or needle in f"{r.last_name} {r.first_name}".lower()
                ]
            else:
                records = [
                    r
                    for r in records
                    if any(
                        token.startswith(needle)
                        for token in f"{r.first_name} {r.last_name}".lower().split()
                    )
                ]
        return records

    # -- readings ----------------------------------------------------------

    def append_reading(self, reading: ReadingRecord) -> tuple[ReadingRecord, NoteRecord | None]:
        """Append one classified reading; abnormal readings atomically gain a
        linked note."""
        with self._lock:
            if reading.patient_id not in self._patients:
                raise UnknownPatient(reading.patient_id)
            key = (reading.patient_id, reading.node_id, reading.seq, reading.kind)
            if key in self._reading_keys:
                raise DuplicateReading(
                    f"reading {key} already stored; gateway dedup should have "
                    "caught this"
                )
            note = None
            if reading.band is not Band.NORMAL:
                note = NoteRecord(
                    patient_id=reading.patient_id,
                    created_at_s=reading.timestamp_ms / 1000,
                    text=(
                        f"Abnormal {reading.kind.label} reading "
                        f"{reading.value:g} ({reading.band.label})"
                    ),
                    reading_ref=f"{reading.node_id}:{reading.seq}:{reading.kind.label}",
                )
            handle = self._reading_handle(reading.patient_id)
            handle.write(
                f"{reading.timestamp_ms}\t{reading.node_id}\t{reading.seq}\t"
                f"{reading.kind.label}\t{reading.value_x10}\t{reading.band.label}\n"
            )
            handle.flush()
            if note is not None:
                self._append_note_line(note)
            self._reading_keys.add(key)
            self._readings.setdefault(reading.patient_id, []).append(reading)
            if note is not None:
                self._notes.append(note)
            return reading, note

    def query_readings(
        self,
        patient_id: int,
        t_from_ms: int | None = None,
        t_to_ms: int | None = None,
        kind: VitalKind | None = None,
        band_filter: str | None = None,  # "normal" | "abnormal" | None
    ) -> list[ReadingRecord]:
        with self._lock:
            if patient_id not in self._patients:
                raise UnknownPatient(patient_id)
            rows = list(self._readings.get(patient_id, ()))
        if t_from_ms is not None:
            rows = [r for r in rows if r.timestamp_ms >= t_from_ms]
        if t_to_ms is not None:
            rows = [r for r in rows if r.timestamp_ms <= t_to_ms]
        if kind is not None:
            rows = [r for r in rows if r.kind is kind]
        if band_filter == "normal":
            rows = [r for r in rows if r.band is Band.NORMAL]
        elif band_filter == "abnormal":
            rows = [r for r in rows if r.band is not Band.NORMAL]
        elif band_filter is not None:
            raise ValidationError(f"band filter must be normal or abnormal, got {band_filter!r}")
        rows.sort(key=lambda r: r.timestamp_ms)
        return rows

    def last_update(self, patient_id: int) -> int | None:
        with self._lock:
            if patient_id not in self._patients:
                raise UnknownPatient(patient_id)
            rows = self._readings.get(patient_id)
            if not rows:
                return None
            return max(r.timestamp_ms for r in rows)

    # -- notes, prescriptions, journal --------------------------------------

    def notes(self, patient_id: int) -> list[NoteRecord]:
        with self._lock:
            if patient_id not in self._patients:
                raise UnknownPatient(patient_id)
            return [n for n in self._notes if n.patient_id == patient_id]

    def add_note(self, patient_id: int, text: str, created_at_s: float) -> NoteRecord:
        if not text.strip():
            raise ValidationError("note text is empty")
        with self._lock:
            if patient_id not in self._patients:
                raise UnknownPatient(patient_id)
            note = NoteRecord(patient_id, created_at_s, text, None)
            self._append_note_line(note)
            self._notes.append(note)
            return note

    def add_prescription(
        self,
        patient_id: int,
        physician_registration_number: str,
        text: str,
        created_at_s: float,
    ) -> PrescriptionRecord:
        if not text.strip():
            raise ValidationError("prescription text is empty")
        if not physician_registration_number.strip():
            raise ValidationError("physician registration number is empty")
        with self._lock:
            if patient_id not in self._patients:
                raise UnknownPatient(patient_id)
            record = PrescriptionRecord(
                patient_id, physician_registration_number, text, created_at_s
            )
            with open(self.root / "prescriptions.log", "a", encoding="utf-8") as handle:
                handle.write(
                    f"{record.patient_id}\t{record.created_at_s:.3f}\t"
                    f"{escape_text(record.physician_registration_number)}\t"
                    f"{escape_text(record.text)}\n"
                )
            self._prescriptions.append(record)
            return record

    def prescriptions(self, patient_id: int) -> list[PrescriptionRecord]:
        with self._lock:
            if patient_id not in self._patients:
                raise UnknownPatient(patient_id)
            return [p for p in self._prescriptions if p.patient_id == patient_id]

    def add_journal_entry(
        self, patient_id: int, category: str, text: str, created_at_s: float
    ) -> JournalEntry:
        if category not in JOURNAL_CATEGORIES:
            raise ValidationError(
                f"category must be one of {JOURNAL_CATEGORIES}, got {category!r}"
            )
        if not text.strip():
            raise ValidationError("journal text is empty")
        with self._lock:
            if patient_id not in self._patients:
                raise UnknownPatient(patient_id)
            entry = JournalEntry(patient_id, category, text, created_at_s)
            with open(self.root / "journal.log", "a", encoding="utf-8") as handle:
                handle.write(
                    f"{entry.patient_id}\t{entry.category}\t"
                    f"{entry.created_at_s:.3f}\t{escape_text(entry.text)}\n"
                )
            self._journal.append(entry)
            return entry

    def journal(self, patient_id: int, category: str | None = None) -> list[JournalEntry]:
        with self._lock:
            if patient_id not in self._patients:
                raise UnknownPatient(patient_id)
            entries = [e for e in self._journal if e.patient_id == patient_id]
        if category is not None:
            entries = [e for e in entries if e.category == category]
        return entries

    # -- alert event log -----------------------------------------------------

    def append_alert_event(self, event: dict) -> None:
        """Persist one alert lifecycle line: raised/acked/escalated/closed."""
        with self._lock:
            line = "\t".join(
                escape_text(str(event.get(column, "-")))
                for column in ALERT_COLUMNS
            )
            with open(self.root / "alerts.log", "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
            self._alert_events.append(dict(event))

    def alert_events(self) -> list[dict]:
        with self._lock:
            return [dict(e) for e in self._alert_events]

    # -- metrics snapshot ----------------------------------------------------

    def write_metrics(self, counters: dict[str, int]) -> None:
        with self._lock:
            tmp = self.root / "metrics.tsv.tmp"
            with open(tmp, "w", encoding="utf-8") as handle:
                for key in sorted(counters):
                    handle.write(f"{key}\t{counters[key]}\n")
            os.replace(tmp, self.root / "metrics.tsv")

    def read_metrics(self) -> dict[str, int]:
        path = self.root / "metrics.tsv"
        if not path.exists():
            return {}
        counters = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition("\t")
            counters[key] = int(value)
        return counters

    # -- persistence internals ----------------------------------------------

    def _reading_handle(self, patient_id: int) -> IO[str]:
        handle = self._reading_handles.get(patient_id)
        if handle is None:
            path = self.root / "readings" / f"{patient_id}.log"
            handle = open(path, "a", encoding="utf-8")
            self._reading_handles[patient_id] = handle
        return handle

    def _append_note_line(self, note: NoteRecord) -> None:
        with open(self.root / "notes.log", "a", encoding="utf-8") as handle:
            handle.write(
                f"{note.patient_id}\t{note.created_at_s:.3f}\t"
                f"{note.reading_ref or '-'}\t{escape_text(note.text)}\n"
            )

    def _rewrite_patients(self) -> None:
        tmp = self.root / "patients.tsv.tmp"
        with open(tmp, "w", encoding="utf-8") as handle:
            handle.write("\t".join(PATIENTS_HEADER) + "\n")
            for record in sorted(self._patients.values(), key=lambda r: r.id):
                handle.write(
                    "\t".join(
                        [
                            str(record.id),
                            record.last_name,
                            record.first_name,
                            record.address,
                            record.mobile_phone,
                            record.home_phone,
                            record.social_insurance_number,
                            record.date_of_birth,
                            "" if record.height_ft is None else repr(record.height_ft),
                            "" if record.weight_lb is None else repr(record.weight_lb),
                            record.email,
                            record.emergency_contact.name,
                            record.emergency_contact.phone,
                            record.emergency_contact.address,
                            record.emergency_contact.relationship,
                        ]
                    )
                    + "\n"
                )
        os.replace(tmp, self.root / "patients.tsv")

    def _load(self) -> None:
        self._load_patients()
        self._load_readings()
        self._load_notes()
        self._load_prescriptions()
        self._load_journal()
        self._load_alert_events()

    def import_patients_tsv(self, path: str | Path) -> int:
        """Upsert every row of a patients.tsv snapshot; returns the count."""
        records = read_patients_tsv(path)
        with self._lock:
            for record in records:
                self._patients[record.id] = record
            self._rewrite_patients()
        return len(records)

    def _load_patients(self) -> None:
        path = self.root / "patients.tsv"
        if not path.exists():
            return
        for record in read_patients_tsv(path):
            self._patients[record.id] = record

    def _load_readings(self) -> None:
        readings_dir = self.root / "readings"
        for path in sorted(readings_dir.glob("*.log")):
            patient_id = int(path.stem)
            rows = self._readings.setdefault(patient_id, [])
            for line in path.read_text(encoding="utf-8").splitlines():
                ts, node, seq, kind, value_x10, band = line.split("\t")
                record = ReadingRecord(
                    patient_id=patient_id,
                    node_id=int(node),
                    seq=int(seq),
                    timestamp_ms=int(ts),
                    kind=VitalKind.from_label(kind),
                    value_x10=int(value_x10),
                    band=Band.from_label(band),
                )
                rows.append(record)
                self._reading_keys.add(
                    (patient_id, record.node_id, record.seq, record.kind)
                )

    def _load_notes(self) -> None:
        path = self.root / "notes.log"
        if not path.exists():
            return
        for line in path.read_text(encoding="utf-8").splitlines():
            patient_id, created, ref, text = line.split("\t")
            self._notes.append(
                NoteRecord(
                    patient_id=int(patient_id),
                    created_at_s=float(created),
                    text=unescape_text(text),
                    reading_ref=None if ref == "-" else ref,
                )
            )

    def _load_prescriptions(self) -> None:
        path = self.root / "prescriptions.log"
        if not path.exists():
            return
        for line in path.read_text(encoding="utf-8").splitlines():
            patient_id, created, registration, text = line.split("\t")
            self._prescriptions.append(
                PrescriptionRecord(
                    patient_id=int(patient_id),
                    physician_registration_number=unescape_text(registration),
                    text=unescape_text(text),
                    created_at_s=float(created),
                )
            )

    def _load_journal(self) -> None:
        path = self.root / "journal.log"
        if not path.exists():
            return
        for line in path.read_text(encoding="utf-8").splitlines():
            patient_id, category, created, text = line.split("\t")
            self._journal.append(
                JournalEntry(
                    patient_id=int(patient_id),
                    category=category,
                    text=unescape_text(text),
                    created_at_s=float(created),
                )
            )

    def _load_alert_events(self) -> None:
        path = self.root / "alerts.log"
        if not path.exists():
            return
        for line in path.read_text(encoding="utf-8").splitlines():
            cols = [unescape_text(c) for c in line.split("\t")]
            event = dict(zip(ALERT_COLUMNS, cols))
            self._alert_events.append(event)


def read_patients_tsv(path: str | Path) -> list[PatientRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        return []
    if lines[0].split("\t") != PATIENTS_HEADER:
        raise StoreError(f"unexpected patients.tsv header in {path}")
    records = []
    for line in lines[1:]:
        cols = line.split("\t")
        if len(cols) != len(PATIENTS_HEADER):
            raise StoreError(f"malformed patients.tsv row: {line!r}")
        records.append(
            PatientRecord(
                id=int(cols[0]),
                last_name=cols[1],
                first_name=cols[2],
                address=cols[3],
                mobile_phone=cols[4],
                home_phone=cols[5],
                social_insurance_number=cols[6],
                date_of_birth=cols[7],
                height_ft=float(cols[8]) if cols[8] else None,
                weight_lb=float(cols[9]) if cols[9] else None,
                email=cols[10],
                emergency_contact=EmergencyContact(
                    name=cols[11], phone=cols[12], address=cols[13],
                    relationship=cols[14],
                ),
            )
        )
    return records


ALERT_COLUMNS = [
    "event",        # raised | acked | escalated | closed
    "alert_id",
    "patient_id",
    "kind",
    "band",
    "t_s",          # event time on the gateway clock, seconds
    "value_x10",    # triggering reading (raised) or clearing sample
    "timestamp_ms", # triggering reading timestamp
    "reason",       # raised: band|trend; closed: cleared|cleared-unacked; escalated: round number
    "actor",        # acked: user; escalated/raised/closed: -
    "role",         # acked: acking role
]


# Patient roster used by documentation, fixtures and seed tooling: the
# five-person ward with ids 23, 24, 25, 27, 28.
WARD_ROSTER = [
    {
        "id": 23, "last_name": "Khalid", "first_name": "Suliman",
        "address": "80 Street Saudi Arabia-Jeddah", "mobile_phone": "0550199055",
        "social_insurance_number": "239-69-3458", "date_of_birth": "12/2/1949",
    },
    {
        "id": 24, "last_name": "Yoused", "first_name": "Mohhamad",
        "address": "201 Street Saudi Arabia-Mecca", "mobile_phone": "0550177034",
        "social_insurance_number": "296-65-9876", "date_of_birth": "6/1/1960",
    },
    {
        "id": 25, "last_name": "Ali", "first_name": "Ammar",
        "address": "32 Street Saudi Arabia-Dammam", "mobile_phone": "0550178994",
        "social_insurance_number": "231-39-4563", "date_of_birth": "9/4/1959",
    },
    {
        "id": 27, "last_name": "Salem", "first_name": "Abdullah",
        "address": "101 Street Saudi Arabia-Dammam", "mobile_phone": "0555869495",
        "social_insurance_number": "222-74-2369", "date_of_birth": "9/9/1943",
    },
    {
        "id": 28, "last_name": "Musaad", "first_name": "Ahmad",
        "address": "43 Street Saudi Arabia-Mecca", "mobile_phone": "0505847582",
        "social_insurance_number": "298-55-3348", "date_of_birth": "8/6/1955",
    },
]


def ward_roster_records(date_format: str = "DMY") -> list[PatientRecord]:
    """The five seed patients with dates normalized to ISO-8601. Source dates
    are slash-ambiguous, so the interpretation must be stated explicitly."""
    records = []
    for row in WARD_ROSTER:
        records.append(
            PatientRecord(
                id=row["id"],
                last_name=row["last_name"],
                first_name=row["first_name"],
                address=row["address"],
                mobile_phone=row["mobile_phone"],
                social_insurance_number=row["social_insurance_number"],
                date_of_birth=normalize_dob(row["date_of_birth"], date_format),
            )
        )
    return records


def seed_ward_roster(store: PatientStore, date_format: str = "DMY") -> list[PatientRecord]:
    return [store.upsert_patient(record) for record in ward_roster_records(date_format)]

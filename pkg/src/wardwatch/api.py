"""HTTP + live-stream surface of the gateway.

JSON bodies throughout; the live stream is line-delimited JSON over one
server-push channel. Clients state their role with an `X-Role:
nurse|physician` header (no authentication; out of scope). Bracelet frames
arrive over UDP (the native fire-and-forget path) or POST /ingest with an
octet-stream body.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import queue
import socket
import threading
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .engine import (
    Band,
    BandInterval,
    DebounceConfig,
    KbProposal,
    TrendRule,
    ValidationError as KbValidationError,
)
from .gateway import AlertState, DispositionKind, Gateway, UnknownAlert
from .protocol import VitalKind
from .store import (
    EmergencyContact,
    PatientRecord,
    UnknownPatient,
    ValidationError as StoreValidationError,
)

def patient_json(record: PatientRecord) -> dict:
    data = dataclasses.asdict(record)
    data["emergency_contact"] = dataclasses.asdict(record.emergency_contact)
    return data


def patient_from_json(data: dict) -> PatientRecord:
    contact = data.get("emergency_contact") or {}
    return PatientRecord(
        id=data["id"],
        last_name=data.get("last_name", ""),
        first_name=data.get("first_name", ""),
        address=data.get("address", ""),
        mobile_phone=data.get("mobile_phone", ""),
        home_phone=data.get("home_phone", ""),
        social_insurance_number=data.get("social_insurance_number", ""),
        date_of_birth=data.get("date_of_birth", ""),
        height_ft=data.get("height_ft"),
        weight_lb=data.get("weight_lb"),
        email=data.get("email", ""),
        emergency_contact=EmergencyContact(
            name=contact.get("name", ""),
            phone=contact.get("phone", ""),
            address=contact.get("address", ""),
            relationship=contact.get("relationship", ""),
        ),
    )


def reading_json(reading) -> dict:
    return {
        "patient_id": reading.patient_id,
        "node_id": reading.node_id,
        "seq": reading.seq,
        "timestamp_ms": reading.timestamp_ms,
        "kind": reading.kind.label,
        "value": reading.value,
        "value_x10": reading.value_x10,
        "band": reading.band.label,
    }


def kb_json(kb) -> dict:
    return {
        "revision": kb.revision,
        "author": kb.author,
        "updated_at": kb.updated_at,
        "tables": {
            kind.label: [
                {"lower": lo, "upper": hi, "band": band.label}
                for lo, hi, band in table.intervals()
            ]
            for kind, table in kb.tables.items()
        },
        "trends": {
            kind.label: {"window_s": rule.window_s, "max_abs_delta": rule.max_abs_delta}
            for kind, rule in kb.trends.items()
        },
        "debounce": {
            "n_warning_raise": kb.debounce.n_warning_raise,
            "n_critical_raise": kb.debounce.n_critical_raise,
            "m_clear": kb.debounce.m_clear,
        },
    }


def proposal_from_json(data: dict) -> KbProposal:
    tables = {}
    for label, intervals in (data.get("tables") or {}).items():
        kind = VitalKind.from_label(label)
        tables[kind] = tuple(
            BandInterval(
                lower=iv.get("lower"),
                upper=iv.get("upper"),
                band=Band.from_label(iv["band"]),
            )
            for iv in intervals
        )
    trends = {}
    for label, rule in (data.get("trends") or {}).items():
        kind = VitalKind.from_label(label)
        trends[kind] = TrendRule(
            kind,
            window_s=float(rule["window_s"]),
            max_abs_delta=float(rule["max_abs_delta"]),
        )
    debounce_data = data.get("debounce") or {}
    debounce = DebounceConfig(
        n_warning_raise=int(debounce_data.get("n_warning_raise", 3)),
        n_critical_raise=int(debounce_data.get("n_critical_raise", 1)),
        m_clear=int(debounce_data.get("m_clear", 5)),
    )
    return KbProposal(tables=tables, trends=trends, debounce=debounce)


def _error(status: int, message: str, errors: list[str] | None = None) -> JSONResponse:
    body = {"error": message}
    if errors is not None:
        body["errors"] = errors
    return JSONResponse(body, status_code=status)


def create_app(gateway: Gateway, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="wardwatch gateway", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def allow_cross_origin(request: Request, call_next):
        # the dashboard may be served from another origin during development
        if request.method == "OPTIONS":
            response = Response(status_code=204)
        else:
            response = await call_next(request)
        response.headers["Access-Control-Allow-Origin"] = "*"
        response.headers["Access-Control-Allow-Headers"] = "Content-Type, X-Role"
        response.headers["Access-Control-Allow-Methods"] = "GET, POST, PUT, OPTIONS"
        return response

    # -- patients ------------------------------------------------------------

    @app.get("/patients")
    def list_patients(name: str | None = None, id: int | None = None):
        records = gateway.store.find_patients(name=name, patient_id=id)
        return {"patients": [patient_json(r) for r in records], "count": len(records)}

    @app.get("/patients/{patient_id}")
    def get_patient(patient_id: int):
        try:
            return patient_json(gateway.store.get_patient(patient_id))
        except UnknownPatient:
            return _error(404, f"unknown patient {patient_id}")

    @app.put("/patients/{patient_id}")
    async def put_patient(patient_id: int, request: Request):
        data = await request.json()
        if data.get("id") not in (None, patient_id):
            return _error(400, "body id does not match path")
        data["id"] = patient_id
        created = not gateway.store.has_patient(patient_id)
        try:
            record = gateway.store.upsert_patient(patient_from_json(data))
        except StoreValidationError as err:
            return _error(400, str(err))
        return JSONResponse(patient_json(record), status_code=201 if created else 200)

    @app.get("/patients/{patient_id}/detail")
    def patient_detail(patient_id: int):
        store = gateway.store
        try:
            record = store.get_patient(patient_id)
        except UnknownPatient:
            return _error(404, f"unknown patient {patient_id}")
        return {
            "patient": patient_json(record),
            "last_update_ms": store.last_update(patient_id),
            "notes": [dataclasses.asdict(n) for n in store.notes(patient_id)],
            "prescriptions": [
                dataclasses.asdict(p) for p in store.prescriptions(patient_id)
            ],
            "history": [
                dataclasses.asdict(e) for e in store.journal(patient_id, "history")
            ],
            "medications": [
                dataclasses.asdict(e) for e in store.journal(patient_id, "medication")
            ],
            "conditions": [
                dataclasses.asdict(e) for e in store.journal(patient_id, "condition")
            ],
        }

    @app.get("/patients/{patient_id}/readings")
    def get_readings(
        patient_id: int,
        from_ms: int | None = Query(None, alias="from"),
        to_ms: int | None = Query(None, alias="to"),
        kind: str | None = None,
        band: str | None = None,
    ):
        try:
            kind_value = VitalKind.from_label(kind) if kind else None
        except KeyError:
            return _error(400, f"unknown kind {kind!r}")
        try:
            rows = gateway.store.query_readings(
                patient_id,
                t_from_ms=from_ms,
                t_to_ms=to_ms,
                kind=kind_value,
                band_filter=band,
            )
        except UnknownPatient:
            return _error(404, f"unknown patient {patient_id}")
        except StoreValidationError as err:
            return _error(400, str(err))
        return {"readings": [reading_json(r) for r in rows], "count": len(rows)}

    @app.post("/patients/{patient_id}/prescriptions")
    async def post_prescription(patient_id: int, request: Request):
        data = await request.json()
        try:
            record = gateway.store.add_prescription(
                patient_id,
                data.get("physician_registration_number", ""),
                data.get("text", ""),
                created_at_s=gateway.clock.now(),
            )
        except UnknownPatient:
            return _error(404, f"unknown patient {patient_id}")
        except StoreValidationError as err:
            return _error(400, str(err))
        return JSONResponse(dataclasses.asdict(record), status_code=201)

    def _journal_get(patient_id: int, category: str):
        try:
            entries = gateway.store.journal(patient_id, category)
        except UnknownPatient:
            return _error(404, f"unknown patient {patient_id}")
        return {"entries": [dataclasses.asdict(e) for e in entries]}

    async def _journal_post(patient_id: int, category: str, request: Request):
        data = await request.json()
        try:
            entry = gateway.store.add_journal_entry(
                patient_id, category, data.get("text", ""),
                created_at_s=gateway.clock.now(),
            )
        except UnknownPatient:
            return _error(404, f"unknown patient {patient_id}")
        except StoreValidationError as err:
            return _error(400, str(err))
        return JSONResponse(dataclasses.asdict(entry), status_code=201)

    @app.get("/patients/{patient_id}/history")
    def get_history(patient_id: int):
        return _journal_get(patient_id, "history")

    @app.post("/patients/{patient_id}/history")
    async def post_history(patient_id: int, request: Request):
        return await _journal_post(patient_id, "history", request)

    @app.get("/patients/{patient_id}/medications")
    def get_medications(patient_id: int):
        return _journal_get(patient_id, "medication")

    @app.post("/patients/{patient_id}/medications")
    async def post_medication(patient_id: int, request: Request):
        return await _journal_post(patient_id, "medication", request)

    @app.get("/patients/{patient_id}/conditions")
    def get_conditions(patient_id: int):
        return _journal_get(patient_id, "condition")

    @app.post("/patients/{patient_id}/conditions")
    async def post_condition(patient_id: int, request: Request):
        return await _journal_post(patient_id, "condition", request)

    # -- alerts --------------------------------------------------------------

    @app.get("/alerts")
    def list_alerts(state: str | None = None):
        if state is not None:
            try:
                wanted = AlertState(state)
            except ValueError:
                return _error(400, f"unknown alert state {state!r}")
        else:
            wanted = None
        alerts = gateway.alerts(wanted)
        return {"alerts": [a.as_dict() for a in alerts], "count": len(alerts)}

    @app.post("/alerts/{alert_id}/ack")
    async def ack_alert(alert_id: int, request: Request):
        role = request.headers.get("X-Role")
        try:
            data = await request.json()
        except Exception:
            data = {}
        user = data.get("user", "unknown")
        try:
            alert = gateway.ack_alert(alert_id, user, role)
        except UnknownAlert:
            return _error(404, f"unknown alert {alert_id}")
        return alert.as_dict()

    # -- knowledge base --------------------------------------------------------

    @app.get("/kb")
    def get_kb():
        return kb_json(gateway.engine.kb)

    @app.put("/kb")
    async def put_kb(request: Request):
        data = await request.json()
        author = data.get("author") or request.headers.get("X-Role") or "unknown"
        try:
            proposal = proposal_from_json(data)
        except (KeyError, TypeError, ValueError) as err:
            return _error(400, f"malformed knowledge base payload: {err}")
        now_iso = (
            _dt.datetime.fromtimestamp(gateway.clock.now(), tz=_dt.timezone.utc)
            .strftime("%Y-%m-%dT%H:%M:%SZ")
        )
        try:
            kb = gateway.apply_kb_update(proposal, author, now_iso)
        except KbValidationError as err:
            return _error(400, "knowledge base rejected", errors=err.errors)
        return kb_json(kb)

    # -- ingest, metrics, stream -------------------------------------------------

    @app.post("/ingest")
    async def ingest(request: Request):
        frame = await request.body()
        disposition = gateway.ingest(frame)
        body = {"disposition": disposition.kind.value}
        if disposition.reason:
            body["reason"] = disposition.reason
        # fire-and-forget: senders ignore this; 202 regardless of disposition
        return JSONResponse(body, status_code=202)

    @app.get("/metrics")
    def metrics():
        return gateway.metrics()

    @app.get("/stream")
    async def stream(request: Request):
        role = request.headers.get("X-Role", "unknown")

        async def event_lines():
            subscription = gateway.subscribe()
            try:
                hello = {"type": "hello", "role": role, "now_s": gateway.clock.now()}
                yield json.dumps(hello) + "\n"
                while not await request.is_disconnected():
                    try:
                        event = await run_in_threadpool(
                            subscription.events.get, True, 1.0
                        )
                    except queue.Empty:
                        yield "\n"  # keepalive; lets disconnects reap us promptly
                        continue
                    yield json.dumps(event) + "\n"
            finally:
                gateway.unsubscribe(subscription)

        return StreamingResponse(event_lines(), media_type="application/x-ndjson")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


class UdpIngestServer:
    """Datagram listener feeding the gateway; the wire path bracelets use."""

    def __init__(self, gateway: Gateway, host: str = "127.0.0.1", port: int = 0):
        self.gateway = gateway
        self._socket = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._socket.bind((host, port))
        self._socket.settimeout(0.2)
        self.host, self.port = self._socket.getsockname()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def start(self) -> "UdpIngestServer":
        self._thread.start()
        return self

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                frame, _ = self._socket.recvfrom(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            self.gateway.ingest(frame)

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2)
        self._socket.close()

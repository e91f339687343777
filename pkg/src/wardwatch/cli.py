"""Operator entry point: serve the gateway, run deterministic simulations
against it (in-process or over the wire), and summarize store outcomes.

Exit codes: 0 success, 1 runtime fault, 2 usage/validation error.
"""

from __future__ import annotations

import logging
import signal
import socket
import threading
import time
from pathlib import Path
from urllib.parse import urlparse

import click

from .api import UdpIngestServer, create_app
from .engine import ValidationError as KbValidationError
from .gateway import EscalationPolicy, Gateway, Role, RoutingRules, SimulatedClock
from .kb_io import load_kb_file, write_default_kb
from .notify import ConsoleSink, FileSink
from .report import compute_report, render_text, render_tsv
from .simulator import ScenarioInvalid, apply_impairment, load_scenario_file, run_fleet
from .store import PatientRecord, PatientStore, StoreError
from .textconf import ParseError, parse_sections

logger = logging.getLogger(__name__)


@click.group()
def main() -> None:
    """Ward telemetry monitor."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


# -- serve ---------------------------------------------------------------------


def _load_server_config(path: Path) -> dict:
    if not path.exists():
        raise click.UsageError(f"config file {path} does not exist")
    try:
        sections = {s.header: s for s in parse_sections(path.read_text(encoding="utf-8"))}
    except ParseError as err:
        raise click.UsageError(f"config error: {err}")
    server = sections.get("server")
    if server is None:
        raise click.UsageError("config is missing the [server] section")
    nodes = sections.get("nodes")
    if nodes is None or not nodes.entries:
        raise click.UsageError("config is missing a [nodes] section with node = patient lines")
    try:
        node_map = {int(k): int(v) for k, v in nodes.entries.items()}
    except ValueError as err:
        raise click.UsageError(f"[nodes] entries must be integers: {err}")

    config = {
        "host": server.get("host", "127.0.0.1"),
        "port": server.get_int("port", 8080),
        "udp_port": server.get_int("udp_port", 0),
        "store": server.get("store", "store"),
        "kb": server.get("kb"),
        "ui_dir": server.get("ui_dir"),
        "roster": server.get("roster"),
        "node_map": node_map,
        "routing": RoutingRules(),
        "escalation": EscalationPolicy(),
        "sinks": [],
        "sink_specs": [],
    }
    routing = sections.get("routing")
    if routing is not None:
        def roles(key, default):
            raw = routing.get(key)
            if raw is None:
                return default
            try:
                return frozenset(Role(r) for r in raw.split())
            except ValueError:
                raise click.UsageError(f"[routing] {key}: roles are nurse/physician")
        try:
            config["routing"] = RoutingRules(
                warning=roles("warning", RoutingRules().warning),
                critical=roles("critical", RoutingRules().critical),
            )
        except ValueError as err:
            raise click.UsageError(f"[routing]: {err}")
    escalation = sections.get("escalation")
    if escalation is not None:
        config["escalation"] = EscalationPolicy(
            critical_interval_s=escalation.get_float("critical_interval_s", 120.0),
            warning_interval_s=escalation.get_float("warning_interval_s", 300.0),
            max_renotifications=escalation.get_int("max_renotifications", 5),
        )
    sinks = sections.get("sinks")
    if sinks is not None:
        if sinks.get("console", "off") in ("on", "true", "1"):
            config["sink_specs"].append(("console", None))
        file_path = sinks.get("file")
        if file_path:
            config["sink_specs"].append(("file", file_path))
    else:
        config["sink_specs"].append(("console", None))
    return config


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(path_type=Path), help="server config file")
def serve(config_path: Path) -> None:
    """Run the gateway service until interrupted."""
    import uvicorn

    config = _load_server_config(config_path)
    store_dir = Path(config["store"])
    kb = None
    if config["kb"]:
        kb_path = Path(config["kb"])
        if not kb_path.exists():
            raise click.UsageError(f"knowledge base file {kb_path} does not exist")
        try:
            kb = load_kb_file(kb_path)
        except (ParseError, KbValidationError) as err:
            raise click.UsageError(f"knowledge base {kb_path} invalid: {err}")

    store = PatientStore(store_dir)
    if config["roster"]:
        roster_path = Path(config["roster"])
        if not roster_path.exists():
            raise click.UsageError(f"roster file {roster_path} does not exist")
        store.import_patients_tsv(roster_path)

    sinks = []
    for sink_kind, arg in config["sink_specs"]:
        sinks.append(ConsoleSink() if sink_kind == "console" else FileSink(arg))

    gateway = Gateway(
        store,
        config["node_map"],
        kb=kb,
        sinks=sinks,
        routing=config["routing"],
        escalation=config["escalation"],
    )
    app = create_app(gateway, ui_dir=config["ui_dir"])

    udp = None
    stop_ticker = threading.Event()

    def escalation_ticker():
        while not stop_ticker.wait(1.0):
            gateway.escalate()

    ticker = threading.Thread(target=escalation_ticker, daemon=True)
    try:
        if config["udp_port"]:
            udp = UdpIngestServer(gateway, config["host"], config["udp_port"]).start()
            logger.info("udp ingest on %s:%d", udp.host, udp.port)
        ticker.start()
        # uvicorn re-raises the interrupting signal after graceful shutdown;
        # swallow it so cleanup below runs and an interrupted serve exits 0
        signal.signal(signal.SIGINT, lambda *_: None)
        signal.signal(signal.SIGTERM, lambda *_: None)
        uvicorn.run(app, host=config["host"], port=config["port"], log_level="info")
    except KeyboardInterrupt:
        pass
    except SystemExit as err:
        # uvicorn exits 3 on startup failure (port bound, bad interface)
        if err.code not in (0, None):
            raise click.ClickException("server failed to start")
    except OSError as err:  # port already bound and friends
        raise click.ClickException(f"server failed to start: {err}")
    finally:
        stop_ticker.set()
        if udp is not None:
            udp.stop()
        gateway.flush_metrics()
        store.close()


# -- simulate --------------------------------------------------------------------


@main.command()
@click.argument("scenario_path", type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None,
              help="override the scenario and impairment seeds")
@click.option("--speed", type=float, default=0.0,
              help="simulated-to-wall clock ratio; 0 runs unpaced")
@click.option("--target", default="in-process", show_default=True,
              help="in-process, udp://host:port, or http(s)://host:port")
@click.option("--store", "store_dir", type=click.Path(path_type=Path),
              default=Path("simstore"), show_default=True,
              help="store directory for the in-process gateway")
@click.option("--roster", type=click.Path(path_type=Path), default=None,
              help="patients.tsv snapshot to register before ingesting")
@click.option("--delivery-log", "delivery_log", type=click.Path(path_type=Path),
              default=Path("delivery.log"), show_default=True)
@click.option("--notify-log", "notify_log", type=click.Path(path_type=Path),
              default=None, help="write notification messages here (in-process only)")
def simulate(scenario_path, seed, speed, target, store_dir, roster, delivery_log,
             notify_log):
    """Run a scenario's bracelet fleet against a gateway."""
    from dataclasses import replace

    if speed < 0:
        raise click.UsageError("--speed must be >= 0")
    try:
        scenario = load_scenario_file(scenario_path)
    except FileNotFoundError:
        raise click.UsageError(f"scenario file {scenario_path} does not exist")
    except (ParseError, ScenarioInvalid) as err:
        raise click.UsageError(f"scenario invalid: {err}")
    if seed is not None:
        scenario = replace(
            scenario, seed=seed, impairment=replace(scenario.impairment, seed=seed)
        )

    delivered = apply_impairment(run_fleet(scenario), scenario.impairment)
    click.echo(
        f"scenario {scenario_path}: {len(scenario.nodes)} nodes, "
        f"{len(delivered)} frames to deliver"
    )
    if target == "in-process":
        dispositions = _deliver_in_process(
            scenario, delivered, store_dir, roster, speed, notify_log
        )
    else:
        dispositions = _deliver_remote(delivered, target, speed)
    _write_delivery_log(delivery_log, delivered, dispositions)
    click.echo(f"delivery log written to {delivery_log}")


def _deliver_in_process(scenario, delivered, store_dir, roster, speed, notify_log=None):
    store_dir = Path(store_dir)
    if store_dir.exists() and any(store_dir.iterdir()):
        raise click.UsageError(
            f"store directory {store_dir} is not empty; simulation runs need a "
            "fresh store to stay reproducible"
        )
    store = PatientStore(store_dir)
    if roster is not None:
        if not Path(roster).exists():
            raise click.UsageError(f"roster file {roster} does not exist")
        store.import_patients_tsv(roster)
    for node in scenario.nodes:
        if not store.has_patient(node.patient_id):
            store.upsert_patient(
                PatientRecord(
                    id=node.patient_id,
                    last_name=f"Patient-{node.patient_id}",
                    first_name="Unregistered",
                )
            )
    sinks = [FileSink(notify_log)] if notify_log is not None else []
    clock = SimulatedClock()
    gateway = Gateway(store, scenario.node_patient_map(), clock=clock, sinks=sinks)
    dispositions = []
    pacer = _Pacer(speed)
    for arrival_s, frame in delivered:
        pacer.pace(arrival_s)
        clock.advance_to(arrival_s)
        disposition = gateway.ingest(frame, arrival_s)
        gateway.escalate()
        dispositions.append(disposition.kind.value)
    clock.advance_to(scenario.duration_s)
    gateway.escalate()
    gateway.flush_metrics()
    store.close()
    return dispositions


def _deliver_remote(delivered, target, speed):
    parsed = urlparse(target)
    pacer = _Pacer(speed)
    dispositions = []
    if parsed.scheme == "udp":
        sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            for arrival_s, frame in delivered:
                pacer.pace(arrival_s)
                sender.sendto(frame, (parsed.hostname, parsed.port))
                dispositions.append("-")
        except OSError as err:
            raise click.ClickException(f"udp delivery failed: {err}")
        finally:
            sender.close()
    elif parsed.scheme in ("http", "https"):
        import urllib.request

        try:
            for arrival_s, frame in delivered:
                pacer.pace(arrival_s)
                request = urllib.request.Request(
                    target.rstrip("/") + "/ingest",
                    data=frame,
                    headers={"Content-Type": "application/octet-stream"},
                    method="POST",
                )
                with urllib.request.urlopen(request, timeout=10) as response:
                    import json

                    dispositions.append(
                        json.loads(response.read()).get("disposition", "-")
                    )
        except OSError as err:
            raise click.ClickException(f"delivery to {target} failed: {err}")
    else:
        raise click.UsageError(
            f"target must be in-process, udp://..., or http(s)://..., got {target!r}"
        )
    return dispositions


class _Pacer:
    """Sleeps so simulated time advances at `speed` times wall time; a speed
    of 0 never sleeps."""

    def __init__(self, speed: float):
        self.speed = speed
        self.started_wall = time.monotonic()
        self.first_sim: float | None = None

    def pace(self, sim_s: float) -> None:
        if self.speed <= 0:
            return
        if self.first_sim is None:
            self.first_sim = sim_s
            return
        due = self.started_wall + (sim_s - self.first_sim) / self.speed
        delay = due - time.monotonic()
        if delay > 0:
            time.sleep(delay)


def _write_delivery_log(path: Path, delivered, dispositions) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("arrival_ms\tnode_id\tseq\tdisposition\tframe_hex\n")
        for (arrival_s, frame), disposition in zip(delivered, dispositions):
            node_id = int.from_bytes(frame[3:5], "big")
            seq = int.from_bytes(frame[5:7], "big")
            handle.write(
                f"{arrival_s * 1000:.3f}\t{node_id}\t{seq}\t{disposition}\t"
                f"{frame.hex()}\n"
            )


# -- report ----------------------------------------------------------------------


@main.command()
@click.argument("store_dir", type=click.Path(path_type=Path))
@click.option("--from", "t_from", type=float, default=None,
              help="window start, seconds on the gateway clock")
@click.option("--to", "t_to", type=float, default=None,
              help="window end, seconds on the gateway clock")
@click.option("--out", type=click.Path(path_type=Path), default=Path("report.tsv"),
              show_default=True, help="machine-readable output path")
def report(store_dir: Path, t_from, t_to, out: Path) -> None:
    """Summarize a store directory's persisted logs."""
    try:
        summary = compute_report(store_dir, t_from_s=t_from, t_to_s=t_to)
    except FileNotFoundError as err:
        raise click.UsageError(str(err))
    except (StoreError, ValueError) as err:
        raise click.UsageError(f"store unreadable: {err}")
    click.echo(render_text(summary), nl=False)
    out.write_text(render_tsv(summary), encoding="utf-8")
    click.echo(f"machine-readable report written to {out}")


if __name__ == "__main__":
    main()

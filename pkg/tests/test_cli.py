"""CLI behavior: simulate determinism, report rendering, serve config errors."""

import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from wardwatch.cli import main

from conftest import FIXTURES

MINI_SCENARIO = """
[scenario]
duration_s = 30
seed = 5

[node 1]
patient_id = 23
heart_rate.baseline = 72
heart_rate.noise_stddev = 1.0

[event]
node_id = 1
kind = heart_rate
start_s = 5
duration_s = 10
delta = 60
ramp_s = 1

[impairment]
loss_prob = 0.1
dup_prob = 0.2
delay_ms_min = 1
delay_ms_max = 40
seed = 9
"""


@pytest.fixture
def runner():
    return CliRunner()


def write_scenario(tmp_path, text=MINI_SCENARIO) -> Path:
    path = tmp_path / "mini.scenario"
    path.write_text(text)
    return path


def run_sim(runner, tmp_path, tag, scenario_path, extra=()):
    store = tmp_path / f"store-{tag}"
    log = tmp_path / f"delivery-{tag}.log"
    result = runner.invoke(
        main,
        ["simulate", str(scenario_path), "--store", str(store),
         "--delivery-log", str(log), *extra],
        catch_exceptions=False,
    )
    return result, store, log


class TestSimulate:
    def test_two_runs_byte_identical(self, runner, tmp_path):
        scenario = write_scenario(tmp_path)
        result_a, store_a, log_a = run_sim(runner, tmp_path, "a", scenario)
        result_b, store_b, log_b = run_sim(runner, tmp_path, "b", scenario)
        assert result_a.exit_code == 0 and result_b.exit_code == 0
        assert log_a.read_bytes() == log_b.read_bytes()
        assert (store_a / "alerts.log").read_bytes() == (store_b / "alerts.log").read_bytes()
        for reading_log in sorted((store_a / "readings").glob("*.log")):
            twin = store_b / "readings" / reading_log.name
            assert reading_log.read_bytes() == twin.read_bytes()

    def test_seed_override_changes_stream(self, runner, tmp_path):
        scenario = write_scenario(tmp_path)
        _, _, log_a = run_sim(runner, tmp_path, "s1", scenario, ["--seed", "1"])
        _, _, log_b = run_sim(runner, tmp_path, "s2", scenario, ["--seed", "2"])
        assert log_a.read_bytes() != log_b.read_bytes()

    def test_zero_node_scenario_exits_2(self, runner, tmp_path):
        scenario = tmp_path / "empty.scenario"
        scenario.write_text("[scenario]\nduration_s = 10\n")
        result = runner.invoke(
            main, ["simulate", str(scenario), "--store", str(tmp_path / "s")]
        )
        assert result.exit_code == 2

    def test_missing_scenario_exits_2(self, runner, tmp_path):
        result = runner.invoke(
            main, ["simulate", str(tmp_path / "ghost.scenario")]
        )
        assert result.exit_code == 2

    def test_dirty_store_rejected(self, runner, tmp_path):
        scenario = write_scenario(tmp_path)
        store = tmp_path / "dirty"
        store.mkdir()
        (store / "junk.txt").write_text("x")
        result = runner.invoke(
            main, ["simulate", str(scenario), "--store", str(store)]
        )
        assert result.exit_code == 2

    def test_roster_applied(self, runner, tmp_path):
        scenario = write_scenario(tmp_path)
        result, store, _ = run_sim(
            runner, tmp_path, "r", scenario,
            ["--roster", str(FIXTURES / "ward_roster.tsv")],
        )
        assert result.exit_code == 0
        patients = (store / "patients.tsv").read_text()
        assert "Khalid" in patients

    def test_fever_run_alert_in_store(self, runner, tmp_path):
        result, store, _ = run_sim(
            runner, tmp_path, "ward5", FIXTURES / "ward5.scenario",
            ["--roster", str(FIXTURES / "ward_roster.tsv")],
        )
        assert result.exit_code == 0
        raised = [
            line
            for line in (store / "alerts.log").read_text().splitlines()
            if line.startswith("raised\t")
        ]
        assert len(raised) == 1
        assert "\t23\tbody_temperature\tcritical\t" in raised[0]


class TestReport:
    def test_report_on_simulated_store(self, runner, tmp_path):
        scenario = write_scenario(tmp_path)
        _, store, _ = run_sim(runner, tmp_path, "rep", scenario)
        out = tmp_path / "report.tsv"
        result = runner.invoke(
            main, ["report", str(store), "--out", str(out)], catch_exceptions=False
        )
        assert result.exit_code == 0
        assert "TOTAL" in result.output
        assert out.exists()

    def test_report_deterministic(self, runner, tmp_path):
        scenario = write_scenario(tmp_path)
        _, store, _ = run_sim(runner, tmp_path, "det", scenario)
        outputs = []
        for i in range(2):
            out_dir = tmp_path / f"run-{i}"
            out_dir.mkdir()
            out = out_dir / "report.tsv"
            result = runner.invoke(
                main, ["report", str(store), "--out", str(out)],
                catch_exceptions=False,
            )
            table = result.output.rsplit("machine-readable", 1)[0]
            outputs.append((table, out.read_bytes()))
        assert outputs[0] == outputs[1]

    def test_empty_store_reports_zero(self, runner, tmp_path):
        from wardwatch.store import PatientStore

        PatientStore(tmp_path / "empty").close()
        result = runner.invoke(
            main,
            ["report", str(tmp_path / "empty"), "--out", str(tmp_path / "r.tsv")],
            catch_exceptions=False,
        )
        assert result.exit_code == 0

    def test_missing_store_exits_2(self, runner, tmp_path):
        result = runner.invoke(main, ["report", str(tmp_path / "nope")])
        assert result.exit_code == 2


SERVE_CONFIG = """
[server]
host = 127.0.0.1
port = {port}
store = {store}
roster = {roster}
{extra}

[nodes]
1 = 23
2 = 24
3 = 25
4 = 27
5 = 28
"""


class TestServe:
    def test_missing_kb_file_exits_2(self, runner, tmp_path):
        config = tmp_path / "server.conf"
        config.write_text(
            SERVE_CONFIG.format(
                port=8099, store=tmp_path / "st",
                roster=FIXTURES / "ward_roster.tsv",
                extra=f"kb = {tmp_path}/missing_kb.txt",
            )
        )
        result = runner.invoke(main, ["serve", "--config", str(config)])
        assert result.exit_code == 2
        assert "missing_kb.txt" in result.output

    def test_missing_config_exits_2(self, runner, tmp_path):
        result = runner.invoke(main, ["serve", "--config", str(tmp_path / "no.conf")])
        assert result.exit_code == 2

    def test_config_without_nodes_exits_2(self, runner, tmp_path):
        config = tmp_path / "server.conf"
        config.write_text("[server]\nport = 8100\n")
        result = runner.invoke(main, ["serve", "--config", str(config)])
        assert result.exit_code == 2

    def test_serves_and_stops_cleanly(self, tmp_path):
        port = _free_port()
        config = tmp_path / "server.conf"
        config.write_text(
            SERVE_CONFIG.format(
                port=port, store=tmp_path / "st",
                roster=FIXTURES / "ward_roster.tsv", extra="",
            )
        )
        process = subprocess.Popen(
            [sys.executable, "-m", "wardwatch.cli", "serve", "--config", str(config)],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
        )
        try:
            _wait_for_http(port)
            import urllib.request

            with urllib.request.urlopen(
                f"http://127.0.0.1:{port}/patients", timeout=5
            ) as response:
                assert b'"count":5' in response.read().replace(b" ", b"")
        finally:
            process.terminate()  # SIGTERM: uvicorn shuts down gracefully
            assert process.wait(timeout=10) == 0

    def test_bound_port_exits_1(self, tmp_path):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        config = tmp_path / "server.conf"
        config.write_text(
            SERVE_CONFIG.format(
                port=port, store=tmp_path / "st",
                roster=FIXTURES / "ward_roster.tsv", extra="",
            )
        )
        try:
            process = subprocess.run(
                [sys.executable, "-m", "wardwatch.cli", "serve", "--config", str(config)],
                capture_output=True, timeout=30,
            )
            assert process.returncode == 1
        finally:
            blocker.close()


def _free_port() -> int:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


def _wait_for_http(port: int, timeout: float = 15.0) -> None:
    import urllib.request

    deadline = time.time() + timeout
    while time.time() < deadline:
        try:
            urllib.request.urlopen(f"http://127.0.0.1:{port}/metrics", timeout=1)
            return
        except OSError:
            time.sleep(0.1)
    raise RuntimeError("server did not come up")

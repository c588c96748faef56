import json

import pytest
from click.testing import CliRunner

from wgbench.bench import DelaySample, samples_to_csv
from wgbench.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def run_samples_csv(runner, tmp_path, count=40, seed=3, scenario="lan-local"):
    tmp_path.mkdir(exist_ok=True)
    out = tmp_path / "samples.csv"
    result = runner.invoke(main, [
        "run", "--scenario", scenario, "--seed", str(seed),
        "--count", str(count), "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    return out


class TestPlan:
    def test_writes_plan_and_rules(self, runner, tmp_path):
        out = tmp_path / "plan.json"
        result = runner.invoke(main, ["plan", "--out", str(out)])
        assert result.exit_code == 0
        assert "192.168.32.0" in out.read_text()
        rules = out.with_suffix(".rules").read_text()
        assert "deny" in rules and "Guest" in rules

    def test_ipv6_sidecar(self, runner, tmp_path):
        out = tmp_path / "plan.json"
        result = runner.invoke(main, [
            "plan", "--ipv6-global-id", str(0x0123456789), "--out", str(out),
        ])
        assert result.exit_code == 0
        doc = json.loads(out.with_suffix(".ipv6.json").read_text())
        assert doc["Outgoing"] == "fd01:2345:6789:21::/64"

    def test_bad_global_id_usage_exit(self, runner, tmp_path):
        result = runner.invoke(main, [
            "plan", "--ipv6-global-id", str(2 ** 40), "--out",
            str(tmp_path / "p.json"),
        ])
        assert result.exit_code == 2


class TestRun:
    def test_run_writes_samples_and_events(self, runner, tmp_path):
        out = run_samples_csv(runner, tmp_path)
        assert out.read_text().startswith("scenario,seq,")
        events = out.with_suffix(".events.csv")
        assert events.read_text().startswith("monitor_timestamp_ms,")

    def test_deterministic_output(self, runner, tmp_path):
        a = run_samples_csv(runner, tmp_path / "a", seed=9)
        b = run_samples_csv(runner, tmp_path / "b", seed=9)
        assert a.read_text() == b.read_text()

    def test_unknown_scenario(self, runner, tmp_path):
        result = runner.invoke(main, [
            "run", "--scenario", "nope", "--out", str(tmp_path / "x.csv"),
        ])
        assert result.exit_code == 2

    def test_summary_line(self, runner, tmp_path):
        out = tmp_path / "s.csv"
        result = runner.invoke(main, [
            "run", "--scenario", "wg-http-office", "--seed", "1",
            "--count", "25", "--out", str(out),
        ])
        assert result.exit_code == 0
        assert "25 ok" in result.output
        assert "handshakes" in result.output


class TestStats:
    def test_table(self, runner, tmp_path):
        csv_path = run_samples_csv(runner, tmp_path)
        result = runner.invoke(main, ["stats", "--in", str(csv_path)])
        assert result.exit_code == 0
        assert result.output.startswith("Delay (ms)")
        assert "Confidence Level (95%)" in result.output

    def test_json(self, runner, tmp_path):
        csv_path = run_samples_csv(runner, tmp_path)
        result = runner.invoke(main, ["stats", "--in", str(csv_path), "--json"])
        doc = json.loads(result.output)
        assert doc["Count"] == 40

    def test_degenerate_empty_exit(self, runner, tmp_path):
        path = tmp_path / "flat.csv"
        samples = [DelaySample(i, 0.0, 5.0, 5.0, "ok") for i in range(6)]
        path.write_text(samples_to_csv("x", samples))
        result = runner.invoke(main, ["stats", "--in", str(path)])
        assert result.exit_code == 3

    def test_bad_csv_usage_exit(self, runner, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nonsense\n")
        result = runner.invoke(main, ["stats", "--in", str(path)])
        assert result.exit_code == 2


class TestReport:
    def test_stdout_histogram(self, runner, tmp_path):
        csv_path = run_samples_csv(runner, tmp_path)
        result = runner.invoke(main, [
            "report", "--in", str(csv_path), "--bins", "4",
            "--percentiles", "0.5,0.97",
        ])
        assert result.exit_code == 0
        assert result.output.startswith("bin_low,bin_high,")
        assert "p97 = " in result.output

    def test_out_file(self, runner, tmp_path):
        csv_path = run_samples_csv(runner, tmp_path)
        hist = tmp_path / "hist.csv"
        result = runner.invoke(main, [
            "report", "--in", str(csv_path), "--out", str(hist),
        ])
        assert result.exit_code == 0
        assert hist.read_text().startswith("bin_low,")

    def test_bad_percentiles(self, runner, tmp_path):
        csv_path = run_samples_csv(runner, tmp_path)
        result = runner.invoke(main, [
            "report", "--in", str(csv_path), "--percentiles", "banana",
        ])
        assert result.exit_code == 2


class TestCheck:
    def test_default_passes(self, runner):
        result = runner.invoke(main, ["check"])
        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        assert len(lines) == 11
        assert all(line.startswith("pass") for line in lines)

    def test_tight_tolerance_fails(self, runner):
        result = runner.invoke(main, ["check", "--tolerance", "1e-9"])
        assert result.exit_code == 1
        assert "FAIL" in result.output

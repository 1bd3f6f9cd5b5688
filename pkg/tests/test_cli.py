import json
from decimal import Decimal

import pytest
from click.testing import CliRunner

from platoon_dsr.cli import main

D = Decimal


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def errtext(result) -> str:
    try:
        return result.stderr
    except ValueError:
        return result.output


def init_and_fund(runner, ledger_path, amount="10000"):
    result = runner.invoke(main, ["ledger", "init", "--ledger", str(ledger_path)])
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, ["ledger", "fund", "--ledger", str(ledger_path),
                                  "--amount", amount])
    assert result.exit_code == 0, result.output


class TestSimulate:
    def test_writes_trace_and_tables(self, runner, tmp_path, six_car_scenario_path):
        out = tmp_path / "trace.json"
        result = runner.invoke(main, ["simulate", "--scenario",
                                      str(six_car_scenario_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "platoon P1" in result.output
        trace = json.loads(out.read_text())
        assert trace["format"] == "platoon-dsr-trace/1"
        assert len(trace["platoons"]) == 2

    def test_json_mode(self, runner, tmp_path, six_car_scenario_path):
        out = tmp_path / "trace.json"
        result = runner.invoke(main, ["simulate", "--scenario",
                                      str(six_car_scenario_path),
                                      "--out", str(out), "--json"])
        assert result.exit_code == 0
        assert json.loads(result.output)["format"] == "platoon-dsr-trace/1"

    def test_missing_file_exit_1(self, runner, tmp_path):
        result = runner.invoke(main, ["simulate", "--scenario",
                                      str(tmp_path / "none.json"),
                                      "--out", str(tmp_path / "o.json")])
        assert result.exit_code == 1
        assert "cannot read" in errtext(result)

    def test_bad_json_exit_1_with_location(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"day_length": 60\n "oops"')
        result = runner.invoke(main, ["simulate", "--scenario", str(bad),
                                      "--out", str(tmp_path / "o.json")])
        assert result.exit_code == 1
        assert "line 2" in errtext(result)

    def test_ineligible_leader_exit_2(self, runner, tmp_path, six_car_scenario):
        six_car_scenario["initial_platoons"][0]["leader"] = "carol"
        six_car_scenario["initial_platoons"][0]["followers"] = ["alice"]
        path = tmp_path / "bad_leader.json"
        path.write_text(json.dumps(six_car_scenario, default=str))
        result = runner.invoke(main, ["simulate", "--scenario", str(path),
                                      "--out", str(tmp_path / "o.json")])
        assert result.exit_code == 2
        assert "IneligibleLeader" in errtext(result)

    def test_infeasible_event_exit_2(self, runner, tmp_path, six_car_scenario):
        six_car_scenario["events"].append(
            {"time": 70, "kind": "join", "vehicle": "frank", "platoon": "P99"})
        path = tmp_path / "bad_event.json"
        path.write_text(json.dumps(six_car_scenario, default=str))
        result = runner.invoke(main, ["simulate", "--scenario", str(path),
                                      "--out", str(tmp_path / "o.json")])
        assert result.exit_code == 2
        assert "InfeasibleEvent" in errtext(result)

    def test_override_flags(self, runner, tmp_path, six_car_scenario_path):
        out = tmp_path / "trace.json"
        result = runner.invoke(main, ["simulate", "--scenario",
                                      str(six_car_scenario_path),
                                      "--out", str(out), "--eta", "25",
                                      "--delta", "0.02"])
        assert result.exit_code == 0
        trace = json.loads(out.read_text())
        assert trace["eta"] == "25"
        assert trace["delta"] == "0.02"


class TestSettle:
    def simulate(self, runner, tmp_path, scenario_path):
        out = tmp_path / "trace.json"
        result = runner.invoke(main, ["simulate", "--scenario",
                                      str(scenario_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        return out

    def test_happy_path(self, runner, tmp_path, six_car_scenario_path):
        trace = self.simulate(runner, tmp_path, six_car_scenario_path)
        ledger = tmp_path / "day.ledger"
        init_and_fund(runner, ledger)
        report_path = tmp_path / "report.json"
        result = runner.invoke(main, ["settle", "--trace", str(trace),
                                      "--ledger", str(ledger),
                                      "--date", "2022-05-01",
                                      "--report", str(report_path)])
        assert result.exit_code == 0, result.output
        assert "block 3 committed" in result.output
        assert "chain verification: ok" in result.output
        report = json.loads(report_path.read_text())
        assert report["totals"]["credited_base_units"] == 2710

        balance = runner.invoke(main, ["ledger", "balance", "--ledger",
                                       str(ledger), "alice"])
        assert balance.output.strip() == "8.48"
        records = runner.invoke(main, ["ledger", "records", "--ledger",
                                       str(ledger), "alice"])
        assert "2022-05-01" in records.output

    def test_worked_example_credits(self, runner, tmp_path,
                                    worked_example_trace_path):
        ledger = tmp_path / "day.ledger"
        init_and_fund(runner, ledger)
        result = runner.invoke(main, ["settle", "--trace",
                                      str(worked_example_trace_path),
                                      "--ledger", str(ledger),
                                      "--date", "2022-05-01"])
        assert result.exit_code == 0, result.output
        for driver, expected in (("alice", "8.48"), ("carol", "0.76")):
            balance = runner.invoke(main, ["ledger", "balance", "--ledger",
                                           str(ledger), driver])
            assert balance.output.strip() == expected

    def test_duplicate_date_rejected(self, runner, tmp_path, six_car_scenario_path):
        trace = self.simulate(runner, tmp_path, six_car_scenario_path)
        ledger = tmp_path / "day.ledger"
        init_and_fund(runner, ledger)
        args = ["settle", "--trace", str(trace), "--ledger", str(ledger),
                "--date", "2022-05-01"]
        assert runner.invoke(main, args).exit_code == 0
        result = runner.invoke(main, args)
        assert result.exit_code == 1
        assert "DuplicateRecord" in errtext(result)

    def test_underfunded_exit_3(self, runner, tmp_path, six_car_scenario_path):
        trace = self.simulate(runner, tmp_path, six_car_scenario_path)
        ledger = tmp_path / "poor.ledger"
        result = runner.invoke(main, ["ledger", "init", "--ledger", str(ledger)])
        assert result.exit_code == 0
        result = runner.invoke(main, ["settle", "--trace", str(trace),
                                      "--ledger", str(ledger),
                                      "--date", "2022-05-01"])
        assert result.exit_code == 3
        assert "top up" in errtext(result)

    def test_empty_trace_no_block(self, runner, tmp_path):
        scenario = tmp_path / "empty.json"
        scenario.write_text(json.dumps({
            "day_length": 10, "vehicle_speed": {}, "drivers": [],
            "initial_platoons": [], "events": [],
        }))
        trace = self.simulate(runner, tmp_path, scenario)
        ledger = tmp_path / "day.ledger"
        init_and_fund(runner, ledger)
        result = runner.invoke(main, ["settle", "--trace", str(trace),
                                      "--ledger", str(ledger),
                                      "--date", "2022-05-01"])
        assert result.exit_code == 0, result.output
        assert "no block committed" in result.output
        verify = runner.invoke(main, ["ledger", "verify", "--ledger", str(ledger)])
        assert "3 blocks" in verify.output

    def test_requires_ledger_or_server(self, runner, tmp_path,
                                       six_car_scenario_path):
        trace = self.simulate(runner, tmp_path, six_car_scenario_path)
        result = runner.invoke(main, ["settle", "--trace", str(trace),
                                      "--date", "2022-05-01"])
        assert result.exit_code == 1
        assert "--ledger is required" in errtext(result)


class TestLedgerCommands:
    def test_init_output(self, runner, tmp_path):
        result = runner.invoke(main, ["ledger", "init", "--ledger",
                                      str(tmp_path / "l.ledger")])
        assert result.exit_code == 0
        assert "minted 10000000.00 tokens" in result.output

    def test_init_twice_fails(self, runner, tmp_path):
        path = str(tmp_path / "l.ledger")
        assert runner.invoke(main, ["ledger", "init", "--ledger", path]).exit_code == 0
        result = runner.invoke(main, ["ledger", "init", "--ledger", path])
        assert result.exit_code == 1
        assert "already exists" in errtext(result)

    def test_fund_flow(self, runner, tmp_path):
        path = str(tmp_path / "l.ledger")
        init_and_fund(runner, path)
        result = runner.invoke(main, ["ledger", "balance", "--ledger", path,
                                      "authority"])
        assert result.output.strip() == "9990000.00"

    def test_verify_tampered_exit_nonzero(self, runner, tmp_path):
        path = tmp_path / "l.ledger"
        init_and_fund(runner, path)
        data = bytearray(path.read_bytes())
        data[-5] ^= 0x40
        path.write_bytes(bytes(data))
        result = runner.invoke(main, ["ledger", "verify", "--ledger", str(path)])
        assert result.exit_code == 1
        assert "corruption at block 2" in errtext(result)

    def test_balance_unknown_wallet_zero_exit_0(self, runner, tmp_path):
        path = str(tmp_path / "l.ledger")
        init_and_fund(runner, path)
        result = runner.invoke(main, ["ledger", "balance", "--ledger", path,
                                      "nobody"])
        assert result.exit_code == 0
        assert result.output.strip() == "0.00"

    def test_records_json(self, runner, tmp_path):
        path = str(tmp_path / "l.ledger")
        init_and_fund(runner, path)
        result = runner.invoke(main, ["ledger", "records", "--ledger", path,
                                      "nobody", "--json"])
        assert result.exit_code == 0
        assert json.loads(result.output)["records"] == []

"""Scenario-file validation and the command-line surface: schemas, dotted
overrides, exit codes, and byte-identical outputs across worker counts."""

import json
import os

import pytest

from pacesim.cli import main
from pacesim.config import SchemaError, apply_overrides, parse_scenario
from pacesim.scenarios import BUNDLED, load_scenario, regret_environment
from pacesim.simulation import PacedAgent, ScriptedAgent

GOOD = """{
  "mechanism": {"type": "second_price"},
  "agents": [
    {"budget": 25.0},
    {"budget": 10.0, "script": {"bid": 0.5}}
  ],
  "value_model": {"support": [
    {"prob": 0.5, "values": [1.0, 0.0]},
    {"prob": 0.5, "values": [0.5, 0.5]}
  ]},
  "horizon": 100,
  "seed": 4,
  "replications": 3
}"""


class TestSchema:
    def test_valid_scenario(self):
        scenario = parse_scenario(GOOD)
        assert scenario.config.horizon == 100
        assert scenario.replications == 3
        assert isinstance(scenario.config.agents[0], PacedAgent)
        assert isinstance(scenario.config.agents[1], ScriptedAgent)

    def test_unknown_key_rejected_with_line(self):
        bad = GOOD.replace('"seed": 4,', '"seed": 4,\n  "extra_knob": 1,')
        with pytest.raises(SchemaError) as err:
            parse_scenario(bad)
        assert "extra_knob" in str(err.value)
        assert err.value.line is not None

    def test_probabilities_must_sum_to_one(self):
        bad = GOOD.replace('"prob": 0.5, "values": [1.0, 0.0]',
                           '"prob": 0.4, "values": [1.0, 0.0]')
        with pytest.raises(SchemaError) as err:
            parse_scenario(bad)
        assert "sum" in str(err.value)

    def test_value_dimension_checked(self):
        bad = GOOD.replace('"values": [0.5, 0.5]', '"values": [0.5]')
        with pytest.raises(SchemaError):
            parse_scenario(bad)

    def test_gsp_needs_click_rates(self):
        bad = GOOD.replace('{"type": "second_price"}', '{"type": "gsp"}')
        with pytest.raises(SchemaError):
            parse_scenario(bad)

    def test_invalid_json_carries_line(self):
        with pytest.raises(SchemaError) as err:
            parse_scenario("{\n  broken\n}")
        assert err.value.line == 2

    def test_overrides(self):
        doc = json.loads(GOOD)
        apply_overrides(doc, ["agents.0.budget=50", "horizon=10"])
        assert doc["agents"][0]["budget"] == 50
        assert doc["horizon"] == 10
        with pytest.raises(SchemaError):
            apply_overrides(doc, ["agents.7.budget=1"])
        with pytest.raises(SchemaError):
            apply_overrides(doc, ["no_such_key=1"])


class TestBundled:
    def test_all_bundled_scenarios_parse(self):
        for name in BUNDLED:
            scenario = load_scenario(name)
            assert scenario.config.horizon > 0

    def test_regret_environment_reconstruction(self):
        scenario = load_scenario("regret_first_price_uniform")
        agent, envs, params = regret_environment(scenario)
        assert agent == 0
        assert len(envs) == scenario.config.horizon
        assert envs[0] is envs[-1]  # time-invariant: one shared environment
        assert params["target_rate"] == pytest.approx(0.25)

    def test_switching_scenario_has_two_segments(self):
        scenario = load_scenario("regret_switching")
        _agent, envs, _params = regret_environment(scenario)
        distinct = {id(e) for e in envs}
        assert len(distinct) == 2


class TestCliExitCodes:
    def test_run_ok_and_outputs(self, tmp_path):
        out = tmp_path / "runout"
        code = main(["run", "counterexample", "-o", str(out), "-R", "2"])
        assert code == 0
        assert (out / "trace_0001.csv").exists()
        assert (out / "trace_0002.json").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["welfare_mean"] == pytest.approx(10.0)

    def test_run_zero_horizon(self, tmp_path):
        cfg = tmp_path / "zero.json"
        cfg.write_text(GOOD.replace('"horizon": 100', '"horizon": 0'))
        out = tmp_path / "zout"
        assert main(["run", str(cfg), "-o", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["welfare_mean"] == 0.0
        assert summary["per_agent"][0]["spend_mean"] == 0.0

    def test_schema_violation_exits_2(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(GOOD.replace('"prob": 0.5, "values": [0.5, 0.5]',
                                    '"prob": 0.4, "values": [0.5, 0.5]'))
        assert main(["run", str(cfg), "-o", str(tmp_path / "x")]) == 2

    def test_missing_file_exits_3(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.json"), "-o", str(tmp_path)]) == 3

    def test_capacity_exits_4(self, tmp_path):
        agents = ",\n".join('{"budget": 10.0}' for _ in range(12))
        support = '{"prob": 1.0, "values": [%s]}' % ",".join(["0.5"] * 12)
        doc = """{
          "mechanism": {"type": "gsp", "click_rates": [1.0, 0.5]},
          "agents": [%s],
          "value_model": {"support": [%s]},
          "horizon": 100
        }""" % (agents, support)
        cfg = tmp_path / "big.json"
        cfg.write_text(doc)
        assert main(["welfare", str(cfg), "-R", "2"]) == 4

    def test_regret_two_paced_agents_exits_5(self, tmp_path):
        cfg = tmp_path / "two.json"
        cfg.write_text(GOOD.replace('{"budget": 10.0, "script": {"bid": 0.5}}',
                                    '{"budget": 10.0}'))
        assert main(["regret", str(cfg)]) == 5

    def test_verify_unknown_suite_exits_2(self):
        assert main(["verify", "no-such-suite"]) == 2

    def test_verify_negative_control_exits_1(self):
        assert main(["verify", "gsp-core", "--negative"]) == 1

    def test_verify_gsp_core_passes(self, tmp_path):
        out = tmp_path / "verify.json"
        assert main(["verify", "gsp-core", "--trials", "200", "-o", str(out)]) == 0
        reports = json.loads(out.read_text())
        assert all(set(r) >= {"checker", "trials", "statistic", "bound", "pass"}
                   for r in reports)

    def test_counterexample_json(self, tmp_path):
        out = tmp_path / "cex.json"
        assert main(["counterexample", "--horizon", "100", "-o", str(out)]) == 0
        rows = json.loads(out.read_text())
        assert [r["ratio"] for r in rows] == [0.5, 0.1, 0.01]


class TestDeterministicOutputs:
    def test_byte_identical_across_worker_counts(self, tmp_path, monkeypatch):
        outs = []
        for threads, sub in (("1", "a"), ("4", "b")):
            monkeypatch.setenv("PACESIM_THREADS", threads)
            out = tmp_path / sub
            assert main(["run", "welfare_symmetric_second_price", "-o", str(out),
                         "-R", "6", "--set", "horizon=200",
                         "--set", "agents.0.budget=50",
                         "--set", "agents.1.budget=50"]) == 0
            outs.append(out)
        for name in sorted(os.listdir(outs[0])):
            a = (outs[0] / name).read_bytes()
            b = (outs[1] / name).read_bytes()
            assert a == b, f"{name} differs across worker counts"

    def test_regret_cli_switching_scenario(self, tmp_path):
        out = tmp_path / "sw.json"
        curves = tmp_path / "sw_curves.csv"
        code = main(["regret", "regret_switching", "-R", "4",
                     "-o", str(out), "--curves", str(curves)])
        assert code == 0
        payload = json.loads(out.read_text())
        entry = payload["per_horizon"][0]
        assert entry["path_length"] > 0  # the opponent switch moves the target
        segments = {line.split(",")[0] for line in curves.read_text().splitlines()[1:]}
        assert segments == {"0", "1"}

    def test_regret_cli_report(self, tmp_path):
        out = tmp_path / "reg.json"
        svg = tmp_path / "mu.svg"
        curves = tmp_path / "curves.csv"
        code = main(["regret", "regret_first_price_uniform", "-R", "4",
                     "-o", str(out), "--svg", str(svg), "--curves", str(curves)])
        assert code == 0
        payload = json.loads(out.read_text())
        entry = payload["per_horizon"][0]
        assert entry["path_length"] == 0.0
        assert entry["sgd_regret_mean"] <= entry["sgd_bound"]
        assert svg.read_text().startswith("<svg")
        header = curves.read_text().splitlines()[0]
        assert header == "segment,mu,Z,V,H,W"


def test_regret_without_smoothing_on_atomic_environment_exits_2(tmp_path, capsys):
    # A constant competing bid makes the spend curve a step function; the
    # perfect multiplier cannot be bisected to tolerance and the CLI must
    # say so rather than traceback.
    doc = """{
      "mechanism": {"type": "second_price"},
      "agents": [
        {"budget": 25.0},
        {"budget": 100.0, "script": {"bid": 0.5}}
      ],
      "value_model": {"support": [{"prob": 1.0, "values": [1.0, 0.0]}]},
      "horizon": 100
    }"""
    cfg = tmp_path / "atomic.json"
    cfg.write_text(doc)
    assert main(["regret", str(cfg), "-R", "2"]) == 2
    assert "noise" in capsys.readouterr().err

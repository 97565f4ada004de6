"""Scenario loading and the command-line surface: defaults, field-level
validation messages, artifact emission, exit codes, JSON round-trips."""
import json
import math
from pathlib import Path

import numpy as np
import pytest

from segqueue.cli import main
from segqueue.config import (
    ConfigError,
    config_from_dict,
    default_config,
    default_config_dict,
    load_config,
)
from segqueue.model import DeterministicService


MINIMAL = {
    "arrival_rate": 150.0,
    "capacity": 50,
    "thresholds": [5, 10],
    "services": [
        {"kind": "exponential", "rate": 200.0},
        {"kind": "exponential", "rate": 300.0},
        {"kind": "exponential", "rate": 400.0},
    ],
}


class TestConfigParsing:
    def test_minimal_document_fills_defaults(self):
        cfg = config_from_dict(dict(MINIMAL))
        assert cfg.arrivals.rate == 150.0
        assert cfg.policy.thresholds == (5, 10)
        assert cfg.power.frequencies == (1.0e8, 1.5e8, 2.0e8)
        assert cfg.channel.rate == 580.0
        assert cfg.channel.queues == 3
        assert cfg.delay_bound == math.inf
        assert cfg.constraint == "system"
        assert cfg.wait_variant == "inclusive"
        assert cfg.departure.window_split == 0.011
        assert cfg.pso.swarm_size == 20
        assert cfg.sim.horizon == 1_000_000
        assert cfg.sim.seed == 1

    def test_default_scenario_is_valid(self):
        cfg = default_config()
        assert cfg.policy.capacity == 50
        assert len(cfg.services) == 3

    def test_deterministic_service_kind(self):
        raw = dict(MINIMAL)
        raw["services"] = [{"kind": "deterministic", "duration": 0.005}] * 3
        cfg = config_from_dict(raw)
        assert all(isinstance(s, DeterministicService) for s in cfg.services)

    def test_disordered_thresholds_name_the_rule(self):
        raw = dict(MINIMAL, thresholds=[5, 3])
        with pytest.raises(ConfigError, match="strictly increasing"):
            config_from_dict(raw)

    def test_region_count_mismatch_names_the_counts(self):
        raw = dict(MINIMAL)
        raw["services"] = raw["services"][:2]
        with pytest.raises(ConfigError, match="3 regions"):
            config_from_dict(raw)

    def test_frequency_count_checked(self):
        raw = dict(MINIMAL, frequencies=[1e8, 2e8])
        with pytest.raises(ConfigError, match="frequencies"):
            config_from_dict(raw)

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            config_from_dict(dict(MINIMAL, typo_field=1))

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(ConfigError, match="config.pso"):
            config_from_dict(dict(MINIMAL, pso={"swarm": 5}))

    def test_unknown_service_kind_rejected(self):
        raw = dict(MINIMAL)
        raw["services"] = [{"kind": "uniform", "rate": 1.0}] * 3
        with pytest.raises(ConfigError, match="kind"):
            config_from_dict(raw)

    def test_missing_required_field(self):
        raw = dict(MINIMAL)
        del raw["capacity"]
        with pytest.raises(ConfigError, match="capacity"):
            config_from_dict(raw)

    def test_bad_mode_strings(self):
        with pytest.raises(ConfigError, match="constraint"):
            config_from_dict(dict(MINIMAL, constraint="strict"))
        with pytest.raises(ConfigError, match="slot_mode"):
            config_from_dict(dict(MINIMAL, channel={"slot_mode": "gamma"}))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(path)

    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(default_config_dict()))
        assert load_config(path) == default_config()


def _write_config(tmp_path, **overrides) -> Path:
    doc = default_config_dict()
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


class TestCli:
    def test_analyze_emits_round_trippable_summary(self, tmp_path):
        out = tmp_path / "out"
        code = main(["--out", str(out), "analyze"])
        assert code == 0
        payload = json.loads((out / "analyze.json").read_text())
        assert payload["thresholds"] == [14, 20]
        assert json.loads(json.dumps(payload)) == payload
        header = (out / "distributions.csv").read_text().splitlines()[0]
        assert header == "state,post_departure,epoch_busy_only,epoch_renormalized"
        rows = np.loadtxt(out / "distributions.csv", delimiter=",", skiprows=1)
        assert rows.shape == (51, 4)
        assert rows[:, 1].sum() == pytest.approx(1.0, abs=1e-9)

    def test_depart_emits_model_record(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--out", str(out), "depart"]) == 0
        record = json.loads((out / "departure_model.json").read_text())
        assert record["arrival_rate"] == 150.0
        from segqueue.departure import DepartureModel
        model = DepartureModel.from_record(record)
        assert model.laplace(0.0) == pytest.approx(1.0, abs=1e-9)

    def test_channel_reports_fixed_point(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--out", str(out), "channel"]) == 0
        payload = json.loads((out / "channel.json").read_text())
        assert 0.0 < payload["sigma"] < 1.0
        assert payload["channel_wait"] > 0.0

    def test_optimize_writes_both_searches_and_trace(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--out", str(out), "optimize"]) == 0
        payload = json.loads((out / "optimize.json").read_text())
        assert payload["brute_force"]["evaluations"] == 1225
        assert payload["pso"]["evaluations"] < 1225
        assert payload["brute_force"]["thresholds"] == payload["pso"]["thresholds"]
        trace = (out / "pso_trace.csv").read_text().splitlines()
        assert trace[0] == "iteration,best_normalized_power,best_l1,best_l2"
        assert len(trace) == 102

    def test_simulate_with_samples_and_network(self, tmp_path):
        out = tmp_path / "out"
        code = main(["--out", str(out), "--horizon", "60000", "--seed", "5",
                     "simulate", "--emit-samples", "--network"])
        assert code == 0
        payload = json.loads((out / "simulate.json").read_text())
        assert payload["seed"] == 5
        assert payload["departures"] >= 60000
        samples = (out / "interdeparture_samples.csv").read_text().splitlines()
        assert samples[0] == "interdeparture_seconds,arrived_to_empty"
        assert len(samples) == 54001   # horizon minus 10% warm-up, plus header
        network = json.loads((out / "network.json").read_text())
        assert network["queues"] == 3

    def test_validate_passes_on_default_scenario_at_desk_scale(self, tmp_path):
        out = tmp_path / "out"
        code = main(["--out", str(out), "--horizon", "250000", "validate"])
        assert code == 0
        payload = json.loads((out / "validate.json").read_text())
        assert payload["passed"] is True
        assert len(payload["rows"]) >= 6
        csv_lines = (out / "validate.csv").read_text().splitlines()
        assert len(csv_lines) == len(payload["rows"]) + 1

    def test_unstable_channel_exits_one(self, tmp_path, capsys):
        path = _write_config(tmp_path, arrival_rate=700.0, services=[
            {"kind": "exponential", "rate": 800.0},
            {"kind": "exponential", "rate": 1200.0},
            {"kind": "exponential", "rate": 1600.0},
        ])
        code = main(["--config", str(path), "--out", str(tmp_path / "o"), "channel"])
        assert code == 1
        assert "unstable" in capsys.readouterr().err

    def test_no_feasible_design_exits_one(self, tmp_path):
        path = _write_config(tmp_path, delay_bound=1e-9)
        assert main(["--config", str(path), "--out", str(tmp_path / "o"), "optimize"]) == 1

    def test_bad_config_exits_two(self, tmp_path, capsys):
        path = _write_config(tmp_path, thresholds=[9, 9])
        code = main(["--config", str(path), "--out", str(tmp_path / "o"), "analyze"])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_seed_override_recorded(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--out", str(out), "--seed", "77", "--horizon", "40000",
                     "simulate"]) == 0
        payload = json.loads((out / "simulate.json").read_text())
        assert payload["seed"] == 77

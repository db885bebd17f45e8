import json

import pytest
import yaml

from iabsim.cli import main
from iabsim.config import DEFAULTS, SIM_FIELDS, load_config, sim_config
from iabsim.errors import ConfigError
from iabsim.model import SimConfig

SMALL = ["--set", "scenario.params={rows: 2, cols: 2, spacing_m: 150, ues_per_node: 1}",
         "--run-time", "0.005"]


def _last_json(text):
    return json.loads(text.strip().splitlines()[-1])


def test_run_twice_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["run", *SMALL, "--seed", "7", "--out", str(tmp_path), "--run-id", name]) == 0
    for f in ("packets.csv", "load.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ka = json.loads((tmp_path / "a" / "kpi.json").read_text())
    kb = json.loads((tmp_path / "b" / "kpi.json").read_text())
    ka["metadata"].pop("run_id"), kb["metadata"].pop("run_id")
    ka["metadata"]["config_file"]["output"].pop("run_id")
    kb["metadata"]["config_file"]["output"].pop("run_id")
    assert ka == kb


def test_debug_mode_adds_events(tmp_path):
    assert main(["run", *SMALL, "--out", str(tmp_path), "--run-id", "r"]) == 0
    assert main(["run", *SMALL, "--out", str(tmp_path), "--run-id", "d", "--mode", "debug"]) == 0
    assert not (tmp_path / "r" / "events.log").exists()
    assert (tmp_path / "d" / "events.log").read_text().startswith("start ")
    assert (tmp_path / "r" / "packets.csv").read_bytes() == (tmp_path / "d" / "packets.csv").read_bytes()


def test_validate_cycle(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("node_id,x_m,y_m,z_m,is_donor\n0,0,0,10,1\n1,100,0,10,0\n2,200,0,10,0\n")
    (tmp_path / "l.csv").write_text("from_id,to_id\n1,2\n2,1\n")
    code = main(["validate", "--set", f"scenario.sites_csv={tmp_path / 's.csv'}",
                 "--set", f"scenario.links_csv={tmp_path / 'l.csv'}"])
    assert code != 0
    err = _last_json(capsys.readouterr().err)
    assert err["status"] == "error" and "cycle" in err["message"]


def test_validate_ok(capsys):
    assert main(["validate", *SMALL]) == 0
    out = _last_json(capsys.readouterr().out)
    assert out["nodes"] == 4 and out["slots"] == 40


def test_unknown_ids_list_valid(capsys):
    assert main(["validate", "--scheduler", "fifo"]) == 2
    assert "round_robin" in _last_json(capsys.readouterr().err)["message"]
    assert main(["validate", "--path-policy", "fifo"]) == 2
    assert "min_hop" in _last_json(capsys.readouterr().err)["message"]


def test_bad_override(capsys):
    assert main(["validate", "--set", "simulation.nope=1"]) == 2
    assert "unknown config key" in _last_json(capsys.readouterr().err)["message"]


def test_config_file_and_precedence(tmp_path):
    cfg_path = tmp_path / "c.yaml"
    cfg_path.write_text(yaml.safe_dump({"traffic": {"source_rate_bps": 10e6}, "simulation": {"seed": 3}}))
    doc = load_config(str(cfg_path), ["simulation.seed=9"])
    cfg = sim_config(doc)
    assert cfg.source_rate_bps == 10e6 and cfg.seed == 9


def test_every_simconfig_field_reachable():
    assert set(SIM_FIELDS) == set(SimConfig().to_dict())
    for field, (sec, key) in SIM_FIELDS.items():
        assert key in DEFAULTS[sec]


def test_config_echoed_in_metadata(tmp_path):
    assert main(["run", *SMALL, "--out", str(tmp_path), "--run-id", "m", "--set", "traffic.packet_size_bits=8000"]) == 0
    meta = json.loads((tmp_path / "m" / "kpi.json").read_text())["metadata"]
    assert meta["config_file"]["traffic"]["packet_size_bits"] == 8000
    assert meta["config"]["packet_size_bits"] == 8000


def test_seed_sweep(tmp_path, capsys):
    assert main(["run", *SMALL, "--out", str(tmp_path), "--seeds", "1,2", "--jobs", "2"]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["seed-1", "seed-2"]


def test_generate_scenario(tmp_path, capsys):
    assert main(["generate-scenario", "-o", str(tmp_path), *SMALL[:2]]) == 0
    out = _last_json(capsys.readouterr().out)
    assert out["sites"] == 4 and (tmp_path / "sites.csv").exists()


def test_invalid_numeric():
    with pytest.raises(ConfigError):
        sim_config(load_config(None, ["simulation.run_time_s=abc"]))

import csv
import json
from pathlib import Path

import pytest

from socploc.cli import EXPERIMENTS, UsageError, main, parse_config, read_config_file

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TABLE1 = str(CONFIGS / "table1.cfg")


def run(*args):
    return main([str(a) for a in args])


def test_flags_override_file(tmp_path):
    cfg_file = tmp_path / "a.cfg"
    cfg_file.write_text("N_d=40\np=0.3\n")
    cfg = parse_config(read_config_file(cfg_file), {"p": "0.1", "nodes": None})
    assert cfg.network.anchor_fraction == 0.1


def test_missing_side_length_names_it():
    with pytest.raises(UsageError, match="side length"):
        parse_config({"p": "0.3"}, {})


def test_unknown_key_lists_valid_keys():
    with pytest.raises(UsageError, match="valid keys: N_d"):
        parse_config({"N_d": "40", "colour": "red"}, {})


def test_invalid_value_names_the_field():
    with pytest.raises(UsageError, match="los_prob|g"):
        parse_config({"N_d": "40", "g": "1.5"}, {})


def test_config_echo_round_trips():
    cfg = parse_config(read_config_file(TABLE1), {"seed": "9", "eta_l": "0.1"})
    assert parse_config({k: v for k, v in (line.split("=", 1) for line in cfg.to_text().splitlines())}) == cfg


def test_localize_table1_config(tmp_path):
    out = tmp_path / "loc"
    assert run("localize", "--config", TABLE1, "--out", out) == 0
    rows = list(csv.DictReader((out / "estimates.csv").open()))
    assert len(rows) == 70
    assert set(rows[0]) >= {"node", "true_x", "true_y", "est_x", "est_y", "error", "p_i", "status"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["unlocalizable"] == 0
    echoed = parse_config(read_config_file(out / "config.cfg"))
    assert echoed == parse_config(read_config_file(TABLE1), {"out": str(out)})


def test_localize_is_byte_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("localize", "--config", TABLE1, "--trials", 1, "--seed", 5, "--out", tmp_path / name) == 0
    for f in ("estimates.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_all_anchor_network_is_vacuous_success(tmp_path):
    assert run("localize", "--config", TABLE1, "--p", 1.0, "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "note" in summary and summary["unknown_nodes"] == 0


def test_deploy_and_measure(tmp_path):
    assert run("deploy", "--config", TABLE1, "--out", tmp_path / "d") == 0
    topo = json.loads((tmp_path / "d" / "topology.json").read_text())
    assert len(topo["nodes"]) == 100 and sum(n["role"] == "anchor" for n in topo["nodes"]) == 30
    assert run("measure", "--config", TABLE1, "--out", tmp_path / "m") == 0
    header = (tmp_path / "m" / "measurements.csv").read_text().splitlines()[0]
    assert header == "r,t,kind,raw,corrected,mu,sigma_sq,gamma_sq"


def test_crlb_surface_experiment(tmp_path):
    code = run("experiment", "crlb-surface", "--config", CONFIGS / "figure1.cfg", "--out", tmp_path)
    assert code == 0
    lines = (tmp_path / "crlb.csv").read_text().splitlines()
    assert lines[0] == "x,y,crlb" and len(lines) == 41 * 41 + 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["experiment"] == "crlb-surface" and "wall_time_s" in manifest


def test_unknown_experiment_lists_names(tmp_path, capsys):
    assert run("experiment", "bogus", "--out", tmp_path) == 1
    err = capsys.readouterr().err
    assert all(name in err for name in EXPERIMENTS)


def test_usage_errors_exit_one(tmp_path, capsys):
    assert run("localize", "--out", tmp_path) == 1
    assert "side length" in capsys.readouterr().err
    assert run("localize", "--config", tmp_path / "missing.cfg") == 1
    with pytest.raises(SystemExit) as exc:
        run("teleport")
    assert exc.value.code == 1


def test_table1_experiment_needs_enough_trials(tmp_path):
    assert run("experiment", "table1", "--trials", 5, "--out", tmp_path) == 1

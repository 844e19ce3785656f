import json
import pathlib
import subprocess
import sys

import pytest

from artifact import cli
from artifact.combinatorics import CapacityError

SCRIPTS = pathlib.Path(__file__).resolve().parents[1] / "scripts"


def test_catalog():
    labels = cli.list_checks()
    assert "stirling-identity (Eq. Stirl)" in labels
    assert "bbgky-oracle-exactness (Eq. RozvBBGKY)" in labels
    assert len(labels) >= 30
    assert len(set(labels)) == len(labels)


def test_every_acceptance_criterion_has_a_check():
    covered = {c.acceptance for c in cli.REGISTRY.values() if c.acceptance}
    assert covered == set(range(1, 14))


def test_list_flag(capsys):
    assert cli.main(["--list"]) == 0
    assert "kinetic-cluster-expansion (Eq. kce)" in capsys.readouterr().out


def test_config_parsing():
    cfg = cli.load_config(SCRIPTS / "verify.cfg")
    assert cfg.experiment == "verify" and cfg.N_max == 4
    assert cfg.times == (0.25, 0.5, 1.0, 2.0)
    assert cfg.tolerances["cluster-expansion"] == 1e-10


def test_parse_error_names_field_and_line():
    text = "[model]\nd = 2\n\n[truncation]\nN_max = four\n"
    with pytest.raises(cli.ConfigError, match=r"N_max \(line 5\)"):
        cli.load_config(text=text)
    with pytest.raises(cli.ConfigError, match=r"bogus \(line 2\)"):
        cli.load_config(text="[run]\nbogus = 1\n")


def test_config_validation():
    with pytest.raises(CapacityError):
        cli.load_config(text="[truncation]\nN_max = 9\n")
    with pytest.raises(cli.ConfigError):
        cli.load_config(text="[tolerances]\nx = -1\n")
    with pytest.raises(cli.ConfigError):
        cli.load_config(text="[run]\nepsilons = 0.1, 0.2\n")
    with pytest.raises(cli.ConfigError):
        cli.load_config(text="[run]\nexperiment = dance\n")


def test_custom_model_from_json():
    cfg = cli.load_config(text='[model]\nd = 2\nK = [[0, 0], [0, 1]]\n'
                               'Phi = [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,2]]\n')
    assert cfg.spec().Phi2[3, 3] == 2


def test_capacity_exit_code(tmp_path, capsys):
    p = tmp_path / "big.cfg"
    p.write_text("[truncation]\nN_max = 12\n")
    assert cli.main(["--config", str(p)]) == 2
    assert "capacity" in capsys.readouterr().err


def test_unknown_check_exit_code(tmp_path):
    assert cli.main(["--check", "no-such-check", "--out", str(tmp_path)]) == 2


def test_failure_exit_code(tmp_path):
    p = tmp_path / "strict.cfg"
    p.write_text("[tolerances]\nexp-ln-roundtrip = 1e-300\n")
    assert cli.main(["--config", str(p), "--check", "exp-ln-roundtrip", "--out", str(tmp_path)]) == 1


def test_report_and_reproducibility(tmp_path):
    reports = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert cli.main(["--check", "exp-ln-roundtrip", "--check", "cluster-expansion",
                         "--seed", "3", "--out", str(out)]) == 0
        reports.append(json.loads((out / "report_verify.json").read_text()))
    a, b = reports
    assert a["provenance"] == b["provenance"] and a["provenance"]["seed"] == 3
    assert [c["value"] for c in a["checks"]] == [c["value"] for c in b["checks"]]
    assert {"name", "anchor", "value", "tolerance", "passed"} <= set(a["checks"][0])


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("ARTIFACT_SEED", "11")
    monkeypatch.setenv("ARTIFACT_CHECK", "stirling-identity")
    monkeypatch.setenv("ARTIFACT_OUT", str(tmp_path))
    assert cli.main([]) == 0
    rep = json.loads((tmp_path / "report_verify.json").read_text())
    assert rep["provenance"]["seed"] == 11
    assert [c["name"] for c in rep["checks"]] == ["stirling-identity"]
    # flags beat the environment
    assert cli.main(["--seed", "5"]) == 0
    assert json.loads((tmp_path / "report_verify.json").read_text())["provenance"]["seed"] == 5


def test_study_tables_written(tmp_path):
    assert cli.main(["--check", "meanfield-state-limit", "--out", str(tmp_path)]) == 0
    header = (tmp_path / "meanfield_state.csv").read_text().splitlines()[0]
    assert header == "epsilon,time,quantity,value,fitted_order"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "artifact", "--check", "stirling-identity", "--out", str(tmp_path),
                        "--threads", "1"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("PASS")

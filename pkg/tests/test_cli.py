import csv
import json

import pytest

from surf_rd.cli import main, parse_levels
from surf_rd.errors import ConfigError
from surf_rd.mesh import write_off


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.delenv("SURF_RD_THREADS", raising=False)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_levels():
    assert parse_levels("2..5") == [2, 3, 4, 5]
    assert parse_levels("0,2,4") == [0, 2, 4]
    for bad in ("3", "3..3", "a..b"):
        with pytest.raises(ConfigError):
            parse_levels(bad)


def test_mesh_gen_and_check(tmp_path, capsys):
    path = tmp_path / "ico.off"
    assert main(["mesh", "gen", "--level", "2", "--out", str(path)]) == 0
    assert "N=162 F=320" in capsys.readouterr().out
    assert main(["mesh", "check", str(path)]) == 0
    assert "valid: True" in capsys.readouterr().out


def test_mesh_check_flags_bad_orientation(tmp_path, icosphere):
    mesh = icosphere(1)
    path = tmp_path / "flipped.off"
    write_off(mesh, path)
    lines = path.read_text().splitlines()
    first_face = 2 + mesh.n_vertices
    _, a, b, c = lines[first_face].split()
    lines[first_face] = f"3 {a} {c} {b}"
    path.write_text("\n".join(lines) + "\n")
    assert main(["mesh", "check", str(path)]) == 1


def test_run_exp2_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "exp2"
    code = main(["run", "-e", "exp2", "--level", "2", "--stride", "2", "--out", str(out)])
    assert code == 0
    assert "status=ok" in capsys.readouterr().out
    for name in ("run.csv", "final.vtk", "region.json", "provenance.json"):
        assert (out / name).exists(), name
    assert (out / "snapshots" / "step_000000.vtk").exists()
    region = json.loads((out / "region.json").read_text())
    assert region["first_violation"] is None
    rows = read_rows(out / "run.csv")
    assert rows[0]["step"] == "0"
    assert all(float(row["min_U"]) >= 0.0 for row in rows)
    provenance = json.loads((out / "provenance.json").read_text())
    assert provenance["settings"]["experiment"] == "exp2"
    assert provenance["settings"]["solver"]["method"] == "direct"


def test_run_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["run", "-e", "exp1", "--level", "2", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "run.csv").read_bytes() == (tmp_path / "b" / "run.csv").read_bytes()
    assert (tmp_path / "a" / "error.txt").read_text() == (tmp_path / "b" / "error.txt").read_text()
    assert float((tmp_path / "a" / "error.txt").read_text()) > 0.0


def test_run_from_config_file(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text('[mesh]\nlevel = 1\n[model]\nexperiment = "exp2"\nmethod = "sfem"\n'
                      '[time]\nt_final = 0.5\n', encoding="utf-8")
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    provenance = json.loads((out / "provenance.json").read_text())
    assert provenance["settings"]["method"] == "sfem"
    assert provenance["settings"]["t_final"] == 0.5


def test_configuration_errors_exit_2(tmp_path, capsys):
    assert main(["run", "-e", "exp1", "--level", "2", "--tau", "-1"]) == 2
    assert "Configuration error" in capsys.readouterr().err
    assert main(["run", "-e", "exp9"]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[mesh]\nlevel = \n")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["sweep", "-e", "exp1", "--levels", "3"]) == 2
    assert main(["tau-sweep", "-e", "exp2", "--level", "1", "--taus", "0.1,0.05,0.025"]) == 2


def test_other_errors_exit_1():
    assert main(["run", "-e", "exp2", "--level", "12"]) == 1


def test_solver_failure_exits_3(capsys):
    code = main(["run", "-e", "exp1", "--level", "2", "--solver", "cg", "--tol", "1e-14", "--max-iter", "1"])
    assert code == 3
    assert "Solver failure" in capsys.readouterr().err


@pytest.mark.parametrize("solver", ["cg", "direct"])
def test_blow_up_exits_4(tmp_path, solver):
    config = tmp_path / "cubic.toml"
    config.write_text("[model]\nexperiment = \"exp1\"\n[model.parameters]\nalpha = 3.0\nbeta = 1e6\n")
    code = main(["run", "--config", str(config), "--level", "1", "--tau", "0.2", "--solver", solver])
    assert code == 4


def test_sweep_both_methods(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep", "-e", "exp1", "--levels", "1..2", "--method", "both", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "SFEM" in text and "LSFEM" in text
    for method in ("sfem", "lsfem"):
        rows = read_rows(out / f"table_{method}.csv")
        assert [row["i"] for row in rows] == ["1", "2"]
        assert rows[0]["rate"] == ""
        assert float(rows[1]["rate"]) > 0.0
        assert all(row["status"] == "ok" for row in rows)
    assert (out / "lsfem" / "level2" / "run.csv").exists()


def test_sweep_extrema(tmp_path):
    out = tmp_path / "exp2"
    assert main(["sweep", "-e", "exp2", "--levels", "1,2", "--out", str(out)]) == 0
    rows = read_rows(out / "extrema.csv")
    assert [row["N"] for row in rows] == ["42", "162"]
    assert all(row["method"] == "LSFEM" and row["status"] == "ok" for row in rows)
    assert all(float(row["min_U"]) >= 0.0 for row in rows)


def test_tau_sweep(tmp_path):
    out = tmp_path / "tau"
    assert main(["tau-sweep", "-e", "exp1", "--level", "1", "--taus", "0.1,0.05,0.025", "--out", str(out)]) == 0
    rows = read_rows(out / "tau_table.csv")
    assert [row["tau"] for row in rows] == ["1.00000e-01", "5.00000e-02"]
    assert 0.5 < float(rows[1]["rate"]) < 1.5
    assert main(["tau-sweep", "-e", "exp1", "--level", "1", "--taus", "0.1,0.05"]) == 2


def test_verify(tmp_path, bad_mesh, capsys):
    assert main(["verify", "--level", "2"]) == 0
    assert "angle condition: pass" in capsys.readouterr().out
    path = tmp_path / "bad.off"
    write_off(bad_mesh, path)
    assert main(["verify", "--mesh", str(path)]) == 1
    assert "angle condition: FAIL" in capsys.readouterr().out
    assert main(["verify", "--level", "3", "--max-nodes", "100"]) == 1

import csv
import json

import numpy as np
import pytest

from surf_rd.analysis import RegionReport, convergence_rates
from surf_rd.assembly import NodalField
from surf_rd.errors import DimensionMismatchError, SurfRdError
from surf_rd.output import (component_names, fmt, read_vtk_points, write_convergence_csv, write_error,
                            write_extrema_csv, write_provenance, write_run_csv, write_temporal_csv, write_vtk)
from surf_rd.timestepper import SimulationResult, StepRecord


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_number_format():
    assert fmt(0.000123456789) == "1.23457e-04"
    assert fmt(None) == ""
    assert component_names(2) == ["U", "V"]
    assert component_names(4) == ["U0", "U1", "U2", "U3"]


def test_vtk_of_icosahedron(tmp_path, icosphere):
    mesh = icosphere(0)
    field = NodalField(np.vstack([mesh.vertices[:, 0], mesh.vertices[:, 2]]))
    path = write_vtk(mesh, field, tmp_path / "ico.vtk", title="icosahedron")
    text = path.read_text()
    lines = text.splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2:4] == ["ASCII", "DATASET POLYDATA"]
    assert "POINTS 12 double" in lines
    assert "POLYGONS 20 80" in lines
    assert "POINT_DATA 12" in lines
    assert "SCALARS U double 1" in lines and "SCALARS V double 1" in lines
    np.testing.assert_array_equal(read_vtk_points(path), mesh.vertices)


def test_vtk_rejects_wrong_field(tmp_path, icosphere):
    with pytest.raises(DimensionMismatchError):
        write_vtk(icosphere(0), np.zeros(5), tmp_path / "bad.vtk")


def test_read_vtk_points_on_garbage(tmp_path):
    path = tmp_path / "junk.vtk"
    path.write_text("nothing here\n")
    with pytest.raises(SurfRdError):
        read_vtk_points(path)


def test_run_csv(tmp_path):
    records = [StepRecord(1, 0.1, (0.1, 0.2), (0.9, 0.8), 7), StepRecord(2, 0.2, (0.15, 0.25), (0.85, 0.75), 6)]
    result = SimulationResult(final=NodalField(np.zeros((2, 3))), records=records,
                              initial_minima=(0.0, 0.0), initial_maxima=(1.0, 1.0))
    rows = read_rows(write_run_csv(result, tmp_path / "run.csv"))
    assert rows[0] == ["step", "t", "min_U", "max_U", "min_V", "max_V", "iterations"]
    assert rows[1] == ["0", "0.00000e+00", "0.00000e+00", "1.00000e+00", "0.00000e+00", "1.00000e+00", "0"]
    assert rows[3][0] == "2" and rows[3][-1] == "6"
    assert len(rows) == 4


def test_convergence_csv(tmp_path):
    table = convergence_rates([1.0, 0.25], [0.5, 0.25], levels=[2, 3], n_nodes=[162, 642])
    rows = read_rows(write_convergence_csv(table, tmp_path / "table.csv", status=["ok", "ok"]))
    assert rows[0] == ["i", "N", "h", "error", "rate", "status"]
    assert rows[1] == ["2", "162", "5.00000e-01", "1.00000e+00", "", "ok"]
    assert rows[2][4] == "2.00000e+00"


def test_extrema_csv(tmp_path):
    report = RegionReport((1e-7, 0.0), (1.0, 0.5), (0.1, 0.2), (0.0, 0.0))
    rows = [
        {"level": 2, "n_nodes": 162, "h": 0.3, "method": "LSFEM", "report": report, "status": "ok"},
        {"level": 3, "n_nodes": 642, "h": 0.16, "method": "SFEM", "report": None, "status": "failed: x"},
    ]
    out = read_rows(write_extrema_csv(rows, 2, tmp_path / "extrema.csv"))
    assert out[0] == ["i", "N", "h", "method", "min_U", "max_U", "min_V", "max_V", "status"]
    assert out[1][4:8] == ["1.00000e-07", "1.00000e+00", "0.00000e+00", "5.00000e-01"]
    assert out[2][4:8] == ["", "", "", ""]


def test_error_and_temporal_csv(tmp_path):
    assert write_error(1.5e-3, tmp_path / "error.txt").read_text() == "1.50000e-03\n"
    table = convergence_rates([0.1, 0.05], [0.0875, 0.0375])
    rows = read_rows(write_temporal_csv([0.1, 0.05], table, tmp_path / "tau.csv"))
    assert rows[0] == ["i", "tau", "error", "rate"]
    assert rows[1] == ["0", "1.00000e-01", "1.00000e-01", ""]


def test_provenance(tmp_path):
    path = write_provenance(tmp_path / "out", experiment="exp2", tau=0.1)
    data = json.loads(path.read_text())
    assert data["tool"] == "surf-rd"
    assert data["settings"] == {"experiment": "exp2", "tau": 0.1}
    assert {"version", "numpy", "scipy", "python", "generated_at"} <= set(data)

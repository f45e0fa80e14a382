import numpy as np
import pytest

from enfsec.core import Trajectory
from enfsec.errors import ConfigError, EmptyTrajectory
from enfsec.io import read_json, read_trajectory_csv, write_columns_csv, write_json, write_trajectory_csv


def test_trajectory_csv_roundtrip(tmp_path):
    tr = Trajectory(np.arange(5) * 1e-3, 1 - np.arange(5) * 1.23456789e-4)
    path = tmp_path / "x.csv"
    write_trajectory_csv(path, tr)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,omega" and lines[2] == "0.001000,0.999876543"
    back = read_trajectory_csv(path)
    assert back.node_id == "x"
    assert np.allclose(back.omega, tr.omega, atol=5e-10)


def test_trajectory_csv_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_trajectory_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("time,f\n0,1\n")
    with pytest.raises(ConfigError):
        read_trajectory_csv(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("t,omega\n")
    with pytest.raises(EmptyTrajectory):
        read_trajectory_csv(empty)


def test_columns_csv(tmp_path):
    path = tmp_path / "c.csv"
    write_columns_csv(path, ["node", "v"], [["a", "b"], [1.5, 2.25]], ["{}", "{:.2f}"])
    assert path.read_text() == "node,v\na,1.50\nb,2.25\n"


def test_json_handles_numpy(tmp_path):
    path = tmp_path / "d.json"
    write_json(path, {"a": np.float64(1.5), "b": np.arange(3), "c": (np.int64(2),)})
    assert read_json(path) == {"a": 1.5, "b": [0, 1, 2], "c": [2]}


def test_json_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_json(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        read_json(bad)

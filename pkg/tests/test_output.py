import csv

import pytest

from ms_tnpi.engine import run_simulation
from ms_tnpi.exceptions import ConfigError
from ms_tnpi.output import (
    BOND_HEADER,
    TRAJECTORY_HEADER,
    RunManifest,
    load_manifest,
    read_trajectory_csv,
    save_manifest,
    write_bond_csv,
    write_trajectory_csv,
)
from ms_tnpi.system import SystemConfiguration


@pytest.fixture()
def bare_trajectory(bare_config):
    yield run_simulation(bare_config)


def read_rows(path):
    with path.open(newline="") as file_handle:
        return list(csv.reader(file_handle))


def test_trajectory_csv(tmp_path, bare_trajectory):
    """
    One row per step and observable, starting at the first step
    """
    path = write_trajectory_csv(tmp_path / "out" / "trajectory.csv", bare_trajectory)

    rows = read_rows(path)
    values = read_trajectory_csv(path)

    assert tuple(rows[0]) == TRAJECTORY_HEADER
    assert len(rows) - 1 == 6 * 4
    assert rows[1][:4] == ["1", "0.25", "1", "sz"]
    assert {key[1:] for key in values} == {("sz", "1"), ("sz", "2"), ("sz", "3"), ("szsz", "1,2")}
    last = bare_trajectory.observations[-1]
    assert values[(6, "szsz", "1,2")] == last.values["szsz@1,2"]
    assert values[(6, "sz", "3")] == last.values["sz@3"]


def test_bond_csv(tmp_path, bare_trajectory):
    path = write_bond_csv(tmp_path / "bonds.csv", bare_trajectory)

    rows = read_rows(path)

    assert tuple(rows[0]) == BOND_HEADER
    assert [int(row[0]) for row in rows[1:]] == list(range(1, 7))
    assert all(1 <= int(row[2]) <= 16 for row in rows[1:])
    assert all(1.0 <= float(row[3]) <= int(row[2]) for row in rows[1:])


def test_manifest_round_trip(tmp_path, bare_config):
    """
    The manifest keeps the full configuration and the list of written files
    """
    system = SystemConfiguration(threads=1)
    manifest = RunManifest.create(
        bare_config, system, 1.5, outputs=[tmp_path / "trajectory.csv"], oracle="dense"
    )

    path = save_manifest(manifest, tmp_path / "manifest.yaml")
    loaded = load_manifest(path)

    assert loaded == manifest
    assert loaded.config["memory_length"] == 2
    assert loaded.outputs == [str(tmp_path / "trajectory.csv")]
    assert loaded.dt == 0.25
    assert loaded.scan is None


def test_invalid_manifest(tmp_path):
    path = tmp_path / "manifest.yaml"
    path.write_text("version: 1\noutputs: 3\n")

    with pytest.raises(ConfigError):
        load_manifest(path)

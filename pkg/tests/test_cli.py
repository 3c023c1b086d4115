import pytest

from ms_tnpi.cli import main, parse_scan
from ms_tnpi.exceptions import ConfigError
from ms_tnpi.output import load_manifest, read_trajectory_csv


@pytest.fixture()
def run_main(tmp_path, clean_env):
    """Runs the command line with the output directory inside ``tmp_path``"""
    output = tmp_path / "out"

    def run(*args):
        return main([*args, "--output", str(output)])

    run.output = output
    yield run


def test_run_writes_results(run_main, config_file, bare_config_text):
    """
    A run writes the trajectory, the bond dimensions and a manifest listing both
    """
    path = config_file(bare_config_text)

    assert run_main("run", "--config", str(path)) == 0

    output = run_main.output
    manifest = load_manifest(output / "manifest.yaml")
    assert sorted(p.name for p in output.iterdir()) == [
        "bonds.csv",
        "manifest.yaml",
        "trajectory.csv",
    ]
    assert manifest.outputs == [str(output / "trajectory.csv"), str(output / "bonds.csv")]
    assert manifest.oracle == "none"
    assert len(read_trajectory_csv(output / "trajectory.csv")) == 6 * 4


def test_command_line_overrides_file(run_main, config_file, bare_config_text):
    path = config_file(bare_config_text)

    assert run_main("run", "--config", str(path), "-N", "3", "--cutoff", "1e-12") == 0

    manifest = load_manifest(run_main.output / "manifest.yaml")
    assert manifest.config["nsteps"] == 3
    assert manifest.cutoff == 1e-12
    assert len(read_trajectory_csv(run_main.output / "trajectory.csv")) == 3 * 4


def test_memory_length_scan(run_main, config_file, spin_boson_config_text):
    """
    Every scanned value gets its own trajectory file; the manifest names the scan
    """
    path = config_file(spin_boson_config_text)

    assert run_main("run", "--config", str(path), "--scan", "L=2,3,4,5") == 0

    output = run_main.output
    trajectories = sorted(p.name for p in output.glob("trajectory*.csv"))
    assert trajectories == [f"trajectory_L-{value}.csv" for value in (2, 3, 4, 5)]
    assert load_manifest(output / "manifest.yaml").scan == "L=2,3,4,5"


def test_path_sum_oracle_next_to_run(run_main, config_file, spin_boson_config_text):
    """
    The path-sum oracle file pairs up with the trajectory of the network
    """
    path = config_file(spin_boson_config_text)

    assert run_main("run", "--config", str(path), "--oracle", "path-sum") == 0

    computed = read_trajectory_csv(run_main.output / "trajectory.csv")
    reference = read_trajectory_csv(run_main.output / "oracle-path-sum.csv")
    assert computed.keys() == reference.keys()
    for key, value in computed.items():
        assert abs(value - reference[key]) <= 1e-9


def test_oracle_command(run_main, config_file, bare_config_text):
    path = config_file(bare_config_text)

    assert run_main("oracle", "--config", str(path), "--kind", "dense") == 0

    assert (run_main.output / "oracle-dense.csv").is_file()
    assert load_manifest(run_main.output / "manifest.yaml").oracle == "dense"


def test_missing_config_file(run_main, tmp_path, capsys):
    """
    Errors of the package are reported on one line with exit status 1
    """
    assert run_main("run", "--config", str(tmp_path / "missing.cfg")) == 1

    assert "ms-tnpi: error: Configuration file" in capsys.readouterr().err


def test_invalid_configuration(run_main, config_file, bare_config_text, capsys):
    path = config_file(bare_config_text.replace("L = 2", "L = 41"))

    assert run_main("run", "--config", str(path)) == 1

    error = capsys.readouterr().err
    assert "ms-tnpi: error:" in error
    assert "L out of range" in error


def test_usage_errors_exit_with_two(clean_env):
    with pytest.raises(SystemExit) as exc_info:
        main([])
    assert exc_info.value.code == 2

    with pytest.raises(SystemExit) as exc_info:
        main(["run", "--config", "run.cfg", "--oracle", "tea-leaves"])
    assert exc_info.value.code == 2


@pytest.mark.parametrize(
    "value,expected",
    (
        ("L=2,3,4", ("L", [2, 3, 4])),
        ("dt=0.1,0.05", ("dt", [0.1, 0.05])),
        ("chi = 1e-8,1e-10", ("chi", [1e-8, 1e-10])),
    ),
)
def test_parse_scan(value, expected):
    assert parse_scan(value) == expected


@pytest.mark.parametrize("value", ("L", "M=1,2", "L=2,x", "dt=", "N=3"))
def test_parse_scan_errors(value):
    with pytest.raises(ConfigError):
        parse_scan(value)

"""
Tests for the vps command line.

Commands are invoked through click's CliRunner; exit codes follow the error
taxonomy (0 ok, 1 runtime failure, 2 configuration problem).
"""

import json

import pytest
from click.testing import CliRunner

from vps import __version__
from vps.__main__ import cli
from vps.eigensolver import ground_energy
from vps.hamiltonian import build_tfim


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


class TestOracleCommand:
    """Exact reference values from the command line."""

    def test_ground_energy(self, runner) -> None:
        """The ground energy is printed with six decimals."""
        result = runner.invoke(cli, ["oracle", "--tfim", "1x4", "--pbc", "--one-dimensional"])
        assert result.exit_code == 0
        expected = ground_energy(build_tfim(1, 4, periodic=True, one_dimensional=True))
        assert f"ground energy: {expected:.6f}" in result.output

    def test_renyi2_only(self, runner) -> None:
        """--renyi2 prints the Renyi-2 line and skips the Gibbs one."""
        result = runner.invoke(
            cli, ["oracle", "--heisenberg", "1x4", "--pbc", "--one-dimensional", "--beta", "1", "--renyi2"]
        )
        assert result.exit_code == 0
        assert "renyi2 free energy (beta=1):" in result.output
        assert "gibbs free energy" not in result.output

    def test_hamiltonian_file(self, runner, tmp_path) -> None:
        """--file reads the Pauli-string format."""
        path = tmp_path / "h.txt"
        path.write_text("qubits 1\n-1.0 X0\n")
        result = runner.invoke(cli, ["oracle", "--file", str(path), "--beta", "2"])
        assert result.exit_code == 0
        assert "ground energy: -1.000000" in result.output
        assert "gibbs free energy (beta=2):" in result.output

    @pytest.mark.parametrize(
        "args",
        [
            [],
            ["--tfim", "2x2", "--heisenberg", "2x2"],
            ["--tfim", "2x2", "--renyi2"],
            ["--tfim", "4by3"],
            ["--tfim", "2x2", "--beta", "-1"],
        ],
    )
    def test_usage_errors_exit_2(self, runner, args) -> None:
        """Missing or conflicting sources and bad values are configuration errors."""
        result = runner.invoke(cli, ["oracle", *args])
        assert result.exit_code == 2
        assert "Error:" in result.output

    def test_unparsable_file_exits_2(self, runner, tmp_path) -> None:
        """Parse errors carry the line number."""
        path = tmp_path / "bad.txt"
        path.write_text("1.0 Z0\nnope X1\n")
        result = runner.invoke(cli, ["oracle", "--file", str(path)])
        assert result.exit_code == 2
        assert "line 2" in result.output


class TestRunCommand:
    """Config-driven experiments."""

    def test_oracle_config(self, runner, tmp_path) -> None:
        """A valid config exits 0 and writes its artifacts."""
        config = tmp_path / "oracle.toml"
        config.write_text('task = "oracle"\n[hamiltonian]\nmodel = "tfim"\nrows = 2\ncols = 2\n')
        result = runner.invoke(cli, ["run", str(config)])
        assert result.exit_code == 0
        report = json.loads((tmp_path / "runs" / "oracle" / "oracle.json").read_text())
        assert report["n_qubits"] == 4

    def test_invalid_builder_exits_2(self, runner, tmp_path) -> None:
        """The dotted field path appears in the message."""
        config = tmp_path / "bad.toml"
        config.write_text(
            'task = "vqe"\n[hamiltonian]\nmodel = "tfim"\nrows = 2\ncols = 2\n[ansatz]\nbuilder = "qaoa"\nP = 1\n'
        )
        result = runner.invoke(cli, ["run", str(config)])
        assert result.exit_code == 2
        assert "ansatz.builder" in result.output

    def test_missing_config_exits_2(self, runner, tmp_path) -> None:
        """Unreadable config files are configuration errors."""
        result = runner.invoke(cli, ["run", str(tmp_path / "absent.toml")])
        assert result.exit_code == 2


class TestPlotCommand:
    """Plot-data emission from the command line."""

    def test_missing_run_exits_1(self, runner, tmp_path) -> None:
        """A directory without a manifest is a missing artifact."""
        result = runner.invoke(cli, ["plot", str(tmp_path)])
        assert result.exit_code == 1
        assert "missing artifact" in result.output

    def test_lists_written_files(self, runner, tmp_path) -> None:
        """Each written CSV path is echoed."""
        config = tmp_path / "oracle.toml"
        config.write_text(
            'task = "oracle"\noutput_dir = "out"\n[hamiltonian]\nmodel = "tfim"\nrows = 2\ncols = 2\n'
            "[thermal]\nbeta_grid = [1.0]\n"
        )
        assert runner.invoke(cli, ["run", str(config)]).exit_code == 0
        result = runner.invoke(cli, ["plot", str(tmp_path / "out")])
        assert result.exit_code == 0
        assert "free_energy_vs_beta.csv" in result.output


def test_version(runner) -> None:
    """--version reports the package version."""
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output

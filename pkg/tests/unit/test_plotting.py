"""
Unit tests for plot-data emission.
"""

import csv
import json
from pathlib import Path

import pytest

from vps.app import THERMAL_COLUMNS, write_json, write_rows
from vps.errors import ArtifactMissingError
from vps.plotting import PLOT_COLUMNS, emit_plot_data, render_plots


def _rows(path: Path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _oracle_run(root: Path) -> Path:
    write_json(root / "manifest.json", {"task": "oracle"})
    write_json(
        root / "oracle.json",
        {
            "ground_energy": -5.0,
            "thermal": {
                "2": {"gibbs_free_energy": -5.1, "renyi2_free_energy": -5.05},
                "0.5": {"gibbs_free_energy": -6.0, "renyi2_free_energy": -5.5},
            },
        },
    )
    return root


def _gibbs_run(root: Path) -> Path:
    write_json(root / "manifest.json", {"task": "gibbs"})
    thermal = [
        {
            "beta": beta,
            "scheme": "bounded",
            "checkpoint": label,
            "step": 1,
            "objective": "-1.0",
            "renyi2_free_energy": "-1.0",
            "fidelity_gibbs": fid,
            "fidelity_renyi2": fid,
            "trace_distance_gibbs": "0.1",
        }
        for beta, label, fid in (("3", "converged", "0.97"), ("1", "converged", "0.99"), ("1", "early_stop", "0.95"))
    ]
    write_rows(root / "thermal.csv", THERMAL_COLUMNS, thermal)
    correlations = [
        {"beta": "1", "scheme": "bounded", "checkpoint": "converged", "observable": "X1", "estimate": "0.5",
         "exact": "0.52", "abs_error": "0.02"}
    ]
    write_rows(root / "correlations.csv", list(correlations[0]), correlations)
    return root


class TestEmitPlotData:
    """Long-format CSVs from run directories."""

    def test_oracle_free_energies(self, tmp_path) -> None:
        """One row per beta and ensemble, numeric x sorted ascending."""
        paths = emit_plot_data(_oracle_run(tmp_path))
        assert paths == [tmp_path / "plots" / "free_energy_vs_beta.csv"]
        rows = _rows(paths[0])
        assert tuple(rows[0]) == PLOT_COLUMNS
        assert rows[1:] == [
            ["0.5", "gibbs", "-6.0"],
            ["0.5", "renyi2", "-5.5"],
            ["2", "gibbs", "-5.1"],
            ["2", "renyi2", "-5.05"],
        ]

    def test_gibbs_series_name_scheme_and_checkpoint(self, tmp_path) -> None:
        """Fidelity series are keyed by scheme/checkpoint."""
        paths = emit_plot_data(_gibbs_run(tmp_path))
        assert [p.name for p in paths] == [
            "correlation_error_vs_beta.csv",
            "fidelity_gibbs_vs_beta.csv",
            "fidelity_renyi2_vs_beta.csv",
            "trace_distance_vs_beta.csv",
        ]
        rows = _rows(tmp_path / "plots" / "fidelity_gibbs_vs_beta.csv")
        assert rows[1:] == [
            ["1", "bounded/converged", "0.99"],
            ["1", "bounded/early_stop", "0.95"],
            ["3", "bounded/converged", "0.97"],
        ]

    def test_output_is_reproducible(self, tmp_path) -> None:
        """Emitting twice gives identical bytes."""
        run = _gibbs_run(tmp_path)
        first = [p.read_bytes() for p in emit_plot_data(run)]
        assert [p.read_bytes() for p in emit_plot_data(run)] == first

    def test_missing_manifest(self, tmp_path) -> None:
        """Directories that are not runs are reported."""
        with pytest.raises(ArtifactMissingError, match="manifest.json"):
            emit_plot_data(tmp_path)

    def test_missing_task_artifact(self, tmp_path) -> None:
        """A manifest without its task's outputs names the missing file."""
        write_json(tmp_path / "manifest.json", {"task": "vqe"})
        with pytest.raises(ArtifactMissingError, match="summary.csv"):
            emit_plot_data(tmp_path)

    def test_unknown_task(self, tmp_path) -> None:
        """Manifests from other tools are rejected."""
        (tmp_path / "manifest.json").write_text(json.dumps({"task": "train"}))
        with pytest.raises(ArtifactMissingError, match="unknown task"):
            emit_plot_data(tmp_path)


class TestRenderPlots:
    """PNG rendering with the Agg backend."""

    def test_png_beside_each_csv(self, tmp_path) -> None:
        """Every CSV gets a non-empty PNG with the same stem."""
        images = render_plots(emit_plot_data(_oracle_run(tmp_path)))
        assert images == [tmp_path / "plots" / "free_energy_vs_beta.png"]
        assert images[0].stat().st_size > 0

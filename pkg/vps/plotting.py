"""
Plot-data emission from experiment artifacts.

Every emitted file is a long-format CSV with the columns ``x, series, value``
written to ``<campaign_dir>/plots``. Rows are sorted and floats written with
``repr`` so the same artifacts always give the same bytes.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

from .errors import ArtifactMissingError

logger = logging.getLogger(__name__)

PLOT_COLUMNS = ("x", "series", "value")
Row = Tuple[str, str, str]


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise ArtifactMissingError(path, hint)
    return path


def _read_json(path: Path, hint: str) -> Dict:
    return json.loads(_require(path, hint).read_text())


def _read_csv(path: Path, hint: str) -> List[Dict[str, str]]:
    with open(_require(path, hint), newline="") as fh:
        return list(csv.DictReader(fh))


def _write(path: Path, rows: List[Row]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PLOT_COLUMNS)
        writer.writerows(sorted(rows, key=_sort_key))
    return path


def _sort_key(row: Row):
    try:
        x = (0, float(row[0]), "")
    except ValueError:
        x = (1, 0.0, row[0])
    return x, row[1]


def _vqe_rows(campaign_dir: Path) -> Dict[str, List[Row]]:
    summary = _read_csv(campaign_dir / "summary.csv", "written by a vqe run")
    results = _read_json(campaign_dir / "results.json", "written by a vqe run")
    exact = results.get("exact_energy")
    energies = results["trial_energies"]
    trials: List[Row] = []
    errors: List[Row] = []
    for row in summary:
        trial = row["trial"]
        trials.append((trial, "best_value", row["best_value"]))
        if row["success_prob_final"]:
            trials.append((trial, "success_prob_final", row["success_prob_final"]))
        if exact:
            energy = energies[trial]
            errors.append((trial, "relative_error", repr(abs(energy - exact) / abs(exact))))
    out = {"vqe_trials.csv": trials}
    if exact:
        out["vqe_relative_error.csv"] = errors
    return out


def _gibbs_rows(campaign_dir: Path) -> Dict[str, List[Row]]:
    thermal = _read_csv(campaign_dir / "thermal.csv", "written by a gibbs run")
    correlations = _read_csv(campaign_dir / "correlations.csv", "written by a gibbs run")
    out: Dict[str, List[Row]] = {
        "fidelity_gibbs_vs_beta.csv": [],
        "fidelity_renyi2_vs_beta.csv": [],
        "trace_distance_vs_beta.csv": [],
        "correlation_error_vs_beta.csv": [],
    }
    for row in thermal:
        series = f"{row['scheme']}/{row['checkpoint']}"
        out["fidelity_gibbs_vs_beta.csv"].append((row["beta"], series, row["fidelity_gibbs"]))
        out["fidelity_renyi2_vs_beta.csv"].append((row["beta"], series, row["fidelity_renyi2"]))
        out["trace_distance_vs_beta.csv"].append((row["beta"], series, row["trace_distance_gibbs"]))
    for row in correlations:
        series = f"{row['observable']} {row['scheme']}/{row['checkpoint']}"
        out["correlation_error_vs_beta.csv"].append((row["beta"], series, row["abs_error"]))
    return out


def _oracle_rows(campaign_dir: Path) -> Dict[str, List[Row]]:
    report = _read_json(campaign_dir / "oracle.json", "written by an oracle run")
    rows: List[Row] = []
    for beta, values in report["thermal"].items():
        rows.append((beta, "gibbs", repr(values["gibbs_free_energy"])))
        rows.append((beta, "renyi2", repr(values["renyi2_free_energy"])))
    return {"free_energy_vs_beta.csv": rows}


def _bench_rows(campaign_dir: Path) -> Dict[str, List[Row]]:
    report = _read_json(campaign_dir / "bench.json", "written by a bench run")
    rows = [(kind, report["ansatz"], str(count)) for kind, count in report["gate_counts"].items()]
    return {"gate_counts.csv": rows}


EMITTERS = {
    "vqe": _vqe_rows,
    "gibbs": _gibbs_rows,
    "oracle": _oracle_rows,
    "bench": _bench_rows,
}


def emit_plot_data(campaign_dir: Union[str, Path]) -> List[Path]:
    """
    Turn a finished run directory into long-format plot CSVs.

    Args:
        campaign_dir: Output directory of ``vps run``.

    Returns:
        Paths of the written CSV files, sorted.

    Raises:
        ArtifactMissingError: The manifest or a file the task writes is absent.
    """
    campaign_dir = Path(campaign_dir)
    manifest = _read_json(campaign_dir / "manifest.json", "is this a vps run directory?")
    task = manifest.get("task")
    if task not in EMITTERS:
        raise ArtifactMissingError(campaign_dir / "manifest.json", f"unknown task {task!r}")
    written = []
    for name, rows in sorted(EMITTERS[task](campaign_dir).items()):
        written.append(_write(campaign_dir / "plots" / name, rows))
        logger.debug(f"wrote {len(rows)} rows to {name}")
    logger.info(f"emitted {len(written)} plot files for {task} run in {campaign_dir}")
    return written


def render_plots(csv_paths: List[Path]) -> List[Path]:
    """Render each long-format CSV to a PNG beside it, one line per series."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    images = []
    for path in csv_paths:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        series: Dict[str, List[Tuple[str, float]]] = {}
        for row in rows:
            series.setdefault(row["series"], []).append((row["x"], float(row["value"])))
        numeric = all(_is_number(x) for points in series.values() for x, _ in points)

        fig, ax = plt.subplots(figsize=(6, 4))
        for name, points in sorted(series.items()):
            xs = [float(x) for x, _ in points] if numeric else [x for x, _ in points]
            ax.plot(xs, [v for _, v in points], marker="o", label=name)
        ax.set_xlabel("x")
        ax.set_ylabel(path.stem.replace("_", " "))
        if len(series) > 1:
            ax.legend(fontsize="small")
        fig.tight_layout()
        image = path.with_suffix(".png")
        fig.savefig(image, dpi=120)
        plt.close(fig)
        images.append(image)
    return images


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True

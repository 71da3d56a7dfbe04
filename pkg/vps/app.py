"""
Experiment dispatch for the vps command line.

``run_experiment`` loads a config file, runs the task it names and writes
every artifact under the config's ``output_dir``:

- vqe: ``trials/trial_XXX.json``, ``summary.csv``, ``results.json``
- gibbs: per (beta, scheme) campaign directories, ``thermal.csv``,
  ``correlations.csv``, ``density_matrices/*.bin``, ``results.json``
- oracle: ``oracle.json``
- bench: ``bench.json``, ``circuit.txt``

Each run also writes ``manifest.json`` with the config digest, package
version and master seed.
"""

import csv
import json
import logging
import os
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from . import __version__
from .ansatz import CircuitIR, build_hea
from .eigensolver import MAX_DENSE_QUBITS, ground_energy
from .hamiltonian import PauliSum
from .models import ExperimentConfig, load_config
from .neural import Reweighter
from .objectives import (
    THERMAL_KINDS,
    CircuitObjective,
    build_objective,
    energy_post_selected,
    renyi2_free_energy,
)
from .optimize import (
    CampaignResult,
    run_campaign,
    write_campaign_summary,
    write_trial_records,
)
from .statevec import sample_bitstrings
from .thermal import (
    correlation_observables,
    exact_gibbs_result,
    exact_renyi2,
    fidelity,
    measurement_circuit,
    reweighted_correlation,
    save_density_matrix,
    trace_distance,
)


def configure_logging():
    """Configure logging with environment variable support for LOG_LEVEL."""
    log_level = os.getenv("LOG_LEVEL", "INFO").upper()

    level_mapping = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }

    # Get the numeric level, default to INFO if invalid
    numeric_level = level_mapping.get(log_level, logging.INFO)

    root = logging.getLogger()
    root.setLevel(numeric_level)

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"
    )

    # Update existing handlers or create new one
    if root.handlers:
        for handler in root.handlers:
            handler.setFormatter(formatter)
    else:
        handler = logging.StreamHandler()
        handler.setFormatter(formatter)
        root.addHandler(handler)

    return root


logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
THERMAL_COLUMNS = (
    "beta",
    "scheme",
    "checkpoint",
    "step",
    "objective",
    "renyi2_free_energy",
    "fidelity_gibbs",
    "fidelity_renyi2",
    "trace_distance_gibbs",
)
CORRELATION_COLUMNS = ("beta", "scheme", "checkpoint", "observable", "estimate", "exact", "abs_error")


def write_json(path: Union[str, Path], data: Any) -> Path:
    """Sorted, indented JSON so identical results give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def write_rows(path: Path, columns, rows: List[Dict[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def relative_error(value: float, exact: float) -> float:
    """|E - E_exact| / |E_exact|."""
    if exact == 0:
        raise ValueError("relative error is undefined for a zero reference")
    return abs(value - exact) / abs(exact)


def hartree_fock_energy(h: PauliSum, electrons: int) -> float:
    """Energy of the basis state with the first ``electrons`` qubits occupied."""
    if not 0 <= electrons <= h.n_qubits:
        raise ValueError(f"electrons must lie in [0, {h.n_qubits}], got {electrons}")
    bits = [1] * electrons + [0] * (h.n_qubits - electrons)
    return h.basis_state_energy(bits)


def _exact_ground(h: PauliSum) -> Optional[float]:
    if h.n_qubits > MAX_DENSE_QUBITS:
        logger.warning(f"skipping exact diagonalization on {h.n_qubits} qubits")
        return None
    return ground_energy(h)


# --- vqe ----------------------------------------------------------------------


def run_vqe(cfg: ExperimentConfig, max_workers: Optional[int] = None) -> Dict[str, Any]:
    h = cfg.hamiltonian.build()
    circuit = cfg.ansatz.build(h.n_qubits)
    objective = build_objective(circuit, cfg.objective.to_spec(h))
    logger.info(f"vqe on {cfg.hamiltonian.describe()} with {circuit.name} ({circuit.n_params} parameters)")

    campaign = run_campaign(objective, cfg.optimizer, max_workers)
    out = cfg.output_dir
    write_trial_records(campaign, out)
    write_campaign_summary(campaign, out / "summary.csv")

    # energies at each trial's best parameters, independent of the loss kind
    energies, probs = {}, {}
    for trial in campaign.trials:
        energy, prob = energy_post_selected(circuit, trial.best_params, h)
        energies[str(trial.trial)], probs[str(trial.trial)] = energy, prob
    best_trial = campaign.best_trial
    exact = _exact_ground(h)
    results = {
        "task": "vqe",
        "hamiltonian": cfg.hamiltonian.describe(),
        "ansatz": circuit.name,
        "n_params": circuit.n_params,
        "objective": objective.spec.kind,
        **campaign.summary(),
        "best_trial": best_trial.trial,
        "best_energy": energies[str(best_trial.trial)],
        "best_success_prob": probs[str(best_trial.trial)],
        "trial_energies": energies,
        "trial_success_probs": probs,
        "exact_energy": exact,
    }
    if exact is not None:
        results["relative_error"] = relative_error(results["best_energy"], exact)
        results["relative_error_p25"] = relative_error(campaign.percentile_25_best, exact)
    if cfg.hamiltonian.electrons is not None:
        results["hartree_fock_energy"] = hartree_fock_energy(h, cfg.hamiltonian.electrons)
    write_json(out / "results.json", results)
    logger.info(f"vqe best {campaign.best:.8f}, 25th percentile {campaign.percentile_25_best:.8f}, exact {exact}")
    return results


# --- gibbs --------------------------------------------------------------------


def thermal_objective(
    cfg: ExperimentConfig, circuit: CircuitIR, h: PauliSum, beta: float, scheme: str
) -> CircuitObjective:
    """
    Objective for one preparation scheme at inverse temperature ``beta``.

    bounded / unbounded: reweighting network on the ancilla outcomes.
    plain: every ancilla outcome weighs the same.
    preprocessing: classical model on the inputs of a plain circuit with
    the configured number of blocks and an extra Ry layer.
    """
    th = cfg.thermal
    if scheme == "preprocessing":
        pre = build_hea(h.n_qubits, th.preprocessing_blocks, extra_ry=True)
        model = Reweighter.zeros(h.n_qubits, th.hidden)
        spec = cfg.objective.to_spec(h, beta, kind="gibbs_exact")
        return build_objective(pre, spec, model, preprocessing=True)
    spec = cfg.objective.to_spec(h, beta)
    network = None
    if scheme != "plain":
        network = Reweighter.zeros(circuit.n_ancilla, th.hidden, bounded=scheme == "bounded", bound=th.bound)
    return build_objective(circuit, spec, network)


def sampled_correlation(
    objective: CircuitObjective, values: np.ndarray, observable: PauliSum, shots: int, seed: int
) -> float:
    """Shot estimate of a correlation through the readout circuit and the reweighter."""
    theta, network = objective.split(values)
    rotated, extra = measurement_circuit(objective.circuit, observable)
    state = rotated.simulate(np.concatenate([theta, extra]))
    samples = sample_bitstrings(state, shots, seed)
    return reweighted_correlation(samples, observable, rotated.system_wires, rotated.ancilla_wires, network)


def run_gibbs(cfg: ExperimentConfig, max_workers: Optional[int] = None) -> Dict[str, Any]:
    h = cfg.hamiltonian.build()
    circuit = cfg.ansatz.build(h.n_qubits)
    th = cfg.thermal
    out = cfg.output_dir
    observables = correlation_observables(h.n_qubits, th.correlations)
    thermal_rows: List[Dict[str, Any]] = []
    correlation_rows: List[Dict[str, Any]] = []
    oracles: Dict[str, Any] = {}
    campaigns: Dict[str, Any] = {}
    shot_seed = cfg.seed

    for beta in th.beta_grid:
        gibbs = exact_gibbs_result(h, beta)
        renyi = exact_renyi2(h, beta)
        oracles[f"{beta:g}"] = {
            "gibbs_free_energy": gibbs.free_energy,
            "renyi2_free_energy": renyi.free_energy,
            "renyi2_ebar": renyi.ebar,
        }
        for scheme in th.schemes:
            tag = f"beta_{beta:g}_{scheme}"
            logger.info(f"gibbs: beta={beta:g}, scheme {scheme}")
            objective = thermal_objective(cfg, circuit, h, beta, scheme)
            campaign: CampaignResult = run_campaign(objective, cfg.optimizer, max_workers)
            write_trial_records(campaign, out / tag)
            write_campaign_summary(campaign, out / tag / "summary.csv")
            campaigns[tag] = campaign.summary()

            best = campaign.best_trial
            for label in ("early_stop", "converged"):
                step, values = best.checkpoints[label]
                rho = objective.density_matrix(values)
                save_density_matrix(out / "density_matrices" / f"{tag}_{label}.bin", rho)
                thermal_rows.append(
                    {
                        "beta": f"{beta:g}",
                        "scheme": scheme,
                        "checkpoint": label,
                        "step": step,
                        "objective": repr(objective(values)),
                        "renyi2_free_energy": repr(renyi2_free_energy(rho, h, beta)),
                        "fidelity_gibbs": repr(fidelity(rho, gibbs.rho)),
                        "fidelity_renyi2": repr(fidelity(rho, renyi.rho)),
                        "trace_distance_gibbs": repr(trace_distance(rho, gibbs.rho)),
                    }
                )
                for name, observable in observables.items():
                    exact = gibbs.rho.expectation(observable)
                    if th.shots > 0 and scheme != "preprocessing":
                        estimate = sampled_correlation(objective, values, observable, th.shots, shot_seed)
                        shot_seed += 1
                    else:
                        estimate = rho.expectation(observable)
                    correlation_rows.append(
                        {
                            "beta": f"{beta:g}",
                            "scheme": scheme,
                            "checkpoint": label,
                            "observable": name,
                            "estimate": repr(estimate),
                            "exact": repr(exact),
                            "abs_error": repr(abs(estimate - exact)),
                        }
                    )

    write_rows(out / "thermal.csv", THERMAL_COLUMNS, thermal_rows)
    write_rows(out / "correlations.csv", CORRELATION_COLUMNS, correlation_rows)
    results = {
        "task": "gibbs",
        "hamiltonian": cfg.hamiltonian.describe(),
        "ansatz": circuit.name,
        "objective": cfg.objective.kind,
        "oracles": oracles,
        "campaigns": campaigns,
    }
    write_json(out / "results.json", results)
    return results


# --- oracle -------------------------------------------------------------------


def oracle_report(h: PauliSum, betas) -> Dict[str, Any]:
    """Ground energy plus exact Gibbs and Renyi-2 free energies for each beta."""
    report: Dict[str, Any] = {"n_qubits": h.n_qubits, "n_terms": len(h), "ground_energy": ground_energy(h)}
    thermal = {}
    for beta in betas:
        gibbs = exact_gibbs_result(h, beta)
        renyi = exact_renyi2(h, beta)
        thermal[f"{beta:g}"] = {
            "gibbs_free_energy": gibbs.free_energy,
            "renyi2_free_energy": renyi.free_energy,
            "renyi2_ebar": renyi.ebar,
        }
    report["thermal"] = thermal
    return report


def run_oracle(cfg: ExperimentConfig, max_workers: Optional[int] = None) -> Dict[str, Any]:
    h = cfg.hamiltonian.build()
    betas = [cfg.objective.beta] if cfg.objective.beta is not None else cfg.thermal.beta_grid
    report = {"task": "oracle", "hamiltonian": cfg.hamiltonian.describe(), **oracle_report(h, betas)}
    if cfg.hamiltonian.electrons is not None:
        report["hartree_fock_energy"] = hartree_fock_energy(h, cfg.hamiltonian.electrons)
    write_json(cfg.output_dir / "oracle.json", report)
    logger.info(f"ground energy of {cfg.hamiltonian.describe()}: {report['ground_energy']:.6f}")
    return report


# --- bench --------------------------------------------------------------------


def run_bench(cfg: ExperimentConfig, max_workers: Optional[int] = None) -> Dict[str, Any]:
    """Gate counts and timed objective-plus-gradient evaluations."""
    h = cfg.hamiltonian.build()
    circuit = cfg.ansatz.build(h.n_qubits)
    if cfg.objective.kind in THERMAL_KINDS:
        beta = cfg.objective.beta if cfg.objective.beta is not None else cfg.thermal.beta_grid[0]
        network = Reweighter.zeros(circuit.n_ancilla, cfg.thermal.hidden, bounded=True, bound=cfg.thermal.bound)
        objective = build_objective(circuit, cfg.objective.to_spec(h, beta), network)
    else:
        objective = build_objective(circuit, cfg.objective.to_spec(h))

    values = objective.initial_values(
        np.random.default_rng(cfg.seed), cfg.optimizer.circuit_init_sigma, cfg.optimizer.neural_init_sigma
    )
    timings = []
    for _ in range(cfg.bench.repeats):
        start = time.perf_counter()
        objective.evaluate(values)
        timings.append(time.perf_counter() - start)

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "circuit.txt").write_text(circuit.describe())
    report = {
        "task": "bench",
        "hamiltonian": cfg.hamiltonian.describe(),
        "ansatz": circuit.name,
        "n_qubits": circuit.n_qubits,
        "n_params": circuit.n_params,
        "n_values": objective.n_values,
        "gate_counts": circuit.gate_counts(),
        "repeats": cfg.bench.repeats,
        "gradient_seconds_min": min(timings),
        "gradient_seconds_mean": float(np.mean(timings)),
    }
    write_json(out / "bench.json", report)
    logger.info(f"bench {circuit.name}: {report['gradient_seconds_min'] * 1e3:.2f} ms per evaluation")
    return report


TASK_RUNNERS = {
    "vqe": run_vqe,
    "gibbs": run_gibbs,
    "oracle": run_oracle,
    "bench": run_bench,
}


def write_manifest(cfg: ExperimentConfig) -> Path:
    manifest = {
        "task": cfg.task,
        "config": str(cfg.source) if cfg.source else None,
        "config_sha256": cfg.digest,
        "version": __version__,
        "seed": cfg.seed,
    }
    return write_json(cfg.output_dir / MANIFEST_NAME, manifest)


def run_experiment(config_path: Union[str, Path], max_workers: Optional[int] = None) -> int:
    """
    Run the experiment described by ``config_path``.

    Args:
        config_path: TOML or JSON experiment file.
        max_workers: Thread cap for campaigns; VPS_THREADS or the CPU count when None.

    Returns:
        0 once every artifact is written.

    Raises:
        ConfigError: The file failed validation.
        VPSError: The experiment itself failed.
    """
    cfg = load_config(config_path)
    logger.info(f"running {cfg.task} from {config_path} into {cfg.output_dir}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg)
    TASK_RUNNERS[cfg.task](cfg, max_workers)
    logger.info(f"{cfg.task} finished; artifacts in {cfg.output_dir}")
    return 0

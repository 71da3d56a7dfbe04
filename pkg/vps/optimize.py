"""
Adam optimization, trial runner and multi-restart campaigns.

Circuit slots (theta and phi groups) follow a halving learning-rate
schedule; network weights use a constant rate. A trial stops once the
objective has moved by less than ``converge_eps`` on ``converge_count``
steps (counted cumulatively, not consecutively) or after ``max_steps``
updates.
"""

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import SlotRange, value_and_grad
from .errors import CampaignError, EvaluationError, VPSError

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
NEURAL_GROUP = "weights"
SUMMARY_COLUMNS = ("trial", "best_value", "steps", "success_prob_final", "wall_time")
LOG_EVERY = 100


@dataclass
class OptimizerConfig:
    """
    Adam schedule, stopping rule and campaign size.

    Attributes:
        circuit_lr_base: Circuit learning rate at step 0.
        circuit_lr_halflife: Steps over which the circuit rate halves.
        neural_lr: Constant rate for network weights.
        circuit_init_sigma: Std of the Gaussian circuit initialization.
        neural_init_sigma: Std of the Gaussian network initialization.
        max_steps: Update budget per trial.
        early_stop_steps: Step of the early-stop checkpoint.
        converge_eps: Objective change counted as stalled.
        converge_count: Stalled steps that end a trial.
        trials: Independent restarts per campaign.
        seed: Master seed; trial k uses seed + k.
    """

    circuit_lr_base: float = 0.08
    circuit_lr_halflife: float = 1200.0
    neural_lr: float = 0.015
    circuit_init_sigma: float = 0.02
    neural_init_sigma: float = 0.005
    max_steps: int = 2600
    early_stop_steps: int = 300
    converge_eps: float = 1e-7
    converge_count: int = 100
    trials: int = 50
    seed: int = 0

    def __post_init__(self):
        for name in ("circuit_lr_base", "circuit_lr_halflife", "neural_lr", "converge_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("circuit_init_sigma", "neural_init_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        for name in ("max_steps", "early_stop_steps", "converge_count", "trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")

    def circuit_rate(self, step: int) -> float:
        return self.circuit_lr_base * 0.5 ** (step / self.circuit_lr_halflife)


def group_learning_rates(layout: Sequence[SlotRange], cfg: OptimizerConfig, step: int) -> np.ndarray:
    """Per-entry learning rates: decayed circuit rate, constant rate for weights."""
    size = layout[-1].stop if layout else 0
    rates = np.full(size, cfg.circuit_rate(step))
    for rng in layout:
        if rng.name == NEURAL_GROUP:
            rates[rng.slice()] = cfg.neural_lr
    return rates


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(
    state: AdamState, params: np.ndarray, grads: np.ndarray, rates: Union[float, np.ndarray]
) -> Tuple[np.ndarray, AdamState]:
    """
    One bias-corrected Adam update.

    Raises:
        ValueError: Shapes disagree.
        EvaluationError: Non-finite gradient.
    """
    if params.shape != grads.shape or state.m.shape != grads.shape:
        raise ValueError(f"params {params.shape}, grads {grads.shape} and state {state.m.shape} differ")
    if not np.all(np.isfinite(grads)):
        raise EvaluationError("non-finite gradient passed to Adam")
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grads
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grads**2
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    return params - rates * m_hat / (np.sqrt(v_hat) + ADAM_EPS), AdamState(m, v, t)


@dataclass
class TrialResult:
    """
    Outcome of one optimization run.

    ``checkpoints`` maps a label ("early_stop", "converged") to the step and
    parameter values recorded there.
    """

    trial: int
    seed: int
    best_value: float
    best_params: np.ndarray
    final_params: np.ndarray
    history: List[float]
    checkpoints: Dict[str, Tuple[int, np.ndarray]]
    steps: int
    converged: bool
    wall_time: float
    energy_history: List[float] = field(default_factory=list)
    success_prob_history: List[float] = field(default_factory=list)

    @property
    def success_prob_final(self) -> Optional[float]:
        return self.success_prob_history[-1] if self.success_prob_history else None

    @property
    def energy_final(self) -> Optional[float]:
        return self.energy_history[-1] if self.energy_history else None

    def to_record(self) -> Dict[str, Any]:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "best_value": self.best_value,
            "steps": self.steps,
            "converged": self.converged,
            "wall_time": self.wall_time,
            "success_prob_final": self.success_prob_final,
            "energy_final": self.energy_final,
            "history": self.history,
            "energy_history": self.energy_history,
            "success_prob_history": self.success_prob_history,
            "best_params": self.best_params.tolist(),
            "final_params": self.final_params.tolist(),
            "checkpoints": {
                label: {"step": step, "params": values.tolist()}
                for label, (step, values) in self.checkpoints.items()
            },
        }


def run_trial(
    objective,
    cfg: OptimizerConfig,
    trial_seed: int,
    trial: int = 0,
    initial: Optional[np.ndarray] = None,
) -> TrialResult:
    """
    Optimize ``objective`` from a seeded random start.

    Args:
        objective: Differentiable objective (``evaluate`` plus ``layout`` and
            ``initial_values``), e.g. from ``objectives.build_objective``.
        cfg: Schedule and stopping rule.
        trial_seed: Seed for the initial parameters.
        trial: Index used in logs and records.
        initial: Explicit starting point instead of the random draw.

    Returns:
        TrialResult with the early-stop checkpoint (the final parameters
        if the run converged first) and the converged checkpoint.

    Raises:
        EvaluationError: Non-finite objective or gradient.
        DegenerateProjectionError: Post-selection probability collapsed.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(trial_seed)
    if initial is None:
        params = objective.initial_values(rng, cfg.circuit_init_sigma, cfg.neural_init_sigma)
    else:
        params = np.array(initial, dtype=np.float64)
    layout = getattr(objective, "layout", ())
    if not layout:
        layout = (SlotRange("theta", 0, params.shape[0]),)
    state = AdamState.zeros(params.shape[0])

    history: List[float] = []
    energies: List[float] = []
    probs: List[float] = []
    checkpoints: Dict[str, Tuple[int, np.ndarray]] = {}
    best_value, best_params = np.inf, params.copy()
    stalled = 0
    converged = False
    logger.info(f"trial {trial} (seed {trial_seed}): {objective!r}, {params.shape[0]} parameters")

    step = 0
    while True:
        if hasattr(objective, "evaluate"):
            evaluation = objective.evaluate(params)
            value, grads = evaluation.value, evaluation.grad
            if evaluation.energy is not None:
                energies.append(evaluation.energy)
            if evaluation.success_prob is not None:
                probs.append(evaluation.success_prob)
            if not np.isfinite(value) or grads is None or not np.all(np.isfinite(grads)):
                raise EvaluationError(f"trial {trial} step {step}: non-finite objective or gradient")
        else:
            value, grads = value_and_grad(objective, params)
        history.append(float(value))
        if value < best_value:
            best_value, best_params = float(value), params.copy()
        if step == cfg.early_stop_steps:
            checkpoints["early_stop"] = (step, params.copy())
        if step % LOG_EVERY == 0:
            logger.debug(f"trial {trial} step {step}: value {value:.10f}")

        if step > 0 and abs(history[-1] - history[-2]) < cfg.converge_eps:
            stalled += 1
            if stalled >= cfg.converge_count:
                converged = True
                break
        if step >= cfg.max_steps:
            break
        params, state = adam_step(state, params, grads, group_learning_rates(layout, cfg, step))
        step += 1

    checkpoints.setdefault("early_stop", (step, params.copy()))
    checkpoints["converged"] = (step, params.copy())
    wall = time.perf_counter() - start
    logger.info(
        f"trial {trial} finished after {step} steps ({'converged' if converged else 'budget'}), "
        f"best {best_value:.8f}, {wall:.1f}s"
    )
    return TrialResult(
        trial=trial,
        seed=trial_seed,
        best_value=best_value,
        best_params=best_params,
        final_params=params.copy(),
        history=history,
        checkpoints=checkpoints,
        steps=step,
        converged=converged,
        wall_time=wall,
        energy_history=energies,
        success_prob_history=probs,
    )


def percentile_best(values: Sequence[float], q: float = 25.0) -> float:
    """q-th percentile of trial best values, linear interpolation on the sorted list."""
    if not len(values):
        raise ValueError("no values to aggregate")
    return float(np.percentile(np.asarray(values, dtype=np.float64), q, method="linear"))


@dataclass
class CampaignResult:
    best: float
    percentile_25_best: float
    trials: List[TrialResult]
    failures: Dict[int, str] = field(default_factory=dict)

    @property
    def best_trial(self) -> TrialResult:
        return min(self.trials, key=lambda r: (r.best_value, r.trial))

    def summary(self) -> Dict[str, Any]:
        return {
            "best": self.best,
            "percentile_25_best": self.percentile_25_best,
            "trials": len(self.trials),
            "failures": {str(k): v for k, v in sorted(self.failures.items())},
        }


def resolve_thread_count(trials: int, requested: Optional[int] = None) -> int:
    """Worker count: explicit request, else VPS_THREADS, else the CPU count; never above ``trials``."""
    if requested is None:
        env = os.getenv("VPS_THREADS")
        if env:
            try:
                requested = int(env)
            except ValueError:
                logger.warning(f"ignoring non-integer VPS_THREADS={env!r}")
    if requested is None or requested < 1:
        requested = os.cpu_count() or 1
    return max(1, min(requested, trials))


def run_campaign(objective, cfg: OptimizerConfig, max_workers: Optional[int] = None) -> CampaignResult:
    """
    Run ``cfg.trials`` independent trials with seeds ``cfg.seed + k``.

    Failed trials are logged and skipped; aggregation only depends on trial
    indices, never on completion order.

    Raises:
        CampaignError: Every trial failed.
    """
    workers = resolve_thread_count(cfg.trials, max_workers)
    logger.info(f"campaign: {cfg.trials} trials on {workers} worker(s), master seed {cfg.seed}")

    def one(k: int):
        try:
            return run_trial(objective, cfg, cfg.seed + k, trial=k)
        except (VPSError, ValueError, FloatingPointError) as e:
            logger.error(f"trial {k} failed: {e}")
            return e

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(one, range(cfg.trials)))

    results = [r for r in outcomes if isinstance(r, TrialResult)]
    failures = {k: str(r) for k, r in enumerate(outcomes) if not isinstance(r, TrialResult)}
    if not results:
        raise CampaignError(f"all {cfg.trials} trials failed; first error: {failures.get(0)}")
    values = [r.best_value for r in results]
    return CampaignResult(min(values), percentile_best(values), results, failures)


def write_trial_records(result: CampaignResult, out_dir: Union[str, Path]) -> List[Path]:
    out = Path(out_dir) / "trials"
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for trial in result.trials:
        path = out / f"trial_{trial.trial:03d}.json"
        path.write_text(json.dumps(trial.to_record(), indent=2) + "\n")
        paths.append(path)
    return paths


def write_campaign_summary(result: CampaignResult, path: Union[str, Path]) -> Path:
    """Campaign CSV with one row per successful trial."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for trial in result.trials:
            writer.writerow(
                {
                    "trial": trial.trial,
                    "best_value": repr(trial.best_value),
                    "steps": trial.steps,
                    "success_prob_final": "" if trial.success_prob_final is None else repr(trial.success_prob_final),
                    "wall_time": f"{trial.wall_time:.3f}",
                }
            )
    return path

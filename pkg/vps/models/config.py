"""
Experiment configuration schema.

A config file is TOML (or JSON when the suffix is .json) with top-level
``task``, ``seed`` and ``output_dir`` keys and one table per concern::

    task = "vqe"
    seed = 7
    output_dir = "runs/tfim_p2"

    [hamiltonian]
    model = "tfim"            # tfim | heisenberg | file
    rows = 4
    cols = 3
    periodic = true

    [ansatz]
    builder = "hea_postselect"
    P = 2

    [objective]
    kind = "energy"

    [optimizer]
    trials = 20

Validation errors carry the dotted path of the offending field.
"""

import hashlib
import inspect
import json
import logging
import math
import tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from ..ansatz import BUILDERS, CircuitIR
from ..errors import ConfigError, HamiltonianParseError
from ..hamiltonian import PauliSum, build_heisenberg, build_tfim, load_pauli_file
from ..objectives import DEFAULT_P0, KINDS, THERMAL_KINDS, ObjectiveSpec
from ..optimize import OptimizerConfig
from ..thermal import DEFAULT_CORRELATIONS, SCHEMES

logger = logging.getLogger(__name__)

TASKS = ("vqe", "gibbs", "oracle", "bench")
MODELS = ("tfim", "heisenberg", "file")
# builder arguments derived from the Hamiltonian rather than read from the file
_DERIVED_ARGS = {"n", "n_sys"}


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _require(data: Mapping[str, Any], key: str, path: str, kind: type) -> Any:
    if key not in data:
        raise ConfigError(_join(path, key), "required field is missing")
    return _typed(data[key], _join(path, key), kind)


def _typed(value: Any, path: str, kind: type) -> Any:
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if not isinstance(value, kind):
        raise ConfigError(path, f"expected {kind.__name__}, got {type(value).__name__} {value!r}")
    if kind is float and not math.isfinite(value):
        raise ConfigError(path, f"must be finite, got {value}")
    return value


def _optional(data: Mapping[str, Any], key: str, path: str, kind: type, default: Any) -> Any:
    if key not in data:
        return default
    return _typed(data[key], _join(path, key), kind)


def _check_keys(data: Mapping[str, Any], allowed, path: str) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(_join(path, key), f"unknown field (expected one of {sorted(allowed)})")


def _table(data: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(key, "expected a table")
    return value


@dataclass
class HamiltonianConfig:
    model: str
    rows: int = 0
    cols: int = 0
    periodic: bool = True
    one_dimensional: bool = False
    path: Optional[Path] = None
    electrons: Optional[int] = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: Path) -> "HamiltonianConfig":
        p = "hamiltonian"
        _check_keys(data, {"model", "rows", "cols", "periodic", "one_dimensional", "path", "electrons"}, p)
        model = _require(data, "model", p, str)
        if model not in MODELS:
            raise ConfigError(f"{p}.model", f"unknown model {model!r}, expected one of {MODELS}")
        cfg = cls(
            model=model,
            periodic=_optional(data, "periodic", p, bool, True),
            one_dimensional=_optional(data, "one_dimensional", p, bool, False),
            electrons=_optional(data, "electrons", p, int, None),
        )
        if model == "file":
            path = base_dir / _require(data, "path", p, str)
            if not path.is_file():
                raise ConfigError(f"{p}.path", f"file not found: {path}")
            cfg.path = path
        else:
            cfg.rows = _require(data, "rows", p, int)
            cfg.cols = _require(data, "cols", p, int)
            if cfg.rows < 1 or cfg.cols < 1 or cfg.rows * cfg.cols < 2:
                raise ConfigError(f"{p}.rows", f"lattice {cfg.rows}x{cfg.cols} needs at least two sites")
        return cfg

    def build(self) -> PauliSum:
        if self.model == "file":
            try:
                return load_pauli_file(self.path)
            except HamiltonianParseError as e:
                raise ConfigError("hamiltonian.path", f"{self.path}: {e}") from e
        builder = build_tfim if self.model == "tfim" else build_heisenberg
        return builder(self.rows, self.cols, self.periodic, self.one_dimensional)

    def describe(self) -> str:
        if self.model == "file":
            return f"file {self.path.name}"
        bc = "pbc" if self.periodic else "obc"
        return f"{self.model} {self.rows}x{self.cols} {bc}"


@dataclass
class AnsatzConfig:
    builder: str
    kwargs: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "AnsatzConfig":
        builder = _require(data, "builder", "ansatz", str)
        if builder not in BUILDERS:
            raise ConfigError("ansatz.builder", f"unknown builder {builder!r}, expected one of {sorted(BUILDERS)}")
        params = inspect.signature(BUILDERS[builder]).parameters
        allowed = set(params) - _DERIVED_ARGS
        kwargs = {}
        for key, value in data.items():
            if key == "builder":
                continue
            if key not in allowed:
                raise ConfigError(f"ansatz.{key}", f"{builder} accepts {sorted(allowed)}")
            default = params[key].default
            kind = type(default) if default is not inspect.Parameter.empty else int
            kwargs[key] = _typed(value, f"ansatz.{key}", kind)
        missing = [k for k in allowed if params[k].default is inspect.Parameter.empty and k not in kwargs]
        if missing:
            raise ConfigError(f"ansatz.{sorted(missing)[0]}", "required field is missing")
        return cls(builder, kwargs)

    def build(self, n_sys: int) -> CircuitIR:
        fn = BUILDERS[self.builder]
        size_arg = "n" if "n" in inspect.signature(fn).parameters else "n_sys"
        try:
            return fn(**{size_arg: n_sys}, **self.kwargs)
        except ValueError as e:
            raise ConfigError("ansatz", str(e)) from e


@dataclass
class ObjectiveConfig:
    kind: str = "energy"
    lam: Optional[float] = None
    p0: float = DEFAULT_P0
    beta: Optional[float] = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], default_kind: str = "energy") -> "ObjectiveConfig":
        p = "objective"
        _check_keys(data, {"kind", "lambda", "p0", "beta"}, p)
        cfg = cls(
            kind=_optional(data, "kind", p, str, default_kind),
            lam=_optional(data, "lambda", p, float, None),
            p0=_optional(data, "p0", p, float, DEFAULT_P0),
            beta=_optional(data, "beta", p, float, None),
        )
        if cfg.kind not in KINDS:
            raise ConfigError(f"{p}.kind", f"unknown kind {cfg.kind!r}, expected one of {KINDS}")
        if cfg.lam is not None and cfg.lam < 0:
            raise ConfigError(f"{p}.lambda", f"must be non-negative, got {cfg.lam}")
        if not 0 < cfg.p0 < 1:
            raise ConfigError(f"{p}.p0", f"must lie in (0, 1), got {cfg.p0}")
        if cfg.beta is not None and cfg.beta <= 0:
            raise ConfigError(f"{p}.beta", f"must be positive, got {cfg.beta}")
        return cfg

    def to_spec(self, h: PauliSum, beta: Optional[float] = None, kind: Optional[str] = None) -> ObjectiveSpec:
        """Objective for ``h``; lambda defaults to 0.1 * ||H||_1."""
        kind = kind or self.kind
        lam = self.lam if self.lam is not None else 0.1 * h.one_norm()
        beta = beta if beta is not None else self.beta
        return ObjectiveSpec(
            kind=kind,
            h=h,
            beta=beta if kind in THERMAL_KINDS else None,
            lam=lam if kind in ("obj1", "obj2") else None,
            p0=self.p0 if kind == "obj2" else None,
        )


@dataclass
class ThermalConfig:
    beta_grid: List[float] = field(default_factory=lambda: [1.0])
    schemes: List[str] = field(default_factory=lambda: ["bounded"])
    hidden: Tuple[int, ...] = (32, 32)
    bound: float = math.e
    correlations: List[str] = field(default_factory=lambda: list(DEFAULT_CORRELATIONS))
    shots: int = 0
    preprocessing_blocks: int = 4

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ThermalConfig":
        p = "thermal"
        allowed = {f.name for f in fields(cls)}
        _check_keys(data, allowed, p)
        cfg = cls()
        if "beta_grid" in data:
            grid = _typed(data["beta_grid"], f"{p}.beta_grid", list)
            cfg.beta_grid = [_typed(b, f"{p}.beta_grid[{i}]", float) for i, b in enumerate(grid)]
            if not cfg.beta_grid or any(b <= 0 for b in cfg.beta_grid):
                raise ConfigError(f"{p}.beta_grid", "needs at least one positive beta")
        if "schemes" in data:
            schemes = _typed(data["schemes"], f"{p}.schemes", list)
            for i, s in enumerate(schemes):
                if s not in SCHEMES:
                    raise ConfigError(f"{p}.schemes[{i}]", f"unknown scheme {s!r}, expected one of {SCHEMES}")
            cfg.schemes = list(schemes)
        if "hidden" in data:
            hidden = _typed(data["hidden"], f"{p}.hidden", list)
            cfg.hidden = tuple(_typed(h, f"{p}.hidden[{i}]", int) for i, h in enumerate(hidden))
            if any(h < 1 for h in cfg.hidden):
                raise ConfigError(f"{p}.hidden", "layer sizes must be positive")
        cfg.bound = _optional(data, "bound", p, float, cfg.bound)
        if cfg.bound <= 0:
            raise ConfigError(f"{p}.bound", f"must be positive, got {cfg.bound}")
        if "correlations" in data:
            cfg.correlations = [
                _typed(c, f"{p}.correlations[{i}]", str)
                for i, c in enumerate(_typed(data["correlations"], f"{p}.correlations", list))
            ]
        cfg.shots = _optional(data, "shots", p, int, 0)
        if cfg.shots < 0:
            raise ConfigError(f"{p}.shots", f"must be non-negative, got {cfg.shots}")
        cfg.preprocessing_blocks = _optional(data, "preprocessing_blocks", p, int, cfg.preprocessing_blocks)
        if cfg.preprocessing_blocks < 1:
            raise ConfigError(f"{p}.preprocessing_blocks", "must be at least 1")
        return cfg


@dataclass
class BenchConfig:
    repeats: int = 5

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "BenchConfig":
        _check_keys(data, {"repeats"}, "bench")
        repeats = _optional(data, "repeats", "bench", int, 5)
        if repeats < 1:
            raise ConfigError("bench.repeats", "must be at least 1")
        return cls(repeats)


def _optimizer_from_mapping(data: Mapping[str, Any], seed: int) -> OptimizerConfig:
    kinds = {f.name: (int if f.type in (int, "int") else float) for f in fields(OptimizerConfig)}
    kwargs = {}
    for key, value in data.items():
        if key not in kinds or key == "seed":
            raise ConfigError(f"optimizer.{key}", f"unknown field (expected one of {sorted(set(kinds) - {'seed'})})")
        kwargs[key] = _typed(value, f"optimizer.{key}", kinds[key])
    try:
        return OptimizerConfig(seed=seed, **kwargs)
    except ValueError as e:
        field_name = str(e).split()[0]
        raise ConfigError(f"optimizer.{field_name}", str(e)) from e


@dataclass
class ExperimentConfig:
    """Validated experiment description plus the bytes it was read from."""

    task: str
    seed: int
    output_dir: Path
    hamiltonian: HamiltonianConfig
    ansatz: Optional[AnsatzConfig]
    objective: ObjectiveConfig
    optimizer: OptimizerConfig
    thermal: ThermalConfig
    bench: BenchConfig
    source: Optional[Path] = None
    digest: str = ""

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: Path = Path(".")) -> "ExperimentConfig":
        _check_keys(
            data,
            {"task", "seed", "output_dir", "hamiltonian", "ansatz", "objective", "optimizer", "thermal", "bench"},
            "",
        )
        task = _require(data, "task", "", str)
        if task not in TASKS:
            raise ConfigError("task", f"unknown task {task!r}, expected one of {TASKS}")
        seed = _optional(data, "seed", "", int, 0)
        output_dir = base_dir / _optional(data, "output_dir", "", str, f"runs/{task}")
        if "hamiltonian" not in data:
            raise ConfigError("hamiltonian", "required table is missing")
        hamiltonian = HamiltonianConfig.from_mapping(_table(data, "hamiltonian"), base_dir)
        ansatz = None
        if task in ("vqe", "gibbs", "bench"):
            if "ansatz" not in data:
                raise ConfigError("ansatz", f"required table is missing for task {task!r}")
            ansatz = AnsatzConfig.from_mapping(_table(data, "ansatz"))
        objective = ObjectiveConfig.from_mapping(
            _table(data, "objective"), default_kind="renyi2" if task == "gibbs" else "energy"
        )
        if task == "gibbs" and objective.kind not in THERMAL_KINDS:
            raise ConfigError("objective.kind", f"gibbs task needs one of {THERMAL_KINDS}")
        if task == "vqe" and objective.kind in THERMAL_KINDS:
            raise ConfigError("objective.kind", "vqe task takes energy, obj1 or obj2")
        if task == "gibbs" and ansatz is not None and ansatz.builder != "thermal":
            raise ConfigError("ansatz.builder", "gibbs task needs the thermal builder")
        return cls(
            task=task,
            seed=seed,
            output_dir=output_dir,
            hamiltonian=hamiltonian,
            ansatz=ansatz,
            objective=objective,
            optimizer=_optimizer_from_mapping(_table(data, "optimizer"), seed),
            thermal=ThermalConfig.from_mapping(_table(data, "thermal")),
            bench=BenchConfig.from_mapping(_table(data, "bench")),
        )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate an experiment file.

    Relative paths inside the file resolve against the file's directory.

    Raises:
        ConfigError: Unreadable file, syntax error or schema violation.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from e
    try:
        if path.suffix == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError("config", f"{path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a table")
    cfg = ExperimentConfig.from_mapping(data, path.parent)
    cfg.source = path
    cfg.digest = hashlib.sha256(raw).hexdigest()
    logger.debug(f"loaded {cfg.task} config from {path} (sha256 {cfg.digest[:12]})")
    return cfg

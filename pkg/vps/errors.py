"""
Exception taxonomy for the vps package.

Every error carries the process exit code the CLI reports for it:
0 ok, 1 runtime failure, 2 configuration problem.
"""

from typing import Optional


class VPSError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(VPSError):
    """Experiment configuration failed validation."""

    exit_code = 2

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class HamiltonianParseError(VPSError, ValueError):
    """A Pauli-string Hamiltonian file could not be parsed."""

    exit_code = 2

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class CapacityError(VPSError):
    """Problem size exceeds what the dense simulator or eigensolver supports."""


class DegenerateProjectionError(VPSError):
    """Post-selection hit a branch with (numerically) zero probability."""

    def __init__(self, success_prob: float, threshold: float):
        self.success_prob = success_prob
        super().__init__(
            f"post-selection success probability {success_prob:.3e} is below {threshold:.0e}"
        )


class InvalidStateError(VPSError):
    """A density matrix or probability vector violates its invariants."""


class EvaluationError(VPSError):
    """An objective or its gradient evaluated to a non-finite value."""


class CampaignError(VPSError):
    """Every trial of a campaign failed."""


class ArtifactMissingError(VPSError):
    """An expected experiment artifact is not on disk."""

    def __init__(self, path, hint: Optional[str] = None):
        self.path = path
        message = f"missing artifact: {path}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)

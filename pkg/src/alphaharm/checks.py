"""Small record type shared by the verification routines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["CheckReport"]


def _plain(value):
    """Convert numpy scalars and arrays to JSON-friendly Python objects."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass
class CheckReport:
    """Outcome of a numerical identity check.

    Attributes
    ----------
    name : str
        What was checked.
    passed : bool
        Whether every asserted residual is below its tolerance.
    residuals : dict
        Named residuals (maxima over samples unless stated otherwise).
    tolerance : float
        Tolerance the asserted residuals were compared with.
    details : dict
        Extra diagnostics (inputs, hypotheses, verdicts).
    """

    name: str
    passed: bool
    residuals: dict = field(default_factory=dict)
    tolerance: float = float("nan")
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(
            {
                "name": self.name,
                "passed": bool(self.passed),
                "residuals": self.residuals,
                "tolerance": self.tolerance,
                "details": self.details,
            }
        )

"""Report records shared by the verification modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class EstimateReport:
    """One checked instance of an inequality.

    ``passed`` is derived, never stored: a report passes exactly when its
    normalized constant does not exceed the threshold.
    """

    name: str
    params: dict[str, Any]
    measured_sup: float
    normalized_constant: float
    threshold: float
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return math.isfinite(self.normalized_constant) and self.normalized_constant <= self.threshold

    def row(self) -> dict[str, Any]:
        out = {"name": self.name}
        out.update({f"param_{k}": v for k, v in self.params.items()})
        out.update(
            measured_sup=self.measured_sup,
            normalized_constant=self.normalized_constant,
            threshold=self.threshold,
            passed=self.passed,
        )
        out.update(self.extras)
        return out


@dataclass(frozen=True)
class SequenceReport:
    """A computed sequence, its normalized form and a boundedness verdict."""

    name: str
    values: list
    normalized: list[float]
    bound_constant: float
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.normalized) and max(self.normalized) <= self.bound_constant

# -*- coding: utf-8 -*-
"""
Costes, estimaciones de pago y reportes de desviación.

Todo el módulo está orientado a maximización: los costes de entrenamiento
(riesgo del servidor, coste terminal) se niegan al construir el `CostSpec`.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..utils.exceptions import InvalidDomainObjectError

# (t, x (n,d), u (n,d), m_t (d,)) -> (n,)
RunningRewardFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
# (x (n,d), m_T (d,)) -> (n,)
TerminalRewardFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CostSpec:
    name: str
    running: RunningRewardFn
    terminal: TerminalRewardFn
    constant: float = 0.0

    @classmethod
    def from_rewards(
        cls, name: str, running: RunningRewardFn, terminal: TerminalRewardFn
    ) -> "CostSpec":
        return cls(name=name, running=running, terminal=terminal)

    @classmethod
    def from_costs(
        cls,
        name: str,
        running_cost: RunningRewardFn,
        terminal_cost: TerminalRewardFn,
        constant: float = 0.0,
    ) -> "CostSpec":
        """Ingerir costes a minimizar: se almacenan negados."""
        return cls(
            name=name,
            running=lambda t, x, u, m: -running_cost(t, x, u, m),
            terminal=lambda x, m: -terminal_cost(x, m),
            constant=constant,
        )


@dataclass(frozen=True)
class PayoffEstimate:
    mean: float
    stderr: float
    paths: int
    seed: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.mean):
            raise InvalidDomainObjectError("PayoffEstimate", "media no finita")
        if not self.stderr >= 0:
            raise InvalidDomainObjectError("PayoffEstimate", "stderr negativo")

    def interval(self, k: float = 4.0) -> tuple[float, float]:
        return self.mean - k * self.stderr, self.mean + k * self.stderr

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "paths": self.paths, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class DeviationReport:
    """gap_i = J(perturbado_i) − J(baseline), con stderr pareado."""

    baseline: PayoffEstimate
    perturbed: List[PayoffEstimate]
    gaps: np.ndarray
    gap_stderr: np.ndarray
    labels: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        gaps = np.asarray(self.gaps, dtype=np.float64)
        stderr = np.asarray(self.gap_stderr, dtype=np.float64)
        n = len(self.perturbed)
        if gaps.shape != (n,) or stderr.shape != (n,) or (self.labels and len(self.labels) != n):
            raise InvalidDomainObjectError("DeviationReport", "longitudes inconsistentes")
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "gap_stderr", stderr)

    def no_profitable_deviation(self, k: float = 4.0) -> bool:
        """Ningún gap supera +k·stderr."""
        return bool(np.all(self.gaps <= k * self.gap_stderr))

    def max_normalized_gap(self) -> Optional[float]:
        if self.gaps.size == 0:
            return None
        scale = np.where(self.gap_stderr > 0, self.gap_stderr, np.inf)
        ratios = np.where(np.isfinite(scale), self.gaps / scale, np.where(self.gaps > 0, np.inf, 0.0))
        return float(np.max(ratios))

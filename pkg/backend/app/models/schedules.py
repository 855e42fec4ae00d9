# -*- coding: utf-8 -*-
"""
Malla temporal y calendario de control Λ_t.

`ControlSchedule` es constante a trozos: el intervalo i cubre
[breakpoints[i], breakpoints[i+1]) y lleva una ganancia diagonal Λ (d valores
en [0, lambda_max]) y un desplazamiento aditivo acotado por `offset_bound`.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..utils.exceptions import InvalidDomainObjectError

_TIME_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Horizonte [t0, T] con N pasos uniformes."""

    horizon: float
    steps: int
    t0: float = 0.0

    def __post_init__(self) -> None:
        if not self.horizon > self.t0:
            raise InvalidDomainObjectError("TimeGrid", "se requiere T > t0")
        if self.steps < 1:
            raise InvalidDomainObjectError("TimeGrid", "se requiere N >= 1")

    @property
    def dt(self) -> float:
        return (self.horizon - self.t0) / self.steps

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    @property
    def nodes(self) -> int:
        return self.steps + 1


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Λ_t diagonal constante a trozos con desplazamientos opcionales."""

    breakpoints: np.ndarray
    gains: np.ndarray
    offsets: Optional[np.ndarray] = None
    lambda_max: float = 10.0
    offset_bound: Optional[float] = None

    def __post_init__(self) -> None:
        breakpoints = np.asarray(self.breakpoints, dtype=np.float64)
        gains = np.atleast_2d(np.asarray(self.gains, dtype=np.float64))
        if breakpoints.ndim != 1 or breakpoints.size < 2:
            raise InvalidDomainObjectError("ControlSchedule", "se requieren >= 2 breakpoints")
        if np.any(np.diff(breakpoints) <= 0):
            raise InvalidDomainObjectError(
                "ControlSchedule", "breakpoints no estrictamente crecientes"
            )
        intervals = breakpoints.size - 1
        if gains.shape[0] != intervals:
            raise InvalidDomainObjectError(
                "ControlSchedule", "una fila de ganancias por intervalo", intervals=intervals
            )
        offsets = (
            np.zeros_like(gains)
            if self.offsets is None
            else np.atleast_2d(np.asarray(self.offsets, dtype=np.float64))
        )
        if offsets.shape != gains.shape:
            raise InvalidDomainObjectError("ControlSchedule", "offsets con forma distinta")
        if np.any(gains < 0) or np.any(gains > self.lambda_max):
            raise InvalidDomainObjectError(
                "ControlSchedule",
                "ganancia fuera de [0, lambda_max]",
                lambda_max=self.lambda_max,
            )
        if self.offset_bound is not None and np.any(np.abs(offsets) > self.offset_bound):
            raise InvalidDomainObjectError(
                "ControlSchedule", "offset fuera de cota", offset_bound=self.offset_bound
            )
        if not (np.all(np.isfinite(gains)) and np.all(np.isfinite(offsets))):
            raise InvalidDomainObjectError("ControlSchedule", "valores no finitos")
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def constant(
        cls,
        gain: float | Sequence[float],
        dim: int,
        t0: float,
        horizon: float,
        offset: float | Sequence[float] = 0.0,
        lambda_max: float = 10.0,
        offset_bound: Optional[float] = None,
        intervals: int = 1,
    ) -> "ControlSchedule":
        """Calendario con el mismo Λ y offset en `intervals` tramos iguales."""
        row = np.broadcast_to(np.asarray(gain, dtype=np.float64), (dim,))
        off = np.broadcast_to(np.asarray(offset, dtype=np.float64), (dim,))
        return cls(
            breakpoints=np.linspace(t0, horizon, intervals + 1),
            gains=np.tile(row, (intervals, 1)),
            offsets=np.tile(off, (intervals, 1)),
            lambda_max=lambda_max,
            offset_bound=offset_bound,
        )

    @property
    def dim(self) -> int:
        return int(self.gains.shape[1])

    @property
    def intervals(self) -> int:
        return int(self.gains.shape[0])

    def covers(self, grid: TimeGrid) -> bool:
        return bool(
            self.breakpoints[0] <= grid.t0 + _TIME_TOL
            and self.breakpoints[-1] >= grid.horizon - _TIME_TOL
        )

    def interval_index(self, times: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, times, side="right") - 1
        return np.clip(idx, 0, self.intervals - 1)

    def on_grid(self, grid: TimeGrid, include_terminal: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """Ganancias y offsets en el nodo izquierdo de cada paso: (N, d) cada uno."""
        if not self.covers(grid):
            raise InvalidDomainObjectError(
                "ControlSchedule",
                "el calendario no cubre el horizonte",
                t0=grid.t0,
                horizon=grid.horizon,
            )
        times = grid.times() if include_terminal else grid.times()[:-1]
        idx = self.interval_index(times)
        return self.gains[idx], self.offsets[idx]

    def refine(self, points: Sequence[float]) -> "ControlSchedule":
        """Insertar breakpoints sin cambiar la función representada."""
        inner = [p for p in points if self.breakpoints[0] < p < self.breakpoints[-1]]
        merged = np.unique(np.concatenate([self.breakpoints, np.asarray(inner, dtype=np.float64)]))
        idx = self.interval_index(merged[:-1])
        return ControlSchedule(
            breakpoints=merged,
            gains=self.gains[idx],
            offsets=self.offsets[idx],
            lambda_max=self.lambda_max,
            offset_bound=self.offset_bound,
        )

    def with_values(self, gains: np.ndarray, offsets: np.ndarray) -> "ControlSchedule":
        """Nuevo calendario con los valores recortados a las cotas de este."""
        clipped_gains = np.clip(gains, 0.0, self.lambda_max)
        clipped_offsets = (
            offsets
            if self.offset_bound is None
            else np.clip(offsets, -self.offset_bound, self.offset_bound)
        )
        return ControlSchedule(
            breakpoints=self.breakpoints,
            gains=clipped_gains,
            offsets=clipped_offsets,
            lambda_max=self.lambda_max,
            offset_bound=self.offset_bound,
        )

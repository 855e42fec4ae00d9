# -*- coding: utf-8 -*-
"""
Mallas 1-D espacio-tiempo y campos definidos sobre ellas.

`Grid1D.n_t` cuenta nodos temporales (incluye t0 y T), de modo que los campos
tienen forma (n_t, n_x).
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..utils.exceptions import InvalidDomainObjectError, StabilityError

STABILITY_SAFETY = 0.9
STABILITY_EPS = 1e-12
# El cierre cuadrático de bordes del HJB usa cuatro nodos.
MIN_SPATIAL_NODES = 4
NEGATIVE_DENSITY_TOL = 1e-12
MASS_TOL = 1e-8


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_x: int
    t0: float
    horizon: float
    n_t: int

    def __post_init__(self) -> None:
        if not self.x_min < self.x_max:
            raise InvalidDomainObjectError("Grid1D", "se requiere x_min < x_max")
        if self.n_x < MIN_SPATIAL_NODES:
            raise InvalidDomainObjectError(
                "Grid1D", f"se requieren n_x >= {MIN_SPATIAL_NODES} nodos", n_x=self.n_x
            )
        if self.n_t < 2:
            raise InvalidDomainObjectError("Grid1D", "se requieren n_t >= 2 nodos temporales")
        if not self.horizon > self.t0:
            raise InvalidDomainObjectError("Grid1D", "se requiere T > t0")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dt(self) -> float:
        return (self.horizon - self.t0) / (self.n_t - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t0, self.horizon, self.n_t)

    def stability_bound(self, sigma: float, max_drift: float, safety: float = STABILITY_SAFETY) -> float:
        """Cota Δt ≤ safety·Δx² / (σ² + 2Δx·max|b| + ε)."""
        dx = self.dx
        return safety * dx * dx / (sigma * sigma + 2.0 * dx * abs(max_drift) + STABILITY_EPS)

    def check_stability(self, sigma: float, max_drift: float, solver: str) -> None:
        bound = self.stability_bound(sigma, max_drift)
        if self.dt > bound * (1.0 + 1e-12):
            raise StabilityError(dt=self.dt, bound=bound, solver=solver)

    @classmethod
    def stable(
        cls,
        x_min: float,
        x_max: float,
        n_x: int,
        t0: float,
        horizon: float,
        sigma: float,
        max_drift: float,
        safety: float = STABILITY_SAFETY,
    ) -> "Grid1D":
        """Malla con el menor n_t que cumple la cota de estabilidad."""
        probe = cls(x_min, x_max, n_x, t0, horizon, 2)
        bound = probe.stability_bound(sigma, max_drift, safety)
        steps = max(1, math.ceil((horizon - t0) / bound))
        return cls(x_min, x_max, n_x, t0, horizon, steps + 1)

    @classmethod
    def from_spacing(
        cls,
        x_min: float,
        x_max: float,
        dx: float,
        t0: float,
        horizon: float,
        sigma: float,
        max_drift: float,
    ) -> "Grid1D":
        n_x = int(round((x_max - x_min) / dx)) + 1
        return cls.stable(x_min, x_max, n_x, t0, horizon, sigma, max_drift)


@dataclass(frozen=True)
class ControlSet:
    """
    Intervalo U discretizado uniformemente.

    Con `refine` el maximizador discreto se corrige con el vértice de la
    parábola por sus dos vecinos, acotado a ese tramo.
    """

    lower: float
    upper: float
    count: int = 201
    refine: bool = False

    def __post_init__(self) -> None:
        if self.count < 1:
            raise InvalidDomainObjectError("ControlSet", "se requiere al menos un control")
        if self.lower > self.upper or (self.count > 1 and self.lower == self.upper):
            raise InvalidDomainObjectError("ControlSet", "intervalo U vacío o degenerado")

    @property
    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lower], dtype=np.float64)
        return np.linspace(self.lower, self.upper, self.count)

    @property
    def max_abs(self) -> float:
        return max(abs(self.lower), abs(self.upper))


@dataclass(frozen=True, eq=False)
class GridValueFunction:
    grid: Grid1D
    values: np.ndarray
    boundary: str = "quadratic_extrapolation"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n_t, self.grid.n_x):
            raise InvalidDomainObjectError(
                "GridValueFunction", "forma distinta a (n_t, n_x)", shape=list(values.shape)
            )
        if not np.all(np.isfinite(values)):
            raise InvalidDomainObjectError("GridValueFunction", "valores no finitos")
        object.__setattr__(self, "values", values)

    def derivatives(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        """z = ∂_x v y γ = ∂_xx v del corte `node` (diferencias centradas)."""
        return spatial_derivatives(self.values[node], self.grid.dx)

    def at(self, t_node: int, x: float) -> float:
        return float(np.interp(x, self.grid.x, self.values[t_node]))


@dataclass(frozen=True, eq=False)
class DensityGrid:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n_t, self.grid.n_x):
            raise InvalidDomainObjectError(
                "DensityGrid", "forma distinta a (n_t, n_x)", shape=list(values.shape)
            )
        if values.min() < -NEGATIVE_DENSITY_TOL:
            raise InvalidDomainObjectError("DensityGrid", "densidad negativa", minimum=float(values.min()))
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class ControlGrid:
    grid: Grid1D
    controls: ControlSet
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n_t, self.grid.n_x):
            raise InvalidDomainObjectError(
                "ControlGrid", "forma distinta a (n_t, n_x)", shape=list(values.shape)
            )
        if values.min() < self.controls.lower or values.max() > self.controls.upper:
            raise InvalidDomainObjectError("ControlGrid", "control fuera de U")
        object.__setattr__(self, "values", values)

    def feedback(self, t: float, x: np.ndarray) -> np.ndarray:
        """u*(t, x): nodo temporal más cercano, interpolación lineal en x."""
        node = int(round((t - self.grid.t0) / self.grid.dt))
        node = min(max(node, 0), self.grid.n_t - 1)
        return np.interp(x, self.grid.x, self.values[node])


@dataclass(frozen=True)
class LqProblem:
    """f(x,u) = −½(x²+u²), b = u, g(x) = −½ q_T x²."""

    sigma: float = 1.0
    terminal_weight: float = 1.0
    horizon: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise InvalidDomainObjectError("LqProblem", "se requiere σ > 0")
        if self.terminal_weight < 0:
            raise InvalidDomainObjectError("LqProblem", "se requiere q_T >= 0")
        if self.horizon <= 0:
            raise InvalidDomainObjectError("LqProblem", "se requiere T > 0")


RunningReward = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
TerminalReward = Callable[[np.ndarray], np.ndarray]
DriftField = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ControlProblem:
    """
    Problema de control 1-D en orientación de maximización.

    running_reward(t, x, u, m) y drift(t, x, u) se evalúan con broadcasting
    de numpy; m es la media de la densidad en t (cero si no hay acoplamiento).
    """

    running_reward: RunningReward
    terminal_reward: TerminalReward
    drift: DriftField
    sigma: float
    controls: ControlSet
    density_coupled: bool = False
    name: str = "custom"
    lq: Optional[LqProblem] = None


def spatial_derivatives(v: np.ndarray, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """Derivadas centradas; en los bordes, fórmulas de segundo orden unilaterales."""
    z = np.gradient(v, dx, edge_order=2)
    gamma = np.empty_like(v)
    gamma[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dx * dx)
    gamma[0] = gamma[1]
    gamma[-1] = gamma[-2]
    return z, gamma

# -*- coding: utf-8 -*-
"""
Medidas empíricas, flujos de medidas y leyes iniciales.

Un flujo se guarda sólo por sus marginales en los nodos de la malla: partículas
(K, n, d) con pesos (n,) comunes a todos los nodos.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..utils.exceptions import DimensionMismatchError, EmptyInputError, InvalidDomainObjectError
from ..utils.validators import ensure_simplex


def _as_particles(values: np.ndarray) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim == 1:
        array = array[:, None]
    return array


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        particles = _as_particles(self.particles)
        weights = np.asarray(self.weights, dtype=np.float64)
        if particles.ndim != 2 or particles.shape[0] == 0:
            raise EmptyInputError("EmpiricalMeasure.particles")
        if weights.shape != (particles.shape[0],):
            raise DimensionMismatchError(
                "EmpiricalMeasure.weights", expected=(particles.shape[0],), actual=weights.shape
            )
        ensure_simplex(weights, "EmpiricalMeasure")
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, particles: np.ndarray) -> "EmpiricalMeasure":
        array = _as_particles(particles)
        if array.shape[0] == 0:
            raise EmptyInputError("EmpiricalMeasure.particles")
        return cls(array, np.full(array.shape[0], 1.0 / array.shape[0]))

    @property
    def size(self) -> int:
        return int(self.particles.shape[0])

    @property
    def dim(self) -> int:
        return int(self.particles.shape[1])

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def mean(self) -> np.ndarray:
        return self.weights @ self.particles

    def variance(self) -> np.ndarray:
        centered = self.particles - self.mean()
        return self.weights @ (centered**2)

    def project(self, direction: np.ndarray) -> "EmpiricalMeasure":
        """Medida 1-D de las proyecciones ⟨x, direction⟩."""
        return EmpiricalMeasure(self.particles @ np.asarray(direction), self.weights)


@dataclass(frozen=True, eq=False)
class MeasureFlow:
    """Marginales μ_t en los nodos `times`."""

    times: np.ndarray
    particles: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        particles = np.asarray(self.particles, dtype=np.float64)
        if particles.ndim == 2:
            particles = particles[:, :, None]
        if particles.ndim != 3 or particles.shape[0] != times.shape[0]:
            raise InvalidDomainObjectError(
                "MeasureFlow", "se requieren partículas (K, n, d) con K nodos"
            )
        if particles.shape[1] == 0:
            raise EmptyInputError("MeasureFlow.particles")
        n = particles.shape[1]
        weights = (
            np.full(n, 1.0 / n)
            if self.weights is None
            else np.asarray(self.weights, dtype=np.float64)
        )
        if weights.shape != (n,):
            raise DimensionMismatchError("MeasureFlow.weights", expected=(n,), actual=weights.shape)
        ensure_simplex(weights, "MeasureFlow")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)

    @property
    def nodes(self) -> int:
        return int(self.times.shape[0])

    @property
    def size(self) -> int:
        return int(self.particles.shape[1])

    @property
    def dim(self) -> int:
        return int(self.particles.shape[2])

    def at(self, node: int) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.particles[node], self.weights)

    def terminal(self) -> EmpiricalMeasure:
        return self.at(self.nodes - 1)

    def means(self) -> np.ndarray:
        """Media de cada marginal, forma (K, d)."""
        return np.einsum("n,knd->kd", self.weights, self.particles)

    def variances(self) -> np.ndarray:
        centered = self.particles - self.means()[:, None, :]
        return np.einsum("n,knd->kd", self.weights, centered**2)

    @classmethod
    def frozen(cls, times: np.ndarray, particles: np.ndarray) -> "MeasureFlow":
        """Flujo constante en el tiempo igual a la nube `particles`."""
        cloud = _as_particles(particles)
        return cls(times, np.broadcast_to(cloud, (len(times), *cloud.shape)).copy())


class GradientMeasureFlow(MeasureFlow):
    """Flujo μ^g_t cuyas partículas son vectores gradiente."""


class InitialLaw(ABC):
    """Ley de los estados iniciales."""

    dim: int = 1

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Devolver n muestras con forma (n, dim)."""


@dataclass(frozen=True)
class GaussianLaw(InitialLaw):
    mean: float = 0.0
    std: float = 1.0
    dim: int = 1

    def __post_init__(self) -> None:
        if self.std < 0:
            raise InvalidDomainObjectError("GaussianLaw", "std debe ser >= 0")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal((n, self.dim))


@dataclass(frozen=True)
class PointMassLaw(InitialLaw):
    value: float = 0.0
    dim: int = 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.full((n, self.dim), self.value, dtype=np.float64)

# -*- coding: utf-8 -*-
"""
Trayectorias de las SDEs de entrenamiento.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional

import numpy as np

from ..utils.exceptions import InvalidDomainObjectError
from .schedules import ControlSchedule
from .tasks import TaskSpec


class ClientDynamics(NamedTuple):
    """Estado inicial, tarea y calendario Λ de un cliente del sistema acoplado."""

    w0: np.ndarray
    task: TaskSpec
    schedule: ControlSchedule


class NoiseMode(str, Enum):
    """Estructura del ruido browniano del sistema de clientes."""

    INDEPENDENT = "independent"
    SHARED = "shared"


@dataclass(frozen=True, eq=False)
class SdeTrajectory:
    """Estados (N+1, d) de un cliente o trayectoria sobre la malla temporal."""

    times: np.ndarray
    states: np.ndarray
    seed: int
    client_id: int = 0

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if states.shape[0] != np.asarray(self.times).shape[0]:
            raise InvalidDomainObjectError(
                "SdeTrajectory", "un estado por nodo temporal", client_id=self.client_id
            )
        if not np.all(np.isfinite(states)):
            raise InvalidDomainObjectError(
                "SdeTrajectory", "estados no finitos", client_id=self.client_id
            )
        object.__setattr__(self, "states", states)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])


@dataclass(frozen=True, eq=False)
class ParticleSystemResult:
    """
    Salida del sistema acoplado de p clientes.

    Attributes:
        clients: una trayectoria por cliente
        server: servidor implícito, integra −Σ α_j g_j desde la media α inicial
        consensus: media α de los estados de los clientes en cada nodo
        aggregate: Σ α_j g_j evaluado en cada paso, forma (N, d)
    """

    clients: List[SdeTrajectory]
    server: SdeTrajectory
    consensus: SdeTrajectory
    aggregate: np.ndarray
    alphas: np.ndarray
    noise_mode: Optional[NoiseMode] = None

    def states(self) -> np.ndarray:
        """Estados de todos los clientes, forma (N+1, p, d)."""
        return np.stack([c.states for c in self.clients], axis=1)

# -*- coding: utf-8 -*-
"""
Tipos de las rondas federadas: hiperparámetros, estado de cliente y log de ronda.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..utils.exceptions import InvalidDomainObjectError
from .tasks import TaskSpec


class AggregationWeighting(str, Enum):
    """Ponderación del promedio del servidor"""

    SAMPLE_PROPORTIONAL = "sample_proportional"
    UNIFORM = "uniform"


class FederatedAlgorithm(str, Enum):
    FEDAVG = "fedavg"
    FEDSGD = "fedsgd"


class FedHyperparameters(BaseModel):
    """Entradas del bucle federado compartidas por la config y el servicio."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    client_fraction: float = Field(
        default=1.0, gt=0.0, le=1.0, description="Fracción C de clientes por ronda"
    )
    local_epochs: int = Field(default=1, ge=1, description="Épocas locales E")
    batch_size: Optional[int] = Field(
        default=None, ge=1, description="Tamaño de minibatch; None = batch completo"
    )
    learning_rate: float = Field(default=0.1, ge=0.0, description="Tasa de aprendizaje η")
    rounds: int = Field(default=100, ge=1, description="Presupuesto de rondas R")
    aggregation_weighting: AggregationWeighting = Field(
        default=AggregationWeighting.SAMPLE_PROPORTIONAL,
        description="Ponderación del promedio del servidor",
    )
    risk_threshold: Optional[float] = Field(
        default=None, ge=0.0, description="Parada temprana si el riesgo cae por debajo"
    )


class FedConfig(FedHyperparameters):
    """Hiperparámetros más semilla y paralelismo."""

    seed: int = Field(default=0, description="Semilla maestra")
    threads: int = Field(default=1, ge=1, description="Hilos para ClientUpdate")


@dataclass(frozen=True, eq=False)
class ClientState:
    """Cliente simulado: id, pesos actuales, tarea y conteo de muestras."""

    client_id: int
    weights: np.ndarray
    task: TaskSpec
    sample_count: int = 1

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise InvalidDomainObjectError(
                "ClientState", "sample_count debe ser >= 1", client_id=self.client_id
            )


@dataclass(frozen=True, eq=False)
class RoundLog:
    round: int
    server_weights: np.ndarray
    server_risk: float
    selected: Tuple[int, ...]

    def __post_init__(self) -> None:
        # tolerancia para redondeo de formas cuadráticas semidefinidas
        if not np.isfinite(self.server_risk) or self.server_risk < -1e-12:
            raise InvalidDomainObjectError(
                "RoundLog", "riesgo no finito o negativo", round=self.round
            )

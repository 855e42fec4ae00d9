# -*- coding: utf-8 -*-
"""
🔁 Rondas federadas: FedAvg y FedSGD.

Las actualizaciones de los clientes de una ronda son independientes y pueden
ejecutarse en hilos; cada cliente usa su propio flujo aleatorio
(semilla, ronda, cliente) y la agregación es una reducción en orden fijo, así
que el resultado no depende del número de hilos.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from joblib import Parallel, delayed

from ..core.rng import StreamTag, stream
from ..models.federated import (
    AggregationWeighting,
    ClientState,
    FedConfig,
    FederatedAlgorithm,
    RoundLog,
)
from ..models.tasks import MixtureWeights, TaskSpec, WeightVector
from ..utils.exceptions import DivergenceError, EmptyInputError, InvalidDomainObjectError
from ..utils.validators import as_vector
from .task_model import grad, mixture_risk

logger = structlog.get_logger(__name__)


def selection_count(client_fraction: float, clients: int) -> int:
    """⌈C·p⌉; el redondeo previo evita que el error de coma flotante sume un cliente."""
    if clients < 1:
        raise EmptyInputError("clients")
    count = math.ceil(round(client_fraction * clients, 12))
    if not 1 <= count <= clients:
        raise InvalidDomainObjectError(
            "FedConfig", "⌈C·p⌉ debe estar en [1, p]", client_fraction=client_fraction
        )
    return count


def aggregation_weights(
    clients: Sequence[ClientState], weighting: AggregationWeighting
) -> np.ndarray:
    if weighting is AggregationWeighting.UNIFORM:
        return np.full(len(clients), 1.0 / len(clients))
    counts = np.array([c.sample_count for c in clients], dtype=np.float64)
    return counts / counts.sum()


def federation_weights(clients: Sequence[ClientState], cfg: FedConfig) -> MixtureWeights:
    return MixtureWeights(aggregation_weights(clients, cfg.aggregation_weighting))


def _effective_batch(client: ClientState, cfg: FedConfig) -> int:
    data = client.task.dataset
    m = data.size if data is not None else client.sample_count
    if cfg.batch_size is None:
        return m
    if cfg.batch_size > m:
        logger.warning(
            "batch_size_clamped",
            client_id=client.client_id,
            batch_size=cfg.batch_size,
            samples=m,
        )
        return m
    return cfg.batch_size


def client_update(
    client: ClientState, server_w: WeightVector, cfg: FedConfig, round_index: int
) -> WeightVector:
    """
    E épocas de descenso por minibatches a partir de los pesos del servidor.

    Las tareas cuadráticas no tienen muestras: cada época es un paso exacto
    w ← w − η A(w − θ).
    """
    w = as_vector(server_w, "server_weights", client.task.dim).copy()
    eta = cfg.learning_rate
    if client.task.is_quadratic:
        for _ in range(cfg.local_epochs):
            w = w - eta * grad(w, client.task)
            _ensure_client_finite(w, client, round_index)
        return w

    batch = _effective_batch(client, cfg)
    m = client.task.dataset.size  # type: ignore[union-attr]
    rng = stream(cfg.seed, StreamTag.CLIENT_BATCHES, round_index, client.client_id)
    for _ in range(cfg.local_epochs):
        order = rng.permutation(m) if batch < m else np.arange(m)
        for start in range(0, m, batch):
            indices = order[start : start + batch]
            w = w - eta * grad(w, client.task, indices if batch < m else None)
        _ensure_client_finite(w, client, round_index)
    return w


def _ensure_client_finite(w: np.ndarray, client: ClientState, round_index: int) -> None:
    if not np.all(np.isfinite(w)):
        raise DivergenceError("client_update", client_id=client.client_id, round=round_index)


def _server_risk(
    w: np.ndarray, tasks: Sequence[TaskSpec], mixture: MixtureWeights, round_index: int
) -> float:
    value = mixture_risk(w, tasks, mixture)
    if not np.isfinite(value):
        raise DivergenceError("server_risk", round=round_index)
    return value


def select_clients(cfg: FedConfig, clients: int, round_index: int) -> List[int]:
    n = selection_count(cfg.client_fraction, clients)
    rng = stream(cfg.seed, StreamTag.CLIENT_SELECTION, round_index)
    return sorted(int(i) for i in rng.choice(clients, size=n, replace=False))


def fedavg_round(
    clients: Sequence[ClientState],
    server_w: WeightVector,
    cfg: FedConfig,
    round_index: int,
) -> Tuple[WeightVector, RoundLog]:
    """Una ronda de FedAvg: selección, ClientUpdate en paralelo y promedio ponderado."""
    if not clients:
        raise EmptyInputError("clients")
    chosen = select_clients(cfg, len(clients), round_index)
    updates = Parallel(n_jobs=cfg.threads, prefer="threads")(
        delayed(client_update)(clients[i], server_w, cfg, round_index) for i in chosen
    )
    selected = [clients[i] for i in chosen]
    weights = aggregation_weights(selected, cfg.aggregation_weighting)
    new_w = weights @ np.stack(updates)
    risk = _server_risk(new_w, [c.task for c in clients], federation_weights(clients, cfg), round_index)
    log = RoundLog(
        round=round_index,
        server_weights=new_w,
        server_risk=risk,
        selected=tuple(clients[i].client_id for i in chosen),
    )
    logger.debug("fedavg_round_completed", round=round_index, risk=risk, selected=len(chosen))
    return new_w, log


def fedsgd_round(
    clients: Sequence[ClientState],
    server_w: WeightVector,
    cfg: FedConfig,
    round_index: Optional[int] = None,
) -> WeightVector:
    """w ← w − η Σ_k α_k ∇L_k(w), con α según `aggregation_weighting`."""
    if not clients:
        raise EmptyInputError("clients")
    w = as_vector(server_w, "server_weights", clients[0].task.dim)
    alphas = aggregation_weights(clients, cfg.aggregation_weighting)
    gradients = np.stack([grad(w, c.task) for c in clients])
    new_w = w - cfg.learning_rate * (alphas @ gradients)
    if not np.all(np.isfinite(new_w)):
        raise DivergenceError("fedsgd_round", round=round_index)
    return new_w


def run_federated(
    clients: Sequence[ClientState],
    cfg: FedConfig,
    algorithm: FederatedAlgorithm,
    initial_weights: Optional[WeightVector] = None,
) -> List[RoundLog]:
    """Bucle de R rondas (o hasta `risk_threshold`); determinista dada la semilla."""
    if not clients:
        raise EmptyInputError("clients")
    dim = clients[0].task.dim
    w = np.zeros(dim) if initial_weights is None else as_vector(initial_weights, "initial_weights", dim)
    tasks = [c.task for c in clients]
    mixture = federation_weights(clients, cfg)
    logs: List[RoundLog] = []
    for r in range(1, cfg.rounds + 1):
        if algorithm is FederatedAlgorithm.FEDAVG:
            w, log = fedavg_round(clients, w, cfg, r)
        else:
            w = fedsgd_round(clients, w, cfg, r)
            log = RoundLog(
                round=r,
                server_weights=w,
                server_risk=_server_risk(w, tasks, mixture, r),
                selected=tuple(c.client_id for c in clients),
            )
        logs.append(log)
        if cfg.risk_threshold is not None and log.server_risk <= cfg.risk_threshold:
            logger.info("risk_threshold_reached", round=r, risk=log.server_risk)
            break
    logger.info(
        "federated_run_completed",
        algorithm=algorithm.value,
        rounds=len(logs),
        final_risk=logs[-1].server_risk,
    )
    return logs


def clients_from_tasks(tasks: Sequence, initial_weights: Optional[WeightVector] = None) -> List[ClientState]:
    """Construir ClientState con id = índice y m_k de cada tarea."""
    states = []
    for k, task in enumerate(tasks):
        w0 = np.zeros(task.dim) if initial_weights is None else np.asarray(initial_weights, dtype=np.float64)
        states.append(ClientState(client_id=k, weights=w0, task=task, sample_count=task.sample_count))
    return states

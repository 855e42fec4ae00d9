# -*- coding: utf-8 -*-
"""
📈 Integración Euler–Maruyama de las dinámicas de entrenamiento.

Convención de signo: todas las derivas descienden el riesgo,
dw = (−Λ∇L + offset − agregado) dt + σ dW.

Formas:
    - estados de un lote de trayectorias: (n, d)
    - incrementos brownianos: (N, n, m), con m = d salvo σ matricial (d, m)
    - estados integrados: (N+1, n, d)
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from ..core.rng import StreamTag, brownian_increments, shared_increments
from ..models.schedules import ControlSchedule, TimeGrid
from ..models.tasks import MixtureWeights, TaskSpec, WeightVector
from ..models.trajectories import (
    ClientDynamics,
    NoiseMode,
    ParticleSystemResult,
    SdeTrajectory,
)
from ..utils.exceptions import DimensionMismatchError, DivergenceError, InvalidDomainObjectError
from ..utils.validators import ensure_same_length
from .task_model import grad_batch

logger = structlog.get_logger(__name__)

Diffusion = Union[float, np.ndarray]
# (step, t, X (n, d)) -> deriva (n, d)
DriftFunction = Callable[[int, float, np.ndarray], np.ndarray]


# === TIPOS DE DERIVA ===


class DriftKind(ABC):
    """Deriva evaluada a partir del gradiente local y del calendario Λ."""

    @abstractmethod
    def evaluate(
        self, step: int, gradients: np.ndarray, gains: np.ndarray, offsets: np.ndarray
    ) -> np.ndarray:
        """Deriva (n, d) en el paso `step`."""


@dataclass(frozen=True)
class PlainSgd(DriftKind):
    """SGD como SDE: dw = −∇L dt + σ dW (ignora Λ)."""

    def evaluate(self, step, gradients, gains, offsets):
        return -gradients


@dataclass(frozen=True)
class Controlled(DriftKind):
    """Control genérico: dw = −b(∇L, Λ) dt."""

    control_map: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def evaluate(self, step, gradients, gains, offsets):
        return -np.asarray(self.control_map(gradients, gains), dtype=np.float64)


@dataclass(frozen=True)
class LinearControlled(DriftKind):
    """Λ diagonal: dw = (−Λ∇L + offset) dt."""

    def evaluate(self, step, gradients, gains, offsets):
        return -gains * gradients + offsets


@dataclass(frozen=True, eq=False)
class CoupledFederated(DriftKind):
    """Jugador representativo: dw = (−Λ∇L + offset − a_t) dt con a_t dado (N, d)."""

    aggregate: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))

    def evaluate(self, step, gradients, gains, offsets):
        return -gains * gradients + offsets - self.aggregate[step]


# === PASO ELEMENTAL ===


def noise_dim(sigma: Diffusion, dim: int) -> int:
    """Dimensión m del browniano que consume σ."""
    array = np.asarray(sigma, dtype=np.float64)
    return int(array.shape[1]) if array.ndim == 2 else dim


def apply_diffusion(noise: np.ndarray, sigma: Diffusion) -> np.ndarray:
    """σ·dW para σ escalar, diagonal (d,) o matricial (d, m)."""
    array = np.asarray(sigma, dtype=np.float64)
    if array.ndim == 2:
        return noise @ array.T
    return noise * array


def euler_maruyama_step(
    w: WeightVector,
    drift: np.ndarray,
    sigma: Diffusion,
    dt: float,
    noise: np.ndarray,
) -> WeightVector:
    """
    Un paso w + b·Δt + σ·ΔW.

    Args:
        w: estado actual, (d,) o lote (n, d)
        drift: deriva evaluada en w, misma forma que w
        sigma: escalar, (d,) diagonal o (d, m)
        dt: paso temporal positivo
        noise: incrementos N(0, Δt) de dimensión m

    Raises:
        DivergenceError: si el resultado no es finito
    """
    if not dt > 0:
        raise InvalidDomainObjectError("TimeGrid", "se requiere Δt > 0", dt=dt)
    w = np.asarray(w, dtype=np.float64)
    drift = np.asarray(drift, dtype=np.float64)
    if drift.shape != w.shape:
        raise DimensionMismatchError("drift", expected=w.shape, actual=drift.shape)
    out = w + drift * dt + apply_diffusion(np.asarray(noise, dtype=np.float64), sigma)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("euler_maruyama_step")
    return out


# === INTEGRADORES ===


def integrate_drift_field(
    x0: np.ndarray,
    drift_fn: DriftFunction,
    sigma: Diffusion,
    grid: TimeGrid,
    increments: np.ndarray,
    where: str = "integrate_drift_field",
    path_ids: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    March Euler–Maruyama genérico sobre un campo de deriva.

    Returns:
        Estados (N+1, n, d)
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    n, d = x0.shape
    expected = (grid.steps, n, noise_dim(sigma, d))
    if increments.shape != expected:
        raise DimensionMismatchError("increments", expected=expected, actual=increments.shape)
    times = grid.times()
    dt = grid.dt
    states = np.empty((grid.steps + 1, n, d), dtype=np.float64)
    states[0] = x0
    for k in range(grid.steps):
        current = states[k]
        nxt = current + drift_fn(k, times[k], current) * dt + apply_diffusion(increments[k], sigma)
        if not np.all(np.isfinite(nxt)):
            row = int(np.argmax(~np.all(np.isfinite(nxt), axis=1)))
            path = int(path_ids[row]) if path_ids is not None else row
            raise DivergenceError(where, path_id=path, step=k + 1)
        states[k + 1] = nxt
    return states


def path_increments(
    seed: int,
    ids: Sequence[int],
    grid: TimeGrid,
    sigma: Diffusion,
    dim: int,
    prefix: Sequence[int] = (),
) -> np.ndarray:
    """Incrementos de ruido de las trayectorias `ids`, cada una con su flujo."""
    return brownian_increments(
        seed, StreamTag.SDE_NOISE, ids, grid.steps, noise_dim(sigma, dim), grid.dt, prefix
    )


def _schedule_drift(task: TaskSpec, kind: DriftKind, schedule: ControlSchedule, grid: TimeGrid) -> DriftFunction:
    if schedule.dim != task.dim:
        raise DimensionMismatchError("schedule", expected=task.dim, actual=schedule.dim)
    gains, offsets = schedule.on_grid(grid)

    def drift(step: int, t: float, states: np.ndarray) -> np.ndarray:
        return kind.evaluate(step, grad_batch(states, task), gains[step], offsets[step])

    return drift


def integrate_paths(
    x0: np.ndarray,
    task: TaskSpec,
    kind: DriftKind,
    schedule: ControlSchedule,
    sigma: Diffusion,
    grid: TimeGrid,
    seed: int,
    paths: Optional[int] = None,
    increments: Optional[np.ndarray] = None,
    path_ids: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    Trayectorias i.i.d. de la misma dinámica, vectorizadas.

    `x0` puede ser un único estado (d,), que se replica `paths` veces, o un
    lote (n, d). La trayectoria j usa el flujo (seed, SDE_NOISE, j), igual que
    el cliente j en `integrate_particle_system`.
    """
    start = np.asarray(x0, dtype=np.float64)
    if start.ndim <= 1:
        start = np.tile(np.atleast_1d(start), (paths or 1, 1))
    n = start.shape[0]
    if start.shape[1] != task.dim:
        raise DimensionMismatchError("w0", expected=task.dim, actual=start.shape[1])
    ids = list(range(n)) if path_ids is None else list(path_ids)
    if increments is None:
        increments = path_increments(seed, ids, grid, sigma, task.dim)
    drift = _schedule_drift(task, kind, schedule, grid)
    return integrate_drift_field(start, drift, sigma, grid, increments, "integrate_paths", ids)


def integrate_trajectory(
    w0: WeightVector,
    task: TaskSpec,
    kind: DriftKind,
    schedule: ControlSchedule,
    sigma: Diffusion,
    grid: TimeGrid,
    seed: int,
    client_id: int = 0,
    increments: Optional[np.ndarray] = None,
) -> SdeTrajectory:
    """Una trayectoria; con σ=0 es Euler explícito de dw = −Λ∇L dt."""
    if not schedule.covers(grid):
        raise InvalidDomainObjectError("ControlSchedule", "el calendario no cubre el horizonte")
    if increments is not None:
        increments = np.asarray(increments, dtype=np.float64)
        if increments.ndim == 2:
            increments = increments[:, None, :]
    states = integrate_paths(
        np.atleast_1d(np.asarray(w0, dtype=np.float64))[None, :],
        task,
        kind,
        schedule,
        sigma,
        grid,
        seed,
        increments=increments,
        path_ids=[client_id],
    )
    return SdeTrajectory(times=grid.times(), states=states[:, 0, :], seed=seed, client_id=client_id)


def _client_gradients(states: np.ndarray, tasks: Sequence[TaskSpec]) -> np.ndarray:
    if all(task.is_quadratic for task in tasks):
        centers = np.stack([task.center for task in tasks])
        curvatures = np.stack([task.curvature for task in tasks])
        return np.einsum("pij,pj->pi", curvatures, states - centers)
    return np.stack([grad_batch(states[k : k + 1], task)[0] for k, task in enumerate(tasks)])


def integrate_particle_system(
    clients: Sequence[ClientDynamics],
    alphas: MixtureWeights,
    sigma: Diffusion,
    grid: TimeGrid,
    seed: int,
    noise_mode: NoiseMode = NoiseMode.INDEPENDENT,
    prefix: Sequence[int] = (),
) -> ParticleSystemResult:
    """
    Sistema federado acoplado de p clientes.

    Cada cliente sigue dw_k = (−Λ_k g_k + offset_k − Σ_j α_j g_j) dt + σ dW_k,
    con el agregado recalculado en cada paso a partir de los estados actuales.
    El servidor implícito integra ds = −Σ_j α_j g_j dt desde s_0 = Σ α_j w_j(0).
    `prefix` separa réplicas independientes del mismo sistema.
    """
    ensure_same_length(clients, alphas.alphas, "mixture weights")
    tasks = [c.task for c in clients]
    dim = tasks[0].dim
    if any(task.dim != dim for task in tasks):
        raise DimensionMismatchError("clients", expected=dim, actual=[t.dim for t in tasks])
    p = len(clients)
    alpha = alphas.alphas
    schedules = [c.schedule.on_grid(grid) for c in clients]
    gains = np.stack([g for g, _ in schedules], axis=1)  # (N, p, d)
    offsets = np.stack([o for _, o in schedules], axis=1)

    m = noise_dim(sigma, dim)
    if noise_mode is NoiseMode.SHARED:
        common = shared_increments(seed, grid.steps, m, grid.dt, prefix)
        increments = np.broadcast_to(common[:, None, :], (grid.steps, p, m))
    else:
        increments = path_increments(seed, range(p), grid, sigma, dim, prefix)

    dt = grid.dt
    states = np.empty((grid.steps + 1, p, dim), dtype=np.float64)
    states[0] = np.stack([np.asarray(c.w0, dtype=np.float64) for c in clients])
    server = np.empty((grid.steps + 1, dim), dtype=np.float64)
    server[0] = alpha @ states[0]
    aggregate = np.empty((grid.steps, dim), dtype=np.float64)

    for k in range(grid.steps):
        gradients = _client_gradients(states[k], tasks)
        aggregate[k] = alpha @ gradients
        drift = -gains[k] * gradients + offsets[k] - aggregate[k]
        nxt = states[k] + drift * dt + apply_diffusion(increments[k], sigma)
        if not np.all(np.isfinite(nxt)):
            client = int(np.argmax(~np.all(np.isfinite(nxt), axis=1)))
            raise DivergenceError("integrate_particle_system", client_id=client, step=k + 1)
        states[k + 1] = nxt
        server[k + 1] = server[k] - dt * aggregate[k]

    times = grid.times()
    trajectories = [
        SdeTrajectory(times=times, states=states[:, k, :], seed=seed, client_id=k) for k in range(p)
    ]
    logger.debug("particle_system_integrated", clients=p, steps=grid.steps, noise_mode=noise_mode.value)
    return ParticleSystemResult(
        clients=trajectories,
        server=SdeTrajectory(times=times, states=server, seed=seed, client_id=-1),
        consensus=SdeTrajectory(
            times=times, states=np.einsum("p,npd->nd", alpha, states), seed=seed, client_id=-1
        ),
        aggregate=aggregate,
        alphas=alpha,
        noise_mode=noise_mode,
    )


def trajectories_frame(result: ParticleSystemResult, stride: int = 1) -> pd.DataFrame:
    """
    Trayectorias de los clientes en formato largo: `t`, `client_id`, `dim`, `value`.

    Se conserva uno de cada `stride` nodos temporales y siempre el último.
    """
    if stride < 1:
        raise InvalidDomainObjectError("trajectories_frame", "stride debe ser >= 1", stride=stride)
    states = result.states()
    nodes = np.unique(np.r_[np.arange(0, states.shape[0], stride), states.shape[0] - 1])
    picked = states[nodes]  # (n, p, d)
    n, p, d = picked.shape
    times = result.clients[0].times[nodes]
    return pd.DataFrame(
        {
            "t": np.repeat(times, p * d),
            "client_id": np.tile(np.repeat(np.arange(p), d), n),
            "dim": np.tile(np.arange(d), n * p),
            "value": picked.reshape(-1),
        }
    )


# === ORDEN FUERTE ===


@dataclass(frozen=True)
class StrongOrderResult:
    steps: Tuple[int, ...]
    errors: Tuple[float, ...]
    order: float


def strong_order_study(
    sigma: float = 0.5,
    w0: float = 1.0,
    horizon: float = 1.0,
    paths: int = 200,
    steps: Sequence[int] = (250, 500, 1000, 2000),
    fine_factor: int = 8,
    seed: int = 0,
) -> StrongOrderResult:
    """
    Orden fuerte observado de Euler–Maruyama en dw = −w dt + σ dW.

    La solución de referencia usa la recursión exacta sobre una malla fina,
    w_{i+1} = e^{−δ} w_i + σ (1 − e^{−δ})/δ · ΔW_i, con los mismos incrementos
    que se suman por bloques para cada malla gruesa.
    """
    fine_steps = max(steps) * fine_factor
    if any(fine_steps % n for n in steps):
        raise InvalidDomainObjectError("StrongOrderStudy", "cada N debe dividir la malla fina")
    fine = TimeGrid(horizon=horizon, steps=fine_steps)
    noise = brownian_increments(seed, StreamTag.SDE_NOISE, range(paths), fine_steps, 1, fine.dt)[:, :, 0]

    delta = fine.dt
    decay = np.exp(-delta)
    weight = sigma * (1.0 - decay) / delta
    exact = np.full(paths, w0, dtype=np.float64)
    for i in range(fine_steps):
        exact = decay * exact + weight * noise[i]

    errors: List[float] = []
    for n in steps:
        dt = horizon / n
        coarse = noise.reshape(n, fine_steps // n, paths).sum(axis=1)
        w = np.full(paths, w0, dtype=np.float64)
        for k in range(n):
            w = w - w * dt + sigma * coarse[k]
        errors.append(float(np.mean(np.abs(w - exact))))

    order = float(np.polyfit(np.log(horizon / np.asarray(steps, dtype=np.float64)), np.log(errors), 1)[0])
    logger.info("strong_order_study", order=order, errors=errors)
    return StrongOrderResult(steps=tuple(int(n) for n in steps), errors=tuple(errors), order=order)

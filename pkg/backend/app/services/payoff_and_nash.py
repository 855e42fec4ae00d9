# -*- coding: utf-8 -*-
"""
🏆 Estimación de pagos y comprobaciones de desviación de Nash.

Dinámica controlada del jugador: dx = (u_t + a_t) dt + σ dW, donde a_t es la
deriva agregada de campo medio congelada (−media del gradiente bajo μ_t, cero
sin flujo). El pago es ∫ f dt + g, integral por la regla del trapecio sobre
los nodos de la malla. Las comparaciones usan números aleatorios comunes: la
trayectoria j siempre consume el flujo (seed, SDE_NOISE, j).
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import structlog

from ..core.rng import StreamTag, stream
from ..models.grids import ControlGrid, GridValueFunction
from ..models.measures import EmpiricalMeasure, MeasureFlow
from ..models.payoffs import CostSpec, DeviationReport, PayoffEstimate
from ..models.schedules import ControlSchedule, TimeGrid
from ..models.tasks import MixtureWeights, TaskSpec
from ..models.trajectories import ClientDynamics, NoiseMode
from ..utils.exceptions import DivergenceError, InvalidDomainObjectError
from .sde_engine import Diffusion, apply_diffusion, integrate_particle_system, path_increments
from .task_model import grad_batch, mixture_risk_batch

logger = structlog.get_logger(__name__)

# (step, t, X (n, d)) -> u (n, d)
BoundPolicy = Callable[[int, float, np.ndarray], np.ndarray]


# === POLÍTICAS ===


class Policy(ABC):
    """Control markoviano u(t, x)."""

    @abstractmethod
    def bind(self, grid: TimeGrid) -> BoundPolicy:
        """Evaluador sobre los N+1 nodos de la malla."""


@dataclass(frozen=True, eq=False)
class ScheduledGradientPolicy(Policy):
    """u = −Λ_t ∇L(x) + offset_t."""

    task: TaskSpec
    schedule: ControlSchedule

    def bind(self, grid: TimeGrid) -> BoundPolicy:
        gains, offsets = self.schedule.on_grid(grid, include_terminal=True)

        def control(step: int, t: float, states: np.ndarray) -> np.ndarray:
            return -gains[step] * grad_batch(states, self.task) + offsets[step]

        return control

    def perturbed(self, perturbation: "Perturbation") -> "ScheduledGradientPolicy":
        return ScheduledGradientPolicy(self.task, perturbation.apply(self.schedule))


@dataclass(frozen=True, eq=False)
class GridFeedbackPolicy(Policy):
    """u*(t, x) leído de un ControlGrid (nodo temporal más cercano, lineal en x)."""

    control: ControlGrid

    def bind(self, grid: TimeGrid) -> BoundPolicy:
        def control(step: int, t: float, states: np.ndarray) -> np.ndarray:
            return self.control.feedback(t, states)

        return control


def lq_equilibrium_policy(grid: TimeGrid, dim: int = 1, offset_bound: Optional[float] = 2.0) -> ScheduledGradientPolicy:
    """u* = −x como política de gradiente: tarea θ = 0, A = I y Λ ≡ 1."""
    task = TaskSpec.quadratic(np.zeros(dim), np.eye(dim))
    schedule = ControlSchedule.constant(1.0, dim, grid.t0, grid.horizon, offset_bound=offset_bound)
    return ScheduledGradientPolicy(task, schedule)


# === PRESETS DE COSTE ===


def _squared_norm(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=-1)


def lq_cost(terminal_weight: float = 1.0) -> CostSpec:
    """f = −½(|x|² + |u|²), g = −½q_T|x|²."""
    return CostSpec.from_rewards(
        "lq",
        lambda t, x, u, m: -0.5 * (_squared_norm(x) + _squared_norm(u)),
        lambda x, m: -0.5 * terminal_weight * _squared_norm(x),
    )


def crowd_averse_cost(terminal_weight: float, coupling: float) -> CostSpec:
    return CostSpec.from_rewards(
        "crowd_averse",
        lambda t, x, u, m: -0.5 * (_squared_norm(x) + _squared_norm(u)) - coupling * _squared_norm(x - m),
        lambda x, m: -0.5 * terminal_weight * _squared_norm(x),
    )


def server_risk_cost(tasks: Sequence[TaskSpec], alphas: MixtureWeights) -> CostSpec:
    """Coste f_t(w) = L_{D*}(w) y g = L_{D*}(w_T), almacenados negados."""
    return CostSpec.from_costs(
        "server_risk",
        lambda t, x, u, m: mixture_risk_batch(x, tasks, alphas),
        lambda x, m: mixture_risk_batch(x, tasks, alphas),
    )


def terminal_only_cost(tasks: Sequence[TaskSpec], alphas: MixtureWeights, constant: float = 0.0) -> CostSpec:
    """g = f_T con coste corriente constante c."""
    return CostSpec.from_costs(
        "terminal_only",
        lambda t, x, u, m: np.full(x.shape[0], constant),
        lambda x, m: mixture_risk_batch(x, tasks, alphas),
        constant=constant,
    )


def zero_cost() -> CostSpec:
    return CostSpec.from_rewards(
        "zero", lambda t, x, u, m: np.zeros(x.shape[0]), lambda x, m: np.zeros(x.shape[0])
    )


# === ESTIMACIÓN ===


def _frozen_terms(
    flow: Optional[Union[MeasureFlow, EmpiricalMeasure]],
    task: Optional[TaskSpec],
    grid: TimeGrid,
    dim: int,
):
    """Medias m_t (N+1, d) del flujo y deriva agregada a_t (N+1, d)."""
    if flow is None:
        zeros = np.zeros((grid.nodes, dim))
        return zeros, zeros
    if isinstance(flow, EmpiricalMeasure):
        flow = MeasureFlow.frozen(grid.times(), flow.particles)
    if flow.nodes != grid.nodes:
        raise InvalidDomainObjectError("MeasureFlow", "el flujo no coincide con la malla", nodes=flow.nodes)
    means = flow.means()
    if task is None:
        return means, np.zeros_like(means)
    grads = np.stack([flow.weights @ grad_batch(flow.particles[k], task) for k in range(flow.nodes)])
    return means, -grads


def simulate_payoffs(
    x0: np.ndarray | float,
    policy: Policy,
    cost: CostSpec,
    sigma: Diffusion,
    grid: TimeGrid,
    paths: int,
    seed: int,
    flow: Optional[Union[MeasureFlow, EmpiricalMeasure]] = None,
    task: Optional[TaskSpec] = None,
) -> np.ndarray:
    """Pago de cada trayectoria, forma (paths,)."""
    if paths < 2:
        raise InvalidDomainObjectError("PayoffEstimate", "se requieren paths >= 2")
    start = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    dim = start.shape[-1]
    x = np.tile(start, (paths, 1)) if start.ndim == 1 else start.copy()
    means, aggregate = _frozen_terms(flow, task, grid, dim)
    control = policy.bind(grid)
    increments = path_increments(seed, range(paths), grid, sigma, dim)
    times, dt = grid.times(), grid.dt

    u = control(0, times[0], x)
    running = 0.5 * cost.running(times[0], x, u, means[0])
    for k in range(grid.steps):
        x = x + (u + aggregate[k]) * dt + apply_diffusion(increments[k], sigma)
        if not np.all(np.isfinite(x)):
            bad = int(np.argmax(~np.all(np.isfinite(x), axis=1)))
            raise DivergenceError("estimate_payoff", path_id=bad, step=k + 1)
        u = control(k + 1, times[k + 1], x)
        weight = 0.5 if k + 1 == grid.steps else 1.0
        running = running + weight * cost.running(times[k + 1], x, u, means[k + 1])
    return dt * running + cost.terminal(x, means[-1])


def _estimate(values: np.ndarray, seed: int) -> PayoffEstimate:
    stderr = float(np.std(values, ddof=1) / np.sqrt(values.size))
    return PayoffEstimate(mean=float(np.mean(values)), stderr=stderr, paths=int(values.size), seed=seed)


def estimate_payoff(
    x0: np.ndarray | float,
    policy: Policy,
    cost: CostSpec,
    sigma: Diffusion,
    grid: TimeGrid,
    paths: int,
    seed: int,
    flow: Optional[Union[MeasureFlow, EmpiricalMeasure]] = None,
    task: Optional[TaskSpec] = None,
) -> PayoffEstimate:
    """Media y error estándar del pago sobre `paths` trayectorias i.i.d."""
    return _estimate(simulate_payoffs(x0, policy, cost, sigma, grid, paths, seed, flow, task), seed)


# === PERTURBACIONES ===


class Perturbation(ABC):
    """Desviación unilateral aplicada a un calendario; respeta sus cotas."""

    @property
    @abstractmethod
    def label(self) -> str:
        ...

    @abstractmethod
    def apply(self, schedule: ControlSchedule) -> ControlSchedule:
        ...


@dataclass(frozen=True)
class ConstantOffset(Perturbation):
    delta: float

    @property
    def label(self) -> str:
        return f"offset({self.delta:+.6g})"

    def apply(self, schedule: ControlSchedule) -> ControlSchedule:
        return schedule.with_values(schedule.gains, schedule.offsets + self.delta)


@dataclass(frozen=True)
class IntervalBump(Perturbation):
    start: float
    end: float
    delta: float

    @property
    def label(self) -> str:
        return f"bump([{self.start:.6g},{self.end:.6g}],{self.delta:+.6g})"

    def apply(self, schedule: ControlSchedule) -> ControlSchedule:
        refined = schedule.refine([self.start, self.end])
        left = refined.breakpoints[:-1]
        inside = (left >= self.start - 1e-12) & (left < self.end - 1e-12)
        offsets = refined.offsets + np.where(inside[:, None], self.delta, 0.0)
        return refined.with_values(refined.gains, offsets)


@dataclass(frozen=True)
class GainScaling(Perturbation):
    factor: float

    @property
    def label(self) -> str:
        return f"scale({self.factor:.6g})"

    def apply(self, schedule: ControlSchedule) -> ControlSchedule:
        return schedule.with_values(schedule.gains * self.factor, schedule.offsets)


def random_perturbations(
    count: int,
    seed: int,
    t0: float,
    horizon: float,
    offset_range: tuple[float, float] = (0.1, 0.5),
    bump_range: tuple[float, float] = (0.2, 1.0),
    scale_ranges: Sequence[tuple[float, float]] = ((0.5, 0.9), (1.1, 1.5)),
    min_bump_length: float = 0.2,
) -> List[Perturbation]:
    """Mezcla reproducible y equilibrada de las tres familias."""
    rng = stream(seed, StreamTag.PERTURBATIONS)
    span = horizon - t0
    min_length = min(min_bump_length, span)
    out: List[Perturbation] = []
    for i in range(count):
        family = i % 3
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if family == 0:
            out.append(ConstantOffset(sign * rng.uniform(*offset_range)))
        elif family == 1:
            start = t0 + rng.uniform(0.0, span - min_length)
            end = start + rng.uniform(min_length, horizon - start) if horizon - start > min_length else horizon
            out.append(IntervalBump(float(start), float(end), sign * rng.uniform(*bump_range)))
        else:
            low, high = scale_ranges[int(rng.integers(len(scale_ranges)))]
            out.append(GainScaling(float(rng.uniform(low, high))))
    return out


# === DESVIACIONES ===


def nash_deviation_gap(
    policy: ScheduledGradientPolicy,
    perturbations: Sequence[Perturbation],
    x0: np.ndarray | float,
    cost: CostSpec,
    sigma: Diffusion,
    grid: TimeGrid,
    paths: int,
    seed: int,
    flow: Optional[Union[MeasureFlow, EmpiricalMeasure]] = None,
    task: Optional[TaskSpec] = None,
) -> DeviationReport:
    """
    gap_i = J(perturbado_i) − J(u*) frente al flujo congelado.

    El flujo de equilibrio no se vuelve a resolver para el desviador; los
    errores estándar son los de las diferencias por trayectoria.
    """
    base = simulate_payoffs(x0, policy, cost, sigma, grid, paths, seed, flow, task)
    estimates, gaps, errors = [], [], []
    for perturbation in perturbations:
        values = simulate_payoffs(
            x0, policy.perturbed(perturbation), cost, sigma, grid, paths, seed, flow, task
        )
        diff = values - base
        estimates.append(_estimate(values, seed))
        gaps.append(float(np.mean(diff)))
        errors.append(float(np.std(diff, ddof=1) / np.sqrt(paths)))
    report = DeviationReport(
        baseline=_estimate(base, seed),
        perturbed=estimates,
        gaps=np.asarray(gaps),
        gap_stderr=np.asarray(errors),
        labels=[p.label for p in perturbations],
    )
    logger.info(
        "nash_deviation_checked",
        perturbations=len(perturbations),
        max_normalized_gap=report.max_normalized_gap(),
    )
    return report


@dataclass(frozen=True)
class VerificationResult:
    value_at_x0: float
    estimate: PayoffEstimate
    agreed: bool
    allowance: float


def verification_check(
    value: GridValueFunction,
    policy: Policy,
    cost: CostSpec,
    sigma: Diffusion,
    grid: TimeGrid,
    x0: float,
    paths: int,
    seed: int,
    allowance: float = 2e-2,
    k: float = 4.0,
) -> VerificationResult:
    """Acuerdo |v(0, x0) − J| ≤ k·stderr + allowance."""
    v0 = value.at(0, x0)
    estimate = estimate_payoff(x0, policy, cost, sigma, grid, paths, seed)
    agreed = abs(v0 - estimate.mean) <= k * estimate.stderr + allowance
    return VerificationResult(value_at_x0=v0, estimate=estimate, agreed=bool(agreed), allowance=allowance)


def _player_payoffs(
    clients: Sequence[ClientDynamics],
    alphas: MixtureWeights,
    player: int,
    sigma: Diffusion,
    grid: TimeGrid,
    paths: int,
    seed: int,
    noise_mode: NoiseMode,
) -> np.ndarray:
    tasks = [c.task for c in clients]
    out = np.empty(paths)
    weights = np.ones(grid.nodes)
    weights[0] = weights[-1] = 0.5
    for r in range(paths):
        result = integrate_particle_system(clients, alphas, sigma, grid, seed, noise_mode, prefix=(r,))
        risks = mixture_risk_batch(result.clients[player].states, tasks, alphas)
        out[r] = -(grid.dt * weights @ risks + risks[-1])
    return out


def finite_population_deviation_gap(
    clients: Sequence[ClientDynamics],
    alphas: MixtureWeights,
    player: int,
    perturbations: Sequence[Perturbation],
    sigma: Diffusion,
    grid: TimeGrid,
    paths: int,
    seed: int,
    noise_mode: NoiseMode = NoiseMode.INDEPENDENT,
) -> DeviationReport:
    """
    Versión con p jugadores: se vuelve a simular todo el sistema con sólo el
    calendario del jugador `player` perturbado. Pago del jugador:
    −(∫ L_{D*}(w_k) dt + L_{D*}(w_k(T))).
    """
    if not 0 <= player < len(clients):
        raise InvalidDomainObjectError("ClientDynamics", "jugador fuera de rango", player=player)
    base = _player_payoffs(clients, alphas, player, sigma, grid, paths, seed, noise_mode)
    estimates, gaps, errors = [], [], []
    for perturbation in perturbations:
        deviated = list(clients)
        own = deviated[player]
        deviated[player] = ClientDynamics(own.w0, own.task, perturbation.apply(own.schedule))
        values = _player_payoffs(deviated, alphas, player, sigma, grid, paths, seed, noise_mode)
        diff = values - base
        estimates.append(_estimate(values, seed))
        gaps.append(float(np.mean(diff)))
        errors.append(float(np.std(diff, ddof=1) / np.sqrt(paths)))
    return DeviationReport(
        baseline=_estimate(base, seed),
        perturbed=estimates,
        gaps=np.asarray(gaps),
        gap_stderr=np.asarray(errors),
        labels=[p.label for p in perturbations],
    )

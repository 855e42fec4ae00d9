# -*- coding: utf-8 -*-
"""
🌐 Equilibrio de campo medio.

Medidas empíricas, distancias de Wasserstein, dinámica del jugador
representativo, iteración de Picard para la ecuación de McKean–Vlasov y el
diagnóstico de convergencia de medidas empíricas al crecer p.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from joblib import Parallel, delayed
from scipy.stats import wasserstein_distance

from ..core.rng import StreamTag, stream
from ..models.measures import (
    EmpiricalMeasure,
    GradientMeasureFlow,
    InitialLaw,
    MeasureFlow,
)
from ..models.schedules import ControlSchedule, TimeGrid
from ..models.tasks import TaskSpec, WeightVector
from ..utils.exceptions import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidDomainObjectError,
)
from .sde_engine import (
    CoupledFederated,
    Diffusion,
    DriftFunction,
    integrate_drift_field,
    integrate_paths,
    path_increments,
)
from .task_model import grad_batch

logger = structlog.get_logger(__name__)


# === MEDIDAS Y DISTANCIAS ===


def empirical_measure(states: Sequence[WeightVector] | np.ndarray) -> EmpiricalMeasure:
    """Medida uniforme 1/p sobre los estados dados."""
    array = np.asarray(states, dtype=np.float64)
    if array.size == 0:
        raise EmptyInputError("states")
    return EmpiricalMeasure.uniform(array)


def wasserstein1_1d(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """
    W1 exacta entre medidas escalares.

    Con el mismo número de partículas y pesos uniformes usa el acoplamiento
    ordenado, media de |a_(i) − b_(i)|; en otro caso la integral ∫|F − G|.
    """
    for measure in (a, b):
        if measure.dim != 1:
            raise DimensionMismatchError("wasserstein1_1d", expected=1, actual=measure.dim)
    if a.size == b.size and a.is_uniform and b.is_uniform:
        xs = np.sort(a.particles[:, 0])
        ys = np.sort(b.particles[:, 0])
        return float(np.mean(np.abs(xs - ys)))
    return float(
        wasserstein_distance(a.particles[:, 0], b.particles[:, 0], a.weights, b.weights)
    )


def projection_directions(dim: int, projections: int, seed: int) -> np.ndarray:
    """Direcciones unitarias fijas (P, d); en d=1 sólo la dirección canónica."""
    if dim == 1:
        return np.ones((1, 1))
    if projections < 1:
        raise InvalidDomainObjectError("flow_distance", "se requiere al menos una proyección")
    raw = stream(seed, StreamTag.PROJECTIONS).standard_normal((projections, dim))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def sliced_wasserstein1(
    a: EmpiricalMeasure, b: EmpiricalMeasure, projections: int = 16, seed: int = 0
) -> float:
    """Media de W1 sobre las proyecciones en direcciones fijas."""
    if a.dim != b.dim:
        raise DimensionMismatchError("sliced_wasserstein1", expected=a.dim, actual=b.dim)
    directions = projection_directions(a.dim, projections, seed)
    return float(np.mean([wasserstein1_1d(a.project(u), b.project(u)) for u in directions]))


def flow_distance(a: MeasureFlow, b: MeasureFlow, projections: int = 16, seed: int = 0) -> float:
    """sup sobre los nodos del W1 deslizado entre marginales."""
    if a.nodes != b.nodes or not np.allclose(a.times, b.times, rtol=0.0, atol=1e-12):
        raise InvalidDomainObjectError("MeasureFlow", "las mallas temporales no coinciden")
    if a.dim != b.dim:
        raise DimensionMismatchError("flow_distance", expected=a.dim, actual=b.dim)
    directions = projection_directions(a.dim, projections, seed)
    if a.size == b.size and a.at(0).is_uniform and b.at(0).is_uniform:
        pa = np.sort(a.particles @ directions.T, axis=1)  # (K, n, P)
        pb = np.sort(b.particles @ directions.T, axis=1)
        per_node = np.abs(pa - pb).mean(axis=1).mean(axis=1)
        return float(per_node.max())
    return max(
        sliced_wasserstein1(a.at(k), b.at(k), projections, seed) for k in range(a.nodes)
    )


def gradient_flow(flow: MeasureFlow, task: TaskSpec) -> GradientMeasureFlow:
    """Push-forward de cada marginal por ∇L."""
    grads = np.stack([grad_batch(flow.particles[k], task) for k in range(flow.nodes)])
    return GradientMeasureFlow(flow.times, grads, flow.weights)


# === INTERACCIONES ===


class Interaction(ABC):
    """Deriva de un jugador que depende de las marginales de un flujo."""

    dim: int = 1

    @abstractmethod
    def drift_field(self, flow: MeasureFlow, grid: TimeGrid) -> DriftFunction:
        """Campo de deriva (step, t, X) -> (n, d) con el flujo congelado."""


@dataclass(frozen=True)
class MeanReversionInteraction(Interaction):
    """dX = −rate·(X − media(μ_t)) dt + σ dW."""

    rate: float = 1.0
    dim: int = 1

    def drift_field(self, flow: MeasureFlow, grid: TimeGrid) -> DriftFunction:
        means = flow.means()

        def drift(step: int, t: float, states: np.ndarray) -> np.ndarray:
            return -self.rate * (states - means[step])

        return drift


@dataclass(frozen=True, eq=False)
class FederatedInteraction(Interaction):
    """Jugador representativo federado: dX = (−Λ_t∇L(X) + offset_t − media(μ^g_t)) dt."""

    task: TaskSpec
    schedule: ControlSchedule

    @property
    def dim(self) -> int:  # type: ignore[override]
        return self.task.dim

    def drift_field(self, flow: MeasureFlow, grid: TimeGrid) -> DriftFunction:
        aggregate = gradient_flow(flow, self.task).means()
        gains, offsets = self.schedule.on_grid(grid)

        def drift(step: int, t: float, states: np.ndarray) -> np.ndarray:
            return -gains[step] * grad_batch(states, self.task) + offsets[step] - aggregate[step]

        return drift


# === DINÁMICA REPRESENTATIVA Y PICARD ===


def _check_flow_grid(flow: MeasureFlow, grid: TimeGrid) -> None:
    if flow.nodes != grid.nodes or not np.allclose(flow.times, grid.times(), rtol=0.0, atol=1e-12):
        raise InvalidDomainObjectError("MeasureFlow", "el flujo no coincide con la malla", nodes=flow.nodes)


def representative_dynamics(
    w0: WeightVector | np.ndarray,
    mu_g: GradientMeasureFlow,
    task: TaskSpec,
    schedule: ControlSchedule,
    sigma: Diffusion,
    grid: TimeGrid,
    seed: int,
    paths: int,
) -> MeasureFlow:
    """
    `paths` jugadores representativos i.i.d. frente a un flujo de gradientes fijo.

    dw = (−Λ_t∇L(w) + offset_t − media(μ^g_t)) dt + σ dW
    """
    _check_flow_grid(mu_g, grid)
    states = integrate_paths(
        w0, task, CoupledFederated(mu_g.means()), schedule, sigma, grid, seed, paths=paths
    )
    return MeasureFlow(grid.times(), states)


@dataclass(frozen=True, eq=False)
class PicardResult:
    flow: MeasureFlow
    history: Tuple[float, ...]
    converged: bool
    iterations: int


def picard_fixed_point(
    law: InitialLaw,
    interaction: Interaction,
    sigma: Diffusion,
    grid: TimeGrid,
    paths: int,
    tol: float,
    max_iters: int,
    damping: float = 1.0,
    seed: int = 0,
    projections: int = 16,
) -> PicardResult:
    """
    Iteración de punto fijo μ ← Ley(estados simulados contra μ).

    Los estados iniciales y los incrementos brownianos se fijan una vez
    (números aleatorios comunes), así que la distancia entre iteraciones sólo
    refleja el cambio del flujo. Con `damping` < 1 se amortigua partícula a
    partícula. La no convergencia se devuelve marcada, no como excepción.
    """
    if not tol > 0:
        raise InvalidDomainObjectError("Picard", "se requiere tol > 0")
    if paths < 2:
        raise InvalidDomainObjectError("Picard", "se requieren paths >= 2")
    if not 0.0 < damping <= 1.0:
        raise InvalidDomainObjectError("Picard", "damping debe estar en (0, 1]", damping=damping)

    x0 = law.sample(stream(seed, StreamTag.INITIAL_STATES), paths)
    increments = path_increments(seed, range(paths), grid, sigma, x0.shape[1])
    times = grid.times()
    flow = MeasureFlow.frozen(times, x0)
    history: List[float] = []
    converged = False

    for iteration in range(1, max_iters + 1):
        drift = interaction.drift_field(flow, grid)
        states = integrate_drift_field(x0, drift, sigma, grid, increments, "picard_fixed_point")
        if damping < 1.0:
            states = (1.0 - damping) * flow.particles + damping * states
        updated = MeasureFlow(times, states)
        distance = flow_distance(updated, flow, projections, seed)
        history.append(distance)
        flow = updated
        logger.debug("picard_iteration", iteration=iteration, distance=distance)
        if distance <= tol:
            converged = True
            break

    if not converged:
        logger.warning("picard_not_converged", iterations=len(history), last_distance=history[-1])
    return PicardResult(flow=flow, history=tuple(history), converged=converged, iterations=len(history))


# === COMPARACIÓN DE MOMENTOS ===


@dataclass(frozen=True)
class MomentComparison:
    mean_gap: float
    mean_stderr: float
    variance_gap: float
    variance_stderr: float
    k: float = 4.0

    @property
    def passed(self) -> bool:
        return self.mean_gap <= self.k * self.mean_stderr and self.variance_gap <= self.k * self.variance_stderr


def compare_moments(a: EmpiricalMeasure, b: EmpiricalMeasure, k: float = 4.0) -> MomentComparison:
    """
    Media y varianza de dos nubes (por coordenada, peor caso) con errores
    estándar combinados de las dos muestras.
    """
    def stats(m: EmpiricalMeasure) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        var = m.variance()
        n = m.size
        return m.mean(), var, np.sqrt(var / n), var * np.sqrt(2.0 / max(n - 1, 1))

    mean_a, var_a, se_mean_a, se_var_a = stats(a)
    mean_b, var_b, se_mean_b, se_var_b = stats(b)
    mean_se = np.hypot(se_mean_a, se_mean_b)
    var_se = np.hypot(se_var_a, se_var_b)
    mean_ratio = np.abs(mean_a - mean_b) / np.where(mean_se > 0, mean_se, np.inf)
    var_ratio = np.abs(var_a - var_b) / np.where(var_se > 0, var_se, np.inf)
    i = int(np.argmax(mean_ratio))
    j = int(np.argmax(var_ratio))
    return MomentComparison(
        mean_gap=float(abs(mean_a[i] - mean_b[i])),
        mean_stderr=float(mean_se[i]),
        variance_gap=float(abs(var_a[j] - var_b[j])),
        variance_stderr=float(var_se[j]),
        k=k,
    )


# === DIAGNÓSTICO DE GLIVENKO–CANTELLI ===


@dataclass(frozen=True)
class GcRow:
    p: int
    median_w1: float
    distances: Tuple[float, ...]
    replicates: Tuple[int, ...] = ()


def sample_measure(law: InitialLaw, size: int, seed: int, replicate: int) -> EmpiricalMeasure:
    """Muestra de tamaño `size` del flujo (seed, GC_SAMPLES, replicate)."""
    return EmpiricalMeasure.uniform(law.sample(stream(seed, StreamTag.GC_SAMPLES, replicate), size))


def reference_measure(law: InitialLaw, size: int, seed: int) -> EmpiricalMeasure:
    """La referencia es la réplica 0 del flujo de muestras."""
    return sample_measure(law, size, seed, 0)


def gc_diagnostic(
    p_values: Sequence[int],
    law: InitialLaw,
    replicates: int,
    seed: int,
    reference: Optional[EmpiricalMeasure] = None,
    reference_size: int = 100_000,
    threads: int = 1,
    include_reference_stream: bool = False,
) -> List[GcRow]:
    """
    Mediana sobre réplicas de W1(muestra de tamaño p, referencia) para cada p.

    Por defecto las réplicas son 1..R, independientes de la referencia. Con
    `include_reference_stream` son 0..R-1: la réplica 0 toma las primeras p
    extracciones del flujo de la referencia, así que p = reference_size la
    reproduce y su distancia es 0.
    """
    if replicates < 5:
        raise InvalidDomainObjectError("gc_diagnostic", "se requieren al menos 5 réplicas")
    if any(b <= a for a, b in zip(p_values, p_values[1:])):
        raise InvalidDomainObjectError("gc_diagnostic", "p_values debe ser creciente")
    ref = reference if reference is not None else reference_measure(law, reference_size, seed)

    def distance(p: int, r: int) -> float:
        return wasserstein1_1d(sample_measure(law, p, seed, r), ref)

    first = 0 if include_reference_stream else 1
    ids = tuple(range(first, first + replicates))
    rows: List[GcRow] = []
    for p in p_values:
        distances = Parallel(n_jobs=threads, prefer="threads")(
            delayed(distance)(int(p), r) for r in ids
        )
        rows.append(
            GcRow(
                p=int(p),
                median_w1=float(np.median(distances)),
                distances=tuple(distances),
                replicates=ids,
            )
        )
    logger.info("gc_diagnostic_completed", medians=[row.median_w1 for row in rows])
    return rows


def medians_decreasing(rows: Sequence[GcRow], strict: bool = True) -> bool:
    medians = [row.median_w1 for row in rows]
    pairs = zip(medians, medians[1:])
    return all(b < a for a, b in pairs) if strict else all(b <= a for a, b in pairs)

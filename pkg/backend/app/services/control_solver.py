# -*- coding: utf-8 -*-
"""
🧮 Solvers 1-D de HJB (hacia atrás) y Fokker–Planck (hacia adelante).

Orientación de maximización: v_T = g y ∂_t v + H = 0, con
H(t, x, z, γ) = sup_u [f(t, x, u, m_t) + z·b(t, x, u)] + ½σ²γ.
Ambos esquemas son explícitos y comprueban la cota de estabilidad de la malla
antes de empezar.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import structlog
from scipy.integrate import solve_ivp, trapezoid

from ..models.grids import (
    MASS_TOL,
    NEGATIVE_DENSITY_TOL,
    ControlGrid,
    ControlProblem,
    ControlSet,
    DensityGrid,
    Grid1D,
    GridValueFunction,
    LqProblem,
    spatial_derivatives,
)
from ..utils.exceptions import (
    DimensionMismatchError,
    DivergenceError,
    InvalidDomainObjectError,
    NegativeDensityError,
)

logger = structlog.get_logger(__name__)


# === HAMILTONIANO ===


def _maximize(values: np.ndarray, controls: ControlSet) -> Tuple[np.ndarray, np.ndarray]:
    """Máximo por filas de `values` (n, n_u); empates al menor u."""
    u = controls.values
    rows = np.arange(values.shape[0])
    idx = np.argmax(values, axis=1)
    best = values[rows, idx]
    chosen = u[idx]
    if not controls.refine or u.size < 3:
        return best, chosen
    inner = np.clip(idx, 1, u.size - 2)
    left, mid, right = values[rows, inner - 1], values[rows, inner], values[rows, inner + 1]
    curvature = left - 2.0 * mid + right
    du = u[1] - u[0]
    usable = curvature < 0
    shift = np.where(usable, 0.5 * (left - right) / np.where(usable, curvature, 1.0), 0.0)
    vertex = u[inner] + shift * du
    usable &= (vertex >= u[inner - 1]) & (vertex <= u[inner + 1])
    peak = mid - 0.125 * (right - left) ** 2 / np.where(usable, curvature, -1.0)
    better = usable & (peak > best)
    return np.where(better, peak, best), np.where(better, vertex, chosen)


def hamiltonian_pointwise(
    x: float,
    z: float,
    gamma: float,
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    b: Callable[[np.ndarray, np.ndarray], np.ndarray],
    sigma: float,
    controls: ControlSet,
) -> Tuple[float, float]:
    """
    (H, u*) en un punto: máximo sobre U discretizado de f(x,u) + z·b(x,u) + ½σ²γ.

    `f` y `b` reciben (x, u) con u el vector de controles discretos.
    """
    u = controls.values
    integrand = np.broadcast_to(f(x, u) + z * b(x, u), u.shape).astype(np.float64)
    best, chosen = _maximize(integrand[None, :], controls)
    return float(best[0] + 0.5 * sigma * sigma * gamma), float(chosen[0])


def hamiltonian_field(
    problem: ControlProblem,
    t: float,
    x: np.ndarray,
    z: np.ndarray,
    gamma: np.ndarray,
    density_mean: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """H y u* en todos los nodos espaciales de un corte temporal."""
    u = problem.controls.values[None, :]
    xs = x[:, None]
    reward, drift = np.broadcast_arrays(
        problem.running_reward(t, xs, u, density_mean), problem.drift(t, xs, u)
    )
    best, chosen = _maximize(reward + z[:, None] * drift, problem.controls)
    return best + 0.5 * problem.sigma**2 * gamma, chosen


def max_drift(problem: ControlProblem, grid: Grid1D) -> float:
    """max |b(t, x, u)| sobre todos los nodos (t, x) de la malla y todos los controles."""
    u = problem.controls.values[None, :]
    xs = grid.x[:, None]
    return float(max(np.max(np.abs(problem.drift(t, xs, u + 0.0 * xs))) for t in grid.t))


# === HJB ===


def _means_on_grid(grid: Grid1D, density_means: Optional[np.ndarray]) -> np.ndarray:
    if density_means is None:
        return np.zeros(grid.n_t)
    means = np.asarray(density_means, dtype=np.float64)
    if means.shape != (grid.n_t,):
        raise DimensionMismatchError("density_means", expected=(grid.n_t,), actual=means.shape)
    return means


def _extrapolate_edges(row: np.ndarray) -> None:
    """Cierre cuadrático en los bordes, exacto para funciones de valor cuadráticas."""
    row[0] = 3.0 * row[1] - 3.0 * row[2] + row[3]
    row[-1] = 3.0 * row[-2] - 3.0 * row[-3] + row[-4]


def solve_hjb_backward(
    problem: ControlProblem,
    grid: Grid1D,
    density_means: Optional[np.ndarray] = None,
) -> Tuple[GridValueFunction, ControlGrid]:
    """
    March explícito hacia atrás v^k = v^{k+1} + Δt·H(t_{k+1}, ∂_x v^{k+1}, ∂_xx v^{k+1}).

    Args:
        problem: costes, dinámica, σ y U
        grid: malla espacio-tiempo; debe cumplir la cota de estabilidad
        density_means: media de la densidad en cada nodo temporal (problemas acoplados)

    Raises:
        StabilityError: si Δt viola la cota
        DivergenceError: si aparece un valor no finito; nombra el corte
    """
    grid.check_stability(problem.sigma, max_drift(problem, grid), "hjb")
    means = _means_on_grid(grid, density_means)
    x, t, dx, dt = grid.x, grid.t, grid.dx, grid.dt

    values = np.empty((grid.n_t, grid.n_x), dtype=np.float64)
    controls = np.empty_like(values)
    values[-1] = np.broadcast_to(problem.terminal_reward(x), x.shape)

    for k in range(grid.n_t - 2, -1, -1):
        z, gamma = spatial_derivatives(values[k + 1], dx)
        hamiltonian, controls[k + 1] = hamiltonian_field(problem, t[k + 1], x, z, gamma, means[k + 1])
        values[k] = values[k + 1] + dt * hamiltonian
        _extrapolate_edges(values[k])
        if not np.all(np.isfinite(values[k])):
            raise DivergenceError("solve_hjb_backward", step=k)

    z, gamma = spatial_derivatives(values[0], dx)
    _, controls[0] = hamiltonian_field(problem, t[0], x, z, gamma, means[0])
    logger.debug("hjb_solved", problem=problem.name, n_t=grid.n_t, n_x=grid.n_x)
    return (
        GridValueFunction(grid=grid, values=values),
        ControlGrid(grid=grid, controls=problem.controls, values=controls),
    )


def control_from_value(
    value: GridValueFunction,
    problem: ControlProblem,
    density_means: Optional[np.ndarray] = None,
) -> ControlGrid:
    """Argmax nodo a nodo del integrando del Hamiltoniano con diferencias centradas de v."""
    grid = value.grid
    means = _means_on_grid(grid, density_means)
    controls = np.empty_like(value.values)
    for k in range(grid.n_t):
        z, gamma = value.derivatives(k)
        _, controls[k] = hamiltonian_field(problem, grid.t[k], grid.x, z, gamma, means[k])
    return ControlGrid(grid=grid, controls=problem.controls, values=controls)


def drift_from_control(problem: ControlProblem, control: ControlGrid) -> np.ndarray:
    """b(t, x, u*(t, x)) en la malla, forma (n_t, n_x)."""
    grid = control.grid
    return np.broadcast_to(
        problem.drift(grid.t[:, None], grid.x[None, :], control.values), control.values.shape
    ).astype(np.float64)


# === FOKKER–PLANCK ===


def gaussian_density(grid: Grid1D, mean: float, std: float) -> np.ndarray:
    """Gaussiana truncada a la malla y normalizada con la regla del trapecio."""
    if not std > 0:
        raise InvalidDomainObjectError("gaussian_density", "se requiere std > 0")
    raw = np.exp(-0.5 * ((grid.x - mean) / std) ** 2)
    return raw / trapezoid(raw, grid.x)


def density_mass(grid: Grid1D, values: np.ndarray) -> np.ndarray:
    return trapezoid(values, grid.x, axis=-1)


def density_mean(grid: Grid1D, values: np.ndarray) -> np.ndarray:
    return trapezoid(values * grid.x, grid.x, axis=-1) / density_mass(grid, values)


def density_variance(grid: Grid1D, values: np.ndarray) -> np.ndarray:
    mean = np.atleast_1d(density_mean(grid, values))
    values2d = np.atleast_2d(values)
    centered = (grid.x[None, :] - mean[:, None]) ** 2
    out = trapezoid(values2d * centered, grid.x, axis=-1) / density_mass(grid, values2d)
    return out if np.ndim(values) > 1 else out[0]


def _cell_volumes(grid: Grid1D) -> np.ndarray:
    volumes = np.full(grid.n_x, grid.dx)
    volumes[0] = volumes[-1] = 0.5 * grid.dx
    return volumes


def solve_fp_forward(
    mu0: np.ndarray,
    drift: np.ndarray,
    sigma: float,
    grid: Grid1D,
) -> DensityGrid:
    """
    Volúmenes finitos explícitos: advección upwind con b en las interfaces,
    difusión centrada y flujo nulo en los bordes.

    La masa discreta conservada es la integral trapezoidal. `drift` es (n_x,)
    constante en el tiempo o (n_t, n_x) usando el corte k en el paso k → k+1.
    """
    mu0 = np.asarray(mu0, dtype=np.float64)
    if mu0.shape != (grid.n_x,):
        raise DimensionMismatchError("mu0", expected=(grid.n_x,), actual=mu0.shape)
    if mu0.min() < -NEGATIVE_DENSITY_TOL:
        raise InvalidDomainObjectError("DensityGrid", "μ0 negativa", minimum=float(mu0.min()))
    mass = float(density_mass(grid, mu0))
    if abs(mass - 1.0) > MASS_TOL:
        raise InvalidDomainObjectError("DensityGrid", "μ0 sin masa unitaria", mass=mass)

    drift = np.asarray(drift, dtype=np.float64)
    if drift.ndim == 1:
        drift = np.broadcast_to(drift, (grid.n_t, grid.n_x))
    if drift.shape != (grid.n_t, grid.n_x):
        raise DimensionMismatchError("drift", expected=(grid.n_t, grid.n_x), actual=drift.shape)
    grid.check_stability(sigma, float(np.max(np.abs(drift))), "fokker_planck")

    volumes = _cell_volumes(grid)
    diffusion = 0.5 * sigma * sigma / grid.dx
    dt = grid.dt
    density = np.empty((grid.n_t, grid.n_x), dtype=np.float64)
    density[0] = mu0
    net = np.empty(grid.n_x, dtype=np.float64)

    for k in range(grid.n_t - 1):
        mu = density[k]
        b_face = 0.5 * (drift[k, :-1] + drift[k, 1:])
        flux = (
            np.maximum(b_face, 0.0) * mu[:-1]
            + np.minimum(b_face, 0.0) * mu[1:]
            - diffusion * (mu[1:] - mu[:-1])
        )
        net[:] = 0.0
        net[:-1] += flux
        net[1:] -= flux
        density[k + 1] = mu - dt * net / volumes
        low = float(density[k + 1].min())
        if low < -NEGATIVE_DENSITY_TOL:
            raise NegativeDensityError(time_slice=k + 1, minimum=low)

    return DensityGrid(grid=grid, values=np.maximum(density, 0.0))


# === ORÁCULO LQ ===


@lru_cache(maxsize=32)
def _riccati_dense(sigma: float, terminal_weight: float, horizon: float):
    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        p = y[0]
        return np.array([p * p - 1.0, 0.5 * sigma * sigma * p])

    solution = solve_ivp(
        rhs,
        (horizon, 0.0),
        np.array([terminal_weight, 0.0]),
        method="DOP853",
        rtol=1e-10,
        atol=1e-12,
        dense_output=True,
    )
    if not solution.success:
        raise DivergenceError("riccati_solution")
    return solution.sol


def riccati_solution(problem: LqProblem, t: np.ndarray | float) -> Tuple[np.ndarray, np.ndarray]:
    """
    (P(t), r(t)) con Ṗ = P² − 1, ṙ = ½σ²P, P(T) = q_T, r(T) = 0.

    Con q_T = 1 la solución es cerrada: P ≡ 1, r(t) = −½σ²(T − t).
    """
    times = np.asarray(t, dtype=np.float64)
    if problem.terminal_weight == 1.0:
        return np.ones_like(times), -0.5 * problem.sigma**2 * (problem.horizon - times)
    if np.all(times >= problem.horizon):
        return np.full_like(times, problem.terminal_weight), np.zeros_like(times)
    dense = _riccati_dense(float(problem.sigma), float(problem.terminal_weight), float(problem.horizon))
    p, r = dense(np.minimum(times, problem.horizon))
    return p, r


def lq_reference(problem: LqProblem, t: np.ndarray | float, x: np.ndarray | float) -> Tuple[np.ndarray, np.ndarray]:
    """v(t, x) = −½P(t)x² + r(t) y u*(t, x) = −P(t)x."""
    p, r = riccati_solution(problem, t)
    x = np.asarray(x, dtype=np.float64)
    return -0.5 * p * x * x + r, -p * x


# === PRESETS ===


def lq_problem(lq: LqProblem, controls: ControlSet) -> ControlProblem:
    """f = −½(x² + u²), b = u, g = −½q_T x²."""
    return ControlProblem(
        running_reward=lambda t, x, u, m: -0.5 * (x * x + u * u),
        terminal_reward=lambda x: -0.5 * lq.terminal_weight * x * x,
        drift=lambda t, x, u: u + 0.0 * x,
        sigma=lq.sigma,
        controls=controls,
        density_coupled=False,
        name="lq",
        lq=lq,
    )


def crowd_averse_lq_problem(lq: LqProblem, coupling: float, controls: ControlSet) -> ControlProblem:
    """LQ con penalización −c(x − media(μ_t))²; con c = 0 queda desacoplado."""
    return ControlProblem(
        running_reward=lambda t, x, u, m: -0.5 * (x * x + u * u) - coupling * (x - m) ** 2,
        terminal_reward=lambda x: -0.5 * lq.terminal_weight * x * x,
        drift=lambda t, x, u: u + 0.0 * x,
        sigma=lq.sigma,
        controls=controls,
        density_coupled=coupling != 0.0,
        name="crowd_averse",
        lq=lq,
    )


# === SISTEMA ACOPLADO ===


@dataclass(frozen=True, eq=False)
class CoupledMfgResult:
    value: GridValueFunction
    control: ControlGrid
    density: DensityGrid
    history: Tuple[float, ...]
    converged: bool
    iterations: int


def _l1_change(grid: Grid1D, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(trapezoid(np.abs(a - b), grid.x, axis=1)))


def solve_coupled_mfg(
    problem: ControlProblem,
    mu0: np.ndarray,
    grid: Grid1D,
    tol: float = 1e-4,
    max_iters: int = 50,
    damping: float = 0.5,
) -> CoupledMfgResult:
    """
    Alterna HJB (dado el flujo de densidad) y FP (dado u*), amortiguando
    μ ← (1 − β)μ + βμ_nueva hasta que el cambio L1, sup en t, sea ≤ tol.

    Un problema sin acoplamiento se resuelve con un único barrido.
    """
    if not 0.0 < damping <= 1.0:
        raise InvalidDomainObjectError("CoupledMfg", "damping debe estar en (0, 1]", damping=damping)
    if max_iters < 1:
        raise InvalidDomainObjectError("CoupledMfg", "se requiere max_iters >= 1")
    mu0 = np.asarray(mu0, dtype=np.float64)

    if not problem.density_coupled:
        value, control = solve_hjb_backward(problem, grid)
        density = solve_fp_forward(mu0, drift_from_control(problem, control), problem.sigma, grid)
        return CoupledMfgResult(value, control, density, (0.0,), True, 1)

    flow = np.broadcast_to(mu0, (grid.n_t, grid.n_x)).copy()
    history = []
    converged = False
    for iteration in range(1, max_iters + 1):
        value, control = solve_hjb_backward(problem, grid, density_mean(grid, flow))
        fresh = solve_fp_forward(mu0, drift_from_control(problem, control), problem.sigma, grid)
        damped = (1.0 - damping) * flow + damping * fresh.values
        change = _l1_change(grid, damped, flow)
        history.append(change)
        flow = damped
        logger.debug("coupled_mfg_iteration", iteration=iteration, change=change)
        if change <= tol:
            converged = True
            break

    if not converged:
        logger.warning("coupled_mfg_not_converged", iterations=len(history), last_change=history[-1])
    value, control = solve_hjb_backward(problem, grid, density_mean(grid, flow))
    return CoupledMfgResult(
        value=value,
        control=control,
        density=DensityGrid(grid=grid, values=flow),
        history=tuple(history),
        converged=converged,
        iterations=len(history),
    )

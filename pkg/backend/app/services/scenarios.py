# -*- coding: utf-8 -*-
"""
🧪 Presets de `mfflsim run`

Cada preset simula, escribe sus artefactos (columnas documentadas en
docs/scenarios.md) y registra sus chequeos de aceptación como booleanos con
nombre y sus números principales como métricas.
"""

from typing import List, Sequence

import numpy as np
import pandas as pd

from ..config.scenario_config import ScenarioConfig
from ..core.rng import StreamTag, stream
from ..core.structured_logger import performance_context
from ..models.federated import FederatedAlgorithm, RoundLog
from ..models.grids import ControlSet, Grid1D, LqProblem
from ..models.measures import EmpiricalMeasure, GaussianLaw
from ..models.payoffs import CostSpec
from ..models.schedules import ControlSchedule, TimeGrid
from ..models.tasks import MixtureWeights, TaskSpec
from ..models.trajectories import ClientDynamics
from .base_scenario import BaseScenario, ScenarioFactory
from .control_solver import (
    crowd_averse_lq_problem,
    density_mass,
    density_mean,
    density_variance,
    drift_from_control,
    gaussian_density,
    lq_problem,
    lq_reference,
    solve_coupled_mfg,
    solve_fp_forward,
    solve_hjb_backward,
)
from .federated_rounds import (
    clients_from_tasks,
    federation_weights,
    fedsgd_round,
    run_federated,
)
from .meanfield_equilibrium import (
    FederatedInteraction,
    MeanReversionInteraction,
    compare_moments,
    gc_diagnostic,
    medians_decreasing,
    picard_fixed_point,
)
from .payoff_and_nash import (
    ConstantOffset,
    ScheduledGradientPolicy,
    crowd_averse_cost,
    estimate_payoff,
    finite_population_deviation_gap,
    lq_cost,
    lq_equilibrium_policy,
    nash_deviation_gap,
    random_perturbations,
    server_risk_cost,
    terminal_only_cost,
    verification_check,
)
from .sde_engine import integrate_particle_system, strong_order_study, trajectories_frame
from .task_model import build_federation, mixture_grad, mixture_optimum, mixture_risk, mixture_risk_batch

OPTIMUM_RISK_TOL = 1e-8
BASELINE_MAX_ROUNDS = 500
EXACTNESS_TOL = 1e-12
HJB_TIME_LIMIT = 60.0
DECREASING_TAIL = 5


# === HELPERS ===


def time_grid(config: ScenarioConfig) -> TimeGrid:
    return TimeGrid(horizon=config.time.horizon, steps=config.time.steps, t0=config.time.t0)


def lq_from_config(config: ScenarioConfig, terminal_weight: float) -> LqProblem:
    return LqProblem(sigma=config.pde.sigma, terminal_weight=terminal_weight, horizon=config.time.horizon)


def control_set(config: ScenarioConfig) -> ControlSet:
    pde = config.pde
    return ControlSet(pde.control_min, pde.control_max, pde.control_count, pde.control_refine)


def pde_grid(config: ScenarioConfig, controls: ControlSet) -> Grid1D:
    """Malla estable para drift b = u (|b| ≤ max|U|)."""
    pde, t = config.pde, config.time
    return Grid1D.from_spacing(pde.x_min, pde.x_max, pde.dx, t.t0, t.horizon, pde.sigma, controls.max_abs)


def constant_schedule(config: ScenarioConfig, dim: int, offset_bound: float | None = None) -> ControlSchedule:
    sde, t = config.sde, config.time
    return ControlSchedule.constant(
        sde.gain,
        dim,
        t.t0,
        t.horizon,
        lambda_max=sde.lambda_max,
        offset_bound=offset_bound,
        intervals=sde.intervals,
    )


def cost_from_config(config: ScenarioConfig, tasks: Sequence[TaskSpec], alphas: MixtureWeights) -> CostSpec:
    cost = config.cost
    if cost.preset == "server_risk":
        return server_risk_cost(tasks, alphas)
    if cost.preset == "terminal_only":
        return terminal_only_cost(tasks, alphas, cost.constant)
    if cost.preset == "crowd_averse":
        return crowd_averse_cost(cost.terminal_weight, cost.constant)
    return lq_cost(cost.terminal_weight)


def rounds_frame(logs: Sequence[RoundLog]) -> pd.DataFrame:
    weights = np.stack([log.server_weights for log in logs])
    frame = pd.DataFrame(
        {
            "round": [log.round for log in logs],
            "risk": [log.server_risk for log in logs],
            "selected": [";".join(str(k) for k in log.selected) for log in logs],
        }
    )
    for i in range(weights.shape[1]):
        frame[f"w_{i}"] = weights[:, i]
    return frame


def interior_error(grid: Grid1D, values: np.ndarray, reference: np.ndarray, radius: float) -> float:
    mask = np.abs(grid.x) <= radius + 1e-12
    return float(np.max(np.abs(values[mask] - reference[mask])))


def density_moments(grid: Grid1D, values: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": grid.t,
            "mass": density_mass(grid, values),
            "mean": density_mean(grid, values),
            "variance": density_variance(grid, values),
        }
    )


# === FEDERADO ===


@ScenarioFactory.register("fedavg-baseline")
class FedAvgBaselineScenario(BaseScenario):
    """FedAvg/FedSGD sobre la federación configurada."""

    def execute(self) -> None:
        cfg = self.config.fed_config()
        tasks, _ = build_federation(self.config.tasks, self.seed)
        clients = clients_from_tasks(tasks)
        logs = run_federated(clients, cfg, self.config.federated.algorithm)
        mixture = federation_weights(clients, cfg)
        self.writer.write_csv("rounds.csv", rounds_frame(logs))

        final = logs[-1]
        summary = {"rounds": len(logs), "final_risk": final.server_risk}
        if all(task.is_quadratic for task in tasks):
            optimum_risk = mixture_risk(mixture_optimum(tasks, mixture), tasks, mixture)
            gap = final.server_risk - optimum_risk
            summary.update(optimum_risk=optimum_risk, risk_gap=gap)
            self.record_check(
                "fedavg_reaches_mixture_optimum",
                abs(gap) <= OPTIMUM_RISK_TOL and len(logs) <= BASELINE_MAX_ROUNDS,
                gap=gap,
            )
        else:
            initial_risk = mixture_risk(np.zeros(tasks[0].dim), tasks, mixture)
            summary["initial_risk"] = initial_risk
            self.record_check("fedavg_reduces_risk", final.server_risk < initial_risk)
        self.metrics.update(summary)
        self.writer.write_json("summary.json", summary)


@ScenarioFactory.register("fedsgd-equivalence")
class FedSgdEquivalenceScenario(BaseScenario):
    """FedSGD frente a GD centralizado, y FedAvg (E=1) frente a FedSGD ronda a ronda."""

    def execute(self) -> None:
        cfg = self.config.fed_config()
        self._centralized_equivalence(cfg)
        self._round_identity(cfg)

    def _centralized_equivalence(self, cfg) -> None:
        rows = []
        for i in range(self.config.tasks.instances):
            tasks, _ = build_federation(self.config.tasks, self.seed + i)
            clients = clients_from_tasks(tasks)
            w = stream(self.seed, StreamTag.INITIAL_STATES, i).standard_normal(tasks[0].dim)
            federated = fedsgd_round(clients, w, cfg)
            centralized = w - cfg.learning_rate * mixture_grad(w, tasks, federation_weights(clients, cfg))
            scale = max(1.0, float(np.max(np.abs(centralized))))
            rows.append({"instance": i, "max_abs_diff": float(np.max(np.abs(federated - centralized))) / scale})
        frame = pd.DataFrame(rows)
        self.writer.write_csv("equivalence.csv", frame)
        worst = float(frame["max_abs_diff"].max())
        self.record_metric("fedsgd_centralized_max_diff", worst)
        self.record_check("fedsgd_equals_centralized_step", worst <= EXACTNESS_TOL, worst=worst)

    def _round_identity(self, cfg) -> None:
        tasks, _ = build_federation(self.config.tasks, self.seed)
        clients = clients_from_tasks(tasks)
        w0 = stream(self.seed, StreamTag.INITIAL_STATES, self.config.tasks.instances).standard_normal(tasks[0].dim)
        fedavg = run_federated(clients, cfg, FederatedAlgorithm.FEDAVG, w0)
        fedsgd = run_federated(clients, cfg, FederatedAlgorithm.FEDSGD, w0)
        diffs = [
            float(np.max(np.abs(a.server_weights - b.server_weights))) for a, b in zip(fedavg, fedsgd)
        ]
        frame = pd.DataFrame(
            {
                "round": [log.round for log in fedavg],
                "max_abs_diff": diffs,
                "risk_fedavg": [log.server_risk for log in fedavg],
                "risk_fedsgd": [log.server_risk for log in fedsgd],
            }
        )
        self.writer.write_csv("identity.csv", frame)
        worst = max(diffs)
        self.record_metric("fedavg_fedsgd_max_diff", worst)
        self.record_check(
            "fedavg_matches_fedsgd_per_round",
            len(fedavg) == len(fedsgd) and worst <= EXACTNESS_TOL,
            worst=worst,
        )


# === SDE ===


@ScenarioFactory.register("coupled-sde")
class CoupledSdeScenario(BaseScenario):
    """Sistema federado acoplado, orden fuerte de EM y momentos frente al flujo de campo medio."""

    def execute(self) -> None:
        grid = time_grid(self.config)
        self._strong_order()
        self._federated_system(grid)
        self._moment_match(grid)

    def _strong_order(self) -> None:
        sde = self.config.sde
        study = strong_order_study(
            sigma=sde.strong_order_sigma,
            paths=sde.strong_order_paths,
            steps=sde.strong_order_steps,
            fine_factor=sde.strong_order_fine_factor,
            seed=self.seed,
        )
        self.writer.write_csv("strong_order.csv", pd.DataFrame({"steps": study.steps, "error": study.errors}))
        self.record_metric("strong_order", study.order)
        self.record_check("sde_strong_order", study.order >= sde.strong_order_min, order=study.order)

    def _federated_system(self, grid: TimeGrid) -> None:
        sde = self.config.sde
        tasks, alphas = build_federation(self.config.tasks, self.seed)
        dim = tasks[0].dim
        schedule = constant_schedule(self.config, dim)
        clients = [ClientDynamics(np.full(dim, sde.w0), task, schedule) for task in tasks]
        result = integrate_particle_system(clients, alphas, sde.sigma, grid, self.seed, sde.noise_mode)

        risks = mixture_risk_batch(result.consensus.states, tasks, alphas)
        running = np.cumsum(risks) / np.arange(1, risks.size + 1)
        optimum_risk = mixture_risk(mixture_optimum(tasks, alphas), tasks, alphas)
        frame = pd.DataFrame(
            {
                "t": grid.times(),
                "consensus_risk": risks,
                "running_average": running,
                "server_risk": mixture_risk_batch(result.server.states, tasks, alphas),
            }
        )
        for i in range(dim):
            frame[f"consensus_w_{i}"] = result.consensus.states[:, i]
        self.writer.write_csv("consensus.csv", frame)
        self.writer.write_csv("trajectories.csv", trajectories_frame(result, sde.trajectory_stride))

        slack = EXACTNESS_TOL * max(1.0, float(running[0]))
        final_gap = float(risks[-1] - optimum_risk)
        self.metrics.update(final_consensus_risk=float(risks[-1]), optimum_risk=optimum_risk)
        self.record_check("server_risk_time_average_decreasing", bool(np.all(np.diff(running) <= slack)))
        self.record_check(
            "server_risk_near_optimum", abs(final_gap) <= sde.risk_tolerance, gap=final_gap
        )

    def _moment_match(self, grid: TimeGrid) -> None:
        sde, picard = self.config.sde, self.config.picard
        task = TaskSpec.quadratic(np.array([sde.moment_center]), np.eye(1))
        schedule = constant_schedule(self.config, 1)
        law = GaussianLaw(sde.w0, sde.moment_w0_std)
        p = sde.moment_clients

        x0 = law.sample(stream(self.seed, StreamTag.INITIAL_STATES), p)
        clients = [ClientDynamics(x0[j], task, schedule) for j in range(p)]
        system = integrate_particle_system(clients, MixtureWeights.uniform(p), sde.sigma, grid, self.seed)
        equilibrium = picard_fixed_point(
            law,
            FederatedInteraction(task, schedule),
            sde.sigma,
            grid,
            sde.moment_paths,
            picard.tol,
            picard.max_iters,
            picard.damping,
            self.seed,
            picard.projections,
        )
        self.record_convergence("picard", equilibrium.converged, equilibrium.iterations)

        particles = EmpiricalMeasure.uniform(system.states()[-1])
        comparison = compare_moments(particles, equilibrium.flow.terminal(), k=picard.stderr_multiplier)
        self.writer.write_json(
            "moments.json",
            {
                "clients": p,
                "mean_gap": comparison.mean_gap,
                "mean_stderr": comparison.mean_stderr,
                "variance_gap": comparison.variance_gap,
                "variance_stderr": comparison.variance_stderr,
                "picard_history": list(equilibrium.history),
            },
        )
        self.record_check("particle_moments_match_flow", comparison.passed)

        cost = cost_from_config(self.config, [task], MixtureWeights.uniform(1))
        payoff = estimate_payoff(
            np.array([sde.w0]),
            ScheduledGradientPolicy(task, schedule),
            cost,
            sde.sigma,
            grid,
            sde.moment_paths,
            self.seed,
            flow=equilibrium.flow,
            task=task,
        )
        self.metrics.update(representative_payoff=payoff.mean, representative_payoff_stderr=payoff.stderr)


# === CAMPO MEDIO ===


@ScenarioFactory.register("picard-equilibrium")
class PicardEquilibriumScenario(BaseScenario):
    """Punto fijo de Picard y varianza terminal frente a la fórmula de Ornstein-Uhlenbeck."""

    def execute(self) -> None:
        pc = self.config.picard
        grid = time_grid(self.config)
        law = GaussianLaw(pc.w0_mean, pc.w0_std)
        if pc.interaction == "federated":
            tasks = self.config.tasks
            task = TaskSpec.quadratic(np.array([tasks.center_mean]), tasks.curvature * np.eye(1))
            interaction = FederatedInteraction(task, constant_schedule(self.config, 1))
            rate = self.config.sde.gain * tasks.curvature
        else:
            interaction = MeanReversionInteraction(pc.rate)
            rate = pc.rate

        result = picard_fixed_point(
            law, interaction, pc.sigma, grid, pc.paths, pc.tol, pc.max_iters, pc.damping, self.seed, pc.projections
        )
        self.record_convergence("picard", result.converged, result.iterations)

        flow = result.flow
        self.writer.write_csv(
            "picard_history.csv",
            pd.DataFrame({"iteration": np.arange(1, result.iterations + 1), "distance": result.history}),
        )
        self.writer.write_csv(
            "flow_moments.csv",
            pd.DataFrame({"t": flow.times, "mean": flow.means()[:, 0], "variance": flow.variances()[:, 0]}),
        )

        v0 = float(flow.variances()[0, 0])
        elapsed = grid.horizon - grid.t0
        if rate > 0:
            decay = np.exp(-2.0 * rate * elapsed)
            target = v0 * decay + pc.sigma**2 / (2.0 * rate) * (1.0 - decay)
        else:
            target = v0 + pc.sigma**2 * elapsed
        variance = float(flow.variances()[-1, 0])
        stderr = variance * np.sqrt(2.0 / (pc.paths - 1))
        self.metrics.update(terminal_variance=variance, target_variance=target)
        self.record_check("picard_converged", result.converged, iterations=result.iterations)
        self.record_check(
            "terminal_variance_matches",
            abs(variance - target) <= pc.stderr_multiplier * stderr,
            variance=variance,
            target=target,
        )


# === PDE ===


@ScenarioFactory.register("lq-hjb-fp")
class LqHjbFpScenario(BaseScenario):
    """HJB frente al oráculo de Riccati, conservación FP y estudio de refinamiento."""

    def execute(self) -> None:
        pde = self.config.pde
        lq = lq_from_config(self.config, pde.terminal_weight)
        controls = control_set(self.config)
        problem = lq_problem(lq, controls)
        grid = pde_grid(self.config, controls)

        with performance_context(self.logger, "hjb_backward") as perf:
            value, control = solve_hjb_backward(problem, grid)
        seconds = float(perf.execution_time or 0.0)

        v_ref, u_ref = lq_reference(lq, grid.t0, grid.x)
        value_error = interior_error(grid, value.values[0], v_ref, pde.interior)
        control_error = interior_error(grid, control.values[0], u_ref, pde.interior)

        mu0 = gaussian_density(grid, pde.mu0_mean, pde.mu0_std)
        density = solve_fp_forward(mu0, drift_from_control(problem, control), pde.sigma, grid)
        moments = density_moments(grid, density.values)
        mass_drift = float(np.max(np.abs(moments["mass"] - moments["mass"].iloc[0])))

        for name, values in (("value", value.values), ("control", control.values), ("density", density.values)):
            self.writer.write_grid(name, values, grid, value.boundary, every=pde.output_every)
        self.writer.write_csv("fp_moments.csv", moments)

        ou_error, ou_mass_drift = self._ornstein_uhlenbeck()
        errors = self._grid_study()

        summary = {
            "value_error": value_error,
            "control_error": control_error,
            "hjb_seconds": seconds,
            "mass_drift": mass_drift,
            "ou_variance_rel_error": ou_error,
            "ou_mass_drift": ou_mass_drift,
            "grid_study_errors": errors,
            "n_x": grid.n_x,
            "n_t": grid.n_t,
        }
        self.writer.write_json("lq_errors.json", summary)
        self.metrics.update(summary)

        ratios = [a / b for a, b in zip(errors, errors[1:]) if b > 0]
        self.record_check("hjb_value_accuracy", value_error <= pde.value_tol, error=value_error)
        self.record_check("hjb_control_accuracy", control_error <= pde.control_tol, error=control_error)
        self.record_check("hjb_runtime", seconds <= HJB_TIME_LIMIT, seconds=seconds)
        self.record_check(
            "fp_mass_conserved", max(mass_drift, ou_mass_drift) <= pde.mass_tol, drift=mass_drift
        )
        self.record_check("fp_ou_variance", ou_error <= pde.variance_tol, error=ou_error)
        self.record_check(
            "hjb_grid_convergence",
            len(ratios) == len(errors) - 1 and all(r >= pde.grid_study_min_ratio for r in ratios),
            ratios=ratios,
        )

    def _ornstein_uhlenbeck(self) -> tuple[float, float]:
        """FP con drift −x en un dominio amplio frente a V(t) = V0 e^{−2t} + ½σ²(1 − e^{−2t})."""
        pde, t = self.config.pde, self.config.time
        grid = Grid1D.from_spacing(-pde.ou_x_max, pde.ou_x_max, pde.ou_dx, t.t0, t.horizon, pde.sigma, pde.ou_x_max)
        mu0 = gaussian_density(grid, pde.mu0_mean, pde.mu0_std)
        density = solve_fp_forward(mu0, -grid.x, pde.sigma, grid)
        moments = density_moments(grid, density.values)
        variance = moments["variance"].to_numpy()
        decay = np.exp(-2.0 * (grid.t - grid.t0))
        target = variance[0] * decay + 0.5 * pde.sigma**2 * (1.0 - decay)
        rel = np.abs(variance - target) / target
        moments["target_variance"] = target
        moments["relative_error"] = rel
        self.writer.write_csv("ou_moments.csv", moments)
        mass = moments["mass"].to_numpy()
        return float(np.max(rel)), float(np.max(np.abs(mass - mass[0])))

    def _grid_study(self) -> List[float]:
        pde, t = self.config.pde, self.config.time
        lq = LqProblem(pde.grid_study_sigma, pde.grid_study_terminal_weight, t.horizon)
        bound = pde.grid_study_control_max
        errors: List[float] = []
        for h in pde.grid_study_dx:
            controls = ControlSet(-bound, bound, int(round(2.0 * bound / h)) + 1)
            grid = Grid1D.from_spacing(
                -pde.grid_study_x_max, pde.grid_study_x_max, h, t.t0, t.horizon, lq.sigma, bound
            )
            value, _ = solve_hjb_backward(lq_problem(lq, controls), grid)
            reference, _ = lq_reference(lq, grid.t0, grid.x)
            errors.append(interior_error(grid, value.values[0], reference, pde.interior))
        self.writer.write_csv("grid_study.csv", pd.DataFrame({"dx": pde.grid_study_dx, "value_error": errors}))
        return errors


@ScenarioFactory.register("coupled-mfg")
class CoupledMfgScenario(BaseScenario):
    """Juego de campo medio con aversión a la multitud (HJB + FP acoplados)."""

    def execute(self) -> None:
        pde, coupling = self.config.pde, self.config.coupling
        lq = lq_from_config(self.config, pde.terminal_weight)
        controls = control_set(self.config)
        grid = pde_grid(self.config, controls)
        mu0 = gaussian_density(grid, pde.mu0_mean, pde.mu0_std)

        decoupled = solve_coupled_mfg(crowd_averse_lq_problem(lq, 0.0, controls), mu0, grid)
        reference, _ = solve_hjb_backward(lq_problem(lq, controls), grid)
        self.record_check(
            "decoupled_reproduces_lq",
            decoupled.iterations == 1 and np.allclose(decoupled.value.values, reference.values, rtol=0.0, atol=1e-12),
        )

        result = solve_coupled_mfg(
            crowd_averse_lq_problem(lq, coupling.coupling, controls),
            mu0,
            grid,
            coupling.tol,
            coupling.max_iters,
            coupling.damping,
        )
        self.record_convergence("coupled_mfg", result.converged, result.iterations)

        history = np.asarray(result.history)
        tail = history[-min(DECREASING_TAIL, history.size):]
        self.writer.write_csv(
            "mfg_history.csv",
            pd.DataFrame({"iteration": np.arange(1, history.size + 1), "change": history}),
        )
        for name, values in (
            ("value", result.value.values),
            ("control", result.control.values),
            ("density", result.density.values),
        ):
            self.writer.write_grid(name, values, grid, result.value.boundary, every=pde.output_every)
        moments = density_moments(grid, result.density.values)
        self.writer.write_csv("mfg_moments.csv", moments)

        self.metrics.update(
            final_change=float(history[-1]),
            terminal_mean=float(moments["mean"].iloc[-1]),
            terminal_variance=float(moments["variance"].iloc[-1]),
        )
        self.record_check("coupled_mfg_converged", result.converged, iterations=result.iterations)
        self.record_check("coupled_mfg_tail_decreasing", bool(np.all(np.diff(tail) <= 0.0)))


# === PAGOS ===


@ScenarioFactory.register("nash-check")
class NashCheckScenario(BaseScenario):
    """Teorema de verificación y desviaciones unilaterales frente al equilibrio LQ."""

    def execute(self) -> None:
        nash, pde = self.config.nash, self.config.pde
        grid = time_grid(self.config)
        cost = lq_cost(self.config.cost.terminal_weight)
        policy = lq_equilibrium_policy(grid, offset_bound=nash.offset_bound)
        x0 = np.array([nash.x0])

        lq = lq_from_config(self.config, self.config.cost.terminal_weight)
        controls = control_set(self.config)
        value, _ = solve_hjb_backward(lq_problem(lq, controls), pde_grid(self.config, controls))
        verification = verification_check(
            value, policy, cost, pde.sigma, grid, nash.x0, nash.paths, self.seed, nash.allowance, nash.stderr_multiplier
        )
        self.writer.write_json(
            "verification.json",
            {
                "value_at_x0": verification.value_at_x0,
                "payoff": verification.estimate.to_dict(),
                "allowance": verification.allowance,
                "agreed": verification.agreed,
            },
        )
        self.metrics.update(
            value_at_x0=verification.value_at_x0, payoff_mean=verification.estimate.mean
        )
        self.record_check("verification_agreement", verification.agreed)

        perturbations = random_perturbations(nash.perturbations, self.seed, grid.t0, grid.horizon)
        report = nash_deviation_gap(policy, perturbations, x0, cost, pde.sigma, grid, nash.paths, self.seed)
        offset = nash_deviation_gap(
            policy, [ConstantOffset(nash.offset)], x0, cost, pde.sigma, grid, nash.paths, self.seed
        )
        frame = pd.DataFrame(
            {
                "label": report.labels + offset.labels,
                "gap": np.r_[report.gaps, offset.gaps],
                "stderr": np.r_[report.gap_stderr, offset.gap_stderr],
                "perturbed_mean": [e.mean for e in report.perturbed + offset.perturbed],
            }
        )
        self.writer.write_csv("deviations.csv", frame)

        k = nash.stderr_multiplier
        offset_gap, offset_se = float(offset.gaps[0]), float(offset.gap_stderr[0])
        self.metrics.update(max_normalized_gap=report.max_normalized_gap(), offset_gap=offset_gap)
        self.record_check("no_profitable_deviation", report.no_profitable_deviation(k))
        self.record_check("offset_deviation_strictly_worse", offset_gap < -k * offset_se, gap=offset_gap)

        if nash.finite_population_clients > 0:
            self._finite_population(grid)

    def _finite_population(self, grid: TimeGrid) -> None:
        """Diagnóstico con p jugadores: sólo métricas, el perfil de gradiente no es un equilibrio exacto."""
        nash, sde = self.config.nash, self.config.sde
        section = self.config.tasks.model_copy(
            update={"clients": nash.finite_population_clients, "sample_counts": None}
        )
        tasks, alphas = build_federation(section, self.seed)
        dim = tasks[0].dim
        schedule = constant_schedule(self.config, dim, offset_bound=nash.offset_bound)
        clients = [ClientDynamics(np.full(dim, sde.w0), task, schedule) for task in tasks]
        perturbations = random_perturbations(
            nash.finite_population_perturbations, self.seed, grid.t0, grid.horizon
        )
        report = finite_population_deviation_gap(
            clients,
            alphas,
            0,
            perturbations,
            sde.sigma,
            grid,
            nash.finite_population_paths,
            self.seed,
            sde.noise_mode,
        )
        self.writer.write_csv(
            "finite_population.csv",
            pd.DataFrame({"label": report.labels, "gap": report.gaps, "stderr": report.gap_stderr}),
        )
        self.record_metric("finite_population_max_normalized_gap", report.max_normalized_gap())


# === GLIVENKO-CANTELLI ===


@ScenarioFactory.register("gc-diagnostic")
class GcDiagnosticScenario(BaseScenario):
    """W1 mediana entre medidas empíricas y una muestra de referencia grande."""

    def execute(self) -> None:
        gc = self.config.gc
        rows = gc_diagnostic(
            gc.p_values,
            GaussianLaw(gc.mean, gc.std),
            gc.replicates,
            self.seed,
            reference_size=gc.reference_size,
            threads=self.threads,
            include_reference_stream=gc.include_reference_stream,
        )
        self.writer.write_csv(
            "gc.csv", pd.DataFrame({"p": [r.p for r in rows], "median_w1": [r.median_w1 for r in rows]})
        )
        self.writer.write_csv(
            "gc_replicates.csv",
            pd.DataFrame(
                [
                    {"p": row.p, "replicate": r, "w1": d}
                    for row in rows
                    for r, d in zip(row.replicates, row.distances)
                ]
            ),
        )
        self.metrics.update({f"median_w1_p{r.p}": r.median_w1 for r in rows})
        self.record_check("gc_medians_decreasing", medians_decreasing(rows, strict=True))

"""
Tests unitarios de pagos y comprobaciones de Nash.

Estimación Monte Carlo frente al valor LQ cerrado, perturbaciones acotadas,
huecos de desviación con números aleatorios comunes y verificación HJB.
"""

import numpy as np
import pytest
from app.models.grids import Grid1D
from app.models.measures import EmpiricalMeasure
from app.models.payoffs import CostSpec, DeviationReport, PayoffEstimate
from app.models.schedules import ControlSchedule, TimeGrid
from app.models.tasks import MixtureWeights, TaskSpec
from app.models.trajectories import ClientDynamics
from app.services.control_solver import lq_problem, solve_hjb_backward
from app.services.payoff_and_nash import (
    ConstantOffset,
    GainScaling,
    GridFeedbackPolicy,
    IntervalBump,
    estimate_payoff,
    finite_population_deviation_gap,
    lq_cost,
    lq_equilibrium_policy,
    nash_deviation_gap,
    random_perturbations,
    server_risk_cost,
    simulate_payoffs,
    verification_check,
)
from app.utils.exceptions import InvalidDomainObjectError


class TestPayoffEstimation:
    """Tests de la estimación de pagos."""

    @pytest.mark.unit
    def test_deterministic_lq_payoff(self):
        """Sin ruido, u = −x desde x0 = 1 paga v(0, 1) = −½."""
        # Arrange
        grid = TimeGrid(horizon=1.0, steps=400)

        # Act
        values = simulate_payoffs(1.0, lq_equilibrium_policy(grid), lq_cost(1.0), 0.0, grid, 2, seed=0)

        # Assert
        np.testing.assert_allclose(values, -0.5, atol=1e-2)
        assert values[0] == values[1]

    @pytest.mark.unit
    def test_stochastic_lq_payoff_matches_closed_form(self):
        """Con σ = 1 y x0 = 0 el pago medio es r(0) = −½."""
        # Arrange
        grid = TimeGrid(horizon=1.0, steps=200)

        # Act
        estimate = estimate_payoff(0.0, lq_equilibrium_policy(grid), lq_cost(1.0), 1.0, grid, 4000, seed=1)

        # Assert
        assert abs(estimate.mean + 0.5) <= 4.0 * estimate.stderr + 2e-2
        assert estimate.paths == 4000
        assert estimate.seed == 1

    @pytest.mark.unit
    def test_single_path_is_rejected(self, short_grid):
        """El error estándar necesita al menos dos trayectorias."""
        with pytest.raises(InvalidDomainObjectError):
            simulate_payoffs(0.0, lq_equilibrium_policy(short_grid), lq_cost(), 1.0, short_grid, 1, 0)

    @pytest.mark.unit
    def test_flow_with_zero_mean_gradient_changes_nothing(self, short_grid):
        """Un flujo concentrado en el óptimo no añade deriva agregada."""
        # Arrange
        task = TaskSpec.quadratic([0.0], [[1.0]])
        flow = EmpiricalMeasure.uniform(np.zeros(10))
        policy = lq_equilibrium_policy(short_grid)

        # Act
        with_flow = simulate_payoffs(0.3, policy, lq_cost(), 0.5, short_grid, 20, 4, flow, task)
        without = simulate_payoffs(0.3, policy, lq_cost(), 0.5, short_grid, 20, 4)

        # Assert
        np.testing.assert_array_equal(with_flow, without)

    @pytest.mark.unit
    def test_costs_are_stored_negated(self, quadratic_tasks, quadratic_mixture):
        """El riesgo del servidor entra como recompensa negativa."""
        # Arrange
        cost = server_risk_cost(quadratic_tasks, quadratic_mixture)
        x = np.array([[0.0, 0.0]])

        # Act
        reward = cost.running(0.0, x, x, np.zeros(2))

        # Assert
        assert reward.shape == (1,)
        assert reward[0] < 0.0
        assert cost.terminal(x, np.zeros(2))[0] == pytest.approx(reward[0])

    @pytest.mark.unit
    def test_from_costs_negates_constant_cost(self):
        """from_costs(c) almacena −c."""
        cost = CostSpec.from_costs("unit", lambda t, x, u, m: np.ones(len(x)), lambda x, m: np.ones(len(x)))

        assert cost.running(0.0, np.zeros((2, 1)), np.zeros((2, 1)), np.zeros(1)).tolist() == [-1.0, -1.0]


class TestPerturbations:
    """Tests de las familias de perturbaciones."""

    @pytest.fixture
    def schedule(self):
        """Calendario Λ ≡ 1 en [0, 1] con |offset| ≤ 2."""
        return ControlSchedule.constant(1.0, 1, 0.0, 1.0, offset_bound=2.0)

    @pytest.mark.unit
    def test_interval_bump_only_touches_its_interval(self, schedule):
        """El bump suma δ sólo en [start, end)."""
        # Act
        bumped = IntervalBump(0.25, 0.5, 0.3).apply(schedule)

        # Assert
        _, offsets = bumped.on_grid(TimeGrid(horizon=1.0, steps=4))
        np.testing.assert_allclose(offsets[:, 0], [0.0, 0.3, 0.0, 0.0])

    @pytest.mark.unit
    def test_offsets_are_clipped_to_bound(self, schedule):
        """Una desviación no puede salir de las cotas del calendario."""
        shifted = ConstantOffset(5.0).apply(schedule)

        assert shifted.offsets.max() == 2.0

    @pytest.mark.unit
    def test_gain_scaling_is_clipped_to_lambda_max(self, schedule):
        """Λ escalado se recorta a lambda_max."""
        scaled = GainScaling(20.0).apply(schedule)

        assert scaled.gains.max() == schedule.lambda_max

    @pytest.mark.unit
    def test_random_perturbations_are_balanced_and_reproducible(self, schedule):
        """Las tres familias se alternan y la misma semilla repite la lista."""
        # Act
        first = random_perturbations(30, seed=9, t0=0.0, horizon=1.0)
        second = random_perturbations(30, seed=9, t0=0.0, horizon=1.0)

        # Assert
        assert [p.label for p in first] == [p.label for p in second]
        assert sum(isinstance(p, ConstantOffset) for p in first) == 10
        assert sum(isinstance(p, IntervalBump) for p in first) == 10
        assert sum(isinstance(p, GainScaling) for p in first) == 10
        for perturbation in first:
            applied = perturbation.apply(schedule)
            assert np.abs(applied.offsets).max() <= 2.0
            assert applied.gains.max() <= schedule.lambda_max
            if isinstance(perturbation, IntervalBump):
                assert 0.0 <= perturbation.start < perturbation.end <= 1.0


class TestDeviationReport:
    """Tests del reporte de desviaciones."""

    @staticmethod
    def _estimate(mean: float) -> PayoffEstimate:
        return PayoffEstimate(mean=mean, stderr=0.1, paths=10, seed=0)

    @pytest.mark.unit
    def test_max_normalized_gap(self):
        """max gap_i / stderr_i."""
        report = DeviationReport(
            baseline=self._estimate(0.0),
            perturbed=[self._estimate(-1.0), self._estimate(0.5)],
            gaps=np.array([-1.0, 0.5]),
            gap_stderr=np.array([0.1, 0.25]),
        )

        assert report.max_normalized_gap() == pytest.approx(2.0)
        assert report.no_profitable_deviation(k=4.0)
        assert not report.no_profitable_deviation(k=1.0)

    @pytest.mark.unit
    def test_empty_report_has_no_gap(self):
        """Sin perturbaciones no hay hueco que normalizar."""
        report = DeviationReport(self._estimate(0.0), [], np.array([]), np.array([]))

        assert report.max_normalized_gap() is None
        assert report.no_profitable_deviation()

    @pytest.mark.unit
    def test_inconsistent_lengths_are_rejected(self):
        """Un gap por perturbación."""
        with pytest.raises(InvalidDomainObjectError):
            DeviationReport(self._estimate(0.0), [self._estimate(1.0)], np.array([1.0, 2.0]), np.array([0.1]))

    @pytest.mark.unit
    def test_payoff_interval(self):
        """mean ± k·stderr."""
        assert self._estimate(1.0).interval(2.0) == pytest.approx((0.8, 1.2))


class TestNashChecks:
    """Tests de las comprobaciones de desviación."""

    @pytest.mark.unit
    def test_offset_deviation_from_lq_equilibrium_is_not_profitable(self):
        """Desplazar el control óptimo LQ empeora el pago con CRN."""
        # Arrange
        grid = TimeGrid(horizon=1.0, steps=100)
        policy = lq_equilibrium_policy(grid)
        perturbations = [ConstantOffset(0.5), ConstantOffset(-0.5), GainScaling(1.4)]

        # Act
        report = nash_deviation_gap(policy, perturbations, 0.0, lq_cost(1.0), 1.0, grid, 500, seed=3)

        # Assert
        assert np.all(report.gaps < 0.0)
        assert report.no_profitable_deviation()
        assert report.labels[0] == "offset(+0.5)"

    @pytest.mark.unit
    def test_verification_check_against_hjb_value(self, lq, coarse_controls):
        """El pago de la política del HJB coincide con v(0, x0)."""
        # Arrange
        pde_grid = Grid1D.stable(-3.0, 3.0, 121, 0.0, 1.0, lq.sigma, coarse_controls.max_abs)
        value, control = solve_hjb_backward(lq_problem(lq, coarse_controls), pde_grid)
        time_grid = TimeGrid(horizon=1.0, steps=200)

        # Act
        result = verification_check(
            value, GridFeedbackPolicy(control), lq_cost(1.0), lq.sigma, time_grid, 0.5, 2000, seed=5
        )

        # Assert
        assert result.value_at_x0 == pytest.approx(-0.625, abs=1e-2)
        assert result.agreed

    @pytest.mark.unit
    def test_finite_population_report_shape(self, short_grid):
        """Con p jugadores el reporte trae un gap finito por perturbación."""
        # Arrange
        schedule = ControlSchedule.constant(1.0, 1, 0.0, 1.0, offset_bound=1.0)
        clients = [
            ClientDynamics(np.array([1.0]), TaskSpec.quadratic([c], [[1.0]]), schedule)
            for c in (-1.0, 0.0, 1.0)
        ]
        perturbations = [ConstantOffset(0.5), GainScaling(0.5)]

        # Act
        report = finite_population_deviation_gap(
            clients, MixtureWeights.uniform(3), 1, perturbations, 0.1, short_grid, 3, seed=0
        )

        # Assert
        assert report.gaps.shape == (2,)
        assert np.all(np.isfinite(report.gaps))
        assert report.baseline.paths == 3

    @pytest.mark.unit
    def test_finite_population_player_out_of_range(self, short_grid):
        """El jugador desviado debe existir."""
        schedule = ControlSchedule.constant(1.0, 1, 0.0, 1.0)
        clients = [ClientDynamics(np.zeros(1), TaskSpec.quadratic([0.0]), schedule)]

        with pytest.raises(InvalidDomainObjectError):
            finite_population_deviation_gap(
                clients, MixtureWeights.uniform(1), 3, [], 0.1, short_grid, 2, seed=0
            )

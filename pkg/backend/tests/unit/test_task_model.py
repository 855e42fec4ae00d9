"""
Tests unitarios del modelo de tareas.

Riesgo y gradiente de las familias cuadrática y logística, pesos de mezcla,
óptimo cerrado de la mezcla y generación reproducible de federaciones.
"""

import numpy as np
import pytest
from app.config.scenario_config import TasksSection
from app.models.tasks import Dataset, MixtureWeights, TaskFamily, TaskSpec
from app.services.task_model import (
    attach_dataset,
    build_federation,
    grad,
    grad_batch,
    materialize,
    mixture_grad,
    mixture_optimum,
    mixture_risk,
    risk,
    sample_dataset,
)
from app.utils.exceptions import (
    DimensionMismatchError,
    InvalidDomainObjectError,
    SingularCurvatureError,
)


class TestQuadraticTask:
    """Tests de la familia cuadrática."""

    @pytest.mark.unit
    def test_risk_and_gradient_closed_form(self, quadratic_tasks):
        """Riesgo ½(w−θ)ᵀA(w−θ) y gradiente A(w−θ) en un punto conocido."""
        # Arrange
        task = quadratic_tasks[0]
        w = np.zeros(2)

        # Act
        value = risk(w, task)
        gradient = grad(w, task)

        # Assert
        assert value == pytest.approx(1.5)
        np.testing.assert_allclose(gradient, [-1.0, 2.0])

    @pytest.mark.unit
    def test_risk_vanishes_at_center(self, quadratic_tasks):
        """El centro de la tarea es su minimizador con riesgo cero."""
        for task in quadratic_tasks:
            assert risk(task.center, task) == 0.0
            np.testing.assert_array_equal(grad(task.center, task), np.zeros(2))

    @pytest.mark.unit
    def test_default_curvature_is_identity(self):
        """Sin curvatura explícita se usa A = I."""
        task = TaskSpec.quadratic([1.0, 2.0, 3.0])

        np.testing.assert_array_equal(task.curvature, np.eye(3))
        assert task.dim == 3

    @pytest.mark.unit
    def test_wrong_dimension_is_rejected(self, quadratic_tasks):
        """Un vector de pesos de dimensión distinta lanza DimensionMismatchError."""
        with pytest.raises(DimensionMismatchError) as exc_info:
            risk(np.zeros(3), quadratic_tasks[0])

        assert exc_info.value.details["expected"] == [2]
        assert exc_info.value.details["actual"] == [3]

    @pytest.mark.unit
    def test_non_symmetric_curvature_is_rejected(self):
        """Una curvatura no simétrica no construye una tarea válida."""
        with pytest.raises(InvalidDomainObjectError):
            TaskSpec.quadratic([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])

    @pytest.mark.unit
    def test_indefinite_curvature_is_rejected(self):
        """Una curvatura con autovalor negativo no es semidefinida positiva."""
        with pytest.raises(InvalidDomainObjectError):
            TaskSpec.quadratic([0.0], [[-1.0]])

    @pytest.mark.unit
    def test_grad_batch_matches_pointwise_gradient(self, quadratic_tasks):
        """El gradiente vectorizado coincide con el gradiente fila a fila."""
        # Arrange
        task = quadratic_tasks[1]
        states = np.array([[0.0, 0.0], [1.0, -1.0], [3.0, 2.5]])

        # Act
        batch = grad_batch(states, task)

        # Assert
        np.testing.assert_allclose(batch, np.stack([grad(row, task) for row in states]))


class TestMixture:
    """Tests de la mezcla de tareas."""

    @pytest.mark.unit
    def test_weights_from_sample_counts(self):
        """α_k = m_k / m."""
        weights = MixtureWeights.from_sample_counts([1, 3])

        np.testing.assert_allclose(weights.alphas, [0.25, 0.75])

    @pytest.mark.unit
    def test_weights_must_lie_in_simplex(self):
        """Pesos que no suman uno se rechazan."""
        with pytest.raises(InvalidDomainObjectError):
            MixtureWeights(np.array([0.5, 0.6]))

    @pytest.mark.unit
    def test_zero_sample_count_is_rejected(self):
        """Un cliente sin muestras no define un peso de mezcla."""
        with pytest.raises(InvalidDomainObjectError):
            MixtureWeights.from_sample_counts([3, 0])

    @pytest.mark.unit
    def test_mixture_optimum_closed_form(self, quadratic_tasks, quadratic_mixture):
        """(ΣαA)⁻¹ΣαAθ coincide con el valor calculado a mano."""
        # Act
        optimum = mixture_optimum(quadratic_tasks, quadratic_mixture)

        # Assert
        np.testing.assert_allclose(optimum, [-8.0 / 9.5, 0.5], atol=1e-12)

    @pytest.mark.unit
    def test_mixture_gradient_vanishes_at_optimum(self, quadratic_tasks, quadratic_mixture):
        """El óptimo de la mezcla anula el gradiente de la mezcla."""
        optimum = mixture_optimum(quadratic_tasks, quadratic_mixture)

        np.testing.assert_allclose(
            mixture_grad(optimum, quadratic_tasks, quadratic_mixture), np.zeros(2), atol=1e-12
        )

    @pytest.mark.unit
    def test_mixture_risk_is_weighted_sum(self, quadratic_tasks, quadratic_mixture):
        """L_{D*}(w) = Σ α_k L_k(w)."""
        w = np.array([0.3, -0.7])
        expected = sum(
            a * risk(w, t) for a, t in zip(quadratic_mixture.alphas, quadratic_tasks)
        )

        assert mixture_risk(w, quadratic_tasks, quadratic_mixture) == pytest.approx(expected)

    @pytest.mark.unit
    def test_singular_aggregate_curvature(self):
        """Tareas planas en una misma dirección no tienen óptimo único."""
        # Arrange
        tasks = [
            TaskSpec.quadratic([0.0, 0.0], np.diag([1.0, 0.0])),
            TaskSpec.quadratic([1.0, 1.0], np.diag([2.0, 0.0])),
        ]

        # Act / Assert
        with pytest.raises(SingularCurvatureError):
            mixture_optimum(tasks, MixtureWeights.uniform(2))

    @pytest.mark.unit
    def test_mismatched_weights_length(self, quadratic_tasks):
        """El número de pesos debe coincidir con el número de tareas."""
        with pytest.raises(DimensionMismatchError):
            mixture_risk(np.zeros(2), quadratic_tasks, MixtureWeights.uniform(2))


class TestLogisticTask:
    """Tests de la familia logística."""

    @pytest.fixture
    def logistic_task(self):
        """
        Tarea logística de 2 clases en d_x = 2 con dataset de 40 muestras.

        Returns:
            TaskSpec: tarea materializada
        """
        task = TaskSpec.logistic(np.array([[-1.0, 0.0], [1.0, 0.0]]), sample_count=40, task_id=3)
        return materialize(task, seed=0)

    @pytest.mark.unit
    def test_weight_dimension(self, logistic_task):
        """d = c·(d_x + 1)."""
        assert logistic_task.dim == 6
        assert logistic_task.dataset.size == 40

    @pytest.mark.unit
    def test_risk_at_zero_is_log_classes(self, logistic_task):
        """Con pesos nulos la entropía cruzada vale log c."""
        assert risk(np.zeros(6), logistic_task) == pytest.approx(np.log(2.0), abs=1e-12)

    @pytest.mark.unit
    def test_gradient_matches_finite_differences(self, logistic_task):
        """El gradiente analítico coincide con diferencias centradas."""
        # Arrange
        rng = np.random.default_rng(0)
        w = 0.3 * rng.standard_normal(6)
        h = 1e-6

        # Act
        numeric = np.array(
            [
                (risk(w + h * e, logistic_task) - risk(w - h * e, logistic_task)) / (2 * h)
                for e in np.eye(6)
            ]
        )

        # Assert
        np.testing.assert_allclose(grad(w, logistic_task), numeric, atol=1e-6)

    @pytest.mark.unit
    def test_minibatch_gradient_uses_only_selected_samples(self, logistic_task):
        """Con `indices` el gradiente es el de la tarea restringida a ese minibatch."""
        # Arrange
        indices = np.arange(10)
        data = logistic_task.dataset
        subset = Dataset(data.features[indices], data.labels[indices], data.num_classes)
        restricted = attach_dataset(logistic_task, subset)
        w = np.linspace(-0.5, 0.5, 6)

        # Act / Assert
        np.testing.assert_allclose(grad(w, logistic_task, indices), grad(w, restricted))

    @pytest.mark.unit
    def test_dataset_sampling_is_reproducible(self, logistic_task):
        """El mismo (seed, task_id) produce el mismo dataset."""
        a = sample_dataset(logistic_task, 25, seed=11)
        b = sample_dataset(logistic_task, 25, seed=11)

        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert set(np.unique(a.labels)) <= {0, 1}

    @pytest.mark.unit
    def test_quadratic_tasks_have_no_dataset(self, quadratic_tasks):
        """Muestrear un dataset de una tarea cuadrática es un error de dominio."""
        with pytest.raises(InvalidDomainObjectError):
            sample_dataset(quadratic_tasks[0], 10, seed=0)

    @pytest.mark.unit
    def test_attach_dataset_checks_classes(self, logistic_task):
        """Un dataset con otro número de clases no se puede adjuntar."""
        dataset = Dataset(np.zeros((3, 2)), np.array([0, 1, 2]), num_classes=3)

        with pytest.raises(InvalidDomainObjectError):
            attach_dataset(logistic_task, dataset)


class TestBuildFederation:
    """Tests de la generación de federaciones."""

    @pytest.mark.unit
    def test_quadratic_federation_is_reproducible(self):
        """La misma semilla genera los mismos centros."""
        # Arrange
        section = TasksSection(clients=4, dim=2, curvature_jitter=0.3)

        # Act
        first, alphas = build_federation(section, seed=5)
        second, _ = build_federation(section, seed=5)

        # Assert
        assert len(first) == 4
        np.testing.assert_allclose(alphas.alphas, np.full(4, 0.25))
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.center, b.center)
            np.testing.assert_array_equal(a.curvature, b.curvature)

    @pytest.mark.unit
    def test_homogeneous_federation_shares_center(self):
        """Con `homogeneous` todos los centros son el centro común."""
        section = TasksSection(clients=3, dim=2, homogeneous=True, center_mean=1.5)

        tasks, _ = build_federation(section, seed=0)

        for task in tasks:
            np.testing.assert_array_equal(task.center, [1.5, 1.5])

    @pytest.mark.unit
    def test_sample_counts_define_mixture(self):
        """Los pesos de mezcla siguen los m_k configurados."""
        section = TasksSection(clients=2, sample_counts=[10, 30])

        tasks, alphas = build_federation(section, seed=0)

        np.testing.assert_allclose(alphas.alphas, [0.25, 0.75])
        assert [t.sample_count for t in tasks] == [10, 30]

    @pytest.mark.unit
    def test_sample_counts_length_must_match_clients(self):
        """Un m_k por cliente."""
        section = TasksSection(clients=3, sample_counts=[10, 30])

        with pytest.raises(InvalidDomainObjectError):
            build_federation(section, seed=0)

    @pytest.mark.unit
    def test_logistic_federation_materializes_datasets(self):
        """Las tareas logísticas salen con su dataset adjunto."""
        section = TasksSection(family=TaskFamily.LOGISTIC, clients=2, samples_per_client=20)

        tasks, _ = build_federation(section, seed=1)

        assert all(t.dataset is not None and t.dataset.size == 20 for t in tasks)
        assert tasks[0].dim == 2 * (2 + 1)

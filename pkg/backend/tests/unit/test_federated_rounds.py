"""
Tests unitarios de las rondas federadas.

Selección de clientes, ClientUpdate, equivalencias FedSGD / GD centralizado y
FedAvg / FedSGD, parada temprana, determinismo y divergencia.
"""

import numpy as np
import pytest
from app.models.federated import AggregationWeighting, FedConfig, FederatedAlgorithm
from app.models.tasks import TaskFamily, TaskSpec
from app.services.federated_rounds import (
    client_update,
    clients_from_tasks,
    federation_weights,
    fedavg_round,
    fedsgd_round,
    run_federated,
    select_clients,
    selection_count,
)
from app.services.task_model import materialize, mixture_grad, mixture_optimum, mixture_risk
from app.utils.exceptions import DivergenceError, EmptyInputError, InvalidDomainObjectError
from pydantic import ValidationError


class TestClientSelection:
    """Tests de la selección de clientes por ronda."""

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "fraction, clients, expected",
        [(0.1, 10, 1), (0.3, 10, 3), (0.25, 10, 3), (0.01, 5, 1), (1.0, 7, 7), (0.7, 10, 7)],
    )
    def test_selection_count(self, fraction, clients, expected):
        """⌈C·p⌉ sin clientes de más por redondeo."""
        assert selection_count(fraction, clients) == expected

    @pytest.mark.unit
    def test_selection_is_sorted_unique_and_reproducible(self):
        """La selección de una ronda depende sólo de (semilla, ronda)."""
        # Arrange
        cfg = FedConfig(client_fraction=0.4, seed=3)

        # Act
        first = select_clients(cfg, 10, round_index=5)
        second = select_clients(cfg, 10, round_index=5)

        # Assert
        assert first == second
        assert first == sorted(set(first))
        assert len(first) == 4

    @pytest.mark.unit
    def test_client_fraction_above_one_is_rejected(self):
        """C fuera de (0, 1] no es una configuración válida."""
        with pytest.raises(ValidationError):
            FedConfig(client_fraction=1.5)

    @pytest.mark.unit
    def test_zero_client_fraction_is_rejected(self):
        """C = 0 no selecciona a nadie: ⌈C·p⌉ = 0 no es válido."""
        with pytest.raises(ValidationError):
            FedConfig(client_fraction=0.0)

    @pytest.mark.unit
    def test_selection_count_rejects_empty_selection(self):
        """selection_count nunca devuelve 0 clientes en silencio."""
        with pytest.raises(InvalidDomainObjectError):
            selection_count(0.0, 5)


class TestClientUpdate:
    """Tests de ClientUpdate."""

    @pytest.mark.unit
    def test_quadratic_epochs_are_exact_gradient_steps(self, fed_config):
        """E épocas sobre una cuadrática: w_E = θ + (1 − ηa)^E (w_0 − θ)."""
        # Arrange
        task = TaskSpec.quadratic([2.0], [[1.5]])
        client = clients_from_tasks([task])[0]
        cfg = fed_config.model_copy(update={"local_epochs": 3})

        # Act
        w = client_update(client, np.array([0.0]), cfg, round_index=1)

        # Assert
        expected = 2.0 + (1.0 - 0.1 * 1.5) ** 3 * (0.0 - 2.0)
        assert w[0] == pytest.approx(expected, abs=1e-14)

    @pytest.mark.unit
    def test_oversized_batch_is_clamped_to_full_batch(self, fed_config):
        """Un batch mayor que m_k equivale al batch completo."""
        # Arrange
        task = materialize(
            TaskSpec.logistic(np.array([[-1.0, 0.0], [1.0, 0.0]]), sample_count=30), seed=0
        )
        client = clients_from_tasks([task])[0]
        w0 = np.zeros(task.dim)

        # Act
        clamped = client_update(client, w0, fed_config.model_copy(update={"batch_size": 1000}), 1)
        full = client_update(client, w0, fed_config, 1)

        # Assert
        np.testing.assert_array_equal(clamped, full)

    @pytest.mark.unit
    def test_minibatch_update_is_reproducible(self, fed_config):
        """El barajado por (semilla, ronda, cliente) hace la actualización determinista."""
        task = materialize(
            TaskSpec.logistic(np.array([[-1.0, 0.0], [1.0, 0.0]]), sample_count=30), seed=0
        )
        client = clients_from_tasks([task])[0]
        cfg = fed_config.model_copy(update={"batch_size": 7, "local_epochs": 2})

        a = client_update(client, np.zeros(task.dim), cfg, round_index=4)
        b = client_update(client, np.zeros(task.dim), cfg, round_index=4)

        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, 0.0)


class TestRounds:
    """Tests de las rondas FedAvg y FedSGD."""

    @pytest.mark.unit
    def test_fedsgd_equals_centralized_gradient_step(self, quadratic_tasks, fed_config):
        """FedSGD es un paso de GD sobre el riesgo de la mezcla."""
        # Arrange
        clients = clients_from_tasks(quadratic_tasks)
        w = np.array([0.4, -1.3])
        mixture = federation_weights(clients, fed_config)

        # Act
        federated = fedsgd_round(clients, w, fed_config)

        # Assert
        centralized = w - fed_config.learning_rate * mixture_grad(w, quadratic_tasks, mixture)
        np.testing.assert_allclose(federated, centralized, rtol=0.0, atol=1e-12)

    @pytest.mark.unit
    def test_fedavg_single_epoch_matches_fedsgd(self, quadratic_tasks, fed_config):
        """Con E=1, C=1 y batch completo FedAvg y FedSGD coinciden ronda a ronda."""
        # Arrange
        clients = clients_from_tasks(quadratic_tasks)
        w0 = np.array([1.0, 1.0])

        # Act
        fedavg = run_federated(clients, fed_config, FederatedAlgorithm.FEDAVG, w0)
        fedsgd = run_federated(clients, fed_config, FederatedAlgorithm.FEDSGD, w0)

        # Assert
        assert [log.round for log in fedavg] == list(range(1, fed_config.rounds + 1))
        for a, b in zip(fedavg, fedsgd):
            np.testing.assert_allclose(a.server_weights, b.server_weights, rtol=0.0, atol=1e-12)

    @pytest.mark.unit
    def test_uniform_weighting_ignores_sample_counts(self, quadratic_tasks, fed_config):
        """Con ponderación uniforme el servidor promedia sin pesar por m_k."""
        clients = clients_from_tasks(quadratic_tasks)
        cfg = fed_config.model_copy(update={"aggregation_weighting": AggregationWeighting.UNIFORM})

        np.testing.assert_allclose(federation_weights(clients, cfg).alphas, np.full(3, 1.0 / 3.0))

    @pytest.mark.unit
    def test_fedavg_converges_to_mixture_optimum(self, quadratic_tasks, fed_config):
        """Con C=1 y η estable el riesgo final alcanza el del óptimo de la mezcla."""
        # Arrange
        clients = clients_from_tasks(quadratic_tasks)
        cfg = fed_config.model_copy(update={"rounds": 400})
        mixture = federation_weights(clients, cfg)
        optimum_risk = mixture_risk(mixture_optimum(quadratic_tasks, mixture), quadratic_tasks, mixture)

        # Act
        logs = run_federated(clients, cfg, FederatedAlgorithm.FEDAVG)

        # Assert
        assert logs[-1].server_risk - optimum_risk == pytest.approx(0.0, abs=1e-8)
        assert logs[-1].server_risk <= logs[0].server_risk

    @pytest.mark.unit
    def test_risk_threshold_stops_early(self, quadratic_tasks, fed_config):
        """La parada temprana termina en la primera ronda bajo el umbral."""
        # Arrange
        clients = clients_from_tasks(quadratic_tasks)
        mixture = federation_weights(clients, fed_config)
        optimum_risk = mixture_risk(mixture_optimum(quadratic_tasks, mixture), quadratic_tasks, mixture)
        cfg = fed_config.model_copy(update={"rounds": 400, "risk_threshold": optimum_risk + 1e-3})

        # Act
        logs = run_federated(clients, cfg, FederatedAlgorithm.FEDSGD)

        # Assert
        assert len(logs) < 400
        assert logs[-1].server_risk <= cfg.risk_threshold
        assert all(log.server_risk > cfg.risk_threshold for log in logs[:-1])

    @pytest.mark.unit
    def test_zero_learning_rate_keeps_weights(self, quadratic_tasks, fed_config):
        """Con η = 0 el servidor no se mueve."""
        clients = clients_from_tasks(quadratic_tasks)
        cfg = fed_config.model_copy(update={"learning_rate": 0.0, "rounds": 3})
        w0 = np.array([0.5, -0.5])

        logs = run_federated(clients, cfg, FederatedAlgorithm.FEDAVG, w0)

        for log in logs:
            np.testing.assert_allclose(log.server_weights, w0, rtol=0.0, atol=1e-15)

    @pytest.mark.unit
    def test_partial_participation_is_thread_independent(self, quadratic_tasks, fed_config):
        """El resultado con C < 1 no depende del número de hilos."""
        # Arrange
        clients = clients_from_tasks(quadratic_tasks)
        serial = fed_config.model_copy(update={"client_fraction": 0.5, "local_epochs": 3})
        threaded = serial.model_copy(update={"threads": 3})

        # Act
        a = run_federated(clients, serial, FederatedAlgorithm.FEDAVG)
        b = run_federated(clients, threaded, FederatedAlgorithm.FEDAVG)

        # Assert
        for x, y in zip(a, b):
            assert x.selected == y.selected
            np.testing.assert_array_equal(x.server_weights, y.server_weights)

    @pytest.mark.unit
    def test_fedavg_round_logs_selected_clients(self, quadratic_tasks, fed_config):
        """El log de la ronda nombra los clientes seleccionados."""
        clients = clients_from_tasks(quadratic_tasks)
        cfg = fed_config.model_copy(update={"client_fraction": 0.5})

        _, log = fedavg_round(clients, np.zeros(2), cfg, round_index=1)

        assert len(log.selected) == 2
        assert set(log.selected) <= {0, 1, 2}

    @pytest.mark.unit
    def test_large_learning_rate_diverges(self, quadratic_tasks, fed_config):
        """Un η inestable termina en DivergenceError con la ronda identificada."""
        # Arrange
        clients = clients_from_tasks(quadratic_tasks)
        cfg = fed_config.model_copy(update={"learning_rate": 10.0, "rounds": 1000})

        # Act
        with pytest.raises(DivergenceError) as exc_info:
            run_federated(clients, cfg, FederatedAlgorithm.FEDAVG, np.ones(2))

        # Assert
        assert exc_info.value.details["round"] > 1

    @pytest.mark.unit
    def test_empty_federation_is_rejected(self, fed_config):
        """Una federación sin clientes no tiene rondas."""
        with pytest.raises(EmptyInputError):
            run_federated([], fed_config, FederatedAlgorithm.FEDAVG)

    @pytest.mark.unit
    def test_logistic_fedavg_reduces_risk(self, fed_config):
        """FedAvg con minibatches reduce el riesgo logístico de la mezcla."""
        # Arrange
        means = np.array([[-1.5, 0.0], [1.5, 0.0]])
        tasks = [
            materialize(TaskSpec.logistic(means + shift, sample_count=40, task_id=k), seed=2)
            for k, shift in enumerate((0.0, 0.3, -0.3))
        ]
        assert tasks[0].family is TaskFamily.LOGISTIC
        clients = clients_from_tasks(tasks)
        cfg = fed_config.model_copy(
            update={"batch_size": 10, "local_epochs": 2, "learning_rate": 0.5, "rounds": 10}
        )
        mixture = federation_weights(clients, cfg)

        # Act
        logs = run_federated(clients, cfg, FederatedAlgorithm.FEDAVG)

        # Assert
        assert logs[-1].server_risk < mixture_risk(np.zeros(tasks[0].dim), tasks, mixture)

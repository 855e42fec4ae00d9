"""
Estrategias de validación por entorno y por escenario

- Reglas de settings distintas por entorno (Strategy Pattern)
- Reglas cruzadas entre secciones de cada escenario preset
- Factories para elegir la estrategia
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Type

from .environment import Environment, LogFormat

if TYPE_CHECKING:
    from .scenario_config import ScenarioConfig

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class ValidationRule:
    """Configuración de una regla de validación"""

    field_name: str
    validator_func: Callable[[Any], bool]
    error_message: str


# === ENTORNOS ===


class EnvironmentValidationStrategy(ABC):
    """Strategy abstracto para validación por entorno"""

    @abstractmethod
    def get_validation_rules(self) -> List[ValidationRule]:
        """Obtener reglas de validación específicas del entorno"""


def _known_level() -> ValidationRule:
    return ValidationRule(
        "log_level",
        lambda v: str(v).upper() in VALID_LOG_LEVELS,
        f"log_level must be one of {', '.join(VALID_LOG_LEVELS)}",
    )


class DevelopmentValidationStrategy(EnvironmentValidationStrategy):
    """Validación relajada para desarrollo"""

    def get_validation_rules(self) -> List[ValidationRule]:
        return [_known_level()]


class TestingValidationStrategy(EnvironmentValidationStrategy):
    """Validación para testing: un solo hilo por defecto para runs reproducibles en CI"""

    def get_validation_rules(self) -> List[ValidationRule]:
        return [
            _known_level(),
            ValidationRule("threads", lambda v: v >= 1, "threads must be at least 1"),
        ]


class ProductionValidationStrategy(EnvironmentValidationStrategy):
    """Validación estricta para producción"""

    def get_validation_rules(self) -> List[ValidationRule]:
        return [
            _known_level(),
            ValidationRule(
                "log_format",
                lambda v: v == LogFormat.JSON,
                "log_format must be 'json' in production",
            ),
            ValidationRule(
                "log_level",
                lambda v: str(v).upper() != "DEBUG",
                "DEBUG logging is not allowed in production",
            ),
        ]


class ValidationStrategyFactory:
    """Factory para crear estrategias de validación por entorno"""

    _strategies: Dict[Environment, Type[EnvironmentValidationStrategy]] = {
        Environment.DEVELOPMENT: DevelopmentValidationStrategy,
        Environment.TESTING: TestingValidationStrategy,
        Environment.PRODUCTION: ProductionValidationStrategy,
    }

    @classmethod
    def create_strategy(cls, environment: Environment) -> EnvironmentValidationStrategy:
        """Crear estrategia de validación para el entorno especificado"""
        strategy_class = cls._strategies.get(environment)
        if not strategy_class:
            raise ValueError(f"No validation strategy found for environment: {environment}")
        return strategy_class()


# === ESCENARIOS ===


@dataclass
class ScenarioRule:
    """Regla cruzada: `field_name` es la clave con puntos que se reporta."""

    field_name: str
    check: Callable[["ScenarioConfig"], bool]
    error_message: str


class ScenarioValidationStrategy(ABC):
    """Reglas que dependen de varias secciones de la configuración"""

    def get_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "time.horizon",
                lambda c: c.time.horizon > c.time.t0,
                "horizon must be greater than t0",
            )
        ] + self.scenario_rules()

    @abstractmethod
    def scenario_rules(self) -> List[ScenarioRule]:
        """Reglas propias del escenario"""


class FedAvgBaselineValidation(ScenarioValidationStrategy):
    def scenario_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "federated.algorithm",
                lambda c: c.federated.algorithm.value == "fedavg",
                "fedavg-baseline runs the fedavg algorithm",
            ),
        ]


class FedSgdEquivalenceValidation(ScenarioValidationStrategy):
    def scenario_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "tasks.family",
                lambda c: c.tasks.family.value == "quadratic",
                "the equivalence checks need closed-form quadratic tasks",
            ),
            ScenarioRule(
                "federated.local_epochs",
                lambda c: c.federated.local_epochs == 1,
                "the FedAvg/FedSGD identity holds only with one local epoch",
            ),
            ScenarioRule(
                "federated.batch_size",
                lambda c: c.federated.batch_size is None,
                "the FedAvg/FedSGD identity holds only with full batches",
            ),
            ScenarioRule(
                "federated.client_fraction",
                lambda c: c.federated.client_fraction == 1.0,
                "the centralized comparison needs every client in every round",
            ),
        ]


class CoupledSdeValidation(ScenarioValidationStrategy):
    def scenario_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "tasks.family",
                lambda c: c.tasks.family.value == "quadratic",
                "the coupled SDE scenario uses quadratic tasks",
            ),
            ScenarioRule(
                "sde.strong_order_steps",
                lambda c: len(c.sde.strong_order_steps) >= 2,
                "at least two step counts are needed to fit an order",
            ),
        ]


class PicardValidation(ScenarioValidationStrategy):
    def scenario_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "picard.interaction",
                lambda c: c.picard.interaction != "federated" or c.tasks.family.value == "quadratic",
                "the federated interaction uses a quadratic task",
            ),
        ]


class LqHjbFpValidation(ScenarioValidationStrategy):
    def scenario_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "pde.x_max",
                lambda c: c.pde.x_max > c.pde.x_min,
                "x_max must be greater than x_min",
            ),
            ScenarioRule(
                "pde.interior",
                lambda c: c.pde.x_min < -c.pde.interior and c.pde.interior < c.pde.x_max,
                "the accuracy region must lie inside the domain",
            ),
        ]


class CoupledMfgValidation(ScenarioValidationStrategy):
    def scenario_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "coupling.damping",
                lambda c: 0.0 < c.coupling.damping <= 1.0,
                "damping must lie in (0, 1]",
            ),
            ScenarioRule(
                "pde.x_max",
                lambda c: c.pde.x_max > c.pde.x_min,
                "x_max must be greater than x_min",
            ),
        ]


class NashCheckValidation(ScenarioValidationStrategy):
    def scenario_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "nash.offset",
                lambda c: abs(c.nash.offset) <= c.nash.offset_bound,
                "the deviation offset must respect offset_bound",
            ),
            ScenarioRule(
                "cost.preset",
                lambda c: c.cost.preset == "lq",
                "the Nash check compares against the LQ oracle",
            ),
            ScenarioRule(
                "cost.terminal_weight",
                lambda c: c.cost.terminal_weight == 1.0,
                "u = -x is the equilibrium control only for a unit terminal weight",
            ),
        ]


class GcDiagnosticValidation(ScenarioValidationStrategy):
    def scenario_rules(self) -> List[ScenarioRule]:
        return [
            ScenarioRule(
                "gc.p_values",
                lambda c: max(c.gc.p_values) <= c.gc.reference_size,
                "sample sizes cannot exceed the reference size",
            ),
        ]


class ScenarioValidationFactory:
    """Factory de estrategias por nombre de escenario"""

    _strategies: Dict[str, Type[ScenarioValidationStrategy]] = {
        "fedavg-baseline": FedAvgBaselineValidation,
        "fedsgd-equivalence": FedSgdEquivalenceValidation,
        "coupled-sde": CoupledSdeValidation,
        "picard-equilibrium": PicardValidation,
        "lq-hjb-fp": LqHjbFpValidation,
        "coupled-mfg": CoupledMfgValidation,
        "nash-check": NashCheckValidation,
        "gc-diagnostic": GcDiagnosticValidation,
    }

    @classmethod
    def create_strategy(cls, scenario: str) -> ScenarioValidationStrategy:
        strategy_class = cls._strategies.get(scenario)
        if not strategy_class:
            raise ValueError(f"No validation strategy found for scenario: {scenario}")
        return strategy_class()

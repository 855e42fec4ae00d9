# -*- coding: utf-8 -*-
"""
🛡️ Clasificación de errores de simulación

Traduce cualquier excepción que llegue a la CLI en un `ClassifiedError` con
tipo, severidad, código de salida y mensaje para el usuario. La clasificación
usa estrategias encadenadas: primero por tipo de excepción del dominio, luego
por patrones de texto, y finalmente una configuración por defecto.

Códigos de salida:
    0 éxito, 1 chequeo de aceptación fallido, 2 error de configuración,
    3 error de simulación, 4 convergencia exigida no alcanzada.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum, IntEnum
from typing import Any, Dict, List, Type

import structlog
from pydantic import ValidationError

from ..utils.exceptions import (
    BaseAppException,
    ConfigurationError,
    DimensionMismatchError,
    DivergenceError,
    EmptyInputError,
    ErrorSeverity,
    InvalidDomainObjectError,
    NegativeDensityError,
    SimulationError,
    SingularCurvatureError,
    StabilityError,
)


class ExitCode(IntEnum):
    """Códigos de salida de la CLI."""

    OK = 0
    CHECK_FAILED = 1
    CONFIGURATION = 2
    SIMULATION = 3
    NOT_CONVERGED = 4


class ErrorTypes(Enum):
    """Tipos de errores del simulador"""

    CONFIGURATION_ERROR = "configuration_error"
    VALIDATION_ERROR = "validation_error"
    DIVERGENCE_ERROR = "divergence_error"
    STABILITY_ERROR = "stability_error"
    SYSTEM_ERROR = "system_error"


@dataclass
class ErrorPatternConfig:
    """Configuración para una familia de errores"""

    error_type: ErrorTypes
    severity: ErrorSeverity
    exit_code: ExitCode
    patterns: List[str]
    friendly_message: str


@dataclass
class ClassifiedError:
    """Error clasificado con contexto"""

    error_type: ErrorTypes
    severity: ErrorSeverity
    exit_code: ExitCode
    context: Dict[str, Any]
    original_error: Exception
    user_message: str
    timestamp: datetime = field(default_factory=datetime.now)


_CONFIGURATION = ErrorPatternConfig(
    error_type=ErrorTypes.CONFIGURATION_ERROR,
    severity=ErrorSeverity.HIGH,
    exit_code=ExitCode.CONFIGURATION,
    patterns=["toml", "config"],
    friendly_message="The scenario configuration is invalid.",
)
_VALIDATION = ErrorPatternConfig(
    error_type=ErrorTypes.VALIDATION_ERROR,
    severity=ErrorSeverity.LOW,
    exit_code=ExitCode.CONFIGURATION,
    patterns=["dimension", "invalid"],
    friendly_message="An input violates a domain invariant.",
)
_DIVERGENCE = ErrorPatternConfig(
    error_type=ErrorTypes.DIVERGENCE_ERROR,
    severity=ErrorSeverity.HIGH,
    exit_code=ExitCode.SIMULATION,
    patterns=["overflow", "nan"],
    friendly_message="The simulation diverged; lower the step size or learning rate.",
)
_STABILITY = ErrorPatternConfig(
    error_type=ErrorTypes.STABILITY_ERROR,
    severity=ErrorSeverity.HIGH,
    exit_code=ExitCode.SIMULATION,
    patterns=["unstable", "stability"],
    friendly_message="The explicit PDE step violates its stability bound.",
)


class ErrorClassificationStrategy(ABC):
    """Estrategia abstracta para clasificación de errores"""

    @abstractmethod
    def can_classify(self, error: Exception) -> bool:
        """Determinar si esta estrategia puede clasificar el error"""

    @abstractmethod
    def classify(self, error: Exception) -> ErrorPatternConfig:
        """Clasificar el error usando esta estrategia"""


class ExceptionTypeClassifier(ErrorClassificationStrategy):
    """Clasificador por jerarquía de excepciones del dominio"""

    def __init__(self) -> None:
        # el orden importa: subclases antes que clases base
        self.exception_mappings: List[tuple[Type[Exception], ErrorPatternConfig]] = [
            (ConfigurationError, _CONFIGURATION),
            (StabilityError, _STABILITY),
            (NegativeDensityError, _STABILITY),
            (DivergenceError, _DIVERGENCE),
            (SimulationError, _DIVERGENCE),
            (DimensionMismatchError, _VALIDATION),
            (InvalidDomainObjectError, _VALIDATION),
            (EmptyInputError, _VALIDATION),
            (SingularCurvatureError, _VALIDATION),
            (FileNotFoundError, _CONFIGURATION),
            (ValidationError, _CONFIGURATION),
        ]

    def can_classify(self, error: Exception) -> bool:
        return any(isinstance(error, cls) for cls, _ in self.exception_mappings)

    def classify(self, error: Exception) -> ErrorPatternConfig:
        for cls, config in self.exception_mappings:
            if isinstance(error, cls):
                return config
        raise ValueError(f"No mapping for error: {error!r}")


class PatternBasedClassifier(ErrorClassificationStrategy):
    """Clasificador basado en patrones de texto"""

    def __init__(self) -> None:
        self.pattern_to_config: Dict[str, ErrorPatternConfig] = {}
        for config in (_CONFIGURATION, _VALIDATION, _DIVERGENCE, _STABILITY):
            for pattern in config.patterns:
                self.pattern_to_config[pattern] = config

    def can_classify(self, error: Exception) -> bool:
        message = str(error).lower()
        return any(pattern in message for pattern in self.pattern_to_config)

    def classify(self, error: Exception) -> ErrorPatternConfig:
        message = str(error).lower()
        for pattern, config in self.pattern_to_config.items():
            if pattern in message:
                return config
        raise ValueError(f"No pattern found for error: {error!r}")


class SimulationErrorHandler:
    """Clasifica excepciones y elige el código de salida de la CLI."""

    def __init__(self) -> None:
        self.logger = structlog.get_logger(__name__)
        self.classification_strategies: List[ErrorClassificationStrategy] = [
            ExceptionTypeClassifier(),
            PatternBasedClassifier(),
        ]
        self.default_config = ErrorPatternConfig(
            error_type=ErrorTypes.SYSTEM_ERROR,
            severity=ErrorSeverity.CRITICAL,
            exit_code=ExitCode.SIMULATION,
            patterns=[],
            friendly_message="The simulator encountered an unexpected error.",
        )

    def classify(self, error: Exception, context: str = "") -> ClassifiedError:
        config = self._find_classification_config(error)
        details = error.details if isinstance(error, BaseAppException) else {}
        classified = ClassifiedError(
            error_type=config.error_type,
            severity=config.severity,
            exit_code=config.exit_code,
            context={
                "original_context": context,
                "error_class": error.__class__.__name__,
                "error_message": str(error),
                "details": details,
            },
            original_error=error,
            user_message=config.friendly_message,
        )
        self.logger.warning(
            "error_classified",
            error_type=classified.error_type.value,
            severity=classified.severity.value,
            exit_code=int(classified.exit_code),
            context=context,
            error=str(error),
        )
        return classified

    def _find_classification_config(self, error: Exception) -> ErrorPatternConfig:
        for strategy in self.classification_strategies:
            if strategy.can_classify(error):
                return strategy.classify(error)
        return self.default_config

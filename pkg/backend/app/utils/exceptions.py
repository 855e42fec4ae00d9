# -*- coding: utf-8 -*-
"""
Excepciones personalizadas del simulador.

Este módulo define la jerarquía de excepciones que pueden lanzar los
servicios numéricos (tareas, rondas federadas, SDEs, solvers de EDPs) y la
capa de configuración.

Ejemplos de uso:
    >>> from app.utils.exceptions import DivergenceError, ConfigurationError
    >>>
    >>> # Estado no finito durante una integración
    >>> try:
    ...     trajectory = integrate_trajectory(...)
    ... except DivergenceError as e:
    ...     print(f"Divergencia en el paso {e.details['step']}")
    >>>
    >>> # Configuración inválida
    >>> try:
    ...     config = load_scenario_config("bad.toml")
    ... except ConfigurationError as e:
    ...     print(f"Clave inválida: {e.details['key']}")
"""

import traceback
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional, Sequence


class ErrorSeverity(Enum):
    """
    Niveles de severidad para errores.

    - LOW: entrada inválida detectada antes de calcular nada
    - MEDIUM: operación rechazada, el resto del proceso sigue siendo válido
    - HIGH: la simulación en curso no puede continuar
    - CRITICAL: resultados corruptos o estado inconsistente
    """

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class BaseAppException(Exception):
    """
    Excepción base para todo el simulador.

    Attributes:
        message (str): Mensaje de error legible
        error_code (str): Código de error único
        details (Dict): Contexto adicional del error
        timestamp (datetime): Momento cuando ocurrió el error
        severity (ErrorSeverity): Nivel de severidad

    Examples:
        >>> error = BaseAppException("Error general", "GENERAL_ERROR")
        >>> str(error)
        '[GENERAL_ERROR] Error general'
    """

    def __init__(
        self,
        message: str,
        error_code: str = "UNKNOWN_ERROR",
        details: Optional[Dict[str, Any]] = None,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        self.timestamp = datetime.utcnow()
        self.severity = severity
        self.traceback = traceback.format_exc()

    def to_dict(self) -> Dict[str, Any]:
        """
        Serializar excepción a diccionario.

        Útil para logging estructurado y para el manifiesto de ejecución.

        Returns:
            Dict con toda la información del error
        """
        return {
            "message": self.message,
            "error_code": self.error_code,
            "details": self.details,
            "timestamp": self.timestamp.isoformat(),
            "severity": self.severity.value,
            "traceback": (
                self.traceback if self.traceback != "NoneType: None\n" else None
            ),
        }

    def __str__(self) -> str:
        return f"[{self.error_code}] {self.message}"


# === ERRORES DE ENTRADA Y OBJETOS DE DOMINIO ===


class DimensionMismatchError(BaseAppException):
    """
    Error cuando las formas de dos operandos no coinciden.

    Examples:
        >>> raise DimensionMismatchError("weights", expected=(2,), actual=(3,))
    """

    def __init__(
        self,
        operand: str,
        expected: Sequence[int] | int,
        actual: Sequence[int] | int,
    ):
        message = (
            f"Dimensión incompatible en '{operand}': "
            f"esperado {tuple(_as_shape(expected))}, recibido {tuple(_as_shape(actual))}"
        )
        details = {
            "operand": operand,
            "expected": list(_as_shape(expected)),
            "actual": list(_as_shape(actual)),
        }
        super().__init__(
            message, "DIMENSION_MISMATCH", details=details, severity=ErrorSeverity.LOW
        )


class InvalidDomainObjectError(BaseAppException):
    """Un invariante de un tipo de dominio no se cumple al construirlo."""

    def __init__(self, type_name: str, reason: str, **context: Any):
        details = {"type": type_name, "reason": reason, **context}
        super().__init__(
            f"{type_name} inválido: {reason}",
            "INVALID_DOMAIN_OBJECT",
            details=details,
            severity=ErrorSeverity.LOW,
        )


class EmptyInputError(BaseAppException):
    """Se recibió una colección vacía donde se requiere al menos un elemento."""

    def __init__(self, what: str):
        super().__init__(
            f"Entrada vacía: '{what}' requiere al menos un elemento",
            "EMPTY_INPUT",
            details={"what": what},
            severity=ErrorSeverity.LOW,
        )


class SingularCurvatureError(BaseAppException):
    """
    La curvatura agregada Σ α_k A_k no es invertible.

    Ocurre al pedir el óptimo de la mezcla cuando todas las tareas son planas
    a lo largo de alguna dirección.
    """

    def __init__(self, condition_number: float):
        super().__init__(
            "Curvatura agregada singular: el óptimo de la mezcla no es único",
            "SINGULAR_CURVATURE",
            details={"condition_number": condition_number},
            severity=ErrorSeverity.MEDIUM,
        )


# === ERRORES DE SIMULACIÓN ===


class SimulationError(BaseAppException):
    """Excepción base para fallos numéricos durante una simulación."""

    def __init__(self, message: str, error_code: str = "SIMULATION_ERROR", **kwargs):
        super().__init__(message, error_code, severity=ErrorSeverity.HIGH, **kwargs)


class DivergenceError(SimulationError):
    """
    Un estado dejó de ser finito (NaN o Inf).

    Los detalles nombran el cliente, la trayectoria, el paso y la ronda cuando
    se conocen, para que el usuario pueda localizar el origen de la divergencia.

    Examples:
        >>> raise DivergenceError("client_update", client_id=3, round=12)
    """

    def __init__(
        self,
        where: str,
        client_id: Optional[int] = None,
        path_id: Optional[int] = None,
        step: Optional[int] = None,
        round: Optional[int] = None,
    ):
        location = {
            "client_id": client_id,
            "path_id": path_id,
            "step": step,
            "round": round,
        }
        known = {k: v for k, v in location.items() if v is not None}
        suffix = ", ".join(f"{k}={v}" for k, v in known.items())
        message = f"Divergencia numérica en {where}" + (f" ({suffix})" if suffix else "")
        super().__init__(
            message, "DIVERGENCE", details={"where": where, **known}
        )


class StabilityError(SimulationError):
    """El paso temporal explícito viola la cota de estabilidad configurada."""

    def __init__(self, dt: float, bound: float, solver: str):
        super().__init__(
            f"Paso temporal inestable en {solver}: dt={dt!r} > cota={bound!r}",
            "STABILITY_VIOLATION",
            details={"dt": dt, "bound": bound, "solver": solver},
        )


class NegativeDensityError(SimulationError):
    """La densidad de Fokker-Planck cayó por debajo de la tolerancia negativa."""

    def __init__(self, time_slice: int, minimum: float):
        super().__init__(
            f"Densidad negativa en el corte temporal {time_slice}: min={minimum!r}",
            "NEGATIVE_DENSITY",
            details={"time_slice": time_slice, "minimum": minimum},
        )


# === ERRORES DE CONFIGURACIÓN ===


class ConfigurationError(BaseAppException):
    """
    Error de configuración del escenario o de los settings.

    `details["key"]` siempre nombra la clave con notación de puntos
    (por ejemplo `federated.client_fraction`).
    """

    def __init__(self, key: str, reason: str, value: Any = None):
        details: Dict[str, Any] = {"key": key, "reason": reason}
        if value is not None:
            details["value"] = repr(value)
        super().__init__(
            f"Configuración inválida en '{key}': {reason}",
            "CONFIGURATION_ERROR",
            details=details,
            severity=ErrorSeverity.HIGH,
        )


def _as_shape(value: Sequence[int] | int) -> Sequence[int]:
    if isinstance(value, int):
        return (value,)
    return tuple(int(v) for v in value)

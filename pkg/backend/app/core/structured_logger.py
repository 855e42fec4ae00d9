# -*- coding: utf-8 -*-
"""
📊 Contexto estructurado y métricas de rendimiento

`LogContext` agrupa los campos que identifican una ejecución y
`performance_context` mide el tiempo de pared de una operación y lo emite como
evento al terminar, junto con las métricas personalizadas que la operación
haya registrado.
"""

import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, Iterator, Optional

import structlog


@dataclass
class LogContext:
    """Contexto de logging estructurado"""

    scenario: Optional[str] = None
    seed: Optional[int] = None
    config_hash: Optional[str] = None
    operation: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convertir a diccionario filtrando valores None"""
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class PerformanceMetrics:
    """Métricas de performance"""

    operation: str
    start_time: float
    end_time: Optional[float] = None
    execution_time: Optional[float] = None
    custom_metrics: Dict[str, Any] = field(default_factory=dict)

    def set_custom_metric(self, key: str, value: Any) -> None:
        """Agregar métrica personalizada"""
        self.custom_metrics[key] = value

    def finish(self) -> None:
        """Finalizar medición"""
        self.end_time = time.perf_counter()
        self.execution_time = self.end_time - self.start_time

    def to_dict(self) -> Dict[str, Any]:
        """Convertir a diccionario para logging"""
        return {
            "operation": self.operation,
            "execution_time": self.execution_time,
            "category": "performance",
            "timestamp": datetime.now().isoformat(),
            **self.custom_metrics,
        }


@contextmanager
def performance_context(
    logger: Any, operation: str, context: Optional[LogContext] = None
) -> Iterator[PerformanceMetrics]:
    """
    Context manager para métricas de performance automáticas

    Usage:
        with performance_context(logger, "picard_fixed_point") as metrics:
            # ... operación ...
            metrics.set_custom_metric("iterations", 12)
    """
    metrics = PerformanceMetrics(operation=operation, start_time=time.perf_counter())
    extra = context.to_dict() if context else {}
    try:
        yield metrics
    finally:
        metrics.finish()
        payload = metrics.to_dict()
        payload.pop("operation")
        logger.info("operation_finished", operation=operation, **extra, **payload)


def get_logger(name: str) -> Any:
    """Logger de structlog con el nombre del módulo ligado."""
    return structlog.get_logger(name)

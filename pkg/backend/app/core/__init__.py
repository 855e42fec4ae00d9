"""
Módulo core

- `rng`: streams de números aleatorios con clave (seed, propósito, ids)
- `logging` / `structured_logger`: structlog configurado por entorno
- `error_handler`: clasificación de errores y códigos de salida de la CLI
"""

from .error_handler import ExitCode, SimulationErrorHandler
from .logging import bind_run_context, clear_run_context, configure_logging
from .rng import StreamTag, stream

__all__ = [
    "ExitCode",
    "SimulationErrorHandler",
    "StreamTag",
    "bind_run_context",
    "clear_run_context",
    "configure_logging",
    "stream",
]

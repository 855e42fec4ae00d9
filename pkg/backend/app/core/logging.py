# -*- coding: utf-8 -*-
"""
📝 Configuración de logging estructurado (structlog)

Los eventos se escriben en stderr para que la salida estándar de la CLI y los
artefactos CSV/JSON queden limpios. En producción, o con `log_format=json`,
cada evento es una línea JSON; en desarrollo y testing se usa el renderizador
de consola.
"""

import logging
import sys
from typing import TYPE_CHECKING, Optional

import structlog

if TYPE_CHECKING:
    from ..config.settings import Settings

_configured = False


def _stderr_logger(*_args: object) -> structlog.PrintLogger:
    return structlog.PrintLogger(file=sys.stderr)


def configure_logging(settings: Optional["Settings"] = None, force: bool = False) -> None:
    """Configurar structlog una vez por proceso."""
    global _configured
    if _configured and not force:
        return

    if settings is None:
        from ..config.settings import get_settings

        settings = get_settings()

    level = logging.getLevelName(settings.log_level.upper())
    if not isinstance(level, int):
        level = logging.INFO

    renderer: structlog.types.Processor
    if settings.use_json_logs:
        renderer = structlog.processors.JSONRenderer(sort_keys=True)
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=False)

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        # sys.stderr se resuelve en cada evento (la CLI y pytest lo sustituyen)
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )
    _configured = True


def bind_run_context(**values: object) -> None:
    """Adjuntar campos (escenario, semilla, hash) a todos los eventos del run."""
    structlog.contextvars.bind_contextvars(**values)


def clear_run_context() -> None:
    structlog.contextvars.clear_contextvars()

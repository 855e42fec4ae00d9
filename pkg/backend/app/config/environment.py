"""
Enumeraciones de entorno y formato de logs
"""

from enum import Enum


class Environment(str, Enum):
    """Entornos disponibles"""

    DEVELOPMENT = "development"
    TESTING = "testing"
    PRODUCTION = "production"


class LogFormat(str, Enum):
    """Renderizado de los eventos de structlog"""

    CONSOLE = "console"
    JSON = "json"

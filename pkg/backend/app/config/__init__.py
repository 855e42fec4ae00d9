"""
Módulo de configuración

- `settings`: variables de entorno del proceso (MFFLSIM_*)
- `scenario_config`: fichero TOML de cada ejecución
- `validation_strategies`: reglas por entorno y por escenario
"""

from .environment import Environment, LogFormat
from .scenario_config import ScenarioConfig, load_scenario_config
from .settings import Settings, get_settings
from .validation_strategies import (
    EnvironmentValidationStrategy,
    ScenarioValidationFactory,
    ValidationRule,
    ValidationStrategyFactory,
)

__all__ = [
    "Environment",
    "LogFormat",
    "ScenarioConfig",
    "Settings",
    "EnvironmentValidationStrategy",
    "ScenarioValidationFactory",
    "ValidationRule",
    "ValidationStrategyFactory",
    "get_settings",
    "load_scenario_config",
]

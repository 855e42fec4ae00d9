# -*- coding: utf-8 -*-
"""
⚙️ Configuración del proceso por entornos

Valores por defecto seguros para desarrollo; todo se puede sobrescribir con
variables de entorno `MFFLSIM_*` o un fichero `.env`. La configuración de un
experimento concreto vive en su fichero TOML (ver `scenario_config`).
"""

from pathlib import Path

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .environment import Environment, LogFormat
from .validation_strategies import ValidationStrategyFactory


class Settings(BaseSettings):
    """
    Configuración del simulador basada en variables de entorno.

    Examples:
        MFFLSIM_OUTPUT_DIR=/tmp/runs MFFLSIM_LOG_FORMAT=json mfflsim run configs/lq-hjb-fp.toml
    """

    # 🌍 Entorno
    environment: Environment = Field(
        default=Environment.DEVELOPMENT, description="Entorno de ejecución"
    )

    # 📁 Artefactos
    output_dir: Path = Field(
        default=Path("results"), description="Directorio raíz de resultados por defecto"
    )

    # 📝 Logging
    log_level: str = Field(default="INFO", description="Nivel de logging")
    log_format: LogFormat = Field(
        default=LogFormat.CONSOLE, description="Renderizado de eventos: console o json"
    )

    # 🧵 Paralelismo
    threads: int = Field(default=1, ge=1, description="Hilos por defecto si el escenario no fija otro")

    @property
    def is_development(self) -> bool:
        return self.environment == Environment.DEVELOPMENT

    @property
    def is_testing(self) -> bool:
        return self.environment == Environment.TESTING

    @property
    def is_production(self) -> bool:
        return self.environment == Environment.PRODUCTION

    @property
    def use_json_logs(self) -> bool:
        """¿Renderizar los eventos como JSON?"""
        return self.is_production or self.log_format == LogFormat.JSON

    @field_validator("log_level")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        return v.upper()

    @model_validator(mode="after")
    def apply_environment_rules(self) -> "Settings":
        """Validar con la estrategia del entorno"""
        strategy = ValidationStrategyFactory.create_strategy(self.environment)
        for rule in strategy.get_validation_rules():
            if not rule.validator_func(getattr(self, rule.field_name)):
                raise ValueError(rule.error_message)
        return self

    model_config = SettingsConfigDict(
        env_prefix="MFFLSIM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


def get_settings() -> Settings:
    """Obtener instancia de configuración"""
    return Settings()

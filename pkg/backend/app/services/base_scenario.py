# -*- coding: utf-8 -*-
"""
🏗️ Escenario base

Template Method para los presets:
1. Ligar el contexto de log (escenario, semilla, hash)
2. `execute()` del preset concreto
3. Recoger ficheros, chequeos de aceptación y métricas

Los presets se registran en `ScenarioFactory` con el decorador `register`.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, ClassVar, Dict, List, Type, TypeVar

import structlog

from ..config.scenario_config import ScenarioConfig
from ..core.logging import bind_run_context, clear_run_context
from ..core.structured_logger import LogContext, performance_context
from ..utils.artifacts import ArtifactWriter

S = TypeVar("S", bound="BaseScenario")


@dataclass
class ScenarioResult:
    """Resultado de un preset"""

    files: List[str]
    checks: Dict[str, bool] = field(default_factory=dict)
    metrics: Dict[str, Any] = field(default_factory=dict)
    convergence: Dict[str, bool] = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def converged(self) -> bool:
        return all(self.convergence.values())


class BaseScenario(ABC):
    """Clase base de los presets de `mfflsim run`."""

    name: ClassVar[str] = ""

    def __init__(self, config: ScenarioConfig, out_dir: Path):
        self.config = config
        self.seed = config.scenario.seed
        self.threads = config.scenario.threads
        self.writer = ArtifactWriter(out_dir)
        self.logger = structlog.get_logger(f"scenario.{self.name}")
        self.checks: Dict[str, bool] = {}
        self.metrics: Dict[str, Any] = {}
        self.convergence: Dict[str, bool] = {}

    def run(self) -> ScenarioResult:
        context = LogContext(
            scenario=self.name, seed=self.seed, config_hash=self.config.config_hash()
        )
        bind_run_context(**context.to_dict())
        try:
            with performance_context(self.logger, "scenario", context) as perf:
                self.execute()
                perf.set_custom_metric("checks", len(self.checks))
            return ScenarioResult(
                files=self.writer.files,
                checks=dict(self.checks),
                metrics=dict(self.metrics),
                convergence=dict(self.convergence),
                wall_clock=float(perf.execution_time or 0.0),
            )
        finally:
            clear_run_context()

    @abstractmethod
    def execute(self) -> None:
        """Simular, escribir artefactos y registrar chequeos/métricas"""

    # === REGISTRO ===

    def record_check(self, name: str, passed: bool, **evidence: Any) -> None:
        self.checks[name] = bool(passed)
        log = self.logger.info if passed else self.logger.warning
        log("acceptance_check", check=name, passed=bool(passed), **evidence)

    def record_metric(self, name: str, value: Any) -> None:
        self.metrics[name] = value

    def record_convergence(self, loop: str, converged: bool, iterations: int) -> None:
        self.convergence[loop] = bool(converged)
        self.metrics[f"{loop}_iterations"] = iterations


class ScenarioFactory:
    """Registro de presets por nombre"""

    _scenarios: Dict[str, Type[BaseScenario]] = {}

    @classmethod
    def register(cls, name: str) -> Callable[[Type[S]], Type[S]]:
        def decorator(scenario_class: Type[S]) -> Type[S]:
            scenario_class.name = name
            cls._scenarios[name] = scenario_class
            return scenario_class

        return decorator

    @classmethod
    def create(cls, config: ScenarioConfig, out_dir: Path) -> BaseScenario:
        name = config.scenario.name
        if name not in cls._scenarios:
            raise ValueError(f"Scenario '{name}' not registered")
        return cls._scenarios[name](config, out_dir)

    @classmethod
    def available(cls) -> List[str]:
        return sorted(cls._scenarios)

"""
Configuración global de pytest para el proyecto.

Fixtures compartidas: settings de testing, federaciones cuadráticas pequeñas,
problema LQ, mallas y una fábrica de configuraciones de escenario.
"""

from pathlib import Path
from typing import Any, Callable, Dict, List

import numpy as np
import pytest
import toml
from app.config.environment import Environment, LogFormat
from app.config.scenario_config import ScenarioConfig
from app.config.settings import Settings
from app.core.logging import clear_run_context, configure_logging
from app.models.federated import FedConfig
from app.models.grids import ControlSet, LqProblem
from app.models.schedules import TimeGrid
from app.models.tasks import MixtureWeights, TaskSpec

REPO_ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture(autouse=True)
def testing_environment(monkeypatch):
    """Fuerza el entorno de testing y un logging silencioso en cada test."""
    monkeypatch.setenv("MFFLSIM_ENVIRONMENT", "testing")
    monkeypatch.setenv("MFFLSIM_LOG_LEVEL", "WARNING")
    monkeypatch.delenv("MFFLSIM_THREADS", raising=False)
    monkeypatch.delenv("MFFLSIM_OUTPUT_DIR", raising=False)
    configure_logging(
        Settings(environment=Environment.TESTING, log_level="WARNING"), force=True
    )
    yield
    clear_run_context()


@pytest.fixture
def testing_settings(tmp_path) -> Settings:
    """
    Settings de testing con el directorio de resultados en tmp.

    Returns:
        Settings: configuración del proceso para tests
    """
    return Settings(
        environment=Environment.TESTING,
        output_dir=tmp_path / "results",
        log_level="WARNING",
        log_format=LogFormat.CONSOLE,
        threads=1,
    )


@pytest.fixture
def configs_dir() -> Path:
    """Directorio con los presets de ejemplo."""
    return REPO_ROOT / "configs"


@pytest.fixture
def quadratic_tasks() -> List[TaskSpec]:
    """
    Tres tareas cuadráticas en d=2 con centros y curvaturas distintos.

    Returns:
        List[TaskSpec]: tareas con m_k = 10, 20, 30
    """
    return [
        TaskSpec.quadratic([1.0, -1.0], np.diag([1.0, 2.0]), sample_count=10, task_id=0),
        TaskSpec.quadratic([0.0, 2.0], np.diag([2.0, 1.0]), sample_count=20, task_id=1),
        TaskSpec.quadratic([-2.0, 0.5], np.diag([1.5, 0.5]), sample_count=30, task_id=2),
    ]


@pytest.fixture
def quadratic_mixture(quadratic_tasks) -> MixtureWeights:
    """Pesos α_k = m_k/m de `quadratic_tasks`."""
    return MixtureWeights.from_sample_counts([t.sample_count for t in quadratic_tasks])


@pytest.fixture
def fed_config() -> FedConfig:
    """Hiperparámetros federados deterministas y estables para las tareas de prueba."""
    return FedConfig(
        client_fraction=1.0,
        local_epochs=1,
        learning_rate=0.1,
        rounds=20,
        seed=7,
        threads=1,
    )


@pytest.fixture
def lq() -> LqProblem:
    """Problema LQ de referencia: σ=1, q_T=1, T=1."""
    return LqProblem(sigma=1.0, terminal_weight=1.0, horizon=1.0)


@pytest.fixture
def coarse_controls() -> ControlSet:
    """U = [-3, 3] con paso 0.05."""
    return ControlSet(-3.0, 3.0, 121)


@pytest.fixture
def short_grid() -> TimeGrid:
    """Malla temporal [0, 1] con 100 pasos."""
    return TimeGrid(horizon=1.0, steps=100)


@pytest.fixture
def scenario_config() -> Callable[..., ScenarioConfig]:
    """
    Fábrica de ScenarioConfig validados.

    Returns:
        Callable: `make(name, **sections)` con cada sección como diccionario
    """

    def make(name: str, **sections: Dict[str, Any]) -> ScenarioConfig:
        scenario = {"name": name, **sections.pop("scenario", {})}
        return ScenarioConfig.from_mapping({"scenario": scenario, **sections})

    return make


@pytest.fixture
def write_config(tmp_path) -> Callable[..., Path]:
    """
    Escribe un fichero TOML de escenario en tmp.

    Returns:
        Callable: `write(data, name="scenario.toml") -> Path`
    """

    def write(data: Dict[str, Any], name: str = "scenario.toml") -> Path:
        path = tmp_path / name
        path.write_text(toml.dumps(data), encoding="utf-8")
        return path

    return write

# -*- coding: utf-8 -*-
"""
🧪 Configuración de escenarios (un fichero TOML por ejecución)

Cada sección es un modelo pydantic con `extra="forbid"`, de modo que una
clave desconocida se rechaza nombrando su ruta con puntos. Tras la
validación por campo se aplican las reglas cruzadas del escenario
(`ScenarioValidationFactory`).
"""

import hashlib
import json
from pathlib import Path
from typing import Any, List, Literal, Mapping, Optional, Union

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..models.federated import FedConfig, FederatedAlgorithm, FedHyperparameters
from ..models.tasks import TaskFamily
from ..models.trajectories import NoiseMode
from ..utils.exceptions import ConfigurationError
from .validation_strategies import ScenarioValidationFactory

ScenarioName = Literal[
    "fedavg-baseline",
    "fedsgd-equivalence",
    "coupled-sde",
    "picard-equilibrium",
    "lq-hjb-fp",
    "coupled-mfg",
    "nash-check",
    "gc-diagnostic",
]

# Claves que no cambian los resultados y quedan fuera del hash
_HASH_EXCLUDED = {"scenario": {"output_dir", "threads"}}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioSection(_Section):
    name: ScenarioName = Field(description="Preset a ejecutar")
    seed: int = Field(default=0, ge=0, description="Semilla maestra")
    output_dir: Optional[str] = Field(default=None, description="Directorio de artefactos")
    threads: int = Field(default=1, ge=1, description="Grado de paralelismo")
    require_convergence: bool = Field(
        default=True, description="Salir con código 4 si un bucle iterativo no converge"
    )
    description: str = Field(default="", description="Texto libre para el reporte")


class TasksSection(_Section):
    family: TaskFamily = Field(default=TaskFamily.QUADRATIC)
    clients: int = Field(default=10, ge=1, description="Número de clientes p")
    dim: int = Field(default=1, ge=1, description="Dimensión d de las tareas cuadráticas")
    center_mean: float = Field(default=0.0, description="Centro común de las tareas")
    center_spread: float = Field(default=1.0, ge=0.0, description="Dispersión de los centros θ_k")
    homogeneous: bool = Field(default=False, description="Todas las tareas idénticas")
    curvature: float = Field(default=1.0, gt=0.0, description="Curvatura diagonal base")
    curvature_jitter: float = Field(
        default=0.0, ge=0.0, lt=1.0, description="Perturbación relativa de la curvatura"
    )
    sample_counts: Optional[List[int]] = Field(default=None, description="m_k por cliente")
    samples_per_client: int = Field(default=50, ge=1)
    classes: int = Field(default=2, ge=2, description="Clases de las tareas logísticas")
    features: int = Field(default=2, ge=1, description="Dimensión de las features")
    class_separation: float = Field(default=2.0, ge=0.0)
    feature_std: float = Field(default=1.0, gt=0.0)
    instances: int = Field(
        default=100, ge=1, description="Federaciones aleatorias del chequeo FedSGD vs GD centralizado"
    )

    @field_validator("sample_counts")
    @classmethod
    def positive_counts(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is not None and any(m < 1 for m in v):
            raise ValueError("every sample count must be at least 1")
        return v


class FederatedSection(FedHyperparameters):
    algorithm: FederatedAlgorithm = Field(default=FederatedAlgorithm.FEDAVG)


class TimeSection(_Section):
    t0: float = Field(default=0.0)
    horizon: float = Field(default=1.0, description="Tiempo final T")
    steps: int = Field(default=1000, ge=1, description="Pasos N de la malla temporal")


class SdeSection(_Section):
    sigma: float = Field(default=0.05, ge=0.0, description="Difusión escalar")
    noise_mode: NoiseMode = Field(default=NoiseMode.INDEPENDENT)
    trajectory_stride: int = Field(default=10, ge=1, description="Escribir uno de cada k nodos en trajectories.csv")
    gain: float = Field(default=1.0, ge=0.0, description="Λ constante")
    lambda_max: float = Field(default=10.0, gt=0.0)
    intervals: int = Field(default=1, ge=1, description="Intervalos de la malla de control")
    w0: float = Field(default=2.0, description="Estado inicial común de los clientes")
    risk_tolerance: float = Field(default=5e-2, gt=0.0)
    moment_clients: int = Field(default=1000, ge=2)
    moment_center: float = Field(default=1.0)
    moment_w0_std: float = Field(default=0.5, ge=0.0)
    moment_paths: int = Field(default=1000, ge=2)
    strong_order_sigma: float = Field(default=0.5, ge=0.0)
    strong_order_paths: int = Field(default=200, ge=2)
    strong_order_steps: List[int] = Field(default_factory=lambda: [250, 500, 1000, 2000])
    strong_order_fine_factor: int = Field(default=8, ge=1)
    strong_order_min: float = Field(default=0.8)


class PdeSection(_Section):
    x_min: float = Field(default=-3.0)
    x_max: float = Field(default=3.0)
    dx: float = Field(default=0.02, gt=0.0)
    sigma: float = Field(default=1.0, gt=0.0)
    terminal_weight: float = Field(default=1.0, ge=0.0, description="q_T")
    control_min: float = Field(default=-3.0)
    control_max: float = Field(default=3.0)
    control_count: int = Field(default=301, ge=1)
    control_refine: bool = Field(default=False, description="Refinar el argmax con una parábola")
    mu0_mean: float = Field(default=0.0)
    mu0_std: float = Field(default=1.0, gt=0.0)
    interior: float = Field(default=2.0, gt=0.0, description="Región |x| ≤ interior de los chequeos")
    value_tol: float = Field(default=1e-2, gt=0.0)
    control_tol: float = Field(default=2e-2, gt=0.0)
    mass_tol: float = Field(default=1e-8, gt=0.0)
    variance_tol: float = Field(default=2e-2, gt=0.0)
    ou_x_max: float = Field(default=6.0, gt=0.0, description="Dominio del chequeo de Ornstein-Uhlenbeck")
    ou_dx: float = Field(default=0.01, gt=0.0)
    output_every: int = Field(default=10, ge=1, description="Escribir uno de cada k nodos temporales")
    grid_study_dx: List[float] = Field(default_factory=lambda: [0.1, 0.05])
    grid_study_terminal_weight: float = Field(default=2.0, ge=0.0)
    grid_study_sigma: float = Field(default=0.5, gt=0.0)
    grid_study_x_max: float = Field(default=6.0, gt=0.0)
    grid_study_control_max: float = Field(default=12.0, gt=0.0)
    grid_study_min_ratio: float = Field(default=1.7, gt=0.0)

    @field_validator("grid_study_dx")
    @classmethod
    def refining_spacings(cls, v: List[float]) -> List[float]:
        if any(b >= a for a, b in zip(v, v[1:])) or any(h <= 0 for h in v):
            raise ValueError("spacings must be positive and strictly decreasing")
        return v


class CouplingSection(_Section):
    coupling: float = Field(default=0.1, ge=0.0, description="Aversión a la multitud c")
    tol: float = Field(default=1e-4, gt=0.0)
    max_iters: int = Field(default=50, ge=1)
    damping: float = Field(default=0.5)


class PicardSection(_Section):
    interaction: Literal["mean_reversion", "federated"] = Field(default="mean_reversion")
    rate: float = Field(default=1.0, ge=0.0)
    sigma: float = Field(default=0.5, ge=0.0)
    paths: int = Field(default=2000, ge=2)
    tol: float = Field(default=1e-3, gt=0.0)
    max_iters: int = Field(default=30, ge=1)
    damping: float = Field(default=1.0, gt=0.0, le=1.0)
    projections: int = Field(default=16, ge=1)
    w0_mean: float = Field(default=0.0)
    w0_std: float = Field(default=1.0, ge=0.0)
    stderr_multiplier: float = Field(default=4.0, gt=0.0)


class NashSection(_Section):
    x0: float = Field(default=0.0)
    paths: int = Field(default=10000, ge=2)
    perturbations: int = Field(default=20, ge=0)
    offset: float = Field(default=0.5, description="Desvío constante de control")
    offset_bound: float = Field(default=2.0, gt=0.0)
    allowance: float = Field(default=2e-2, ge=0.0)
    stderr_multiplier: float = Field(default=4.0, gt=0.0)
    finite_population_clients: int = Field(
        default=0, ge=0, description="Clientes del chequeo de población finita; 0 lo desactiva"
    )
    finite_population_paths: int = Field(default=50, ge=2)
    finite_population_perturbations: int = Field(default=3, ge=1)


class GcSection(_Section):
    p_values: List[int] = Field(default_factory=lambda: [10, 100, 1000])
    replicates: int = Field(default=20, ge=5)
    reference_size: int = Field(default=100000, ge=1)
    mean: float = Field(default=0.0)
    std: float = Field(default=1.0, ge=0.0)
    include_reference_stream: bool = Field(
        default=False, description="Réplicas 0..R-1, la 0 sobre el flujo de la referencia"
    )

    @field_validator("p_values")
    @classmethod
    def increasing_sizes(cls, v: List[int]) -> List[int]:
        if not v or any(p < 1 for p in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("p_values must be positive and strictly increasing")
        return v


class CostSection(_Section):
    preset: Literal["lq", "server_risk", "terminal_only", "crowd_averse"] = Field(default="lq")
    terminal_weight: float = Field(default=1.0, ge=0.0)
    constant: float = Field(default=0.0, description="Constante c de terminal_only / crowd_averse")


class ScenarioConfig(_Section):
    """Configuración validada de una ejecución."""

    scenario: ScenarioSection
    tasks: TasksSection = Field(default_factory=TasksSection)
    federated: FederatedSection = Field(default_factory=FederatedSection)
    time: TimeSection = Field(default_factory=TimeSection)
    sde: SdeSection = Field(default_factory=SdeSection)
    pde: PdeSection = Field(default_factory=PdeSection)
    coupling: CouplingSection = Field(default_factory=CouplingSection)
    picard: PicardSection = Field(default_factory=PicardSection)
    nash: NashSection = Field(default_factory=NashSection)
    gc: GcSection = Field(default_factory=GcSection)
    cost: CostSection = Field(default_factory=CostSection)

    # === CONSTRUCCIÓN ===

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        """Validar un diccionario ya parseado; los errores nombran la clave con puntos."""
        try:
            config = cls.model_validate(dict(data))
        except ValidationError as exc:
            first = exc.errors()[0]
            key = ".".join(str(part) for part in first["loc"]) or "<root>"
            raise ConfigurationError(key, first["msg"], first.get("input")) from exc
        config.check_rules()
        return config

    def check_rules(self) -> None:
        strategy = ScenarioValidationFactory.create_strategy(self.scenario.name)
        for rule in strategy.get_rules():
            if not rule.check(self):
                raise ConfigurationError(rule.field_name, rule.error_message)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        out: Optional[Union[str, Path]] = None,
        threads: Optional[int] = None,
    ) -> "ScenarioConfig":
        """Aplicar los flags de la CLI; devuelve una copia validada."""
        data = self.model_dump(mode="json")
        if seed is not None:
            data["scenario"]["seed"] = seed
        if out is not None:
            data["scenario"]["output_dir"] = str(out)
        if threads is not None:
            data["scenario"]["threads"] = threads
        return ScenarioConfig.from_mapping(data)

    # === SERIALIZACIÓN ===

    def to_toml(self) -> str:
        return toml.dumps(self.model_dump(mode="json", exclude_none=True))

    def config_hash(self) -> str:
        """SHA-256 del JSON canónico (sin directorio de salida ni hilos)."""
        canonical = json.dumps(
            self.model_dump(mode="json", exclude=_HASH_EXCLUDED),
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def fed_config(self) -> FedConfig:
        """Hiperparámetros federados con semilla e hilos del escenario."""
        params = self.federated.model_dump(exclude={"algorithm"})
        return FedConfig(**params, seed=self.scenario.seed, threads=self.scenario.threads)


def load_scenario_config(path: Union[str, Path]) -> ScenarioConfig:
    """Leer y validar un fichero TOML de escenario."""
    path = Path(path)
    try:
        data = toml.load(path)
    except FileNotFoundError as exc:
        raise ConfigurationError("<file>", f"config file not found: {path}") from exc
    except toml.TomlDecodeError as exc:
        raise ConfigurationError("<file>", f"invalid TOML: {exc}") from exc
    return ScenarioConfig.from_mapping(data)

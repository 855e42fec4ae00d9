# -*- coding: utf-8 -*-
"""
🚀 Orquestación de ejecuciones y reportes

`run_scenario` valida el fichero de configuración, ejecuta el preset y deja un
`manifest.json` junto a los artefactos. `emit_report` agrega varios manifests
en `report.json` y una tabla legible `report.txt`.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import structlog
from pydantic import BaseModel, Field
from rich.console import Console
from rich.table import Table

from .. import __version__
from ..config.scenario_config import load_scenario_config
from ..config.settings import Settings, get_settings
from ..core.error_handler import ExitCode
from ..core.logging import configure_logging
from ..utils.artifacts import ArtifactWriter, dumps_json
from ..utils.exceptions import EmptyInputError
from . import scenarios  # noqa: F401  registra los presets
from .base_scenario import ScenarioFactory

logger = structlog.get_logger(__name__)

MANIFEST_NAME = "manifest.json"


class RunManifest(BaseModel):
    """Procedencia de una ejecución"""

    scenario: str
    config_hash: str
    tool_version: str = __version__
    seed: int
    threads: int
    output_dir: str
    wall_clock: float = Field(ge=0.0, description="Segundos de pared del preset")
    files: List[str] = Field(default_factory=list)
    checks: Dict[str, bool] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    convergence: Dict[str, bool] = Field(default_factory=dict)
    require_convergence: bool = True

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def converged(self) -> bool:
        return all(self.convergence.values())

    @property
    def exit_code(self) -> ExitCode:
        if self.require_convergence and not self.converged:
            return ExitCode.NOT_CONVERGED
        if not self.passed:
            return ExitCode.CHECK_FAILED
        return ExitCode.OK


def run_scenario(
    config_path: Union[str, Path],
    seed: Optional[int] = None,
    out: Optional[Union[str, Path]] = None,
    threads: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> RunManifest:
    """
    Ejecutar el preset nombrado en `config_path`.

    Precedencia del directorio de salida: `out` > `scenario.output_dir` >
    `Settings.output_dir/<escenario>`.
    """
    settings = settings or get_settings()
    configure_logging(settings)
    config = load_scenario_config(config_path)
    if threads is None and "threads" not in config.scenario.model_fields_set:
        threads = settings.threads
    config = config.with_overrides(seed=seed, out=out, threads=threads)

    section = config.scenario
    out_dir = Path(section.output_dir) if section.output_dir else Path(settings.output_dir) / section.name
    logger.info("scenario_started", scenario=section.name, seed=section.seed, out=str(out_dir))

    scenario = ScenarioFactory.create(config, out_dir)
    scenario.writer.write_text("config.toml", config.to_toml())
    result = scenario.run()

    manifest = RunManifest(
        scenario=section.name,
        config_hash=config.config_hash(),
        seed=section.seed,
        threads=section.threads,
        output_dir=str(out_dir),
        wall_clock=result.wall_clock,
        files=[*result.files, MANIFEST_NAME],
        checks=result.checks,
        metrics=result.metrics,
        convergence=result.convergence,
        require_convergence=section.require_convergence,
    )
    ArtifactWriter(out_dir).write_json(MANIFEST_NAME, manifest.model_dump(mode="json"))
    logger.info(
        "scenario_finished",
        scenario=section.name,
        passed=manifest.passed,
        converged=manifest.converged,
        exit_code=int(manifest.exit_code),
    )
    return manifest


def collect_manifests(directory: Union[str, Path]) -> List[RunManifest]:
    """Todos los `manifest.json` bajo `directory`, en orden de ruta."""
    paths = sorted(Path(directory).rglob(MANIFEST_NAME))
    return [RunManifest.model_validate_json(p.read_text(encoding="utf-8")) for p in paths]


def _summary(manifests: Sequence[RunManifest]) -> Dict[str, Any]:
    checks = [passed for m in manifests for passed in m.checks.values()]
    return {
        "totals": {
            "manifests": len(manifests),
            "passed": sum(m.passed for m in manifests),
            "failed": sum(not m.passed for m in manifests),
            "checks_passed": sum(checks),
            "checks_failed": len(checks) - sum(checks),
            "not_converged": sum(not m.converged for m in manifests),
        },
        "scenarios": [
            {
                "scenario": m.scenario,
                "config_hash": m.config_hash,
                "seed": m.seed,
                "passed": m.passed,
                "converged": m.converged,
                "checks": m.checks,
                "metrics": m.metrics,
                "output_dir": m.output_dir,
            }
            for m in manifests
        ],
    }


def _render(summary: Dict[str, Any]) -> str:
    console = Console(record=True, width=110, color_system=None, force_terminal=False)
    table = Table(title="mfflsim report")
    for column in ("scenario", "seed", "check", "result"):
        table.add_column(column)
    for entry in summary["scenarios"]:
        if not entry["checks"]:
            table.add_row(entry["scenario"], str(entry["seed"]), "-", "no checks")
        for name, passed in sorted(entry["checks"].items()):
            table.add_row(entry["scenario"], str(entry["seed"]), name, "PASS" if passed else "FAIL")
    console.print(table)
    totals = summary["totals"]
    console.print(
        f"{totals['passed']} passed, {totals['failed']} failed "
        f"({totals['checks_passed']}/{totals['checks_passed'] + totals['checks_failed']} checks)"
    )
    return console.export_text()


def emit_report(manifests: Sequence[RunManifest], out_dir: Union[str, Path]) -> Path:
    """Escribir `report.json` y `report.txt`; devuelve la ruta del JSON."""
    if not manifests:
        raise EmptyInputError("manifests")
    summary = _summary(manifests)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "report.json"
    report.write_text(dumps_json(summary), encoding="utf-8")
    (out_dir / "report.txt").write_text(_render(summary), encoding="utf-8")
    logger.info("report_written", manifests=len(manifests), path=str(report))
    return report

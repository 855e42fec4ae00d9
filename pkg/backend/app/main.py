# -*- coding: utf-8 -*-
"""
mfflsim - punto de entrada de la CLI.

    mfflsim run configs/lq-hjb-fp.toml --seed 3 --out results/lq --threads 4
    mfflsim report results/

Códigos de salida: 0 éxito, 1 chequeo fallido, 2 configuración inválida,
3 error de simulación, 4 convergencia exigida no alcanzada.
"""

from pathlib import Path
from typing import Optional

import typer
from rich.console import Console

from app import __version__
from app.core.error_handler import ExitCode, SimulationErrorHandler
from app.services.experiment_runner import collect_manifests, emit_report, run_scenario

cli = typer.Typer(
    name="mfflsim",
    help="Mean-field federated learning simulator",
    add_completion=False,
    no_args_is_help=True,
)
console = Console(highlight=False)
err_console = Console(stderr=True, highlight=False)


def _fail(error: Exception, context: str) -> typer.Exit:
    classified = SimulationErrorHandler().classify(error, context=context)
    err_console.print(f"error: {classified.user_message}\n{error}")
    return typer.Exit(code=int(classified.exit_code))


@cli.command()
def run(
    config: Path = typer.Argument(..., help="Fichero TOML del escenario"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Sobrescribe scenario.seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Directorio de artefactos"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Grado de paralelismo"),
) -> None:
    """Ejecutar un preset y escribir sus artefactos."""
    try:
        manifest = run_scenario(config, seed=seed, out=out, threads=threads)
    except Exception as error:
        raise _fail(error, "run")

    console.print(f"{manifest.scenario}  hash={manifest.config_hash[:12]}  out={manifest.output_dir}")
    for name, passed in manifest.checks.items():
        console.print(f"  {'PASS' if passed else 'FAIL'}  {name}")
    for loop, converged in manifest.convergence.items():
        if not converged:
            console.print(f"  NOT CONVERGED  {loop}")
    raise typer.Exit(code=int(manifest.exit_code))


@cli.command()
def report(
    directory: Path = typer.Argument(..., help="Directorio con manifests"),
    out: Optional[Path] = typer.Option(None, "--out", help="Destino del reporte"),
) -> None:
    """Agregar todos los manifest.json bajo un directorio."""
    try:
        manifests = collect_manifests(directory)
        path = emit_report(manifests, out or directory)
    except Exception as error:
        raise _fail(error, "report")

    console.print(path.with_suffix(".txt").read_text(encoding="utf-8"), end="")
    failed = any(not m.passed for m in manifests)
    raise typer.Exit(code=int(ExitCode.CHECK_FAILED if failed else ExitCode.OK))


@cli.command()
def version() -> None:
    """Mostrar la versión."""
    console.print(__version__)


if __name__ == "__main__":
    cli()

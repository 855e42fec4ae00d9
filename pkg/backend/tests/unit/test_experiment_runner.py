"""
Tests unitarios de la orquestación de ejecuciones.

Escenarios pequeños de punta a punta: manifest, códigos de salida,
precedencia de directorios y agregación de reportes.
"""

import json

import pandas as pd
import pytest
from app.core.error_handler import ExitCode
from app.services.base_scenario import ScenarioFactory
from app.services.experiment_runner import (
    RunManifest,
    collect_manifests,
    emit_report,
    run_scenario,
)
from app.utils.exceptions import ConfigurationError, EmptyInputError

FEDAVG = {
    "scenario": {"name": "fedavg-baseline", "seed": 1},
    "tasks": {"clients": 4, "dim": 1, "curvature": 1.0},
    "federated": {"local_epochs": 5, "learning_rate": 0.1, "rounds": 200},
}

GC = {
    "scenario": {"name": "gc-diagnostic", "seed": 0},
    "gc": {"p_values": [10, 100, 1000], "replicates": 9, "reference_size": 20000},
}

PICARD_ONE_ITERATION = {
    "scenario": {"name": "picard-equilibrium", "seed": 0},
    "time": {"horizon": 1.0, "steps": 20},
    "picard": {"paths": 50, "tol": 1e-12, "max_iters": 1},
}


def _manifest(**overrides) -> RunManifest:
    fields = {
        "scenario": "gc-diagnostic",
        "config_hash": "abc",
        "seed": 0,
        "threads": 1,
        "output_dir": "results/gc",
        "wall_clock": 0.5,
        **overrides,
    }
    return RunManifest(**fields)


class TestRunManifest:
    """Tests de los códigos de salida del manifest."""

    @pytest.mark.unit
    def test_all_checks_passed(self):
        """Todo en verde sale con 0."""
        manifest = _manifest(checks={"a": True}, convergence={"picard": True})

        assert manifest.exit_code is ExitCode.OK

    @pytest.mark.unit
    def test_failed_check(self):
        """Un chequeo en rojo sale con 1."""
        manifest = _manifest(checks={"a": True, "b": False})

        assert manifest.exit_code is ExitCode.CHECK_FAILED

    @pytest.mark.unit
    def test_required_convergence_wins_over_checks(self):
        """Sin convergencia exigida se sale con 4 aunque falle un chequeo."""
        manifest = _manifest(checks={"a": False}, convergence={"picard": False})

        assert manifest.exit_code is ExitCode.NOT_CONVERGED

    @pytest.mark.unit
    def test_convergence_not_required(self):
        """Con require_convergence = false la falta de convergencia sólo se informa."""
        manifest = _manifest(checks={"a": True}, convergence={"picard": False}, require_convergence=False)

        assert not manifest.converged
        assert manifest.exit_code is ExitCode.OK


class TestRunScenario:
    """Tests de `run_scenario` con presets pequeños."""

    @pytest.mark.unit
    def test_every_preset_is_registered(self):
        """Los ocho presets están en la factory."""
        assert ScenarioFactory.available() == [
            "coupled-mfg",
            "coupled-sde",
            "fedavg-baseline",
            "fedsgd-equivalence",
            "gc-diagnostic",
            "lq-hjb-fp",
            "nash-check",
            "picard-equilibrium",
        ]

    @pytest.mark.unit
    def test_fedavg_baseline_reaches_mixture_optimum(self, write_config, tmp_path, testing_settings):
        """Con curvatura común y C = 1 FedAvg llega al óptimo de la mezcla."""
        # Arrange
        path = write_config(FEDAVG)
        out = tmp_path / "fedavg"

        # Act
        manifest = run_scenario(path, out=out, settings=testing_settings)

        # Assert
        assert manifest.checks == {"fedavg_reaches_mixture_optimum": True}
        assert manifest.exit_code is ExitCode.OK
        assert manifest.files == ["config.toml", "rounds.csv", "summary.json", "manifest.json"]
        rounds = pd.read_csv(out / "rounds.csv")
        assert list(rounds.columns) == ["round", "risk", "selected", "w_0"]
        assert len(rounds) == manifest.metrics["rounds"]

    @pytest.mark.unit
    def test_manifest_is_written_next_to_artifacts(self, write_config, tmp_path, testing_settings):
        """manifest.json guarda procedencia, chequeos y métricas."""
        # Arrange
        path = write_config(GC)
        out = tmp_path / "gc"

        # Act
        manifest = run_scenario(path, out=out, settings=testing_settings)

        # Assert
        stored = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert stored["scenario"] == "gc-diagnostic"
        assert stored["config_hash"] == manifest.config_hash
        assert stored["checks"] == {"gc_medians_decreasing": True}
        assert set(stored["metrics"]) == {"median_w1_p10", "median_w1_p100", "median_w1_p1000"}
        assert stored["wall_clock"] >= 0.0
        assert (out / "config.toml").exists()
        gc = pd.read_csv(out / "gc.csv")
        assert gc["p"].tolist() == [10, 100, 1000]

    @pytest.mark.unit
    def test_cli_seed_overrides_file(self, write_config, tmp_path, testing_settings):
        """--seed sobrescribe scenario.seed y cambia el hash."""
        path = write_config(GC)

        first = run_scenario(path, out=tmp_path / "a", settings=testing_settings)
        second = run_scenario(path, seed=7, out=tmp_path / "b", settings=testing_settings)

        assert second.seed == 7
        assert second.config_hash != first.config_hash

    @pytest.mark.unit
    def test_default_output_dir_uses_settings(self, write_config, testing_settings):
        """Sin --out ni output_dir se escribe en Settings.output_dir/<escenario>."""
        path = write_config(GC)

        manifest = run_scenario(path, settings=testing_settings)

        expected = testing_settings.output_dir / "gc-diagnostic"
        assert manifest.output_dir == str(expected)
        assert (expected / "manifest.json").exists()

    @pytest.mark.unit
    def test_gc_reference_stream_replicate(self, write_config, tmp_path, testing_settings):
        """Con gc.include_reference_stream la réplica 0 de p = reference_size está a distancia 0."""
        # Arrange
        config = {
            "scenario": {"name": "gc-diagnostic", "seed": 0},
            "gc": {
                "p_values": [100, 1000],
                "replicates": 5,
                "reference_size": 1000,
                "include_reference_stream": True,
            },
        }
        out = tmp_path / "gc"

        # Act
        run_scenario(write_config(config), out=out, settings=testing_settings)

        # Assert
        replicates = pd.read_csv(out / "gc_replicates.csv")
        assert sorted(replicates["replicate"].unique()) == [0, 1, 2, 3, 4]
        full = replicates[(replicates["p"] == 1000) & (replicates["replicate"] == 0)]
        assert full["w1"].tolist() == [0.0]

    @pytest.mark.unit
    def test_thread_precedence(self, write_config, tmp_path, testing_settings):
        """CLI > fichero > Settings para el número de hilos."""
        # Arrange
        from_settings = write_config(GC, name="settings.toml")
        from_file = write_config({**GC, "scenario": {**GC["scenario"], "threads": 2}}, name="file.toml")

        # Act
        a = run_scenario(from_settings, out=tmp_path / "a", settings=testing_settings)
        b = run_scenario(from_file, out=tmp_path / "b", settings=testing_settings)
        c = run_scenario(from_file, out=tmp_path / "c", threads=3, settings=testing_settings)

        # Assert
        assert (a.threads, b.threads, c.threads) == (1, 2, 3)
        assert a.config_hash == b.config_hash == c.config_hash

    @pytest.mark.unit
    def test_non_convergence_exits_with_four(self, write_config, tmp_path, testing_settings):
        """Un Picard sin convergencia marca el manifest con código 4."""
        path = write_config(PICARD_ONE_ITERATION)

        manifest = run_scenario(path, out=tmp_path / "picard", settings=testing_settings)

        assert manifest.convergence == {"picard": False}
        assert manifest.metrics["picard_iterations"] == 1
        assert manifest.exit_code is ExitCode.NOT_CONVERGED

    @pytest.mark.unit
    def test_invalid_config_is_rejected_before_running(self, write_config, tmp_path, testing_settings):
        """Una configuración inválida no deja artefactos."""
        path = write_config({"scenario": {"name": "gc-diagnostic"}, "gc": {"replicates": 2}})
        out = tmp_path / "never"

        with pytest.raises(ConfigurationError) as exc_info:
            run_scenario(path, out=out, settings=testing_settings)

        assert exc_info.value.details["key"] == "gc.replicates"
        assert not out.exists()


class TestReport:
    """Tests de la agregación de manifests."""

    @pytest.mark.unit
    def test_report_counts_passed_and_failed(self, tmp_path):
        """report.json resume totales; report.txt lista cada chequeo."""
        # Arrange
        manifests = [
            _manifest(checks={"gc_medians_decreasing": True}),
            _manifest(scenario="nash-check", checks={"verification_agreement": False}),
        ]

        # Act
        path = emit_report(manifests, tmp_path)

        # Assert
        report = json.loads(path.read_text(encoding="utf-8"))
        assert report["totals"]["manifests"] == 2
        assert report["totals"]["passed"] == 1
        assert report["totals"]["checks_failed"] == 1
        text = (tmp_path / "report.txt").read_text(encoding="utf-8")
        assert "verification_agreement" in text
        assert "FAIL" in text
        assert "1 passed, 1 failed" in text

    @pytest.mark.unit
    def test_empty_report_is_rejected(self, tmp_path):
        """No hay reporte sin manifests."""
        with pytest.raises(EmptyInputError):
            emit_report([], tmp_path)

    @pytest.mark.unit
    def test_collect_manifests_walks_subdirectories(self, write_config, tmp_path, testing_settings):
        """Se recogen los manifests de todas las ejecuciones bajo un directorio."""
        # Arrange
        path = write_config(GC)
        run_scenario(path, out=tmp_path / "runs" / "one", settings=testing_settings)
        run_scenario(path, seed=3, out=tmp_path / "runs" / "two", settings=testing_settings)

        # Act
        manifests = collect_manifests(tmp_path / "runs")

        # Assert
        assert [m.seed for m in manifests] == [0, 3]
        assert all(m.scenario == "gc-diagnostic" for m in manifests)

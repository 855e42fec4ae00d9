# -*- coding: utf-8 -*-
"""
💾 Escritura de artefactos CSV/JSON

Todos los flotantes se escriben con 17 cifras significativas para que dos
ejecuciones con la misma configuración produzcan ficheros idénticos byte a byte.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import structlog

from ..models.grids import Grid1D

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.17g"


def to_builtin(value: Any) -> Any:
    """Convertir tipos numpy (y contenedores) a tipos serializables por json."""
    if isinstance(value, Mapping):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dumps_json(payload: Any) -> str:
    return json.dumps(to_builtin(payload), sort_keys=True, indent=2) + "\n"


class ArtifactWriter:
    """Escribe artefactos bajo `out_dir` y recuerda sus rutas relativas."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._files: List[str] = []

    @property
    def files(self) -> List[str]:
        return list(self._files)

    def _register(self, name: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        if name not in self._files:
            self._files.append(name)
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._register(name)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.debug("artifact_written", file=name, rows=len(frame))
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._register(name)
        path.write_text(dumps_json(payload), encoding="utf-8")
        logger.debug("artifact_written", file=name)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self._register(name)
        path.write_text(text, encoding="utf-8")
        return path

    def write_grid(
        self,
        name: str,
        values: np.ndarray,
        grid: Grid1D,
        boundary: str,
        every: int = 1,
        extra: Optional[Dict[str, Any]] = None,
    ) -> Sequence[Path]:
        """
        Matriz (n_t, n_x) como `<name>.csv` más la cabecera `<name>.json` con
        la malla. Se escribe uno de cada `every` nodos temporales; el último
        nodo siempre se incluye.
        """
        rows = np.unique(np.r_[np.arange(0, grid.n_t, every), grid.n_t - 1])
        columns = [f"x_{i}" for i in range(grid.n_x)]
        frame = pd.DataFrame(np.asarray(values)[rows], columns=columns)
        frame.insert(0, "t", grid.t[rows])
        header = {
            "x": grid.x,
            "t": grid.t[rows],
            "dx": grid.dx,
            "dt": grid.dt,
            "every": every,
            "boundary": boundary,
            **(extra or {}),
        }
        return (
            self.write_csv(f"{name}.csv", frame),
            self.write_json(f"{name}.json", header),
        )

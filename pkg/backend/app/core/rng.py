# -*- coding: utf-8 -*-
"""
🎲 Flujos de números aleatorios con clave

Cada fuente de aleatoriedad del simulador se deriva de la semilla maestra más
una etiqueta de propósito y claves enteras (ronda, cliente, trayectoria...).
Así el resultado de un cliente o de una trayectoria no depende del tamaño del
lote, del orden de ejecución ni del número de hilos.
"""

from enum import IntEnum
from typing import Sequence

import numpy as np


class StreamTag(IntEnum):
    """Propósito de un flujo aleatorio."""

    SDE_NOISE = 1
    SHARED_NOISE = 2
    CLIENT_SELECTION = 3
    CLIENT_BATCHES = 4
    INITIAL_STATES = 5
    PROJECTIONS = 6
    DATASET = 7
    GC_SAMPLES = 8
    PERTURBATIONS = 9
    TASK_GENERATION = 10


def stream(seed: int, tag: StreamTag, *keys: int) -> np.random.Generator:
    """Generador PCG64 determinista para (seed, tag, *keys)."""
    entropy = [int(seed), int(tag), *(int(k) for k in keys)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def brownian_increments(
    seed: int,
    tag: StreamTag,
    ids: Sequence[int],
    steps: int,
    dim: int,
    dt: float,
    prefix: Sequence[int] = (),
) -> np.ndarray:
    """
    Incrementos N(0, dt) con forma (steps, len(ids), dim).

    Cada id tiene su propio flujo (seed, tag, *prefix, id), de modo que la
    columna de un id es la misma sin importar qué otros ids se pidan en la
    misma llamada. `prefix` separa réplicas independientes.
    """
    out = np.empty((steps, len(ids), dim), dtype=np.float64)
    scale = np.sqrt(dt)
    for column, identifier in enumerate(ids):
        rng = stream(seed, tag, *prefix, identifier)
        out[:, column, :] = rng.standard_normal((steps, dim)) * scale
    return out


def shared_increments(
    seed: int, steps: int, dim: int, dt: float, prefix: Sequence[int] = ()
) -> np.ndarray:
    """Un único movimiento browniano común, forma (steps, dim)."""
    rng = stream(seed, StreamTag.SHARED_NOISE, *prefix)
    return rng.standard_normal((steps, dim)) * np.sqrt(dt)

# -*- coding: utf-8 -*-
"""
🔍 Validadores de arrays numéricos

Guardas compartidas por los tipos de dominio y los servicios: conversión a
float64, forma esperada, finitud y simetría/semidefinición positiva. Cada
guarda lanza la excepción de dominio correspondiente en lugar de devolver un
resultado booleano, así los servicios no necesitan comprobar el retorno.
"""

from typing import Any, Optional, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    DivergenceError,
    EmptyInputError,
    InvalidDomainObjectError,
)

PSD_TOLERANCE = 1e-10
SIMPLEX_TOLERANCE = 1e-12


def as_vector(value: Any, name: str, dim: Optional[int] = None) -> np.ndarray:
    """Convertir a vector float64 1-D, validando la longitud si se indica."""
    array = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if array.ndim != 1:
        raise DimensionMismatchError(name, expected=(dim or -1,), actual=array.shape)
    if dim is not None and array.shape[0] != dim:
        raise DimensionMismatchError(name, expected=(dim,), actual=array.shape)
    return array


def as_matrix(value: Any, name: str, shape: Optional[Sequence[int]] = None) -> np.ndarray:
    """Convertir a matriz float64 2-D (un escalar se interpreta como 1x1)."""
    array = np.asarray(value, dtype=np.float64)
    if array.ndim == 0:
        array = array.reshape(1, 1)
    if array.ndim != 2:
        raise DimensionMismatchError(name, expected=tuple(shape or (-1, -1)), actual=array.shape)
    if shape is not None and tuple(array.shape) != tuple(shape):
        raise DimensionMismatchError(name, expected=tuple(shape), actual=array.shape)
    return array


def ensure_non_empty(items: Sequence[Any], name: str) -> None:
    if len(items) == 0:
        raise EmptyInputError(name)


def ensure_same_length(a: Sequence[Any], b: Sequence[Any], name: str) -> None:
    if len(a) != len(b):
        raise DimensionMismatchError(name, expected=(len(a),), actual=(len(b),))


def ensure_finite(array: np.ndarray, where: str, **location: Any) -> np.ndarray:
    """Lanzar DivergenceError si algún elemento es NaN o infinito."""
    if not np.all(np.isfinite(array)):
        raise DivergenceError(where, **location)
    return array


def ensure_symmetric_psd(matrix: np.ndarray, type_name: str, field: str) -> None:
    """Verificar simetría y semidefinición positiva (autovalor mínimo >= -tol)."""
    if not np.allclose(matrix, matrix.T, atol=PSD_TOLERANCE, rtol=0.0):
        raise InvalidDomainObjectError(type_name, f"'{field}' no es simétrica")
    min_eig = float(np.linalg.eigvalsh(matrix).min()) if matrix.size else 0.0
    scale = max(1.0, float(np.abs(matrix).max()) if matrix.size else 1.0)
    if min_eig < -PSD_TOLERANCE * scale:
        raise InvalidDomainObjectError(
            type_name, f"'{field}' no es semidefinida positiva", min_eigenvalue=min_eig
        )


def ensure_simplex(weights: np.ndarray, type_name: str) -> None:
    """Pesos no negativos que suman 1 dentro de SIMPLEX_TOLERANCE."""
    if weights.size == 0:
        raise EmptyInputError(type_name)
    if np.any(weights < 0):
        raise InvalidDomainObjectError(type_name, "pesos negativos")
    total = float(weights.sum())
    if abs(total - 1.0) > SIMPLEX_TOLERANCE:
        raise InvalidDomainObjectError(
            type_name, "los pesos no suman 1", total=total
        )


def relative_error(a: np.ndarray | float, b: np.ndarray | float) -> float:
    """Error relativo |a-b| / max(1, |a|, |b|), tomado como máximo por componente."""
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(a_arr), np.abs(b_arr)))
    return float(np.max(np.abs(a_arr - b_arr) / scale))

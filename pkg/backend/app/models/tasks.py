# -*- coding: utf-8 -*-
"""
Tareas de aprendizaje por cliente.

Un `TaskSpec` describe el objetivo generador de datos de un cliente: riesgo
cuadrático cerrado ½(w−θ)ᵀA(w−θ) o riesgo logístico (entropía cruzada
multiclase) sobre un dataset muestreado de nubes gaussianas por clase.

Los pesos de una tarea logística son la matriz W (c × d_x) aplanada por filas
seguida de los c sesgos, así que d = c·(d_x + 1). Las etiquetas se guardan en
base 0 (0..c−1).
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..utils.exceptions import InvalidDomainObjectError
from ..utils.validators import as_matrix, as_vector, ensure_simplex, ensure_symmetric_psd

WeightVector = np.ndarray


class TaskFamily(str, Enum):
    """Familia de la tarea"""

    QUADRATIC = "quadratic"
    LOGISTIC = "logistic"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Muestras (x, y) de un cliente; etiquetas en base 0."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    task_id: Optional[int] = None

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] == 0:
            raise InvalidDomainObjectError("Dataset", "se requiere al menos una muestra 2-D")
        if labels.shape != (features.shape[0],):
            raise InvalidDomainObjectError(
                "Dataset", "una etiqueta por muestra", features=features.shape[0]
            )
        if self.num_classes < 2:
            raise InvalidDomainObjectError("Dataset", "se requieren al menos 2 clases")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise InvalidDomainObjectError("Dataset", "etiqueta fuera de rango")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True, eq=False)
class TaskSpec:
    """
    Objetivo de un cliente.

    Usar los constructores `TaskSpec.quadratic` y `TaskSpec.logistic` en
    lugar del constructor directo.
    """

    family: TaskFamily
    center: Optional[np.ndarray] = None
    curvature: Optional[np.ndarray] = None
    class_means: Optional[np.ndarray] = None
    class_covariances: Optional[np.ndarray] = None
    class_priors: Optional[np.ndarray] = None
    sample_count: int = 1
    dataset: Optional[Dataset] = None
    task_id: int = 0

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise InvalidDomainObjectError("TaskSpec", "sample_count debe ser >= 1")
        if self.family is TaskFamily.QUADRATIC:
            self._validate_quadratic()
        else:
            self._validate_logistic()

    def _validate_quadratic(self) -> None:
        if self.center is None:
            raise InvalidDomainObjectError("TaskSpec", "la tarea cuadrática requiere centro")
        center = as_vector(self.center, "center")
        dim = center.shape[0]
        curvature = (
            np.eye(dim)
            if self.curvature is None
            else as_matrix(self.curvature, "curvature", (dim, dim))
        )
        ensure_symmetric_psd(curvature, "TaskSpec", "curvature")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "curvature", curvature)

    def _validate_logistic(self) -> None:
        if self.class_means is None:
            raise InvalidDomainObjectError("TaskSpec", "la tarea logística requiere medias")
        means = np.asarray(self.class_means, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] < 2:
            raise InvalidDomainObjectError("TaskSpec", "se requieren c >= 2 clases")
        classes, feature_dim = means.shape
        if self.class_covariances is None:
            covariances = np.broadcast_to(np.eye(feature_dim), (classes, feature_dim, feature_dim)).copy()
        else:
            covariances = np.asarray(self.class_covariances, dtype=np.float64)
        if covariances.shape != (classes, feature_dim, feature_dim):
            raise InvalidDomainObjectError(
                "TaskSpec", "covarianzas con forma incorrecta", shape=list(covariances.shape)
            )
        for cov in covariances:
            ensure_symmetric_psd(cov, "TaskSpec", "class_covariances")
        priors = (
            np.full(classes, 1.0 / classes)
            if self.class_priors is None
            else as_vector(self.class_priors, "class_priors", classes)
        )
        ensure_simplex(priors, "TaskSpec.class_priors")
        if self.dataset is not None and self.dataset.feature_dim != feature_dim:
            raise InvalidDomainObjectError("TaskSpec", "dataset con d_x distinto")
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "class_covariances", covariances)
        object.__setattr__(self, "class_priors", priors)

    @classmethod
    def quadratic(
        cls,
        center: Sequence[float] | np.ndarray,
        curvature: Optional[Sequence[Sequence[float]] | np.ndarray] = None,
        sample_count: int = 1,
        task_id: int = 0,
    ) -> "TaskSpec":
        return cls(
            family=TaskFamily.QUADRATIC,
            center=np.asarray(center, dtype=np.float64),
            curvature=None if curvature is None else np.asarray(curvature, dtype=np.float64),
            sample_count=sample_count,
            task_id=task_id,
        )

    @classmethod
    def logistic(
        cls,
        class_means: np.ndarray,
        class_covariances: Optional[np.ndarray] = None,
        class_priors: Optional[np.ndarray] = None,
        sample_count: int = 50,
        task_id: int = 0,
    ) -> "TaskSpec":
        return cls(
            family=TaskFamily.LOGISTIC,
            class_means=class_means,
            class_covariances=class_covariances,
            class_priors=class_priors,
            sample_count=sample_count,
            task_id=task_id,
        )

    def with_dataset(self, dataset: Dataset) -> "TaskSpec":
        return replace(self, dataset=dataset, sample_count=dataset.size)

    @property
    def is_quadratic(self) -> bool:
        return self.family is TaskFamily.QUADRATIC

    @property
    def num_classes(self) -> int:
        assert self.class_means is not None
        return int(self.class_means.shape[0])

    @property
    def feature_dim(self) -> int:
        assert self.class_means is not None
        return int(self.class_means.shape[1])

    @property
    def dim(self) -> int:
        """Dimensión d del vector de pesos."""
        if self.is_quadratic:
            assert self.center is not None
            return int(self.center.shape[0])
        return self.num_classes * (self.feature_dim + 1)


@dataclass(frozen=True, eq=False)
class MixtureWeights:
    """Pesos α del simplex; α_k = m_k/m por defecto."""

    alphas: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self) -> None:
        alphas = as_vector(self.alphas, "alphas")
        ensure_simplex(alphas, "MixtureWeights")
        object.__setattr__(self, "alphas", alphas)

    @classmethod
    def from_sample_counts(cls, counts: Sequence[int]) -> "MixtureWeights":
        m = np.asarray(counts, dtype=np.float64)
        if m.size == 0 or np.any(m < 1):
            raise InvalidDomainObjectError("MixtureWeights", "los conteos deben ser >= 1")
        return cls(m / m.sum())

    @classmethod
    def uniform(cls, p: int) -> "MixtureWeights":
        if p < 1:
            raise InvalidDomainObjectError("MixtureWeights", "p debe ser >= 1")
        return cls(np.full(p, 1.0 / p))

    def __len__(self) -> int:
        return int(self.alphas.shape[0])

# -*- coding: utf-8 -*-
"""
🎯 Riesgo, gradiente y mezcla de las tareas de los clientes.

Funciones puras sobre `TaskSpec`; seguras para llamarse desde hilos
concurrentes sin coordinación.
"""

from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.special import logsumexp, softmax

from ..core.rng import StreamTag, stream
from ..models.tasks import Dataset, MixtureWeights, TaskFamily, TaskSpec, WeightVector
from ..utils.exceptions import (
    EmptyInputError,
    InvalidDomainObjectError,
    SingularCurvatureError,
)
from ..utils.validators import as_vector, ensure_same_length

if TYPE_CHECKING:
    from ..config.scenario_config import TasksSection

logger = structlog.get_logger(__name__)

_CONDITION_LIMIT = 1e12


def _check_dim(w: np.ndarray, task: TaskSpec) -> np.ndarray:
    return as_vector(w, "weights", task.dim)


def _logistic_parts(w: np.ndarray, task: TaskSpec) -> Tuple[np.ndarray, np.ndarray]:
    c, dx = task.num_classes, task.feature_dim
    return w[: c * dx].reshape(c, dx), w[c * dx :]


def _require_dataset(task: TaskSpec) -> Dataset:
    if task.dataset is None:
        raise InvalidDomainObjectError(
            "TaskSpec", "la tarea logística no tiene dataset; usar materialize()", task_id=task.task_id
        )
    return task.dataset


def _logits(w: np.ndarray, task: TaskSpec, indices: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = _require_dataset(task)
    features = data.features if indices is None else data.features[indices]
    labels = data.labels if indices is None else data.labels[indices]
    weights, biases = _logistic_parts(w, task)
    return features @ weights.T + biases, features, labels


def risk(w: WeightVector, task: TaskSpec, indices: Optional[np.ndarray] = None) -> float:
    """
    Riesgo de la hipótesis w sobre la tarea.

    Cuadrática: ½(w−θ)ᵀA(w−θ). Logística: entropía cruzada empírica media.
    """
    w = _check_dim(w, task)
    if task.is_quadratic:
        diff = w - task.center
        return float(0.5 * diff @ task.curvature @ diff)
    logits, _, labels = _logits(w, task, indices)
    per_sample = logsumexp(logits, axis=1) - logits[np.arange(labels.shape[0]), labels]
    return float(per_sample.mean())


def grad(w: WeightVector, task: TaskSpec, indices: Optional[np.ndarray] = None) -> WeightVector:
    """∇_w L; con `indices` el gradiente logístico se restringe a ese minibatch."""
    w = _check_dim(w, task)
    if task.is_quadratic:
        return task.curvature @ (w - task.center)
    logits, features, labels = _logits(w, task, indices)
    probs = softmax(logits, axis=1)
    probs[np.arange(labels.shape[0]), labels] -= 1.0
    m = labels.shape[0]
    grad_weights = probs.T @ features / m
    grad_biases = probs.sum(axis=0) / m
    return np.concatenate([grad_weights.ravel(), grad_biases])


def grad_batch(states: np.ndarray, task: TaskSpec) -> np.ndarray:
    """Gradientes de n estados apilados (n, d) de la misma tarea."""
    states = np.asarray(states, dtype=np.float64)
    if task.is_quadratic:
        return (states - task.center) @ task.curvature.T
    return np.stack([grad(row, task) for row in states])


def risk_batch(states: np.ndarray, task: TaskSpec) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    if task.is_quadratic:
        diff = states - task.center
        return 0.5 * np.einsum("ni,ij,nj->n", diff, task.curvature, diff)
    return np.array([risk(row, task) for row in states])


def mixture_risk(w: WeightVector, tasks: Sequence[TaskSpec], alphas: MixtureWeights) -> float:
    """Σ_k α_k · risk(w, task_k)."""
    ensure_same_length(tasks, alphas.alphas, "mixture weights")
    return float(sum(a * risk(w, task) for a, task in zip(alphas.alphas, tasks)))


def mixture_risk_batch(states: np.ndarray, tasks: Sequence[TaskSpec], alphas: MixtureWeights) -> np.ndarray:
    ensure_same_length(tasks, alphas.alphas, "mixture weights")
    total = np.zeros(np.asarray(states).shape[0])
    for a, task in zip(alphas.alphas, tasks):
        total = total + a * risk_batch(states, task)
    return total


def mixture_grad(w: WeightVector, tasks: Sequence[TaskSpec], alphas: MixtureWeights) -> WeightVector:
    ensure_same_length(tasks, alphas.alphas, "mixture weights")
    grads = np.stack([grad(w, task) for task in tasks])
    return alphas.alphas @ grads


def mixture_optimum(tasks: Sequence[TaskSpec], alphas: MixtureWeights) -> WeightVector:
    """(Σα_kA_k)⁻¹ Σα_kA_kθ_k para tareas cuadráticas."""
    ensure_same_length(tasks, alphas.alphas, "mixture weights")
    if not all(task.is_quadratic for task in tasks):
        raise InvalidDomainObjectError("TaskSpec", "el óptimo cerrado requiere tareas cuadráticas")
    curvature = sum(a * task.curvature for a, task in zip(alphas.alphas, tasks))
    rhs = sum(a * task.curvature @ task.center for a, task in zip(alphas.alphas, tasks))
    condition = float(np.linalg.cond(curvature))
    if not np.isfinite(condition) or condition > _CONDITION_LIMIT:
        raise SingularCurvatureError(condition)
    return np.linalg.solve(curvature, rhs)


def sample_dataset(task: TaskSpec, m: int, seed: int) -> Dataset:
    """m muestras i.i.d.: etiqueta según los priors y rasgos gaussianos por clase."""
    if task.family is not TaskFamily.LOGISTIC:
        raise InvalidDomainObjectError("TaskSpec", "las tareas cuadráticas no tienen dataset")
    if m < 1:
        raise EmptyInputError("sample_dataset.m")
    rng = stream(seed, StreamTag.DATASET, task.task_id)
    labels = rng.choice(task.num_classes, size=m, p=task.class_priors)
    noise = rng.standard_normal((m, task.feature_dim))
    roots = np.stack([_psd_sqrt(cov) for cov in task.class_covariances])
    features = task.class_means[labels] + np.einsum("mij,mj->mi", roots[labels], noise)
    return Dataset(features=features, labels=labels, num_classes=task.num_classes, task_id=task.task_id)


def attach_dataset(task: TaskSpec, dataset: Dataset) -> TaskSpec:
    """Nueva tarea logística con `dataset`; m_k pasa a ser el tamaño del dataset."""
    if task.is_quadratic:
        raise InvalidDomainObjectError("TaskSpec", "las tareas cuadráticas no tienen dataset")
    if dataset.num_classes != task.num_classes:
        raise InvalidDomainObjectError(
            "TaskSpec", "dataset con número de clases distinto", classes=dataset.num_classes
        )
    return task.with_dataset(dataset)


def materialize(task: TaskSpec, seed: int) -> TaskSpec:
    """Muestrear y adjuntar el dataset de una tarea logística."""
    if task.is_quadratic:
        return task
    return attach_dataset(task, sample_dataset(task, task.sample_count, seed))


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def build_federation(tasks_cfg: "TasksSection", seed: int) -> Tuple[List[TaskSpec], MixtureWeights]:
    """
    Generar el conjunto de tareas de los clientes de forma reproducible.

    Los pesos de mezcla devueltos son α_k = m_k/m.
    """
    rng = stream(seed, StreamTag.TASK_GENERATION)
    p = tasks_cfg.clients
    counts = list(tasks_cfg.sample_counts or [tasks_cfg.samples_per_client] * p)
    if len(counts) != p:
        raise InvalidDomainObjectError(
            "TasksSection", "sample_counts debe tener un valor por cliente", clients=p
        )
    tasks: List[TaskSpec] = []
    if tasks_cfg.family is TaskFamily.QUADRATIC:
        d = tasks_cfg.dim
        base = np.full(d, tasks_cfg.center_mean)
        for k in range(p):
            center = base if tasks_cfg.homogeneous else base + tasks_cfg.center_spread * rng.standard_normal(d)
            jitter = tasks_cfg.curvature_jitter * rng.uniform(-1.0, 1.0, size=d)
            curvature = np.diag(tasks_cfg.curvature * (1.0 + jitter))
            tasks.append(TaskSpec.quadratic(center, curvature, sample_count=counts[k], task_id=k))
    else:
        c, dx = tasks_cfg.classes, tasks_cfg.features
        axis = np.zeros(dx)
        axis[0] = 1.0
        offsets = (np.arange(c) - (c - 1) / 2.0)[:, None] * tasks_cfg.class_separation * axis
        covariance = np.broadcast_to(tasks_cfg.feature_std**2 * np.eye(dx), (c, dx, dx)).copy()
        for k in range(p):
            shift = 0.0 if tasks_cfg.homogeneous else tasks_cfg.center_spread * rng.standard_normal(dx)
            task = TaskSpec.logistic(
                offsets + tasks_cfg.center_mean + shift,
                covariance,
                sample_count=counts[k],
                task_id=k,
            )
            tasks.append(materialize(task, seed))
    logger.debug("federation_built", family=tasks_cfg.family.value, clients=p)
    return tasks, MixtureWeights.from_sample_counts(counts)

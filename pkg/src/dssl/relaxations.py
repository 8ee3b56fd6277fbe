"""Per-sample unsupervised losses for deterministic class labels.

Each loss is ``l(theta) = log q(theta)`` for a continuous relaxation ``q`` of
the discrete prior that puts all its mass on the one-hot vertices of the
simplex. Values are in "maximise" orientation: 0 is the best attainable value
and it is reached at the vertices. Callers that minimise must negate.

Every function accepts a single vector of shape (K,) and returns a float, or a
batch of shape (n, K) and returns an array of shape (n,).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import logsumexp, xlogy

from ._validation import check_box, check_epsilon, check_positive, check_simplex
from .exceptions import ConfigError

DEFAULT_EPSILON = 1e-7


class RelaxationKind(str, Enum):
    ENTROPY = "entropy"
    EXCLUSIVITY = "exclusivity"
    PSEUDO_LABEL = "pseudo_label"
    DET_PRIOR = "dp"
    COMPILED_RULES = "rules"

    @property
    def needs_simplex(self):
        return self is not RelaxationKind.COMPILED_RULES


@dataclass(frozen=True)
class RelaxationSpec:
    """Which relaxation is in force, plus its hyperparameters.

    ``temperature`` is used by the deterministic prior. ``rules`` holds a
    :class:`dssl.logic.CompiledRelaxation` for the compiled-rules kind; its own
    ``g`` function carries the temperature in that case.
    """

    kind: RelaxationKind
    temperature: float = 10.0
    rules: object = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        object.__setattr__(self, "kind", RelaxationKind(self.kind))
        check_positive(self.temperature, "temperature")
        check_epsilon(self.epsilon)
        if self.kind is RelaxationKind.COMPILED_RULES and self.rules is None:
            raise ConfigError("compiled-rules relaxation needs a compiled rule set", "rules")

    def loss(self, theta):
        return unsup_loss_grad(self, theta)[0]

    def loss_grad(self, theta):
        return unsup_loss_grad(self, theta)


def _finish(arr, value, grad=None):
    if arr.ndim == 1:
        value = float(value[0])
        if grad is not None:
            grad = grad[0]
    if grad is None:
        return value
    return value, grad


def entropy_loss(theta):
    """Negative Shannon entropy ``sum_k theta_k log theta_k`` (with 0 log 0 = 0)."""
    arr = check_simplex(theta)
    return _finish(arr, xlogy(np.atleast_2d(arr), np.atleast_2d(arr)).sum(axis=1))


def exclusivity_loss(theta, epsilon=DEFAULT_EPSILON):
    """Log of the relaxed "exactly one class" formula.

    ``log sum_k theta_k prod_{j != k} (1 - theta_j)`` with every component
    clamped to ``[epsilon, 1 - epsilon]``.
    """
    arr = check_simplex(theta)
    return _finish(arr, _exclusivity(np.atleast_2d(arr), epsilon)[0])


def pseudo_label_loss(theta, epsilon=DEFAULT_EPSILON, return_index=False):
    """``log max_k theta_k``; ties resolve to the lowest index.

    With ``return_index=True`` the pseudo-label ``k*`` is returned alongside
    the value.
    """
    arr = check_simplex(theta)
    value, _, k_star = _pseudo_label(np.atleast_2d(arr), epsilon)
    value = _finish(arr, value)
    if return_index:
        return value, (int(k_star[0]) if arr.ndim == 1 else k_star)
    return value


def dp_loss(theta, temperature, epsilon=DEFAULT_EPSILON):
    """Deterministic-prior loss ``log sum_k theta_k ** T``, evaluated in log space."""
    arr = check_simplex(theta)
    check_positive(temperature, "temperature")
    return _finish(arr, _det_prior(np.atleast_2d(arr), temperature, epsilon)[0])


def unsup_loss_grad(spec, theta):
    """Return ``(l(theta), dl/dtheta)`` for the relaxation described by ``spec``.

    The gradient is the raw partial derivative with respect to each component
    (no projection onto the simplex tangent space). Derivatives are taken with
    respect to the clamped components.
    """
    kind = spec.kind
    if kind is RelaxationKind.COMPILED_RULES:
        arr = check_box(theta)
        value, grad = spec.rules.logloss_grad(np.atleast_2d(arr))
        return _finish(arr, value, grad)
    arr = check_simplex(theta)
    batch = np.atleast_2d(arr)
    if kind is RelaxationKind.ENTROPY:
        value, grad = _entropy(batch, spec.epsilon)
    elif kind is RelaxationKind.EXCLUSIVITY:
        value, grad = _exclusivity(batch, spec.epsilon)
    elif kind is RelaxationKind.PSEUDO_LABEL:
        value, grad, _ = _pseudo_label(batch, spec.epsilon)
    else:
        value, grad = _det_prior(batch, spec.temperature, spec.epsilon)
    return _finish(arr, value, grad)


# Batched kernels on (n, K) arrays. Validation is the caller's job, so the
# trainer can call these directly on network outputs.


def _entropy(theta, eps):
    value = xlogy(theta, theta).sum(axis=1)
    grad = np.log(np.maximum(theta, eps)) + 1.0
    return value, grad


def _exclusivity(theta, eps):
    # log-term k is log t_k + sum_{j != k} log(1 - t_j); the exclusion is a
    # matrix product so no large logs are added and then subtracted again
    t = np.clip(theta, eps, 1.0 - eps)
    k = t.shape[1]
    terms = np.log(t) + np.log1p(-t) @ (1.0 - np.eye(k))
    value = logsumexp(terms, axis=1)
    resp = np.exp(terms - value[:, None])
    grad = resp / t - (1.0 - resp) / (1.0 - t)
    return value, grad


def _pseudo_label(theta, eps):
    rows = np.arange(theta.shape[0])
    k_star = np.argmax(theta, axis=1)
    top = np.maximum(theta[rows, k_star], eps)
    grad = np.zeros_like(theta)
    grad[rows, k_star] = 1.0 / top
    return np.log(top), grad, k_star


def _det_prior(theta, temperature, eps):
    # Only the lower clamp matters here: theta ** T is finite up to theta = 1.
    log_t = np.log(np.maximum(theta, eps))
    scaled = temperature * log_t
    value = logsumexp(scaled, axis=1)
    weights = np.exp(scaled - value[:, None])
    grad = temperature * weights / np.maximum(theta, eps)
    return value, grad


_KERNELS = {
    RelaxationKind.ENTROPY: lambda t, spec: _entropy(t, spec.epsilon),
    RelaxationKind.EXCLUSIVITY: lambda t, spec: _exclusivity(t, spec.epsilon),
    RelaxationKind.PSEUDO_LABEL: lambda t, spec: _pseudo_label(t, spec.epsilon)[:2],
    RelaxationKind.DET_PRIOR: lambda t, spec: _det_prior(t, spec.temperature, spec.epsilon),
    RelaxationKind.COMPILED_RULES: lambda t, spec: spec.rules.logloss_grad(t),
}


def batch_loss_grad(spec, theta):
    """Unchecked batched ``(values, grads)`` for an (n, K) array of predictions."""
    return _KERNELS[spec.kind](theta, spec)

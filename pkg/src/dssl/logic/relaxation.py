"""Differentiable relaxations of a rule set's valid-label support.

A DNF clause becomes a product of ``g(theta_k)`` for positive literals and
``g(1 - theta_k)`` for negative ones, and the clauses are summed. With
``g(t) = t`` this is the semantic loss; ``g(t) = t**T`` sharpens it towards
the valid vertices the same way the deterministic prior does for classes.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .._validation import check_box, check_epsilon, check_positive
from ..exceptions import ConfigError, UnsatisfiableRulesError
from .normal_form import DnfForm, ValidSet

DEFAULT_EPSILON = 1e-7


@dataclass(frozen=True)
class GFunction:
    """Monotone map ``g: [0, 1] -> [0, 1]`` with ``g(0) = 0`` and ``g(1) = 1``."""

    kind: str = "identity"
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "power"):
            raise ConfigError(f"unknown g kind {self.kind!r}", "g.kind")
        check_positive(self.temperature, "g.temperature")
        if self.kind == "identity" and self.temperature != 1.0:
            raise ConfigError("identity g takes no temperature", "g.temperature")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def power(cls, temperature):
        return cls("power", float(temperature))

    @property
    def exponent(self):
        return self.temperature if self.kind == "power" else 1.0

    def __call__(self, t):
        return np.asarray(t, dtype=float) ** self.exponent

    def to_dict(self):
        if self.kind == "identity":
            return {"kind": "identity"}
        return {"kind": "power", "temperature": self.temperature}


@dataclass(frozen=True)
class CompiledRelaxation:
    """``q(theta) = sum_c w_c prod_{k in pos(c)} g(theta_k) prod_{k in neg(c)} g(1 - theta_k)``.

    ``positive`` and ``negative`` are (C, K) boolean masks of the literals in
    each clause. Instances are immutable and safe to share between threads.
    """

    dnf: DnfForm
    g: GFunction
    weights: np.ndarray
    positive: np.ndarray = field(repr=False)
    negative: np.ndarray = field(repr=False)
    minterm: bool = True
    epsilon: float = DEFAULT_EPSILON

    @property
    def n_vars(self):
        return self.dnf.n_vars

    @property
    def weighted(self):
        return not np.all(self.weights == 1.0)

    def value(self, theta):
        """Direct (unclamped) evaluation of ``q``.

        Exact on binary inputs: the indicator of the valid set for an
        unweighted minterm relaxation.
        """
        t = check_box(theta)
        batch = np.atleast_2d(t)
        g_pos = self.g(batch)
        g_neg = self.g(1.0 - batch)
        terms = np.ones((batch.shape[0], len(self.weights)))
        for c in range(len(self.weights)):
            terms[:, c] = (
                self.weights[c]
                * np.prod(g_pos[:, self.positive[c]], axis=1)
                * np.prod(g_neg[:, self.negative[c]], axis=1)
            )
        out = terms.sum(axis=1)
        return float(out[0]) if t.ndim == 1 else out

    def logloss_grad(self, theta):
        """``(log q, d log q / d theta)`` for an (n, K) batch, in log space.

        Components are clamped to ``[epsilon, 1 - epsilon]`` first.
        """
        if not len(self.weights):
            raise UnsatisfiableRulesError("unsatisfiable rules: the valid set is empty")
        t = np.clip(np.atleast_2d(theta), self.epsilon, 1.0 - self.epsilon)
        exponent = self.g.exponent
        log_pos = exponent * np.log(t)
        log_neg = exponent * np.log1p(-t)
        pos = self.positive.astype(float)
        neg = self.negative.astype(float)
        clause_logs = log_pos @ pos.T + log_neg @ neg.T + np.log(self.weights)
        value = logsumexp(clause_logs, axis=1)
        resp = np.exp(clause_logs - value[:, None])
        grad = exponent * ((resp @ pos) / t - (resp @ neg) / (1.0 - t))
        return value, grad

    def log_value(self, theta):
        arr = check_box(theta)
        value, _ = self.logloss_grad(arr)
        return float(value[0]) if arr.ndim == 1 else value


def compile_relaxation(source, g=None, weights=None, epsilon=DEFAULT_EPSILON):
    """Build a :class:`CompiledRelaxation` from a valid set or a DNF.

    A :class:`ValidSet` compiles to disjoint minterms, the canonical form. A
    :class:`DnfForm` compiles clause by clause; overlapping clauses may then
    give values above 1 at shared vertices.

    ``weights`` maps valid label vectors (tuples or bit strings) to positive
    reals and is only accepted with a :class:`ValidSet`.
    """
    g = g or GFunction.identity()
    check_epsilon(epsilon)
    if isinstance(source, ValidSet):
        dnf = source.to_dnf()
        minterm = True
    elif isinstance(source, DnfForm):
        dnf = source
        minterm = source.is_minterm_form()
        if weights:
            raise ConfigError("weights are only supported for valid-set compilation", "weights")
    else:
        raise TypeError("source must be a ValidSet or a DnfForm")

    n_clauses, k = len(dnf.clauses), dnf.n_vars
    positive = np.zeros((n_clauses, k), dtype=bool)
    negative = np.zeros((n_clauses, k), dtype=bool)
    for c, clause in enumerate(dnf.clauses):
        for idx, pol in clause:
            (positive if pol else negative)[c, idx] = True

    w = np.ones(n_clauses)
    if weights:
        index = {row: c for c, row in enumerate(source)}
        for key, val in weights.items():
            vec = tuple(int(ch) for ch in key) if isinstance(key, str) else tuple(int(b) for b in key)
            if vec not in index:
                raise ConfigError(f"weight given for {vec}, which is not a valid label", "weights")
            if not val > 0:
                raise ConfigError(f"weight for {vec} must be positive", "weights")
            w[index[vec]] = float(val)
    for arr in (w, positive, negative):
        arr.setflags(write=False)
    return CompiledRelaxation(dnf, g, w, positive, negative, minterm, epsilon)


def relaxation_logloss_grad(compiled, theta):
    """``(log q_R(theta), gradient)`` for one vector (K,) or a batch (n, K)."""
    arr = check_box(theta)
    value, grad = compiled.logloss_grad(np.atleast_2d(arr))
    if arr.ndim == 1:
        return float(value[0]), grad[0]
    return value, grad

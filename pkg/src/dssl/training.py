"""Training objective and optimisation loop.

The minimised quantity for one step is::

    -[ mean_i log p(y_i | theta_i)  +  lam * mean_j log q(theta_j) ]

where ``i`` runs over a labelled batch, ``j`` over an unlabelled batch, ``q`` is
the configured relaxation and ``lam`` ramps linearly from 0 to ``lambda_u``
over ``rampup_epochs`` epochs. With ``apply_prior_to_labelled`` the term
``lam * mean_i log q(theta_i)`` is added for the labelled batch too.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DivergenceError
from .relaxations import RelaxationKind, RelaxationSpec, batch_loss_grad

N_HIST_BINS = 50
# Fraction of true-class confidences in this range counts as "intermediate".
INTERMEDIATE_RANGE = (0.1, 0.9)


@dataclass(frozen=True)
class TrainConfig:
    relaxation: RelaxationSpec = None
    lambda_u: float = 1.0
    rampup_epochs: int = None
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 100
    batch_size_labelled: int = 32
    batch_size_unlabelled: int = 32
    seed: int = 0
    apply_prior_to_labelled: bool = False

    def __post_init__(self):
        if self.lambda_u < 0:
            raise ConfigError("must be non-negative", "lambda_u")
        if not self.learning_rate > 0:
            raise ConfigError("must be positive", "learning_rate")
        if not 0 <= self.momentum < 1:
            raise ConfigError("must lie in [0, 1)", "momentum")
        if self.epochs < 1:
            raise ConfigError("must be at least 1", "epochs")
        for name in ("batch_size_labelled", "batch_size_unlabelled"):
            if getattr(self, name) < 1:
                raise ConfigError("must be at least 1", name)
        if self.rampup_epochs is not None and self.rampup_epochs < 0:
            raise ConfigError("must be non-negative", "rampup_epochs")

    @property
    def ramp(self):
        """Ramp-up length in epochs; defaults to 10% of the run."""
        if self.rampup_epochs is None:
            return max(1, round(0.1 * self.epochs))
        return self.rampup_epochs

    @property
    def uses_unlabelled(self):
        return self.relaxation is not None and self.lambda_u > 0

    def effective_lambda(self, epoch=None):
        """Unsupervised weight at a 0-based ``epoch``; ``None`` means fully ramped."""
        if epoch is None or self.ramp == 0:
            return self.lambda_u
        return self.lambda_u * min(1.0, epoch / self.ramp)


def derive_seeds(seed):
    """Split one run seed into ``(init_seed, train_seed)``."""
    init_seed, train_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(init_seed), int(train_seed)


def check_compatible(head, n_outputs, spec):
    """Reject relaxations that do not fit the network head."""
    if spec is None:
        return
    if head == "sigmoid" and spec.kind.needs_simplex:
        raise ConfigError(
            f"{spec.kind.value!r} assumes simplex outputs; the sigmoid head needs compiled rules",
            "relaxation",
        )
    if spec.kind is RelaxationKind.COMPILED_RULES and spec.rules.n_vars != n_outputs:
        raise ConfigError(
            f"rules cover {spec.rules.n_vars} attributes but the network has {n_outputs} outputs",
            "relaxation",
        )


def loss_and_grad(net, X_l, y_l, X_u, cfg, epoch=None):
    """Return ``(loss, grads_w, grads_b, parts)`` for one labelled/unlabelled batch pair.

    ``parts`` holds the supervised loss and the mean ``log q`` over the
    unlabelled batch (NaN when the unsupervised term is off).
    """
    spec = cfg.relaxation
    lam = cfg.effective_lambda(epoch)
    X_l = np.asarray(X_l, dtype=np.float64)
    n_l = X_l.shape[0]
    if n_l == 0:
        raise ValueError("labelled batch is empty")
    use_u = spec is not None and cfg.lambda_u > 0
    X_u = np.empty((0, X_l.shape[1])) if X_u is None else np.asarray(X_u, dtype=np.float64)
    if use_u and X_u.shape[0] == 0:
        raise ValueError("unlabelled batch is empty but lambda_u > 0")
    n_u = X_u.shape[0] if use_u else 0

    X = np.vstack([X_l, X_u]) if n_u else X_l
    cache = []
    z = net.logits(X, cache)
    dz = np.zeros_like(z)

    ll, dll = net.log_likelihood(z[:n_l], y_l)
    sup = -ll.mean()
    dz[:n_l] = -dll / n_l
    loss = sup
    mean_log_q = math.nan

    if use_u:
        out = net.output_from_logits(z)
        if cfg.apply_prior_to_labelled:
            lq_l, g_l = batch_loss_grad(spec, out[:n_l])
            loss = loss - lam * lq_l.mean()
            dz[:n_l] -= lam * net.output_vjp(out[:n_l], g_l) / n_l
        lq, g = batch_loss_grad(spec, out[n_l:])
        mean_log_q = float(lq.mean())
        loss = loss - lam * mean_log_q
        dz[n_l:] = -lam * net.output_vjp(out[n_l:], g) / n_u

    grads_w, grads_b = net.backward(cache, dz)
    return float(loss), grads_w, grads_b, {"sup_loss": float(sup), "mean_log_q": mean_log_q}


def batch_loss(net, X_l, y_l, X_u, cfg, epoch=None):
    """The minimised objective on one batch pair."""
    return loss_and_grad(net, X_l, y_l, X_u, cfg, epoch)[0]


class _BatchStream:
    """Endless shuffled mini-batches over ``n`` items."""

    def __init__(self, n, batch_size, rng):
        self.n = n
        self.size = min(batch_size, n)
        self.rng = rng
        self.queue = np.empty(0, dtype=np.int64)

    def next(self):
        while self.queue.size < self.size:
            self.queue = np.concatenate([self.queue, self.rng.permutation(self.n)])
        out, self.queue = self.queue[: self.size], self.queue[self.size :]
        return out


def confidence_at_truth(net_out, y, head):
    """Probability assigned to the true label (per attribute for the sigmoid head)."""
    if head == "softmax":
        return net_out[np.arange(len(y)), np.asarray(y)]
    y = np.asarray(y)
    return np.where(y == 1, net_out, 1.0 - net_out).ravel()


def correct(net_out, y, head):
    if head == "softmax":
        return np.argmax(net_out, axis=1) == np.asarray(y)
    return np.all((net_out > 0.5) == (np.asarray(y) == 1), axis=1)


def confidence_histogram(conf):
    counts, _ = np.histogram(conf, bins=N_HIST_BINS, range=(0.0, 1.0))
    return counts


def intermediate_fraction(counts):
    """Share of histogram mass with confidence in [0.1, 0.9)."""
    lo, hi = (round(v * N_HIST_BINS) for v in INTERMEDIATE_RANGE)
    total = counts.sum()
    return float(counts[lo:hi].sum() / total) if total else math.nan


def evaluate(net, X, y):
    """Accuracy and the 50-bin histogram of true-label confidences.

    Accuracy is argmax agreement for the softmax head and exact match of the
    thresholded attribute vector for the sigmoid head.
    """
    out = net.forward(X)
    conf = confidence_at_truth(out, y, net.head)
    counts = confidence_histogram(conf)
    return {
        "accuracy": float(correct(out, y, net.head).mean()),
        "histogram": counts,
        "intermediate_fraction": intermediate_fraction(counts),
    }


def _accuracy(net, X, y):
    return float(correct(net.forward(X), y, net.head).mean())


def train(net, X_l, y_l, X_u, cfg, eval_sets=None):
    """SGD with momentum over paired labelled/unlabelled mini-batches.

    ``eval_sets`` maps a split name to ``(X, y)``; accuracy on each is logged per
    epoch as ``<name>_accuracy``. Returns the trained network (updated in
    place) and a list of per-epoch metric dicts. Raises
    :class:`DivergenceError` on a non-finite loss.
    """
    check_compatible(net.head, net.n_outputs, cfg.relaxation)
    X_l = np.asarray(X_l, dtype=np.float64)
    X_u = np.empty((0, X_l.shape[1])) if X_u is None else np.asarray(X_u, dtype=np.float64)
    if cfg.uses_unlabelled and X_u.shape[0] == 0:
        raise ConfigError("no unlabelled data for the unsupervised term", "lambda_u")
    eval_sets = eval_sets or {}

    seq = np.random.SeedSequence(cfg.seed)
    rng_l, rng_u = (np.random.default_rng(s) for s in seq.spawn(2))
    stream_l = _BatchStream(X_l.shape[0], cfg.batch_size_labelled, rng_l)
    stream_u = _BatchStream(X_u.shape[0], cfg.batch_size_unlabelled, rng_u) if X_u.shape[0] else None
    if stream_u is not None:
        steps = math.ceil(X_u.shape[0] / cfg.batch_size_unlabelled)
    else:
        steps = math.ceil(X_l.shape[0] / cfg.batch_size_labelled)
    steps = max(steps, math.ceil(X_l.shape[0] / cfg.batch_size_labelled))

    params = [p for pair in zip(net.weights, net.biases) for p in pair]
    velocity = [np.zeros_like(p) for p in params]
    history = []
    for epoch in range(cfg.epochs):
        sup_total = 0.0
        unsup_total = 0.0
        for step in range(steps):
            idx_l = stream_l.next()
            idx_u = stream_u.next() if stream_u is not None else None
            batch_u = X_u[idx_u] if (cfg.uses_unlabelled and idx_u is not None) else None
            loss, gw, gb, parts = loss_and_grad(net, X_l[idx_l], _take(y_l, idx_l), batch_u, cfg, epoch)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, step {step}")
            grads = [g for pair in zip(gw, gb) for g in pair]
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v -= cfg.learning_rate * g
                p += v
            sup_total += parts["sup_loss"]
            if cfg.uses_unlabelled:
                unsup_total -= parts["mean_log_q"]

        row = {
            "epoch": epoch,
            "lambda_eff": cfg.effective_lambda(epoch),
            "sup_loss": sup_total / steps,
            "unsup_loss": unsup_total / steps if cfg.uses_unlabelled else math.nan,
        }
        row["train_accuracy"] = _accuracy(net, X_l, y_l)
        if cfg.relaxation is not None and X_u.shape[0]:
            out_u = net.forward(X_u)
            lq, _ = batch_loss_grad(cfg.relaxation, out_u)
            row["mean_log_q"] = float(lq.mean())
        else:
            row["mean_log_q"] = math.nan
        for name, (X, y) in eval_sets.items():
            row[f"{name}_accuracy"] = _accuracy(net, X, y)
        if not math.isfinite(row["sup_loss"]):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
        history.append(row)
    return net, history


def _take(y, idx):
    return np.asarray(y)[idx]

"""scikit-learn estimators for discriminative semi-supervised learning.

Both estimators follow scikit-learn's semi-supervised convention: unlabelled
training rows carry the label ``-1`` (a whole row of ``-1`` for the
multi-label estimator).

>>> from dssl.datasets import gen_blobs
>>> data = gen_blobs(seed=0)
>>> X, y = data.semi_supervised_xy()
>>> clf = DSSLClassifier(relaxation="dp", max_epochs=5).fit(X, y)
>>> clf.predict(data.X_test).shape
(2000,)
"""

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ConfigError
from .logic import CompiledRelaxation, GFunction, compile_relaxation, enumerate_valid, parse_rule_file_text
from .nn import Network
from .relaxations import DEFAULT_EPSILON, RelaxationKind, RelaxationSpec
from .training import TrainConfig, derive_seeds, evaluate, train

UNLABELLED = -1


class _DSSLBase(BaseEstimator):
    _head = None

    def _relaxation_spec(self, n_outputs):
        raise NotImplementedError

    def _train_config(self, spec):
        return TrainConfig(
            relaxation=spec,
            lambda_u=self.lambda_u,
            rampup_epochs=self.rampup_epochs,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            epochs=self.max_epochs,
            batch_size_labelled=self.batch_size_labelled,
            batch_size_unlabelled=self.batch_size_unlabelled,
            seed=self.random_state,
            apply_prior_to_labelled=self.apply_prior_to_labelled,
        )

    def _fit_network(self, X_l, y_l, X_u, n_outputs, eval_sets):
        spec = self._relaxation_spec(n_outputs)
        cfg = self._train_config(spec)
        sizes = (X_l.shape[1], *self.hidden_layer_sizes, n_outputs)
        init_seed, train_seed = derive_seeds(self.random_state)
        net = Network.initialize(sizes, self.activation, self._head, seed=init_seed)
        cfg = replace(cfg, seed=train_seed)
        self.network_, self.history_ = train(net, X_l, y_l, X_u, cfg, eval_sets)
        self.train_config_ = cfg
        return self

    def evaluate(self, X, y):
        """Accuracy and the histogram of true-label confidences (see :func:`dssl.training.evaluate`)."""
        check_is_fitted(self, "network_")
        return evaluate(self.network_, check_array(X), self._encode(y))


class DSSLClassifier(ClassifierMixin, _DSSLBase):
    """MLP classifier with a softmax head trained on labelled and unlabelled data.

    Parameters
    ----------
    relaxation : {"dp", "entropy", "exclusivity", "pseudo_label", None} or CompiledRelaxation
        Unsupervised loss on unlabelled predictions. ``None`` trains on the
        labelled rows only. A compiled rule relaxation is applied to the class
        probability vector.
    temperature : float
        Exponent of the deterministic prior (``relaxation="dp"``).
    lambda_u : float
        Weight of the unsupervised term after ramp-up.
    rampup_epochs : int or None
        Epochs of linear ramp-up for ``lambda_u``; ``None`` means 10% of
        ``max_epochs``.
    """

    _head = "softmax"

    def __init__(self, hidden_layer_sizes=(64, 64), activation="relu", relaxation="dp",
                 temperature=10.0, lambda_u=1.0, rampup_epochs=None, learning_rate=0.05,
                 momentum=0.9, max_epochs=100, batch_size_labelled=32,
                 batch_size_unlabelled=32, apply_prior_to_labelled=False,
                 epsilon=DEFAULT_EPSILON, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.relaxation = relaxation
        self.temperature = temperature
        self.lambda_u = lambda_u
        self.rampup_epochs = rampup_epochs
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.max_epochs = max_epochs
        self.batch_size_labelled = batch_size_labelled
        self.batch_size_unlabelled = batch_size_unlabelled
        self.apply_prior_to_labelled = apply_prior_to_labelled
        self.epsilon = epsilon
        self.random_state = random_state

    def _relaxation_spec(self, n_outputs):
        r = self.relaxation
        if r is None or r == "none":
            return None
        if isinstance(r, CompiledRelaxation):
            return RelaxationSpec(RelaxationKind.COMPILED_RULES, rules=r, epsilon=self.epsilon)
        try:
            kind = RelaxationKind(r)
        except ValueError:
            raise ConfigError(f"unknown relaxation {r!r}", "relaxation") from None
        if kind is RelaxationKind.COMPILED_RULES:
            raise ConfigError("pass a CompiledRelaxation object for rule relaxations", "relaxation")
        return RelaxationSpec(kind, temperature=self.temperature, epsilon=self.epsilon)

    def _encode(self, y):
        y = np.asarray(y)
        idx = np.searchsorted(self.classes_, y)
        idx = np.clip(idx, 0, len(self.classes_) - 1)
        if not np.all(self.classes_[idx] == y):
            raise ValueError("y contains labels not seen during fit")
        return idx

    def fit(self, X, y, eval_set=None):
        """Fit on rows of ``X``; ``y == -1`` marks unlabelled rows.

        ``eval_set`` is an optional ``(X, y)`` pair whose accuracy is logged
        per epoch in ``history_`` as ``test_accuracy``.
        """
        X, y = check_X_y(X, y, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        labelled = y != UNLABELLED
        if not labelled.any():
            raise ValueError("need at least one labelled row")
        self.classes_ = np.unique(y[labelled])
        if len(self.classes_) < 2:
            raise ValueError("need labelled rows from at least two classes")
        X_l, y_l = X[labelled], self._encode(y[labelled])
        eval_sets = {}
        if eval_set is not None:
            eval_sets["test"] = (check_array(eval_set[0]), self._encode(eval_set[1]))
        return self._fit_network(X_l, y_l, X[~labelled], len(self.classes_), eval_sets)

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        return self.network_.forward(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


class DSSLMultiLabelClassifier(ClassifierMixin, _DSSLBase):
    """MLP with one sigmoid output per binary attribute.

    Parameters
    ----------
    rules : CompiledRelaxation, str or None
        Relaxation of the valid-label support. A string is parsed as rule-file
        text (``attrs:`` header plus rules) and compiled to minterms with
        ``g``. ``None`` trains on the labelled rows only.
    g, temperature : str, float
        ``g`` used when compiling a rule string: ``"identity"`` (semantic loss)
        or ``"power"`` with exponent ``temperature``.
    """

    _head = "sigmoid"

    def __init__(self, hidden_layer_sizes=(64, 64), activation="relu", rules=None,
                 g="power", temperature=10.0, lambda_u=1.0, rampup_epochs=None,
                 learning_rate=0.05, momentum=0.9, max_epochs=100, batch_size_labelled=32,
                 batch_size_unlabelled=32, apply_prior_to_labelled=False,
                 epsilon=DEFAULT_EPSILON, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.rules = rules
        self.g = g
        self.temperature = temperature
        self.lambda_u = lambda_u
        self.rampup_epochs = rampup_epochs
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.max_epochs = max_epochs
        self.batch_size_labelled = batch_size_labelled
        self.batch_size_unlabelled = batch_size_unlabelled
        self.apply_prior_to_labelled = apply_prior_to_labelled
        self.epsilon = epsilon
        self.random_state = random_state

    def compiled_rules(self):
        if self.rules is None or isinstance(self.rules, CompiledRelaxation):
            return self.rules
        attrs, formula = parse_rule_file_text(self.rules)
        g = GFunction.identity() if self.g == "identity" else GFunction.power(self.temperature)
        return compile_relaxation(enumerate_valid(formula, len(attrs)), g, epsilon=self.epsilon)

    def _relaxation_spec(self, n_outputs):
        compiled = self.compiled_rules()
        if compiled is None:
            return None
        return RelaxationSpec(RelaxationKind.COMPILED_RULES, rules=compiled, epsilon=self.epsilon)

    def _encode(self, y):
        return np.asarray(y, dtype=np.int64)

    def fit(self, X, y, eval_set=None):
        """Fit on ``X`` with (n, K) binary ``y``; rows of ``-1`` are unlabelled."""
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True)
        if y.ndim != 2:
            raise ValueError("y must be a 2-D binary matrix")
        y = y.astype(np.int64)
        self.n_features_in_ = X.shape[1]
        unlabelled = np.all(y == UNLABELLED, axis=1)
        if not np.all(np.isin(y[~unlabelled], (0, 1))):
            raise ValueError("labelled rows must be binary; mark unlabelled rows with -1")
        if unlabelled.all():
            raise ValueError("need at least one labelled row")
        self.n_outputs_ = y.shape[1]
        self.classes_ = [np.array([0, 1])] * self.n_outputs_
        eval_sets = {}
        if eval_set is not None:
            eval_sets["test"] = (check_array(eval_set[0]), self._encode(eval_set[1]))
        return self._fit_network(X[~unlabelled], y[~unlabelled], X[unlabelled], self.n_outputs_, eval_sets)

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        return self.network_.forward(check_array(X, dtype=np.float64))

    def predict(self, X):
        return (self.predict_proba(X) > 0.5).astype(np.int64)

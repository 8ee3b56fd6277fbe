"""Seeded synthetic tasks: Gaussian blobs, two moons, a 1-D two-Gaussian mixture
and rule-constrained multi-attribute clusters.

Every generator is a pure function of its arguments and ``seed``.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import gaussmix
from .exceptions import ConfigError
from .logic import enumerate_valid

UNLABELLED = -1


@dataclass
class Dataset:
    """Labelled / unlabelled / test splits with hidden labels kept for evaluation.

    For ``label_kind == "class"`` labels are integer class indices; for
    ``"attributes"`` they are (n, K) binary matrices.
    """

    X_labelled: np.ndarray
    y_labelled: np.ndarray
    X_unlabelled: np.ndarray
    y_unlabelled_hidden: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    label_kind: str = "class"
    n_outputs: int = 2
    valid_set: object = field(default=None, repr=False)

    @property
    def n_features(self):
        return self.X_labelled.shape[1]

    def splits(self):
        return {
            "labelled": (self.X_labelled, self.y_labelled),
            "unlabelled": (self.X_unlabelled, self.y_unlabelled_hidden),
            "test": (self.X_test, self.y_test),
        }

    def semi_supervised_xy(self):
        """Training data in scikit-learn's semi-supervised convention.

        Unlabelled rows carry the label -1 (a row of -1 for attribute labels).
        """
        X = np.vstack([self.X_labelled, self.X_unlabelled])
        if self.label_kind == "class":
            y_u = np.full(len(self.X_unlabelled), UNLABELLED, dtype=np.int64)
            return X, np.concatenate([self.y_labelled, y_u])
        y_u = np.full((len(self.X_unlabelled), self.n_outputs), UNLABELLED, dtype=np.int64)
        return X, np.vstack([self.y_labelled, y_u])

    def equals(self, other):
        return self.label_kind == other.label_kind and all(
            np.array_equal(a, b)
            for a, b in zip(
                (self.X_labelled, self.y_labelled, self.X_unlabelled,
                 self.y_unlabelled_hidden, self.X_test, self.y_test),
                (other.X_labelled, other.y_labelled, other.X_unlabelled,
                 other.y_unlabelled_hidden, other.X_test, other.y_test),
            )
        )

    def csv_text(self):
        """One row per point: features, label (``?`` when unlabelled), split tag."""

        def fmt(label):
            if self.label_kind == "class":
                return str(int(label))
            return "".join(str(int(b)) for b in label)

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(self.n_features)] + ["label", "split"])
        for X, y, tag in (
            (self.X_labelled, self.y_labelled, "labelled"),
            (self.X_unlabelled, None, "unlabelled"),
            (self.X_test, self.y_test, "test"),
        ):
            for i, row in enumerate(X):
                label = "?" if y is None else fmt(y[i])
                writer.writerow([repr(float(v)) for v in row] + [label, tag])
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.csv_text())


def _rng(seed):
    return np.random.default_rng(seed)


def cluster_centers(n_centers, dims, separation, rng):
    """Deterministic layout of class means.

    dims == 1: evenly spaced on a line. dims == 2: a regular polygon of
    radius ``separation``. dims >= n_centers: ``separation`` times random
    orthonormal directions. Otherwise: random unit directions.
    """
    if dims == 1:
        return (separation * np.arange(n_centers, dtype=float))[:, None]
    if dims == 2:
        angles = 2.0 * np.pi * np.arange(n_centers) / n_centers
        return separation * np.column_stack([np.cos(angles), np.sin(angles)])
    if dims >= n_centers:
        q, _ = np.linalg.qr(rng.standard_normal((dims, n_centers)))
        return separation * q.T
    v = rng.standard_normal((n_centers, dims))
    return separation * v / np.linalg.norm(v, axis=1, keepdims=True)


def _check_counts(**counts):
    for name, value in counts.items():
        if value < 0:
            raise ConfigError("must be non-negative", name)


def gen_blobs(n_classes=4, dims=2, separation=3.0, n_labelled_per_class=4,
              n_unlabelled=2000, n_test=2000, seed=0):
    """Isotropic unit-variance Gaussian classes around :func:`cluster_centers`.

    The labelled split holds exactly ``n_labelled_per_class`` points per class;
    unlabelled and test classes are drawn uniformly.
    """
    if n_classes < 2:
        raise ConfigError("need at least 2 classes", "n_classes")
    if not separation > 0:
        raise ConfigError("must be positive", "separation")
    _check_counts(n_labelled_per_class=n_labelled_per_class, n_unlabelled=n_unlabelled, n_test=n_test)
    rng = _rng(seed)
    centers = cluster_centers(n_classes, dims, separation, rng)

    def draw(y):
        return centers[y] + rng.standard_normal((len(y), dims))

    y_l = np.repeat(np.arange(n_classes), n_labelled_per_class)
    y_u = rng.integers(0, n_classes, n_unlabelled)
    y_t = rng.integers(0, n_classes, n_test)
    return Dataset(draw(y_l), y_l, draw(y_u), y_u, draw(y_t), y_t, "class", n_classes)


def _moons(y, noise, rng):
    t = rng.uniform(0.0, np.pi, len(y))
    outer = np.column_stack([np.cos(t), np.sin(t)])
    inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    X = np.where((y == 0)[:, None], outer, inner)
    if noise > 0:
        X = X + noise * rng.standard_normal(X.shape)
    return X


def gen_two_moons(noise=0.1, n_labelled_per_class=3, n_unlabelled=1000, n_test=1000, seed=0):
    """Two interleaved unit half-circles, class 0 on top, with Gaussian noise."""
    if noise < 0:
        raise ConfigError("must be non-negative", "noise")
    _check_counts(n_labelled_per_class=n_labelled_per_class, n_unlabelled=n_unlabelled, n_test=n_test)
    rng = _rng(seed)
    y_l = np.repeat(np.arange(2), n_labelled_per_class)
    y_u = rng.integers(0, 2, n_unlabelled)
    y_t = rng.integers(0, 2, n_test)
    return Dataset(
        _moons(y_l, noise, rng), y_l, _moons(y_u, noise, rng), y_u,
        _moons(y_t, noise, rng), y_t, "class", 2,
    )


def gen_attribute_task(rules, n_attributes, clusters_per_valid_label=1, dims=2,
                       separation=4.0, n_labelled_per_label=3, n_unlabelled=1500,
                       n_test=1500, seed=0):
    """Multi-attribute labels drawn from the valid set of ``rules``.

    Every valid label vector gets ``clusters_per_valid_label`` cluster centres
    (laid out by :func:`cluster_centers`); features are unit-variance Gaussian
    around a centre. Unlabelled and test points pick a cluster uniformly.
    """
    valid = enumerate_valid(rules, n_attributes)
    if len(valid) == 0:
        raise ConfigError("rules admit no valid label", "rules")
    if clusters_per_valid_label < 1:
        raise ConfigError("must be at least 1", "clusters_per_valid_label")
    _check_counts(n_labelled_per_label=n_labelled_per_label, n_unlabelled=n_unlabelled, n_test=n_test)
    rng = _rng(seed)
    n_clusters = len(valid) * clusters_per_valid_label
    centers = cluster_centers(n_clusters, dims, separation, rng)
    cluster_label = np.repeat(valid.vectors.astype(np.int64), clusters_per_valid_label, axis=0)

    def draw(c):
        return centers[c] + rng.standard_normal((len(c), dims)), cluster_label[c]

    # labelled: n per valid label, spread round-robin over its clusters
    c_l = np.array(
        [v * clusters_per_valid_label + (i % clusters_per_valid_label)
         for v in range(len(valid)) for i in range(n_labelled_per_label)],
        dtype=np.int64,
    )
    X_l, y_l = draw(c_l)
    X_u, y_u = draw(rng.integers(0, n_clusters, n_unlabelled))
    X_t, y_t = draw(rng.integers(0, n_clusters, n_test))
    return Dataset(X_l, y_l, X_u, y_u, X_t, y_t, "attributes", n_attributes, valid)


def gen_gauss1d(mix, n_labelled_per_class=5, n_unlabelled=1000, n_test=1000, seed=0):
    """Split a :func:`dssl.gaussmix.sample` draw into stratified splits.

    The labelled split takes the first ``n_labelled_per_class`` points of each
    class; the remaining points, in sample order, fill unlabelled then test.
    """
    _check_counts(n_labelled_per_class=n_labelled_per_class, n_unlabelled=n_unlabelled, n_test=n_test)
    n = n_unlabelled + n_test + 2 * n_labelled_per_class
    while True:
        x, y = gaussmix.sample(mix, max(n, 1), seed)
        picks = [np.flatnonzero(y == k)[:n_labelled_per_class] for k in (0, 1)]
        if all(len(p) == n_labelled_per_class for p in picks):
            break
        if min(mix.pi0, mix.pi1) == 0 and n_labelled_per_class > 0:
            raise ConfigError("a degenerate mixture cannot supply both classes", "pi1")
        n *= 2
    idx_l = np.concatenate(picks)
    rest = np.setdiff1d(np.arange(len(x)), idx_l)
    idx_u = rest[:n_unlabelled]
    idx_t = rest[n_unlabelled : n_unlabelled + n_test]
    X = x[:, None]
    return Dataset(X[idx_l], y[idx_l], X[idx_u], y[idx_u], X[idx_t], y[idx_t], "class", 2)

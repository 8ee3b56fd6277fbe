"""Small dense network ``f(x) -> theta`` with hand-written backpropagation.

Two heads are supported: ``softmax`` (a point on the simplex, distinct
classes) and ``sigmoid`` (independent per-attribute probabilities).
"""

import struct
from pathlib import Path

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax

from .exceptions import ConfigError

ACTIVATIONS = ("relu", "tanh")
HEADS = ("softmax", "sigmoid")
_TINY = np.finfo(np.float64).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)

_MAGIC = b"DSSLNET1"


class Network:
    """Multi-layer perceptron with parameters stored as float64 arrays.

    ``weights[i]`` has shape ``(layer_sizes[i], layer_sizes[i + 1])``.
    """

    def __init__(self, layer_sizes, weights, biases, activation="relu", head="softmax"):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}", "activation")
        if head not in HEADS:
            raise ConfigError(f"unknown head {head!r}", "head")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ConfigError("need at least an input and an output layer", "layer_sizes")
        if head == "softmax" and self.layer_sizes[-1] < 2:
            raise ConfigError("softmax head needs at least 2 outputs", "layer_sizes")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != self.layer_sizes[i : i + 2] or b.shape != (self.layer_sizes[i + 1],):
                raise ConfigError(f"parameter shapes do not match layer {i}", "weights")
        self.activation = activation
        self.head = head

    @classmethod
    def initialize(cls, layer_sizes, activation="relu", head="softmax", seed=0):
        """Uniform fan-in initialisation (He for relu, LeCun for tanh); zero biases."""
        rng = np.random.default_rng(seed)
        gain = 6.0 if activation == "relu" else 3.0
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(gain / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(layer_sizes, weights, biases, activation, head)

    @classmethod
    def zeros(cls, layer_sizes, activation="relu", head="softmax"):
        weights = [np.zeros((a, b)) for a, b in zip(layer_sizes[:-1], layer_sizes[1:])]
        biases = [np.zeros(b) for b in layer_sizes[1:]]
        return cls(layer_sizes, weights, biases, activation, head)

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    def copy(self):
        return Network(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
            self.head,
        )

    # forward / backward

    def logits(self, X, cache=None):
        h = np.asarray(X, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"expected inputs of shape (n, {self.layer_sizes[0]}), got {h.shape}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if cache is not None:
                cache.append(h)
            z = h @ w + b
            if i == last:
                return z
            h = np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def output_from_logits(self, z):
        if self.head == "softmax":
            return softmax(z, axis=1)
        # keep saturated units strictly inside (0, 1)
        return np.clip(expit(z), _TINY, _BELOW_ONE)

    def forward(self, X):
        """Head output: simplex rows for softmax, per-attribute probabilities for sigmoid."""
        return self.output_from_logits(self.logits(X))

    def backward(self, cache, dz):
        """Gradients ``(dW, db)`` per layer given ``dL/dlogits`` and the cached inputs."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            h = cache[i]
            grads_w[i] = h.T @ dz
            grads_b[i] = dz.sum(axis=0)
            if i == 0:
                break
            dh = dz @ self.weights[i].T
            if self.activation == "relu":
                dz = dh * (h > 0.0)
            else:
                dz = dh * (1.0 - h * h)
        return grads_w, grads_b

    def log_likelihood(self, z, y):
        """Per-sample supervised log-likelihood and its gradient w.r.t. logits.

        Softmax head: ``y`` holds class indices, the categorical log-likelihood
        is computed from log-softmax. Sigmoid head: ``y`` is an (n, K) binary
        matrix and the per-attribute Bernoulli log-likelihoods are summed.
        """
        if self.head == "softmax":
            logp = log_softmax(z, axis=1)
            rows = np.arange(z.shape[0])
            ll = logp[rows, y]
            grad = -np.exp(logp)
            grad[rows, y] += 1.0
            return ll, grad
        y = np.asarray(y, dtype=np.float64)
        ll = (y * log_expit(z) + (1.0 - y) * log_expit(-z)).sum(axis=1)
        return ll, y - expit(z)

    def output_vjp(self, out, grad_out):
        """Pull a gradient w.r.t. head outputs back to the logits."""
        if self.head == "softmax":
            return out * (grad_out - (out * grad_out).sum(axis=1, keepdims=True))
        return grad_out * out * (1.0 - out)

    # flat parameter view, used by gradient checks and the optimiser

    def get_flat(self):
        return np.concatenate([p.ravel() for pair in zip(self.weights, self.biases) for p in pair])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        pos = 0
        for i in range(len(self.weights)):
            for arr in (self.weights[i], self.biases[i]):
                n = arr.size
                arr[...] = flat[pos : pos + n].reshape(arr.shape)
                pos += n
        if pos != flat.size:
            raise ValueError("flat parameter vector has the wrong length")

    @staticmethod
    def flatten_grads(grads_w, grads_b):
        return np.concatenate([g.ravel() for pair in zip(grads_w, grads_b) for g in pair])

    # serialisation

    def to_bytes(self):
        """Serialise to the flat binary format.

        Layout: 8 magic bytes, then little-endian uint32 fields: number of layer
        sizes, each size, activation index, head index; then every weight
        matrix (row-major) followed by its bias vector as little-endian float64.
        """
        header = _MAGIC + struct.pack("<I", len(self.layer_sizes))
        header += struct.pack(f"<{len(self.layer_sizes)}I", *self.layer_sizes)
        header += struct.pack("<II", ACTIVATIONS.index(self.activation), HEADS.index(self.head))
        return header + self.get_flat().astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data):
        if data[:8] != _MAGIC:
            raise ValueError("not a network file (bad magic bytes)")
        (n,) = struct.unpack_from("<I", data, 8)
        sizes = struct.unpack_from(f"<{n}I", data, 12)
        act, head = struct.unpack_from("<II", data, 12 + 4 * n)
        net = cls.zeros(sizes, ACTIVATIONS[act], HEADS[head])
        flat = np.frombuffer(data, dtype="<f8", offset=20 + 4 * n)
        net.set_flat(flat.astype(np.float64))
        return net

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.layer_sizes == other.layer_sizes
            and self.activation == other.activation
            and self.head == other.head
            and np.array_equal(self.get_flat(), other.get_flat())
        )

    def __repr__(self):
        sizes = "-".join(map(str, self.layer_sizes))
        return f"Network({sizes}, activation={self.activation!r}, head={self.head!r})"

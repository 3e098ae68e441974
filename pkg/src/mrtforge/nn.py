"""Dense networks with hand-written reverse-mode gradients and Adam."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden_dims: list = field(default_factory=lambda: [128, 256, 128])
    activation: str = "relu"

    def __post_init__(self):
        dims = [self.input_dim, self.output_dim, *self.hidden_dims]
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all layer sizes must be >= 1, got {dims}")
        if self.activation != "relu":
            raise ValueError("only the rectifier activation is supported")
        self.hidden_dims = [int(d) for d in self.hidden_dims]

    @property
    def layer_dims(self):
        return [self.input_dim, *self.hidden_dims, self.output_dim]

    def to_dict(self):
        return {"input_dim": self.input_dim, "output_dim": self.output_dim,
                "hidden_dims": list(self.hidden_dims), "activation": self.activation}


class MLP:
    """ReLU multilayer perceptron; parameters are float64 ``[W0, b0, W1, b1, ...]``."""

    def __init__(self, spec: MlpSpec, rng=None, params=None):
        self.spec = spec
        if params is not None:
            self.params = [np.array(p, dtype=np.float64) for p in params]
            return
        rng = np.random.default_rng(0) if rng is None else rng
        self.params = []
        dims = spec.layer_dims
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            self.params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @property
    def n_layers(self):
        return len(self.params) // 2

    def zero_output_layer(self):
        self.params[-2][:] = 0.0
        self.params[-1][:] = 0.0

    def forward(self, x):
        """Return (output, cache) for a batch ``x`` of shape (n, input_dim)."""
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(f"expected input of shape (n, {self.spec.input_dim}), got {x.shape}")
        acts = [x]
        h = x
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W + b
            if i < self.n_layers - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts, dout):
        """Gradients of all parameters given dLoss/dOutput."""
        grads = [None] * len(self.params)
        g = dout
        for i in reversed(range(self.n_layers)):
            W = self.params[2 * i]
            a_in = acts[i]
            grads[2 * i] = a_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = (g @ W.T) * (acts[i] > 0)
        return grads

    def __call__(self, x):
        return self.forward(x)[0]


class Adam:
    """Adam; ``weight_decay`` shrinks parameters flagged in ``decay`` directly (decoupled)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.0, decay=None):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.decay = [True] * len(params) if decay is None else list(decay)
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v, dec in zip(self.params, grads, self.m, self.v, self.decay):
            if dec and self.weight_decay:
                p *= 1.0 - self.lr * self.weight_decay
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out

"""Small dense tanh networks with hand-written reverse-mode gradients.

A network maps ``x`` through ``tanh`` hidden layers to a linear output that is
multiplied by ``output_scale``::

    y = output_scale * (W_L tanh(... tanh(W_1 x + b_1) ...) + b_L)

Weight matrices are stored ``(out, in)``; every function accepts a single
feature vector or a batch of shape ``(n, in)``. Gradients are summed over the
batch.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DivergenceError

__all__ = [
    "MlpConfig",
    "MlpParams",
    "SgdConfig",
    "init",
    "forward",
    "backward",
    "sgd_step",
    "params_to_dict",
    "params_from_dict",
]

PARAMS_FORMAT = "dpk-mlp"
PARAMS_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden: tuple = (256, 64)
    output_dim: int = 1
    output_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        dims = (self.input_dim, *self.hidden, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all layer widths must be >= 1, got {dims}")
        if not self.output_scale > 0:
            raise ValueError("output_scale must be positive")

    @property
    def layer_dims(self):
        return (self.input_dim, *self.hidden, self.output_dim)


@dataclass
class MlpParams:
    weights: list
    biases: list
    output_scale: float = 1.0

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def output_dim(self):
        return self.weights[-1].shape[0]

    @property
    def n_parameters(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.output_scale)

    def arrays(self):
        """Flat list of all parameter arrays, weights and biases interleaved per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-3
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be >= 1")


def init(cfg, seed=0):
    """Uniform fan-in initialization: weights in +-sqrt(1/fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    dims = cfg.layer_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, float(cfg.output_scale))


def _as_batch(params, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(f"expected input of width {params.input_dim}, got shape {np.shape(x)}")
    return x, single


def forward(params, x, return_cache=False):
    """Evaluate the network; with ``return_cache`` also return hidden activations."""
    h, single = _as_batch(params, x)
    acts = [h]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.tanh(h @ w.T + b)
        acts.append(h)
    out = params.output_scale * (h @ params.weights[-1].T + params.biases[-1])
    if single:
        out = out[0]
    return (out, acts) if return_cache else out


def backward(params, x, upstream, cache=None):
    """Gradients of ``sum(upstream * forward(x))`` w.r.t. parameters and input.

    Returns ``(grads, input_grad)`` where ``grads`` is an :class:`MlpParams`
    with the same layout as ``params``.
    """
    xb, single = _as_batch(params, x)
    g = np.asarray(upstream, dtype=float)
    if single and g.ndim == 1:
        g = g[None, :]
    if g.shape != (xb.shape[0], params.output_dim):
        raise ValueError(f"upstream gradient has shape {g.shape}, expected {(xb.shape[0], params.output_dim)}")
    acts = forward(params, xb, return_cache=True)[1] if cache is None else cache
    n_layers = len(params.weights)
    dws, dbs = [None] * n_layers, [None] * n_layers
    g = params.output_scale * g
    for i in range(n_layers - 1, -1, -1):
        h_prev = acts[i]
        dws[i] = g.T @ h_prev
        dbs[i] = g.sum(axis=0)
        g = g @ params.weights[i]
        if i > 0:
            g = g * (1.0 - h_prev * h_prev)
    grads = MlpParams(dws, dbs, params.output_scale)
    return grads, (g[0] if single else g)


def sgd_step(params, grads, cfg):
    """One SGD update with L2 weight decay folded into the gradient.

    ``p <- p - lr * (g + weight_decay * p)`` for every weight and bias.
    """
    for g in grads.arrays():
        if not np.all(np.isfinite(g)):
            raise DivergenceError("divergence detected: non-finite gradient")
    lr, wd = cfg.learning_rate, cfg.weight_decay
    weights = [w - lr * (gw + wd * w) for w, gw in zip(params.weights, grads.weights)]
    biases = [b - lr * (gb + wd * b) for b, gb in zip(params.biases, grads.biases)]
    return MlpParams(weights, biases, params.output_scale)


def params_to_dict(params):
    """Serializable layout: per-layer shape plus row-major weights and bias."""
    return {
        "format": PARAMS_FORMAT,
        "version": PARAMS_VERSION,
        "output_scale": float(params.output_scale),
        "layers": [
            {
                "shape": [int(w.shape[0]), int(w.shape[1])],
                "weight": w.ravel(order="C").tolist(),
                "bias": b.tolist(),
            }
            for w, b in zip(params.weights, params.biases)
        ],
    }


def params_from_dict(data):
    if data.get("format") != PARAMS_FORMAT:
        raise ValueError(f"not a {PARAMS_FORMAT} record")
    if data.get("version") != PARAMS_VERSION:
        raise ValueError(f"unsupported {PARAMS_FORMAT} version {data.get('version')!r}")
    weights, biases = [], []
    for layer in data["layers"]:
        out_dim, in_dim = layer["shape"]
        weights.append(np.asarray(layer["weight"], dtype=float).reshape(out_dim, in_dim))
        biases.append(np.asarray(layer["bias"], dtype=float).reshape(out_dim))
    for prev, nxt in zip(weights[:-1], weights[1:]):
        if prev.shape[0] != nxt.shape[1]:
            raise ValueError("inconsistent layer shapes in parameter record")
    return MlpParams(weights, biases, float(data.get("output_scale", 1.0)))

"""Dense autoencoder networks in plain numpy.

Networks are stored as lists of ``(fan_in, fan_out)`` weight matrices and
bias vectors acting on row-major batches, ``y = act(x @ W + b)``.  The
encoder and decoder are trained jointly by stacking them into one network
whose bottleneck layer is linear.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "linear")


@dataclass
class Mlp:
    widths: list[int]
    activations: list[str]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("an MLP needs at least an input and an output width")
        if len(self.activations) != len(self.widths) - 1:
            raise ValueError(
                f"expected {len(self.widths) - 1} activations, got {len(self.activations)}"
            )
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.widths[i], self.widths[i + 1])
            if W.shape != shape or b.shape != (shape[1],):
                raise ValueError(f"layer {i}: weight {W.shape} / bias {b.shape} do not match {shape}")
        if len(self.weights) != len(self.activations) or len(self.biases) != len(self.activations):
            raise ValueError("one weight matrix and one bias per layer required")

    @property
    def n_layers(self) -> int:
        return len(self.activations)

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            list(self.widths),
            list(self.activations),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
        )

    def __call__(self, X) -> np.ndarray:
        return forward(self, X)[0]


def init_mlp(widths, activations, seed: int) -> Mlp:
    """Random network: He-normal weights before relu, Glorot-uniform before linear.

    Biases start at zero.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise ValueError("widths must have length >= 2")
    if any(w <= 0 for w in widths):
        raise ValueError(f"widths must be positive, got {widths}")
    activations = list(activations)
    if len(activations) != len(widths) - 1:
        raise ValueError("activations must have length len(widths) - 1")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out, act in zip(widths[:-1], widths[1:], activations):
        if act == "relu":
            W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        weights.append(W)
        biases.append(np.zeros(fan_out))
    return Mlp(widths, activations, weights, biases)


def default_activations(n_layers: int) -> list[str]:
    """relu on hidden layers, linear on the last one."""
    return ["relu"] * (n_layers - 1) + ["linear"]


def forward(mlp: Mlp, batch):
    """Evaluate the network.

    Returns ``(outputs, cache)`` where ``cache`` holds the layer inputs and
    pre-activations needed by :func:`backward`.
    """
    X = np.asarray(batch, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != mlp.widths[0]:
        raise ValueError(f"batch of shape {X.shape} does not match input width {mlp.widths[0]}")
    inputs, pre = [], []
    h = X
    for W, b, act in zip(mlp.weights, mlp.biases, mlp.activations):
        inputs.append(h)
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0) if act == "relu" else z
    return h, (inputs, pre)


def backward(mlp: Mlp, cache, grad_out: np.ndarray):
    """Reverse-mode pass. Returns ``(grads_W, grads_b, grad_input)``."""
    inputs, pre = cache
    gW = [None] * mlp.n_layers
    gb = [None] * mlp.n_layers
    g = grad_out
    for i in range(mlp.n_layers - 1, -1, -1):
        if mlp.activations[i] == "relu":
            # subgradient at exactly 0 is 0
            g = g * (pre[i] > 0.0)
        gW[i] = inputs[i].T @ g
        gb[i] = g.sum(axis=0)
        g = g @ mlp.weights[i].T
    return gW, gb, g


def loss_and_grads(mlp: Mlp, inputs, targets):
    """Mean squared error over all entries and its gradient.

    Returns ``(mse, grads)`` with ``grads`` ordered like :meth:`Mlp.params`.
    """
    T = np.asarray(targets, dtype=np.float64)
    if T.ndim == 1:
        T = T[None, :]
    out, cache = forward(mlp, inputs)
    if T.shape != out.shape:
        raise ValueError(f"targets of shape {T.shape} do not match outputs {out.shape}")
    diff = out - T
    mse = float(np.mean(diff * diff))
    gW, gb, _ = backward(mlp, cache, (2.0 / diff.size) * diff)
    grads = []
    for a, b in zip(gW, gb):
        grads += [a, b]
    return mse, grads


def stack(encoder: Mlp, decoder: Mlp) -> Mlp:
    """The composition ``decoder(encoder(x))`` as a single network (shares arrays)."""
    if encoder.widths[-1] != decoder.widths[0]:
        raise ValueError(
            f"encoder bottleneck {encoder.widths[-1]} != decoder input {decoder.widths[0]}"
        )
    return Mlp(
        encoder.widths + decoder.widths[1:],
        encoder.activations + decoder.activations,
        encoder.weights + decoder.weights,
        encoder.biases + decoder.biases,
    )


def split(net: Mlp, n_encoder_layers: int) -> tuple[Mlp, Mlp]:
    k = n_encoder_layers
    enc = Mlp(net.widths[: k + 1], net.activations[:k], net.weights[:k], net.biases[:k])
    dec = Mlp(net.widths[k:], net.activations[k:], net.weights[k:], net.biases[k:])
    return enc, dec


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2000
    batch_size: int = 20
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, mlp: Mlp) -> "AdamState":
        return cls([np.zeros_like(p) for p in mlp.params()], [np.zeros_like(p) for p in mlp.params()])


def adam_step(state: AdamState, mlp: Mlp, grads, cfg: TrainConfig):
    """One bias-corrected Adam update, applied in place to ``mlp`` and ``state``."""
    params = mlp.params()
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ValueError("optimizer state does not match the network")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    step = cfg.learning_rate * np.sqrt(1.0 - b2**state.t) / (1.0 - b1**state.t)
    eps = cfg.eps_adam * np.sqrt(1.0 - b2**state.t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= step * m / (np.sqrt(v) + eps)
    return mlp, state


def train(encoder: Mlp, decoder: Mlp, data, cfg: TrainConfig, log_every: int = 0):
    """Fit ``decoder(encoder(x)) ~ x`` with shuffled minibatch Adam.

    ``data`` is an ``(N, n)`` array, or anything with a ``coords`` array.
    The inputs are not modified; trained copies are returned with the
    per-epoch mean minibatch loss.
    """
    X = np.asarray(getattr(data, "coords", data), dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training data is empty")
    if X.shape[1] != encoder.widths[0] or decoder.widths[-1] != encoder.widths[0]:
        raise ValueError(
            f"data dimension {X.shape[1]} does not match encoder input "
            f"{encoder.widths[0]} / decoder output {decoder.widths[-1]}"
        )
    net = stack(encoder.copy(), decoder.copy())
    state = AdamState.zeros_like(net)
    rng = np.random.default_rng(cfg.seed)
    n = len(X)
    bs = min(cfg.batch_size, n)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for start in range(0, n, bs):
            xb = X[order[start : start + bs]]
            loss, grads = loss_and_grads(net, xb, xb)
            adam_step(state, net, grads, cfg)
            total += loss * len(xb)
        history.append(total / n)
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}/{cfg.epochs}  loss {history[-1]:.6g}", flush=True)
    enc, dec = split(net, encoder.n_layers)
    return enc, dec, history


def _kink_crossed(mlp: Mlp, X, idx, h) -> bool:
    p = mlp.params()[idx[0]]
    old = p[idx[1]]
    masks = []
    for val in (old + h, old - h):
        p[idx[1]] = val
        _, (_, pre) = forward(mlp, X)
        masks.append([z > 0 for a, z in zip(mlp.activations, pre) if a == "relu"])
    p[idx[1]] = old
    return any(not np.array_equal(a, b) for a, b in zip(*masks))


def grad_check(mlp: Mlp, n_probes: int = 10, h: float = 1e-5, seed: int = 0,
               batch_size: int = 5, floor: float = 1e-6) -> float:
    """Max relative deviation between backprop and central differences.

    Probes random parameter coordinates on a random batch of inputs and
    targets.  A probe whose ``+-h`` perturbation flips any relu is redrawn.
    Relative deviation is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if not h > 0:
        raise ValueError("finite-difference step h must be positive")
    rng = np.random.default_rng(seed)
    net = mlp.copy()
    X = rng.normal(size=(batch_size, net.widths[0]))
    T = rng.normal(size=(batch_size, net.widths[-1]))
    _, grads = loss_and_grads(net, X, T)
    params = net.params()
    sizes = np.array([p.size for p in params])
    worst = 0.0
    done = attempts = 0
    while done < n_probes:
        attempts += 1
        if attempts > 100 * n_probes:
            raise RuntimeError("could not find probes away from relu kinks")
        which = int(rng.choice(len(params), p=sizes / sizes.sum()))
        coord = np.unravel_index(int(rng.integers(params[which].size)), params[which].shape)
        if _kink_crossed(net, X, (which, coord), h):
            continue
        p = params[which]
        old = p[coord]
        p[coord] = old + h
        up = loss_and_grads(net, X, T)[0]
        p[coord] = old - h
        down = loss_and_grads(net, X, T)[0]
        p[coord] = old
        numeric = (up - down) / (2 * h)
        analytic = grads[which][coord]
        dev = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        worst = max(worst, dev)
        done += 1
    return worst


@dataclass
class NeuralAutoencoder:
    """Encoder/decoder pair with the batch interface used by the analysis code."""

    encoder: Mlp
    decoder: Mlp
    history: list[float] = field(default_factory=list)

    @property
    def ambient_dim(self) -> int:
        return self.encoder.widths[0]

    @property
    def latent_dim(self) -> int:
        return self.encoder.widths[-1]

    def encode(self, X) -> np.ndarray:
        return forward(self.encoder, X)[0]

    def decode(self, U) -> np.ndarray:
        return forward(self.decoder, np.asarray(U, dtype=np.float64).reshape(-1, self.latent_dim))[0]

    def reconstruct(self, X) -> np.ndarray:
        return self.decode(self.encode(X))


# -- checkpoints -------------------------------------------------------------

def mlp_to_dict(mlp: Mlp) -> dict:
    return {
        "widths": list(mlp.widths),
        "activations": list(mlp.activations),
        "weights": [W.ravel(order="C").tolist() for W in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }


def mlp_from_dict(d: dict) -> Mlp:
    widths = [int(w) for w in d["widths"]]
    weights = [
        np.array(w, dtype=np.float64).reshape(widths[i], widths[i + 1])
        for i, w in enumerate(d["weights"])
    ]
    biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
    return Mlp(widths, list(d["activations"]), weights, biases)


def save_checkpoint(mlp: Mlp, path) -> None:
    Path(path).write_text(json.dumps(mlp_to_dict(mlp)), encoding="utf-8")


def load_checkpoint(path) -> Mlp:
    return mlp_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))



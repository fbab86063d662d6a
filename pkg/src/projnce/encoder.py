"""Small MLP encoder onto the unit sphere, with exact backprop and AdamW.

Hidden layers are affine + ReLU, the final layer is affine, and the output
rows are normalized onto the sphere with the exact Jacobian used in the
backward pass. A multinomial linear probe measures how linearly separable
frozen embeddings are.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateLabels,
    DegenerateNorm,
    DimensionError,
    DomainError,
    NonFiniteGradient,
)
from .numerics import RngState

_PJNW_MAGIC = b"PJNW"
_PJNW_VERSION = 1


@dataclass
class MLPParams:
    """Layer sizes plus one weight matrix and bias vector per layer."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray]  # weights[l]: (sizes[l], sizes[l+1])
    biases: list[np.ndarray]  # biases[l]: (sizes[l+1],)

    def copy(self) -> "MLPParams":
        return MLPParams(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights] + [b for b in self.biases])

    def from_vector(self, theta: np.ndarray) -> "MLPParams":
        """New params with the same shapes filled from a flat vector."""
        ws, bs, k = [], [], 0
        for w in self.weights:
            ws.append(theta[k : k + w.size].reshape(w.shape).copy())
            k += w.size
        for b in self.biases:
            bs.append(theta[k : k + b.size].copy())
            k += b.size
        if k != theta.size:
            raise DimensionError("flat parameter vector has the wrong length")
        return MLPParams(self.sizes, ws, bs)


@dataclass
class ForwardTape:
    """Everything the backward pass needs for one batch."""

    X: np.ndarray
    pre_activations: list[np.ndarray]  # hidden pre-activations
    activations: list[np.ndarray]  # inputs to each layer (activations[0] = X)
    U: np.ndarray  # pre-normalization outputs
    norms: np.ndarray  # row norms of U
    Z: np.ndarray  # unit-sphere embeddings


@dataclass
class AdamWState:
    """Decoupled-weight-decay Adam moments and hyperparameters."""

    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4


def init_params(sizes, rng: RngState) -> MLPParams:
    """He-uniform weights, zero biases; deterministic for a given stream."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ConfigError(f"bad layer sizes {sizes}")
    gen = rng.gen
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(gen.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(sizes, weights, biases)


def forward(params: MLPParams, X: np.ndarray) -> ForwardTape:
    """Run the batch through the network and normalize onto the sphere."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.sizes[0]:
        raise DimensionError(f"input dim {X.shape[1]} != layer size {params.sizes[0]}")
    activations = [X]
    pre_activations = []
    H = X
    for W, b in zip(params.weights[:-1], params.biases[:-1]):
        pre = H @ W + b
        pre_activations.append(pre)
        H = np.maximum(pre, 0.0)
        activations.append(H)
    U = H @ params.weights[-1] + params.biases[-1]
    norms = np.linalg.norm(U, axis=1)
    if np.any(norms <= 1e-12):
        raise DegenerateNorm("an embedding collapsed to the origin before normalization")
    Z = U / norms[:, None]
    return ForwardTape(X, pre_activations, activations, U, norms, Z)


def backward(params: MLPParams, tape: ForwardTape, dLoss_dZ: np.ndarray) -> MLPParams:
    """Exact parameter gradient for a scalar loss given dLoss/dZ.

    The sphere normalization is differentiated with its full Jacobian
    (I - z z^T) / ||u|| per row.
    """
    dZ = np.asarray(dLoss_dZ, dtype=np.float64)
    if dZ.shape != tape.Z.shape:
        raise DimensionError(f"dLoss_dZ shape {dZ.shape} != embeddings {tape.Z.shape}")
    radial = (dZ * tape.Z).sum(axis=1, keepdims=True)
    dU = (dZ - radial * tape.Z) / tape.norms[:, None]
    grads_w = [np.empty_like(w) for w in params.weights]
    grads_b = [np.empty_like(b) for b in params.biases]
    delta = dU
    grads_w[-1] = tape.activations[-1].T @ delta
    grads_b[-1] = delta.sum(axis=0)
    dH = delta @ params.weights[-1].T
    for layer in range(len(params.weights) - 2, -1, -1):
        delta = dH * (tape.pre_activations[layer] > 0.0)
        grads_w[layer] = tape.activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            dH = delta @ params.weights[layer].T
    return MLPParams(params.sizes, grads_w, grads_b)


def adamw_init(params: MLPParams, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-4) -> AdamWState:
    return AdamWState(
        m=[np.zeros_like(w) for w in params.weights] + [np.zeros_like(b) for b in params.biases],
        v=[np.zeros_like(w) for w in params.weights] + [np.zeros_like(b) for b in params.biases],
        step=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        weight_decay=weight_decay,
    )


def adamw_step(params: MLPParams, grads: MLPParams, state: AdamWState) -> MLPParams:
    """One decoupled-weight-decay Adam update; mutates the state, returns new params.

    Decay shrinks the parameters before the moment-driven step is applied.
    """
    tensors = params.weights + params.biases
    gtensors = grads.weights + grads.biases
    for g in gtensors:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("gradient contains NaN or Inf")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new = []
    for p, g, m, v in zip(tensors, gtensors, state.m, state.v):
        p = p * (1.0 - state.lr * state.weight_decay)
        m[:] = state.beta1 * m + (1.0 - state.beta1) * g
        v[:] = state.beta2 * v + (1.0 - state.beta2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        new.append(p - state.lr * mhat / (np.sqrt(vhat) + state.eps))
    k = len(params.weights)
    return MLPParams(params.sizes, new[:k], new[k:])


# ---------------------------------------------------------------------------
# linear probe
# ---------------------------------------------------------------------------


def linear_probe(
    embeddings: np.ndarray,
    labels: np.ndarray,
    epochs: int = 100,
    lr: float = 0.1,
    rng: RngState | None = None,
    held_out_fraction: float = 0.3,
):
    """Multinomial logistic regression on frozen embeddings.

    Trains full-batch gradient descent on a shuffled split and returns
    (weights, bias, held-out accuracy).
    """
    X = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateLabels("the probe needs at least two classes")
    if not 0.0 < held_out_fraction < 1.0:
        raise DomainError("held_out_fraction must be in (0, 1)")
    remap = {c: i for i, c in enumerate(classes)}
    y = np.array([remap[c] for c in y], dtype=np.int64)
    n, d = X.shape
    m = classes.size
    rng = rng if rng is not None else RngState(0, ("probe",))
    perm = rng.gen.permutation(n)
    n_test = max(1, int(round(held_out_fraction * n)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    Xtr, ytr = X[train_idx], y[train_idx]
    Xte, yte = X[test_idx], y[test_idx]
    W = np.zeros((d, m))
    b = np.zeros(m)
    onehot = np.zeros((Xtr.shape[0], m))
    onehot[np.arange(Xtr.shape[0]), ytr] = 1.0
    for _ in range(epochs):
        logits = Xtr @ W + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        diff = (p - onehot) / Xtr.shape[0]
        W -= lr * (Xtr.T @ diff)
        b -= lr * diff.sum(axis=0)
    pred = np.argmax(Xte @ W + b, axis=1)
    accuracy = float(np.mean(pred == yte))
    return W, b, accuracy


# ---------------------------------------------------------------------------
# checkpoint serialization (PJNW)
# ---------------------------------------------------------------------------


def save_checkpoint(params: MLPParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_PJNW_MAGIC)
        fh.write(struct.pack("<II", _PJNW_VERSION, len(params.sizes)))
        fh.write(struct.pack(f"<{len(params.sizes)}I", *params.sizes))
        fh.write(params.to_vector().astype("<f8").tobytes())


def load_checkpoint(path) -> MLPParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _PJNW_MAGIC:
            raise ConfigError(f"bad magic {magic!r}, expected {_PJNW_MAGIC!r}")
        version, n_sizes = struct.unpack("<II", fh.read(8))
        if version != _PJNW_VERSION:
            raise ConfigError(f"unsupported PJNW version {version}")
        sizes = struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes))
        blob = fh.read()
    template = MLPParams(
        tuple(sizes),
        [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
        [np.zeros(b) for b in sizes[1:]],
    )
    theta = np.frombuffer(blob, dtype="<f8")
    expected = sum(w.size for w in template.weights) + sum(b.size for b in template.biases)
    if theta.size != expected:
        raise ConfigError(f"checkpoint holds {theta.size} params, layer dims imply {expected}")
    return template.from_vector(theta.copy())


def parse_arch(text: str) -> tuple[int, ...]:
    """Parse a comma list like '5,16,16,2' into layer sizes."""
    try:
        sizes = tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad architecture string {text!r}") from exc
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ConfigError(f"bad architecture string {text!r}")
    return sizes

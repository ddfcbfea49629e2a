"""
The oblique-tree network.

Layer l consumes the raw covariates together with every earlier activation,
concat[x, a^(1), ..., a^(l-1)], so its weight matrix has d + (l - 1) d_h
columns. The linear head reads concat[x, a^(1), ..., a^(L)] and returns the
Cox risk score g(x).
"""

import dataclasses
from typing import List, Optional, Tuple

import numpy as np

from nsotree.typing import ActivationMode
from nsotree.utils import activate, activation_derivative, soft_threshold


@dataclasses.dataclass(frozen=True, eq=False)
class NSOTreeParams:
    weights: Tuple[np.ndarray, ...]
    """
    Split weights W^(l) per layer, each of shape (d_h, d + (l - 1) d_h).
    """

    biases: Tuple[np.ndarray, ...]
    """
    Split biases b^(l) per layer, each of shape (d_h,).
    """

    head_weights: np.ndarray
    """
    Output head weights over concat[x, a^(1), ..., a^(L)].
    """

    head_bias: float
    """
    Output head bias. The Cox likelihood is blind to it.
    """

    input_dim: int
    """
    Covariate dimension d.
    """

    hidden_dim: int = 1
    """
    Units per layer d_h.
    """

    def __post_init__(self) -> None:
        d, dh = self.input_dim, self.hidden_dim
        if d < 1 or dh < 1:
            raise ValueError("Input and hidden dimensions must be positive")
        if len(self.weights) != len(self.biases):
            raise ValueError("There must be one bias vector per weight matrix")

        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases)
        head = np.asarray(self.head_weights, dtype=np.float64).reshape(-1)

        for layer, (w, b) in enumerate(zip(weights, biases), start=1):
            if w.shape != (dh, layer_input_dim(d, dh, layer)):
                raise ValueError(
                    f"Layer {layer} weights have shape {w.shape}, "
                    f"expected {(dh, layer_input_dim(d, dh, layer))}"
                )
            if b.shape != (dh,):
                raise ValueError(f"Layer {layer} biases must have length {dh}")

        if head.shape != (layer_input_dim(d, dh, len(weights) + 1),):
            raise ValueError("Head weights do not match the network input")

        for array in (*weights, *biases, head):
            if not np.all(np.isfinite(array)):
                raise ValueError("Parameters must be finite")
        if not np.isfinite(self.head_bias):
            raise ValueError("Parameters must be finite")

        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "head_weights", head)
        object.__setattr__(self, "head_bias", float(self.head_bias))

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def feature_dim(self) -> int:
        """
        Length of concat[x, a^(1), ..., a^(L)].
        """

        return layer_input_dim(self.input_dim, self.hidden_dim, self.depth + 1)

    def to_vector(self) -> np.ndarray:
        parts: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.reshape(-1))
            parts.append(b)
        parts.append(self.head_weights)
        parts.append(np.array([self.head_bias]))
        return np.concatenate(parts)

    def from_vector(self, vector: np.ndarray) -> "NSOTreeParams":
        """
        Parameters shaped like this instance, filled from a flat vector laid out
        as `to_vector` lays it out.
        """

        vector = np.asarray(vector, dtype=np.float64).reshape(-1)
        if vector.shape[0] != self.size:
            raise ValueError("Vector length does not match the parameter count")

        weights, biases = [], []
        offset = 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vector[offset : offset + w.size].reshape(w.shape).copy())
            offset += w.size
            biases.append(vector[offset : offset + b.size].copy())
            offset += b.size

        head = vector[offset : offset + self.head_weights.size].copy()
        offset += self.head_weights.size
        return dataclasses.replace(
            self,
            weights=tuple(weights),
            biases=tuple(biases),
            head_weights=head,
            head_bias=float(vector[offset]),
        )

    @property
    def size(self) -> int:
        return (
            sum(w.size + b.size for w, b in zip(self.weights, self.biases))
            + self.head_weights.size
            + 1
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ActivationTrace:
    pre_activations: Tuple[np.ndarray, ...]
    """
    z^(l) per layer, each of length d_h.
    """

    activations: Tuple[np.ndarray, ...]
    """
    a^(l) per layer.
    """

    patterns: Tuple[np.ndarray, ...]
    """
    o^(l) = 1[z^(l) >= 0] per layer, boolean.
    """

    score: float
    """
    Risk score g(x).
    """

    @property
    def pattern(self) -> np.ndarray:
        """
        All layer patterns concatenated, length L d_h.
        """

        if not self.patterns:
            return np.zeros(0, dtype=bool)
        return np.concatenate(self.patterns)


@dataclasses.dataclass(frozen=True, eq=False)
class BatchTrace:
    """
    Forward pass over a covariate matrix, kept for the backward pass.
    """

    features: np.ndarray
    """
    concat[x, a^(1), ..., a^(L)] per row, shape (n, d + L d_h).
    """

    pre_activations: Tuple[np.ndarray, ...]
    """
    z^(l) per layer, each of shape (n, d_h).
    """

    scores: np.ndarray
    mode: ActivationMode


def layer_input_dim(input_dim: int, hidden_dim: int, layer: int) -> int:
    """
    Input length of 1-based layer `layer`; layer L + 1 is the head.
    """

    return input_dim + (layer - 1) * hidden_dim


def init(input_dim: int, depth: int, hidden_dim: int = 1, seed: int = 0) -> NSOTreeParams:
    """
    Fresh parameters: weights i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)]
    per layer (head included), biases zero.

    :param input_dim: Covariate dimension d.
    :param depth: Number of split layers L.
    :param hidden_dim: Units per layer d_h.
    :param seed: Seed of the generator the weights are drawn from.
    """

    if input_dim < 1 or depth < 1 or hidden_dim < 1:
        raise ValueError("Dimensions must be positive")

    rng = np.random.default_rng(seed)

    weights, biases = [], []
    for layer in range(1, depth + 1):
        fan_in = layer_input_dim(input_dim, hidden_dim, layer)
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(hidden_dim, fan_in)))
        biases.append(np.zeros(hidden_dim))

    fan_in = layer_input_dim(input_dim, hidden_dim, depth + 1)
    bound = 1.0 / np.sqrt(fan_in)
    head = rng.uniform(-bound, bound, size=fan_in)

    return NSOTreeParams(
        weights=tuple(weights),
        biases=tuple(biases),
        head_weights=head,
        head_bias=0.0,
        input_dim=input_dim,
        hidden_dim=hidden_dim,
    )


def init_linear(input_dim: int, seed: int = 0) -> NSOTreeParams:
    """
    Depth-0 parameters: the head alone, i.e. a linear Cox model.
    """

    if input_dim < 1:
        raise ValueError("Dimensions must be positive")

    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(input_dim)
    return NSOTreeParams(
        weights=(),
        biases=(),
        head_weights=rng.uniform(-bound, bound, size=input_dim),
        head_bias=0.0,
        input_dim=input_dim,
    )


def forward_batch(
    params: NSOTreeParams, x: np.ndarray, mode: ActivationMode = "softplus"
) -> BatchTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(
            f"Expected covariates with {params.input_dim} columns, got shape {x.shape}"
        )

    d, dh = params.input_dim, params.hidden_dim
    features = np.empty((x.shape[0], params.feature_dim))
    features[:, :d] = x

    pre_activations = []
    for layer, (w, b) in enumerate(zip(params.weights, params.biases), start=1):
        fan_in = layer_input_dim(d, dh, layer)
        z = features[:, :fan_in] @ w.T + b
        features[:, fan_in : fan_in + dh] = activate(z, mode)
        pre_activations.append(z)

    scores = features @ params.head_weights + params.head_bias
    return BatchTrace(
        features=features,
        pre_activations=tuple(pre_activations),
        scores=scores,
        mode=mode,
    )


def forward(
    params: NSOTreeParams, x: np.ndarray, mode: ActivationMode = "softplus"
) -> ActivationTrace:
    """
    Forward pass for one covariate vector, keeping every layer's pre-activation,
    activation and binary pattern.
    """

    x = np.asarray(x, dtype=np.float64).reshape(-1)
    trace = forward_batch(params, x.reshape(1, -1), mode)

    d, dh = params.input_dim, params.hidden_dim
    activations = tuple(
        trace.features[0, layer_input_dim(d, dh, layer) : layer_input_dim(d, dh, layer + 1)]
        for layer in range(1, params.depth + 1)
    )
    pre = tuple(z[0] for z in trace.pre_activations)
    return ActivationTrace(
        pre_activations=pre,
        activations=activations,
        patterns=tuple(z >= 0 for z in pre),
        score=float(trace.scores[0]),
    )


def risk_scores(
    params: NSOTreeParams, x: np.ndarray, mode: ActivationMode = "relu"
) -> np.ndarray:
    return forward_batch(params, x, mode).scores


def backward(
    params: NSOTreeParams,
    x: np.ndarray,
    upstream: np.ndarray,
    mode: ActivationMode = "softplus",
    trace: Optional[BatchTrace] = None,
) -> NSOTreeParams:
    """
    Gradients of sum_n upstream[n] * g(x_n) with respect to every parameter,
    returned in the shape of `params`.

    :param x: Covariate matrix the scores were computed on.
    :param upstream: d loss / d score per row.
    :param trace: Forward pass of `x`, recomputed when omitted.
    """

    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if trace is None:
        trace = forward_batch(params, x, mode)
    if upstream.shape[0] != trace.scores.shape[0]:
        raise ValueError("One upstream gradient per sample is required")
    if not np.all(np.isfinite(upstream)):
        raise ValueError("Upstream gradients must be finite")

    d, dh = params.input_dim, params.hidden_dim
    features = trace.features

    grad_head = features.T @ upstream
    grad_head_bias = float(upstream.sum())

    # d loss / d feature, filled in from the head down through the layers
    grad_features = np.outer(upstream, params.head_weights)

    grad_weights: List[np.ndarray] = [np.empty(0)] * params.depth
    grad_biases: List[np.ndarray] = [np.empty(0)] * params.depth
    for layer in range(params.depth, 0, -1):
        fan_in = layer_input_dim(d, dh, layer)
        z = trace.pre_activations[layer - 1]
        w = params.weights[layer - 1]

        grad_z = grad_features[:, fan_in : fan_in + dh] * activation_derivative(z, trace.mode)
        grad_weights[layer - 1] = grad_z.T @ features[:, :fan_in]
        grad_biases[layer - 1] = grad_z.sum(axis=0)
        grad_features[:, :fan_in] += grad_z @ w

    return NSOTreeParams(
        weights=tuple(grad_weights),
        biases=tuple(grad_biases),
        head_weights=grad_head,
        head_bias=grad_head_bias,
        input_dim=d,
        hidden_dim=dh,
    )


def prox_step(params: NSOTreeParams, lam: float) -> NSOTreeParams:
    """
    Soft-threshold every split weight, sign(w) max(|w| - lam, 0). Biases and
    the head are left alone.
    """

    if lam < 0:
        raise ValueError("Lambda must be nonnegative")
    if lam == 0:
        return params

    return dataclasses.replace(
        params, weights=tuple(soft_threshold(w, lam) for w in params.weights)
    )


def sparsity(params: NSOTreeParams) -> float:
    """
    Fraction of split weights that are exactly zero. A depth-0 model has no
    split weights and reports 0.
    """

    total = sum(w.size for w in params.weights)
    if total == 0:
        return 0.0

    zeros = sum(int(np.count_nonzero(w == 0)) for w in params.weights)
    return zeros / total

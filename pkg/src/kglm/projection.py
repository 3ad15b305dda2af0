"""Trainable map from entity-embedding space into the language model's token-embedding space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

VARIANTS = ("identity", "linear", "complex")
FINAL_ACTIVATIONS = ("none", "gelu")

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact erf-form GELU: x * Phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + erf(x / _SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """d/dx of the erf-form GELU: Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    phi = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * phi


@dataclass(frozen=True)
class ProjectionSpec:
    variant: str
    input_dim: int
    output_dim: int
    depth: int = 2
    final_activation: str = "none"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("dimensions must be positive")
        if self.variant == "identity" and self.input_dim != self.output_dim:
            raise ValueError("identity projection requires input_dim == output_dim")
        if self.variant == "complex" and self.depth < 1:
            raise ValueError("complex projection requires depth >= 1")
        if self.final_activation not in FINAL_ACTIVATIONS:
            raise ValueError(f"final_activation must be one of {FINAL_ACTIVATIONS}")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(out, in) shape per layer; hidden widths equal the output dimension."""
        if self.variant == "identity":
            return []
        if self.variant == "linear":
            return [(self.output_dim, self.input_dim)]
        dims = [(self.output_dim, self.input_dim)]
        dims.extend((self.output_dim, self.output_dim) for _ in range(self.depth - 1))
        return dims


@dataclass
class ProjectionParams:
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def copy(self) -> "ProjectionParams":
        return ProjectionParams(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )

    def n_layers(self) -> int:
        return len(self.weights)


def init_projection(spec: ProjectionSpec, seed: int = 0) -> ProjectionParams:
    """Glorot-uniform weights and zero biases; identity allocates nothing."""
    rng = np.random.default_rng(seed)
    params = ProjectionParams()
    for out_dim, in_dim in spec.layer_dims():
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        params.weights.append(rng.uniform(-limit, limit, size=(out_dim, in_dim)))
        params.biases.append(np.zeros(out_dim))
    return params


def _check_shapes(spec: ProjectionSpec, params: ProjectionParams, x: np.ndarray) -> None:
    if x.shape != (spec.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({spec.input_dim},)")
    expected = spec.layer_dims()
    if len(params.weights) != len(expected) or len(params.biases) != len(expected):
        raise ValueError(
            f"{spec.variant} projection expects {len(expected)} layers, "
            f"got {len(params.weights)}"
        )
    for k, (shape, w, b) in enumerate(zip(expected, params.weights, params.biases)):
        if w.shape != shape or b.shape != (shape[0],):
            raise ValueError(f"layer {k} shapes {w.shape}/{b.shape} do not match {shape}")


def _forward(spec: ProjectionSpec, params: ProjectionParams, x: np.ndarray):
    """Returns (output, per-layer (input, pre-activation) cache)."""
    cache = []
    h = x
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = w @ h + b
        cache.append((h, z))
        if spec.variant == "complex":
            h = gelu(z)
        else:
            h = z
    if spec.variant == "complex" and spec.final_activation == "gelu":
        cache.append((h, h))
        h = gelu(h)
    return h, cache


def project(spec: ProjectionSpec, params: ProjectionParams, x: np.ndarray) -> np.ndarray:
    """Map an entity vector into the text-embedding space."""
    x = np.asarray(x, dtype=np.float64)
    _check_shapes(spec, params, x)
    if spec.variant == "identity":
        return x.copy()
    out, _ = _forward(spec, params, x)
    return out


def project_gradients(
    spec: ProjectionSpec,
    params: ProjectionParams,
    x: np.ndarray,
    upstream: np.ndarray,
):
    """Exact reverse-mode gradients of upstream . project(x).

    Returns (weight_grads, bias_grads, input_grad); the lists are empty for the
    identity variant.
    """
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    _check_shapes(spec, params, x)
    if upstream.shape != (spec.output_dim,):
        raise ValueError(
            f"upstream has shape {upstream.shape}, expected ({spec.output_dim},)"
        )
    if spec.variant == "identity":
        return [], [], upstream.copy()

    _, cache = _forward(spec, params, x)
    g = upstream
    if spec.variant == "complex" and spec.final_activation == "gelu":
        _, z = cache.pop()
        g = g * gelu_grad(z)

    weight_grads: list[np.ndarray] = [np.empty(0)] * len(params.weights)
    bias_grads: list[np.ndarray] = [np.empty(0)] * len(params.biases)
    for k in range(len(params.weights) - 1, -1, -1):
        h_in, z = cache[k]
        if spec.variant == "complex":
            g = g * gelu_grad(z)
        weight_grads[k] = np.outer(g, h_in)
        bias_grads[k] = g.copy()
        g = params.weights[k].T @ g
    return weight_grads, bias_grads, g

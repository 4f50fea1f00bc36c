"""Minimal dense networks with hand-written backprop.

Float64 multilayer perceptrons: tanh hidden activations, linear output.
Gradients are computed analytically layer by layer; the test-suite checks
them against central finite differences, which is the reason everything
stays in double precision.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractViolationError, DivergenceError
from .validation import as_generator


class MLP:
    """Fully connected tanh network with a linear output layer."""

    def __init__(self, layer_sizes, rng=None):
        if len(layer_sizes) < 2:
            raise ContractViolationError(
                "MLP needs at least input and output sizes")
        if any(int(n) <= 0 for n in layer_sizes):
            raise ContractViolationError(
                f"layer sizes must be positive, got {layer_sizes}")
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        rng = as_generator(rng)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(
                rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    # -- forward / backward --------------------------------------------------
    def forward(self, x: np.ndarray):
        """Returns (output [batch, out], cache for backward)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.in_dim:
            raise ContractViolationError(
                f"input has {x.shape[1]} features, net expects {self.in_dim}")
        activations = [x]
        h = x
        for layer in range(self.n_layers - 1):
            z = h @ self.weights[layer].T + self.biases[layer]
            h = np.tanh(z)
            activations.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        if not np.all(np.isfinite(out)):
            raise DivergenceError("non-finite network output")
        return out, activations

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, activations, grad_out: np.ndarray):
        """Backprop a gradient wrt the output through the net.

        Returns (weight_grads, bias_grads, grad_input); the parameter
        gradients are summed over the batch (scale ``grad_out`` by 1/B
        beforehand for batch-mean losses).
        """
        grad = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
        weight_grads = [None] * self.n_layers
        bias_grads = [None] * self.n_layers
        for layer in range(self.n_layers - 1, -1, -1):
            h_prev = activations[layer]
            weight_grads[layer] = grad.T @ h_prev
            bias_grads[layer] = grad.sum(axis=0)
            grad = grad @ self.weights[layer]
            if layer > 0:
                grad = grad * (1.0 - activations[layer] ** 2)
        return weight_grads, bias_grads, grad

    # -- flat parameter vector -----------------------------------------------
    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def get_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ContractViolationError(
                f"expected flat vector of length {self.n_params}, "
                f"got shape {flat.shape}")
        offset = 0
        for layer in range(self.n_layers):
            w, b = self.weights[layer], self.biases[layer]
            self.weights[layer] = flat[offset:offset + w.size] \
                .reshape(w.shape).copy()
            offset += w.size
            self.biases[layer] = flat[offset:offset + b.size].copy()
            offset += b.size

    @staticmethod
    def flatten_grads(weight_grads, bias_grads) -> np.ndarray:
        parts = []
        for w, b in zip(weight_grads, bias_grads):
            parts.append(np.asarray(w).ravel())
            parts.append(np.asarray(b).ravel())
        return np.concatenate(parts)

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.layer_sizes = self.layer_sizes
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone


def soft_update(target: MLP, source: MLP, rho: float) -> None:
    """In-place Polyak averaging: target <- (1 - rho) * target + rho * source.

    A convex combination, so every parameter norm stays within the larger
    of the two input norms.
    """
    if target.layer_sizes != source.layer_sizes:
        raise ContractViolationError(
            "soft_update requires identical architectures, got "
            f"{target.layer_sizes} and {source.layer_sizes}")
    if not 0.0 <= rho <= 1.0:
        raise ContractViolationError(f"rho must lie in [0, 1], got {rho}")
    for layer in range(target.n_layers):
        target.weights[layer] *= (1.0 - rho)
        target.weights[layer] += rho * source.weights[layer]
        target.biases[layer] *= (1.0 - rho)
        target.biases[layer] += rho * source.biases[layer]

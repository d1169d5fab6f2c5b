"""
Dense MLP with ReLU hidden layers and a linear output layer.

Forward and reverse passes are written out by hand for this one
architecture. Inputs may carry any number of leading batch dimensions;
the last axis is the feature axis.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from sim_core.exceptions import ContractViolation


def _frozen(array):
    out = np.array(array, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MlpParams:
    """
    Layer weights (out x in) and biases (out). Arrays are read-only; updates
    build a new MlpParams, so a tape can detect that it belongs to other
    parameters.
    """
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def __post_init__(self):
        weights = tuple(_frozen(w) for w in self.weights)
        biases = tuple(_frozen(b) for b in self.biases)
        if not weights or len(weights) != len(biases):
            raise ContractViolation("MlpParams needs one bias per weight matrix and at least one layer")
        for k, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ContractViolation(f"Layer {k}: weight {w.shape} and bias {b.shape} do not match")
            if k and w.shape[1] != weights[k - 1].shape[0]:
                raise ContractViolation(
                    f"Layer {k} expects {w.shape[1]} inputs but layer {k - 1} emits {weights[k - 1].shape[0]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ContractViolation(f"Layer {k} has non-finite parameters")
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'biases', biases)

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def in_width(self):
        return self.weights[0].shape[1]

    @property
    def out_width(self):
        return self.weights[-1].shape[0]

    @property
    def sizes(self):
        return [self.in_width] + [w.shape[0] for w in self.weights]

    def blocks(self) -> Dict[str, np.ndarray]:
        """Named parameter blocks in fixed order: W0, b0, W1, b1, ..."""
        out = {}
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f'W{k}'] = w
            out[f'b{k}'] = b
        return out

    @classmethod
    def from_blocks(cls, blocks):
        n = sum(1 for name in blocks if name.startswith('W'))
        return cls(
            weights=tuple(blocks[f'W{k}'] for k in range(n)),
            biases=tuple(blocks[f'b{k}'] for k in range(n)),
        )

    def squared_norm(self):
        return float(sum(np.sum(w * w) + np.sum(b * b) for w, b in zip(self.weights, self.biases)))

    def n_parameters(self):
        return int(sum(w.size + b.size for w, b in zip(self.weights, self.biases)))

    def with_input_columns(self, extra):
        """Append ``extra`` zero input columns to the first layer."""
        first = np.hstack([self.weights[0], np.zeros((self.weights[0].shape[0], extra))])
        return MlpParams(weights=(first,) + self.weights[1:], biases=self.biases)


@dataclass(frozen=True, eq=False)
class MlpTape:
    """Activations cached by a forward pass."""
    params: MlpParams
    inputs: List[np.ndarray]        # input of each layer, (N, in_k)
    preactivations: List[np.ndarray]
    lead_shape: tuple


def init_mlp(sizes: Sequence[int], rng):
    """
    Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.

    Args:
        sizes: [in, hidden..., out]
        rng: numpy Generator
    """
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=tuple(weights), biases=tuple(biases))


def zero_mlp(sizes: Sequence[int]):
    return MlpParams(
        weights=tuple(np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])),
        biases=tuple(np.zeros(o) for o in sizes[1:]),
    )


def mlp_forward(params: MlpParams, x):
    """
    Evaluate the network.

    Returns:
        tuple: (output of shape (..., out_width), MlpTape)
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != params.in_width:
        raise ContractViolation(f"MLP expects {params.in_width} input features, got shape {x.shape}")
    lead_shape = x.shape[:-1]
    h = x.reshape(-1, params.in_width)

    inputs, preactivations = [], []
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w.T + b
        preactivations.append(z)
        h = np.maximum(z, 0.0) if k < last else z

    tape = MlpTape(params=params, inputs=inputs, preactivations=preactivations, lead_shape=lead_shape)
    return h.reshape(lead_shape + (params.out_width,)), tape


def mlp_backward(params: MlpParams, tape: MlpTape, grad_out):
    """
    Reverse pass.

    Args:
        params: the parameters used for the forward call
        tape: its tape
        grad_out: d loss / d output, same shape as the output

    Returns:
        tuple: (dict of block gradients keyed like ``params.blocks()``,
                gradient w.r.t. the input, same shape as the input)
    """
    if tape.params is not params:
        raise ContractViolation("Stale tape: it was recorded with different parameters")
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != tape.lead_shape + (params.out_width,):
        raise ContractViolation(
            f"Output gradient has shape {grad_out.shape}, expected {tape.lead_shape + (params.out_width,)}"
        )

    g = grad_out.reshape(-1, params.out_width)
    grads = {}
    last = params.n_layers - 1
    for k in range(last, -1, -1):
        if k < last:
            g = g * (tape.preactivations[k] > 0.0)
        grads[f'W{k}'] = g.T @ tape.inputs[k]
        grads[f'b{k}'] = g.sum(axis=0)
        g = g @ params.weights[k]

    ordered = {name: grads[name] for name in params.blocks()}
    return ordered, g.reshape(tape.lead_shape + (params.in_width,))


def kink_margin(tape: MlpTape):
    """Smallest |pre-activation| over the ReLU layers; inf for a linear net."""
    hidden = tape.preactivations[:-1]
    if not hidden:
        return math.inf
    return float(min(np.min(np.abs(z)) for z in hidden))


def activation_pattern(tape: MlpTape):
    """Packed on/off state of every ReLU unit; equal patterns mean the same linear piece."""
    hidden = tape.preactivations[:-1]
    if not hidden:
        return b''
    return b''.join(np.packbits(z > 0).tobytes() for z in hidden)

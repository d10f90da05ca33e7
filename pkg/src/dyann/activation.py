"""Scalar activations, output heads, losses, and output delta rules.

Everything here is a pure function of its arguments and safe to call
from any number of threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import NonTrainableHeadError, UnknownActivationError

NODE_ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh")
HEAD_ACTIVATIONS = ("identity", "sigmoid", "softmax", "max")
LOSSES = ("half_mse", "cross_entropy", "binary_cross_entropy")

# (activation, loss) pairs with a closed-form d(loss)/dz at the output.
TRAINABLE_PAIRS = frozenset({
    ("identity", "half_mse"),
    ("sigmoid", "half_mse"),
    ("sigmoid", "binary_cross_entropy"),
    ("softmax", "cross_entropy"),
})

# Probability clamp for binary cross entropy; keeps the loss finite.
PROB_CLAMP = 1e-12


def _sigmoid(z: float) -> float:
    # Branch keeps exp() away from overflow for large |z|.
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def act_value(kind: str, z: float) -> float:
    """Evaluate the activation `kind` at pre-activation z."""
    if kind == "linear":
        return z
    if kind == "relu":
        return z if z > 0.0 else 0.0
    if kind == "sigmoid":
        return _sigmoid(z)
    if kind == "tanh":
        return math.tanh(z)
    raise UnknownActivationError(f"unknown activation {kind!r}")


def act_derivative(kind: str, z: float) -> float:
    """Evaluate the derivative of `kind` at z; relu'(0) is taken as 0."""
    if kind == "linear":
        return 1.0
    if kind == "relu":
        return 1.0 if z > 0.0 else 0.0
    if kind == "sigmoid":
        s = _sigmoid(z)
        return s * (1.0 - s)
    if kind == "tanh":
        t = math.tanh(z)
        return 1.0 - t * t
    raise UnknownActivationError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class OutputHead:
    """Paired output-layer activation and loss.

    Only the pairs in TRAINABLE_PAIRS can be trained; a `max` head is
    forward-only and pairs with half_mse for evaluation purposes.
    """

    activation: str
    loss: str

    def __post_init__(self) -> None:
        if self.activation not in HEAD_ACTIVATIONS:
            raise UnknownActivationError(
                f"unknown head activation {self.activation!r}")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.activation == "max":
            if self.loss != "half_mse":
                raise ValueError("a max head pairs only with half_mse")
        elif not self.trainable:
            raise ValueError(
                f"unsupported head pair ({self.activation!r}, {self.loss!r})")

    @property
    def trainable(self) -> bool:
        return (self.activation, self.loss) in TRAINABLE_PAIRS


def apply_output_head(head: OutputHead, z: Sequence[float]) -> list[float]:
    """Turn the output layer's pre-activations into output activations.

    identity and sigmoid act elementwise; softmax acts jointly with
    max-subtraction for stability; max puts 1.0 at the lowest-index
    argmax and 0.0 elsewhere.
    """
    if len(z) == 0:
        raise ValueError("output head applied to an empty vector")
    if head.activation == "identity":
        return [float(v) for v in z]
    if head.activation == "sigmoid":
        return [_sigmoid(v) for v in z]
    if head.activation == "softmax":
        m = z[0]
        for v in z:
            if v > m:
                m = v
        exps = [math.exp(v - m) for v in z]
        total = 0.0
        for e in exps:
            total += e
        return [e / total for e in exps]
    # max: strict > keeps the lowest index on ties
    k = 0
    m = z[0]
    for j, v in enumerate(z):
        if v > m:
            m = v
            k = j
    return [1.0 if j == k else 0.0 for j in range(len(z))]


def loss_value(head: OutputHead, y: Sequence[float], t: Sequence[float]) -> float:
    """Loss of outputs y against targets t under the head's loss."""
    if len(y) != len(t):
        raise ValueError(f"length mismatch: {len(y)} outputs vs {len(t)} targets")
    if head.loss == "half_mse":
        acc = 0.0
        for a, b in zip(y, t):
            d = a - b
            acc += d * d
        return 0.5 * acc
    if head.loss == "cross_entropy":
        acc = 0.0
        for a, b in zip(y, t):
            if b != 0.0:
                acc += b * math.log(a)
        return -acc
    # binary cross entropy, with outputs clamped away from 0 and 1
    acc = 0.0
    for a, b in zip(y, t):
        if a < PROB_CLAMP:
            a = PROB_CLAMP
        elif a > 1.0 - PROB_CLAMP:
            a = 1.0 - PROB_CLAMP
        acc += b * math.log(a) + (1.0 - b) * math.log(1.0 - a)
    return -acc


def output_delta(head: OutputHead, y: Sequence[float], t: Sequence[float],
                 z: Sequence[float]) -> list[float]:
    """Closed-form d(loss)/dz at each output node.

    y, t and z must have the output layer's length; z is the stored
    pre-activation vector (pastsum + bias per node). Raises for heads
    without a delta rule.
    """
    if not head.trainable:
        raise NonTrainableHeadError(
            f"head ({head.activation!r}, {head.loss!r}) cannot be trained")
    if not (len(y) == len(t) == len(z)):
        raise ValueError("length mismatch between outputs, targets and z")
    if head.activation == "sigmoid" and head.loss == "half_mse":
        return [(a - b) * a * (1.0 - a) for a, b in zip(y, t)]
    # identity+half_mse, sigmoid+bce and softmax+ce all reduce to y - t
    return [a - b for a, b in zip(y, t)]

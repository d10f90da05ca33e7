"""Forward pass, backpropagation, and the per-sample SGD training loop.

The passes here walk the object graph layer by layer, node list by node
list, edge list by edge list. `train_sgd` can hand its hot per-sample
loop to the compiled kernel in `_speedups` when that extension is built;
both backends produce bit-identical parameters and loss histories. All
of these routines mutate node scratch state and therefore need exclusive
access to the network.
"""
from __future__ import annotations

import os
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .activation import (
    act_derivative,
    act_value,
    apply_output_head,
    loss_value,
    output_delta,
)
from .errors import NonTrainableHeadError
from .topology import Network, Node

try:
    from . import _speedups
except ImportError:  # extension not built; pure Python fallback
    _speedups = None


def compiled_available() -> bool:
    """True when the compiled SGD kernel was importable."""
    return _speedups is not None


def resolve_backend(backend: Optional[str] = None) -> str:
    """Pick 'python' or 'compiled'.

    `backend` overrides the DYANN_BACKEND environment variable; 'auto'
    (the default) selects the compiled kernel whenever it is available.
    """
    choice = backend or os.environ.get("DYANN_BACKEND", "auto")
    if choice == "auto":
        return "compiled" if _speedups is not None else "python"
    if choice == "compiled":
        if _speedups is None:
            raise RuntimeError("compiled backend requested but the "
                               "dyann._speedups extension is not built")
        return choice
    if choice != "python":
        raise ValueError(f"unknown backend {choice!r}")
    return choice


@dataclass
class Sample:
    """One training example: input vector and matching target vector."""

    input: Sequence[float]
    target: Sequence[float]


@dataclass
class TrainConfig:
    """Settings for train_sgd.

    `stop_loss`, when set, stops training early once an epoch's mean
    loss falls below it. eta 0 is allowed and performs zero-length
    steps.
    """

    eta: float
    epochs: int
    seed: int = 0
    shuffle: bool = True
    stop_loss: Optional[float] = None

    def __post_init__(self) -> None:
        if self.eta < 0.0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


def fire_node(n: Node) -> None:
    """Propagate n.actvalue along every outgoing edge into targets' sums."""
    a = n.actvalue
    for e in n.edges:
        e.target.sum += a * e.weight


def feed_forward(net: Network, input: Sequence[float]) -> list[float]:
    """Run one forward pass and return output activations in node order.

    Input activations are assigned and fired; each internal node then
    computes actvalue = g(sum + bias), records pastsum, fires, and
    resets its sum; finally the output head maps the output layer's
    pre-activations to output values. Output sums are reset too, so a
    second pass starts from clean state.
    """
    input_nodes = net.layers[0].nodes
    if len(input) != len(input_nodes):
        raise ValueError(f"input length {len(input)} does not match "
                         f"input layer size {len(input_nodes)}")
    for node, value in zip(input_nodes, input):
        node.actvalue = value
    for node in input_nodes:
        fire_node(node)

    for layer in net.layers[1:-1]:
        for node in layer.nodes:
            node.actvalue = act_value(node.actfunction, node.sum + node.bias)
            node.pastsum = node.sum
            fire_node(node)
            node.sum = 0.0

    z = []
    for node in net.layers[-1].nodes:
        node.pastsum = node.sum
        node.sum = 0.0
        z.append(node.pastsum + node.bias)
    out = apply_output_head(net.output_head, z)
    for node, value in zip(net.layers[-1].nodes, out):
        node.actvalue = value
    return out


def update_node(n: Node, eta: float) -> None:
    """Backward step for one internal node.

    Walks the edge list once, accumulating the delta sum from target
    deltas using each weight's pre-update value and applying the weight
    update in the same iteration; then finishes the delta with the
    activation derivative at the stored pre-activation and updates the
    bias.
    """
    d = 0.0
    a = n.actvalue
    for e in n.edges:
        td = e.target.delta
        d += td * e.weight
        e.weight -= eta * td * a
    n.delta = d * act_derivative(n.actfunction, n.pastsum + n.bias)
    n.bias -= eta * n.delta


def update_input_node(n: Node, eta: float) -> None:
    """Backward step for an input node: weight updates only."""
    a = n.actvalue
    for e in n.edges:
        e.weight -= eta * e.target.delta * a


def back_propagate(net: Network, target: Sequence[float], eta: float) -> float:
    """One SGD step against `target`; returns the pre-step loss.

    Requires a completed feed_forward for the corresponding input.
    Output deltas and biases go first, then internal layers are walked
    backwards, then input-layer weights.
    """
    head = net.output_head
    if not head.trainable:
        raise NonTrainableHeadError(
            f"head ({head.activation!r}, {head.loss!r}) cannot be trained")
    out_nodes = net.layers[-1].nodes
    if len(target) != len(out_nodes):
        raise ValueError(f"target length {len(target)} does not match "
                         f"output layer size {len(out_nodes)}")

    y = [n.actvalue for n in out_nodes]
    z = [n.pastsum + n.bias for n in out_nodes]
    loss = loss_value(head, y, target)
    deltas = output_delta(head, y, target, z)
    for node, d in zip(out_nodes, deltas):
        node.delta = d
        node.bias -= eta * d

    for layer in reversed(net.layers[1:-1]):
        for node in layer.nodes:
            update_node(node, eta)
    for node in net.layers[0].nodes:
        update_input_node(node, eta)
    return loss


def fisher_yates(items: list, rng: random.Random) -> None:
    """In-place Fisher-Yates shuffle driven by the given generator."""
    for i in range(len(items) - 1, 0, -1):
        j = rng.randrange(i + 1)
        items[i], items[j] = items[j], items[i]


def _check_dimensions(net: Network, data: Sequence[Sample]) -> None:
    n_in = net.input_size
    n_out = net.output_size
    for i, s in enumerate(data):
        if len(s.input) != n_in or len(s.target) != n_out:
            raise ValueError(
                f"sample {i} has shape ({len(s.input)}, {len(s.target)}), "
                f"expected ({n_in}, {n_out})")


def train_sgd(net: Network, data: Sequence[Sample], cfg: TrainConfig,
              backend: Optional[str] = None) -> list[float]:
    """Per-sample SGD over the dataset; returns mean loss per epoch.

    Each epoch optionally reshuffles the sample order (Fisher-Yates with
    the seeded generator), then runs feed_forward + back_propagate per
    sample. The recorded means are of pre-step losses. Training stops
    after cfg.epochs epochs, or earlier when cfg.stop_loss is reached.
    """
    if not data:
        raise ValueError("empty dataset")
    if not net.output_head.trainable:
        raise NonTrainableHeadError(
            f"head ({net.output_head.activation!r}, "
            f"{net.output_head.loss!r}) cannot be trained")
    _check_dimensions(net, data)

    mode = resolve_backend(backend)
    rng = random.Random(cfg.seed)
    order = list(range(len(data)))

    if mode == "compiled":
        from ._plan import run_compiled_sgd
        return run_compiled_sgd(net, data, cfg, rng, order)

    history = []
    for _ in range(cfg.epochs):
        if cfg.shuffle:
            fisher_yates(order, rng)
        total = 0.0
        for idx in order:
            sample = data[idx]
            feed_forward(net, sample.input)
            total += back_propagate(net, sample.target, cfg.eta)
        mean = total / len(data)
        history.append(mean)
        if cfg.stop_loss is not None and mean < cfg.stop_loss:
            break
    return history


def _argmax(values: Sequence[float]) -> int:
    best = 0
    for j, v in enumerate(values):
        if v > values[best]:
            best = j
    return best


@dataclass
class EvalResult:
    """Mean loss over a dataset, plus argmax accuracy for classifier heads."""

    mean_loss: float
    accuracy: Optional[float] = None


def evaluate(net: Network, data: Sequence[Sample]) -> EvalResult:
    """Mean loss (and accuracy for softmax/max heads) over the dataset.

    Parameters are untouched; only the transient forward-pass scratch
    state is exercised, so repeated calls give identical results.
    """
    if not data:
        raise ValueError("empty dataset")
    _check_dimensions(net, data)
    head = net.output_head
    classify = head.activation in ("softmax", "max")
    total = 0.0
    hits = 0
    for sample in data:
        y = feed_forward(net, sample.input)
        total += loss_value(head, y, sample.target)
        if classify and _argmax(y) == _argmax(sample.target):
            hits += 1
    accuracy = hits / len(data) if classify else None
    return EvalResult(total / len(data), accuracy)

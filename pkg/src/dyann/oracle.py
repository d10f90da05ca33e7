"""Verification-only reference implementations.

Everything here recomputes network behaviour from an address-keyed
snapshot with its own storage, its own evaluation order (fsum over
incoming edges instead of running sums) and its own scalar formulas, so
agreement with the engine is evidence rather than shared code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Set, Tuple

from .engine import Sample
from .errors import NonTrainableHeadError
from .topology import Network, NodeAddress

WeightKey = Tuple[NodeAddress, NodeAddress]

# Same clamp the losses use; kept literal here on purpose.
_CLAMP = 1e-12


class DenseView:
    """Address-keyed copy of a network's topology and parameters.

    Weight and bias tables are the mutable parameter store; `incoming`
    is the fixed (source list per target) index built at snapshot time.
    """

    def __init__(self, layer_sizes: List[int],
                 biases: Dict[NodeAddress, float],
                 activations: Dict[NodeAddress, str],
                 weights: Dict[WeightKey, float],
                 head_activation: str, head_loss: str):
        self.layer_sizes = layer_sizes
        self.biases = biases
        self.activations = activations
        self.weights = weights
        self.head_activation = head_activation
        self.head_loss = head_loss
        self.incoming: Dict[NodeAddress, List[NodeAddress]] = {
            addr: [] for addr in biases
        }
        for (src, tgt) in weights:
            self.incoming[tgt].append(src)

    def addresses(self):
        for li, size in enumerate(self.layer_sizes):
            for ni in range(size):
                yield NodeAddress(li, ni)


def snapshot(net: Network) -> DenseView:
    """Copy all parameters and topology into an independent view.

    Runs assign_indices first; later mutations of the network do not
    affect the view.
    """
    net.assign_indices()
    layer_sizes = net.layer_sizes()
    biases: Dict[NodeAddress, float] = {}
    activations: Dict[NodeAddress, str] = {}
    weights: Dict[WeightKey, float] = {}
    for layer in net.layers:
        for node in layer.nodes:
            addr = NodeAddress(node.layerindex, node.nodeindex)
            biases[addr] = node.bias
            activations[addr] = node.actfunction
            for edge in node.edges:
                tgt = NodeAddress(edge.target.layerindex,
                                  edge.target.nodeindex)
                weights[(addr, tgt)] = edge.weight
    return DenseView(layer_sizes, biases, activations, weights,
                     net.output_head.activation, net.output_head.loss)


def _scalar_act(kind: str, z: float) -> float:
    if kind == "linear":
        return z
    if kind == "relu":
        return max(0.0, z)
    if kind == "sigmoid":
        # tanh identity: stable for all z and independent of the
        # engine's branch-on-sign formulation
        return 0.5 * (1.0 + math.tanh(0.5 * z))
    if kind == "tanh":
        return math.tanh(z)
    raise ValueError(f"unknown activation {kind!r}")


def _head_values(kind: str, zs: List[float]) -> List[float]:
    if kind == "identity":
        return list(zs)
    if kind == "sigmoid":
        return [0.5 * (1.0 + math.tanh(0.5 * z)) for z in zs]
    if kind == "softmax":
        m = max(zs)
        exps = [math.exp(z - m) for z in zs]
        total = math.fsum(exps)
        return [e / total for e in exps]
    if kind == "max":
        k = zs.index(max(zs))
        return [1.0 if j == k else 0.0 for j in range(len(zs))]
    raise ValueError(f"unknown head activation {kind!r}")


def _loss(kind: str, y: Sequence[float], t: Sequence[float]) -> float:
    if kind == "half_mse":
        return 0.5 * math.fsum((a - b) ** 2 for a, b in zip(y, t))
    if kind == "cross_entropy":
        return -math.fsum(b * math.log(a) for a, b in zip(y, t) if b != 0.0)
    if kind == "binary_cross_entropy":
        terms = []
        for a, b in zip(y, t):
            a = min(max(a, _CLAMP), 1.0 - _CLAMP)
            terms.append(b * math.log(a) + (1.0 - b) * math.log(1.0 - a))
        return -math.fsum(terms)
    raise ValueError(f"unknown loss {kind!r}")


def _forward_trace(view: DenseView,
                   input: Sequence[float]) -> Tuple[List[float],
                                                    Dict[NodeAddress, float]]:
    """Dense forward pass; returns (outputs, pre-activation per node)."""
    n_layers = len(view.layer_sizes)
    if len(input) != view.layer_sizes[0]:
        raise ValueError(f"input length {len(input)} does not match "
                         f"input layer size {view.layer_sizes[0]}")
    y: Dict[NodeAddress, float] = {}
    z_by_addr: Dict[NodeAddress, float] = {}
    for ni, v in enumerate(input):
        y[NodeAddress(0, ni)] = float(v)

    for li in range(1, n_layers - 1):
        for ni in range(view.layer_sizes[li]):
            addr = NodeAddress(li, ni)
            z = math.fsum(view.weights[(src, addr)] * y[src]
                          for src in view.incoming[addr]) + view.biases[addr]
            z_by_addr[addr] = z
            y[addr] = _scalar_act(view.activations[addr], z)

    zs = []
    for ni in range(view.layer_sizes[-1]):
        addr = NodeAddress(n_layers - 1, ni)
        z = math.fsum(view.weights[(src, addr)] * y[src]
                      for src in view.incoming[addr]) + view.biases[addr]
        z_by_addr[addr] = z
        zs.append(z)
    return _head_values(view.head_activation, zs), z_by_addr


def oracle_forward(view: DenseView, input: Sequence[float]) -> List[float]:
    """Dense, topologically evaluated forward pass over the view."""
    out, _ = _forward_trace(view, input)
    return out


def _loss_at(view: DenseView, sample: Sample) -> float:
    out, _ = _forward_trace(view, sample.input)
    return _loss(view.head_loss, out, sample.target)


@dataclass
class GradientTable:
    """Central-difference loss gradients, keyed like the view's tables."""

    weights: Dict[WeightKey, float]
    biases: Dict[NodeAddress, float]


def _trainable_bias_addrs(view: DenseView) -> List[NodeAddress]:
    # Input biases are pinned at 0 and are not parameters.
    return [addr for addr in view.addresses() if addr.layerindex > 0]


def numeric_gradient(view: DenseView, sample: Sample,
                     h: float = 1e-6) -> GradientTable:
    """Central finite differences of the loss for every weight and bias.

    Uses a relative step h*max(1, |p|) per parameter; the view is
    restored exactly afterwards.
    """
    if h <= 0.0:
        raise ValueError(f"h must be > 0, got {h}")
    if (view.head_activation, view.head_loss) == ("max", "half_mse"):
        raise NonTrainableHeadError("max head has no gradient")

    def central(table, key, p):
        step = h * max(1.0, abs(p))
        table[key] = p + step
        lp = _loss_at(view, sample)
        table[key] = p - step
        lm = _loss_at(view, sample)
        table[key] = p
        return (lp - lm) / (2.0 * step)

    weights = {key: central(view.weights, key, p)
               for key, p in view.weights.items()}
    biases = {addr: central(view.biases, addr, view.biases[addr])
              for addr in _trainable_bias_addrs(view)}
    return GradientTable(weights, biases)


@dataclass
class ParamSets:
    """Subsets of parameters, keyed like GradientTable."""

    weights: Set[WeightKey]
    biases: Set[NodeAddress]


def kink_parameters(view: DenseView, sample: Sample,
                    h: float = 1e-6) -> ParamSets:
    """Parameters whose central-difference step crosses a relu kink.

    A parameter is flagged when any relu node's pre-activation changes
    sign between the +step and -step evaluations; finite differences are
    meaningless for those.
    """
    relu_addrs = [addr for addr, kind in view.activations.items()
                  if kind == "relu"]
    result = ParamSets(set(), set())
    if not relu_addrs:
        return result

    def crosses(table, key, p):
        step = h * max(1.0, abs(p))
        table[key] = p + step
        _, z_plus = _forward_trace(view, sample.input)
        table[key] = p - step
        _, z_minus = _forward_trace(view, sample.input)
        table[key] = p
        return any((z_plus[a] > 0.0) != (z_minus[a] > 0.0)
                   for a in relu_addrs)

    for key, p in view.weights.items():
        if crosses(view.weights, key, p):
            result.weights.add(key)
    for addr in _trainable_bias_addrs(view):
        if crosses(view.biases, addr, view.biases[addr]):
            result.biases.add(addr)
    return result

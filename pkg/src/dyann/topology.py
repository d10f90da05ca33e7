"""Network data model and structural surgery.

A Network is a layered graph: an ordered list of layers, each an ordered
list of nodes, each node owning an ordered list of outgoing edges. Edges
only point forward (to strictly later layers) and at most one edge
connects any ordered node pair. Networks are single-writer objects: all
surgery and all engine passes need exclusive access; no locking is done
here.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Tuple

from .activation import NODE_ACTIVATIONS, OutputHead
from .errors import (
    DuplicateEdgeError,
    InvariantViolationError,
    NonForwardEdgeError,
    UnknownActivationError,
    UnknownNodeError,
)


class NodeAddress(NamedTuple):
    """Position of a node: layer order first, list order within the layer."""

    layerindex: int
    nodeindex: int


class Edge:
    """Weighted connection from its owning node to a node in a later layer."""

    __slots__ = ("weight", "target")

    def __init__(self, weight: float, target: "Node"):
        self.weight = weight
        self.target = target


class Node:
    """One unit: bias, activation kind, scratch state and outgoing edges.

    `sum` is the running total of inputs received during a forward pass;
    `pastsum` keeps that total after `sum` is reset so derivatives can be
    evaluated at the same pre-activation later. `layerindex`/`nodeindex`
    are only meaningful after assign_indices and go stale under surgery.
    """

    __slots__ = ("bias", "sum", "pastsum", "actvalue", "delta", "actfunction",
                 "markedfordeletion", "edges", "layerindex", "nodeindex",
                 "_targets")

    def __init__(self, bias: float = 0.0, actfunction: str = "linear"):
        self.bias = bias
        self.sum = 0.0
        self.pastsum = 0.0
        self.actvalue = 0.0
        self.delta = 0.0
        self.actfunction = actfunction
        self.markedfordeletion = False
        self.edges: list[Edge] = []
        self.layerindex = 0
        self.nodeindex = 0
        # Mirrors the edge list's targets for O(1) duplicate checks.
        self._targets: set["Node"] = set()


class Layer:
    """An ordered list of nodes; new nodes are inserted at the head."""

    __slots__ = ("nodes",)

    def __init__(self) -> None:
        self.nodes: list[Node] = []


@dataclass
class SweepReport:
    """Counts of what a deletion sweep removed."""

    edges_removed: int
    nodes_removed: int
    layers_removed: int


class Network:
    """Layered graph of nodes and forward edges plus an output head."""

    def __init__(self, input_size: int, output_size: int, head: OutputHead):
        if input_size < 1:
            raise ValueError(f"input_size must be >= 1, got {input_size}")
        if output_size < 1:
            raise ValueError(f"output_size must be >= 1, got {output_size}")
        input_layer = Layer()
        input_layer.nodes = [Node(0.0, "linear") for _ in range(input_size)]
        output_layer = Layer()
        output_layer.nodes = [Node(0.0, head.activation)
                              for _ in range(output_size)]
        self.layers: list[Layer] = [input_layer, output_layer]
        self.output_head = head

    # ------------------------------------------------------------------
    # lookups

    @property
    def input_layer(self) -> Layer:
        return self.layers[0]

    @property
    def output_layer(self) -> Layer:
        return self.layers[-1]

    @property
    def input_size(self) -> int:
        return len(self.layers[0].nodes)

    @property
    def output_size(self) -> int:
        return len(self.layers[-1].nodes)

    def layer_sizes(self) -> list[int]:
        return [len(layer.nodes) for layer in self.layers]

    def node_at(self, addr: Tuple[int, int]) -> Node:
        """Node at a positional (layerindex, nodeindex) address."""
        li, ni = addr
        if not 0 <= li < len(self.layers):
            raise UnknownNodeError(f"no layer {li}")
        nodes = self.layers[li].nodes
        if not 0 <= ni < len(nodes):
            raise UnknownNodeError(f"no node {(li, ni)}")
        return nodes[ni]

    def iter_nodes(self) -> Iterator[Node]:
        for layer in self.layers:
            yield from layer.nodes

    def iter_edges(self) -> Iterator[Tuple[Node, Edge]]:
        for node in self.iter_nodes():
            for edge in node.edges:
                yield node, edge

    def edge_count(self) -> int:
        return sum(len(node.edges) for node in self.iter_nodes())

    # ------------------------------------------------------------------
    # surgery

    def insert_layer(self, position: int) -> Layer:
        """Insert an empty layer so that it ends up at `position`.

        The input layer must stay first and the output layer last, so
        1 <= position <= layer count - 1.
        """
        if not 1 <= position <= len(self.layers) - 1:
            raise ValueError(
                f"layer position must be in [1, {len(self.layers) - 1}], "
                f"got {position}")
        layer = Layer()
        self.layers.insert(position, layer)
        return layer

    def insert_node(self, layerindex: int, bias: float = 0.0,
                    act: str = "linear") -> NodeAddress:
        """Insert a node at the head of a layer's node list.

        Input-layer nodes must keep bias 0 and a linear activation;
        output-layer nodes must use the head's activation.
        """
        if not 0 <= layerindex < len(self.layers):
            raise UnknownNodeError(f"no layer {layerindex}")
        if layerindex == 0 and (bias != 0.0 or act != "linear"):
            raise ValueError("input nodes must have bias 0 and be linear")
        if layerindex == len(self.layers) - 1:
            if act != self.output_head.activation:
                raise ValueError(
                    f"output nodes must use the head activation "
                    f"{self.output_head.activation!r}")
        elif act not in NODE_ACTIVATIONS:
            raise UnknownActivationError(f"unknown activation {act!r}")
        node = Node(bias, act)
        self.layers[layerindex].nodes.insert(0, node)
        return NodeAddress(layerindex, 0)

    def add_edge(self, source: Tuple[int, int], target: Tuple[int, int],
                 weight: float) -> Edge:
        """Connect source to target with the given weight.

        The target must lie in a strictly later layer and the pair must
        not be connected yet.
        """
        src = self.node_at(source)
        tgt = self.node_at(target)
        if target[0] <= source[0]:
            raise NonForwardEdgeError(
                f"edge {tuple(source)} -> {tuple(target)} does not point to "
                f"a later layer")
        if tgt in src._targets:
            raise DuplicateEdgeError(
                f"edge {tuple(source)} -> {tuple(target)} already exists")
        edge = Edge(weight, tgt)
        src.edges.append(edge)
        src._targets.add(tgt)
        return edge

    def mark_for_deletion(self, addr: Tuple[int, int]) -> None:
        """Flag a node for the next sweep; input/output nodes are protected."""
        li = addr[0]
        node = self.node_at(addr)
        if li == 0 or li == len(self.layers) - 1:
            raise ValueError("input and output nodes cannot be marked "
                             "for deletion")
        node.markedfordeletion = True

    def sweep_deletions(self) -> SweepReport:
        """Remove everything currently marked, in three phases.

        First a single pass drops every edge whose target is marked,
        then marked nodes (with their outgoing edges) are removed, and
        finally internal layers left empty are removed. Input and output
        layers always survive.
        """
        edges_removed = 0
        for node in self.iter_nodes():
            kept = [e for e in node.edges if not e.target.markedfordeletion]
            dropped = len(node.edges) - len(kept)
            if dropped:
                for e in node.edges:
                    if e.target.markedfordeletion:
                        node._targets.discard(e.target)
                node.edges = kept
                edges_removed += dropped

        nodes_removed = 0
        for layer in self.layers:
            marked = [n for n in layer.nodes if n.markedfordeletion]
            if marked:
                for n in marked:
                    edges_removed += len(n.edges)
                    nodes_removed += 1
                layer.nodes = [n for n in layer.nodes
                               if not n.markedfordeletion]

        survivors = [self.layers[0]]
        survivors.extend(L for L in self.layers[1:-1] if L.nodes)
        survivors.append(self.layers[-1])
        layers_removed = len(self.layers) - len(survivors)
        self.layers = survivors
        return SweepReport(edges_removed, nodes_removed, layers_removed)

    def prune_edges(self, threshold: float) -> int:
        """Remove every edge with |weight| < threshold; returns the count.

        The inequality is strict, so threshold 0 removes nothing.
        """
        if threshold < 0.0:
            raise ValueError(f"threshold must be >= 0, got {threshold}")
        removed = 0
        for node in self.iter_nodes():
            kept = [e for e in node.edges if not abs(e.weight) < threshold]
            dropped = len(node.edges) - len(kept)
            if dropped:
                for e in node.edges:
                    if abs(e.weight) < threshold:
                        node._targets.discard(e.target)
                node.edges = kept
                removed += dropped
        return removed

    def assign_indices(self) -> None:
        """Refresh every node's (layerindex, nodeindex) to its position."""
        for li, layer in enumerate(self.layers):
            for ni, node in enumerate(layer.nodes):
                node.layerindex = li
                node.nodeindex = ni


def new_network(input_size: int, output_size: int, head: OutputHead) -> Network:
    """Create a 2-layer network with the given node counts and no edges."""
    return Network(input_size, output_size, head)


def check_invariants(net: Network) -> None:
    """Raise InvariantViolationError if any structural invariant fails.

    Checked: layer arity, input-node constraints, forward-only edges,
    single edges per pair, liveness of edge targets, and consistency of
    the duplicate-tracking sets. Empty internal layers are tolerated
    (they appear legitimately after insert_layer and before wiring).
    """
    if len(net.layers) < 2:
        raise InvariantViolationError("fewer than 2 layers")
    if not net.layers[0].nodes:
        raise InvariantViolationError("empty input layer")
    if not net.layers[-1].nodes:
        raise InvariantViolationError("empty output layer")

    layer_of = {}
    for li, layer in enumerate(net.layers):
        for node in layer.nodes:
            layer_of[id(node)] = li

    last = len(net.layers) - 1
    for li, layer in enumerate(net.layers):
        for node in layer.nodes:
            if li == 0:
                if node.bias != 0.0 or node.actfunction != "linear":
                    raise InvariantViolationError(
                        "input node with nonzero bias or non-linear "
                        "activation")
                if node.markedfordeletion:
                    raise InvariantViolationError("marked input node")
            elif li == last:
                if node.actfunction != net.output_head.activation:
                    raise InvariantViolationError(
                        "output node activation disagrees with the head")
                if node.markedfordeletion:
                    raise InvariantViolationError("marked output node")
            elif node.actfunction not in NODE_ACTIVATIONS:
                raise InvariantViolationError(
                    f"unknown activation {node.actfunction!r}")

            seen = set()
            for edge in node.edges:
                tli = layer_of.get(id(edge.target))
                if tli is None:
                    raise InvariantViolationError(
                        "edge targets a node not in the network")
                if tli <= li:
                    raise InvariantViolationError(
                        f"edge from layer {li} to layer {tli} is not forward")
                if id(edge.target) in seen:
                    raise InvariantViolationError("duplicate edge")
                seen.add(id(edge.target))
            if {id(t) for t in node._targets} != seen:
                raise InvariantViolationError(
                    "duplicate-tracking set out of sync with the edge list")


def glorot_uniform(fan_in: int, fan_out: int, rng: random.Random) -> float:
    """Draw one weight uniformly from (-r, r) with r = sqrt(6/(fan_in+fan_out))."""
    r = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r)


def wire_layers(net: Network, from_layer: int, to_layer: int, density: float,
                rng: random.Random) -> int:
    """Add edges between two layers' node pairs with the given probability.

    Each ordered pair is included with probability `density` and gets a
    seeded Glorot-uniform weight; already-wired pairs raise. Returns the
    number of edges added.
    """
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {density}")
    if to_layer <= from_layer:
        raise NonForwardEdgeError(
            f"wiring {from_layer} -> {to_layer} is not forward")
    fan_in = len(net.layers[from_layer].nodes)
    fan_out = len(net.layers[to_layer].nodes)
    added = 0
    for ni in range(fan_in):
        for nj in range(fan_out):
            if rng.random() < density:
                weight = glorot_uniform(fan_in, fan_out, rng)
                net.add_edge(NodeAddress(from_layer, ni),
                             NodeAddress(to_layer, nj), weight)
                added += 1
    return added

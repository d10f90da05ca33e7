"""Index-based save/recreate protocol and its canonical text encoding.

A network document lists nodes sorted lexicographically by
(layerindex, nodeindex), each with its attributes and its edges sorted
the same way by target address. The text form is JSON with a fixed key
order and shortest round-trip float rendering, so two saves of the same
network are byte-identical. Readers are strict: unsorted or otherwise
non-canonical documents are rejected, never repaired.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Tuple

from .activation import HEAD_ACTIVATIONS, LOSSES, NODE_ACTIVATIONS, OutputHead
from .errors import (
    BadVersionError,
    DanglingTargetError,
    DocumentError,
    NonForwardEdgeError,
    UnknownActivationError,
    UnsortedDocumentError,
)
from .topology import Edge, Network, Node

FORMAT_VERSION = 1
FILE_SUFFIX = ".dyann.json"

EdgeRecord = Tuple[int, int, float]  # (target layerindex, target nodeindex, weight)


@dataclass
class NodeRecord:
    layerindex: int
    nodeindex: int
    bias: float
    actvalue: float
    actfunction: str
    edges: List[EdgeRecord]


@dataclass
class NetworkDocument:
    format_version: int
    head_activation: str
    head_loss: str
    layer_sizes: List[int]
    nodes: List[NodeRecord]


def save(net: Network) -> NetworkDocument:
    """Extract a canonical document from a network.

    First pass assigns indices; second pass transcribes each node with
    its edges sorted by target address. actvalue is included as
    snapshot state; sum/pastsum/delta are transient and are not saved.
    """
    net.assign_indices()
    records = []
    for layer in net.layers:
        for node in layer.nodes:
            edges = sorted(
                ((e.target.layerindex, e.target.nodeindex, e.weight)
                 for e in node.edges),
                key=lambda r: (r[0], r[1]))
            records.append(NodeRecord(node.layerindex, node.nodeindex,
                                      node.bias, node.actvalue,
                                      node.actfunction, edges))
    return NetworkDocument(FORMAT_VERSION, net.output_head.activation,
                           net.output_head.loss, net.layer_sizes(), records)


def _validate(doc: NetworkDocument) -> None:
    if doc.format_version != FORMAT_VERSION:
        raise BadVersionError(
            f"format_version {doc.format_version} is not supported "
            f"(this reader handles {FORMAT_VERSION})")
    if doc.head_activation not in HEAD_ACTIVATIONS:
        raise UnknownActivationError(
            f"unknown head activation {doc.head_activation!r}")
    if doc.head_loss not in LOSSES:
        raise DocumentError(f"unknown loss {doc.head_loss!r}")

    sizes = doc.layer_sizes
    if len(sizes) < 2:
        raise DocumentError("layer_sizes must list at least 2 layers")
    if any(s < 0 for s in sizes):
        raise DocumentError("negative layer size")
    if sizes[0] < 1 or sizes[-1] < 1:
        raise DocumentError("input and output layers must be non-empty")

    expected = [(li, ni) for li, size in enumerate(sizes)
                for ni in range(size)]
    got = [(r.layerindex, r.nodeindex) for r in doc.nodes]
    if got != expected:
        if sorted(got) == expected:
            raise UnsortedDocumentError(
                "node records are not in lexicographic order")
        raise DocumentError("node records do not match layer_sizes")

    last = len(sizes) - 1
    for rec in doc.nodes:
        if rec.layerindex == 0:
            if rec.bias != 0.0 or rec.actfunction != "linear":
                raise DocumentError(
                    "input node records must have bias 0 and be linear")
        elif rec.layerindex == last:
            if rec.actfunction != doc.head_activation:
                raise DocumentError(
                    "output node actfunction disagrees with the head")
        elif rec.actfunction not in NODE_ACTIVATIONS:
            raise UnknownActivationError(
                f"unknown activation {rec.actfunction!r}")

        prev = None
        for (tli, tni, _w) in rec.edges:
            if not (0 <= tli < len(sizes)) or not (0 <= tni < sizes[tli]):
                raise DanglingTargetError(
                    f"edge of node {(rec.layerindex, rec.nodeindex)} targets "
                    f"nonexistent node {(tli, tni)}")
            if tli <= rec.layerindex:
                raise NonForwardEdgeError(
                    f"edge {(rec.layerindex, rec.nodeindex)} -> "
                    f"{(tli, tni)} does not point to a later layer")
            if prev is not None and (tli, tni) <= prev:
                raise UnsortedDocumentError(
                    f"edges of node {(rec.layerindex, rec.nodeindex)} are "
                    f"not in strict lexicographic order")
            prev = (tli, tni)


def load(doc: NetworkDocument) -> Network:
    """Recreate a network from a validated document.

    Layers and nodes are built first; each node's edge list is then
    created by walking the node sequence forward while consuming the
    node's sorted edge records (the nested ordered passes the sort
    order enables).
    """
    _validate(doc)
    head = OutputHead(doc.head_activation, doc.head_loss)
    sizes = doc.layer_sizes
    net = Network(sizes[0], sizes[-1], head)
    for position in range(1, len(sizes) - 1):
        layer = net.insert_layer(position)
        layer.nodes = [Node() for _ in range(sizes[position])]

    node_seq = [node for layer in net.layers for node in layer.nodes]
    for rec, node in zip(doc.nodes, node_seq):
        node.bias = rec.bias
        node.actvalue = rec.actvalue
        node.actfunction = rec.actfunction

    net.assign_indices()
    for rec, node in zip(doc.nodes, node_seq):
        cursor = 0
        for (tli, tni, weight) in rec.edges:
            while (node_seq[cursor].layerindex != tli
                   or node_seq[cursor].nodeindex != tni):
                cursor += 1
            target = node_seq[cursor]
            node.edges.append(Edge(weight, target))
            node._targets.add(target)
    return net


def _as_jsonable(doc: NetworkDocument) -> dict:
    return {
        "format_version": doc.format_version,
        "head": {"activation": doc.head_activation, "loss": doc.head_loss},
        "layer_sizes": list(doc.layer_sizes),
        "nodes": [
            {
                "layerindex": r.layerindex,
                "nodeindex": r.nodeindex,
                "bias": r.bias,
                "actvalue": r.actvalue,
                "actfunction": r.actfunction,
                "edges": [[tli, tni, w] for (tli, tni, w) in r.edges],
            }
            for r in doc.nodes
        ],
    }


def write_text(doc: NetworkDocument) -> bytes:
    """Serialize a document to canonical UTF-8 JSON bytes."""
    return (json.dumps(_as_jsonable(doc), separators=(",", ":"))
            + "\n").encode("utf-8")


def _require_keys(obj: dict, keys: Tuple[str, ...], where: str) -> None:
    for key in obj:
        if key not in keys:
            raise DocumentError(f"unknown key {key!r} in {where}")
    for key in keys:
        if key not in obj:
            raise DocumentError(f"missing key {key!r} in {where}")


def _as_int(value, where: str) -> int:
    if type(value) is not int:
        raise DocumentError(f"{where} must be an integer")
    return value


def _as_float(value, where: str) -> float:
    if type(value) is int:
        return float(value)
    if type(value) is not float:
        raise DocumentError(f"{where} must be a number")
    return value


def _as_str(value, where: str) -> str:
    if type(value) is not str:
        raise DocumentError(f"{where} must be a string")
    return value


def read_text(data: bytes) -> NetworkDocument:
    """Parse document bytes; strict about syntax, keys and types."""
    try:
        obj = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise DocumentError(f"not valid UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DocumentError(
            f"syntax error: {exc.msg}: line {exc.lineno} "
            f"column {exc.colno}") from exc
    if not isinstance(obj, dict):
        raise DocumentError("top level must be an object")
    _require_keys(obj, ("format_version", "head", "layer_sizes", "nodes"),
                  "document")

    version = _as_int(obj["format_version"], "format_version")
    head = obj["head"]
    if not isinstance(head, dict):
        raise DocumentError("head must be an object")
    _require_keys(head, ("activation", "loss"), "head")
    head_activation = _as_str(head["activation"], "head.activation")
    head_loss = _as_str(head["loss"], "head.loss")

    sizes_raw = obj["layer_sizes"]
    if not isinstance(sizes_raw, list):
        raise DocumentError("layer_sizes must be an array")
    sizes = [_as_int(s, "layer size") for s in sizes_raw]

    nodes_raw = obj["nodes"]
    if not isinstance(nodes_raw, list):
        raise DocumentError("nodes must be an array")
    records = []
    node_keys = ("layerindex", "nodeindex", "bias", "actvalue",
                 "actfunction", "edges")
    for i, item in enumerate(nodes_raw):
        where = f"nodes[{i}]"
        if not isinstance(item, dict):
            raise DocumentError(f"{where} must be an object")
        _require_keys(item, node_keys, where)
        edges_raw = item["edges"]
        if not isinstance(edges_raw, list):
            raise DocumentError(f"{where}.edges must be an array")
        edges = []
        for j, e in enumerate(edges_raw):
            if not isinstance(e, list) or len(e) != 3:
                raise DocumentError(
                    f"{where}.edges[{j}] must be a 3-element array")
            edges.append((_as_int(e[0], "edge target layerindex"),
                          _as_int(e[1], "edge target nodeindex"),
                          _as_float(e[2], "edge weight")))
        records.append(NodeRecord(
            _as_int(item["layerindex"], f"{where}.layerindex"),
            _as_int(item["nodeindex"], f"{where}.nodeindex"),
            _as_float(item["bias"], f"{where}.bias"),
            _as_float(item["actvalue"], f"{where}.actvalue"),
            _as_str(item["actfunction"], f"{where}.actfunction"),
            edges))
    return NetworkDocument(version, head_activation, head_loss, sizes,
                           records)


def to_bytes(net: Network) -> bytes:
    """save + write_text in one step."""
    return write_text(save(net))


def from_bytes(data: bytes) -> Network:
    """read_text + load in one step."""
    return load(read_text(data))

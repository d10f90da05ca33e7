"""Command-line front end.

Subcommands: create, train, eval, grow, prune, check, export-dot.
Network files use the canonical `.dyann.json` text format; datasets are
CSV rows of input columns followed by target columns. Exit codes:
0 success, 2 usage/validation, 3 I/O, 4 check failure. Output files are
written to a temp file and renamed, so failures never leave partial
files behind.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import random
import sys
import tempfile
from typing import List, Optional, Sequence

from . import engine, oracle, persist
from .activation import HEAD_ACTIVATIONS, LOSSES, NODE_ACTIVATIONS, OutputHead
from .engine import Sample, TrainConfig
from .errors import DyannError
from .topology import Network, wire_layers

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CHECK = 4

FORWARD_TOLERANCE = 1e-12
GRADIENT_TOLERANCE = 1e-5
CHECK_ETA = 1e-3


class SpecError(DyannError):
    """A topology spec file has a bad or missing field."""


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dyann-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_network(path: str) -> Network:
    with open(path, "rb") as fh:
        return persist.from_bytes(fh.read())


def _write_network(net: Network, path: str) -> None:
    _atomic_write(path, persist.to_bytes(net))


def _load_samples(path: str, n_in: int, n_out: int,
                  has_header: bool) -> List[Sample]:
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            if not row:
                continue
            if has_header and i == 0:
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise SpecError(f"{path}: row {i + 1}: {exc}") from exc
            if len(values) != n_in + n_out:
                raise SpecError(
                    f"{path}: row {i + 1} has {len(values)} columns, "
                    f"expected {n_in} inputs + {n_out} targets")
            samples.append(Sample(values[:n_in], values[n_in:]))
    if not samples:
        raise SpecError(f"{path}: no data rows")
    return samples


# ----------------------------------------------------------------------
# create

def _spec_field(obj: dict, name: str, expected, where: str = "spec"):
    if name not in obj:
        raise SpecError(f"{where}: missing field {name!r}")
    value = obj[name]
    if expected is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SpecError(f"{where}: field {name!r} must be a number")
        return float(value)
    if not isinstance(value, expected) or isinstance(value, bool):
        raise SpecError(f"{where}: field {name!r} has the wrong type")
    return value


def _parse_topology_spec(obj: dict):
    if not isinstance(obj, dict):
        raise SpecError("spec: top level must be an object")
    for key in obj:
        if key not in ("layer_sizes", "activations", "head", "wiring", "seed"):
            raise SpecError(f"spec: unknown field {key!r}")

    sizes = _spec_field(obj, "layer_sizes", list)
    if len(sizes) < 2 or any(not isinstance(s, int) or isinstance(s, bool)
                             or s < 1 for s in sizes):
        raise SpecError("spec: field 'layer_sizes' must list >= 2 positive "
                        "integers")

    head_obj = _spec_field(obj, "head", dict)
    activation = _spec_field(head_obj, "activation", str, "spec.head")
    loss = _spec_field(head_obj, "loss", str, "spec.head")
    if activation not in HEAD_ACTIVATIONS:
        raise SpecError(f"spec.head: unknown activation {activation!r}")
    if loss not in LOSSES:
        raise SpecError(f"spec.head: unknown loss {loss!r}")
    try:
        head = OutputHead(activation, loss)
    except ValueError as exc:
        raise SpecError(f"spec.head: {exc}") from exc

    acts = obj.get("activations")
    if acts is None:
        acts = ["linear"] + ["sigmoid"] * (len(sizes) - 2) + [head.activation]
    if (not isinstance(acts, list) or len(acts) != len(sizes)
            or any(not isinstance(a, str) for a in acts)):
        raise SpecError("spec: field 'activations' must name one activation "
                        "per layer")
    if acts[0] != "linear":
        raise SpecError("spec: field 'activations[0]' must be 'linear'")
    if acts[-1] != head.activation:
        raise SpecError("spec: last entry of 'activations' must match the "
                        "head activation")
    for k, a in enumerate(acts[1:-1], start=1):
        if a not in NODE_ACTIVATIONS:
            raise SpecError(f"spec: field 'activations[{k}]' names unknown "
                            f"activation {a!r}")

    wiring = obj.get("wiring", [])
    if not isinstance(wiring, list):
        raise SpecError("spec: field 'wiring' must be an array of rules")
    rules = []
    for k, rule in enumerate(wiring):
        where = f"spec.wiring[{k}]"
        if not isinstance(rule, dict):
            raise SpecError(f"{where}: must be an object")
        for key in rule:
            if key not in ("from", "to", "density"):
                raise SpecError(f"{where}: unknown field {key!r}")
        src = _spec_field(rule, "from", int, where)
        dst = _spec_field(rule, "to", int, where)
        density = _spec_field(rule, "density", float, where)
        if not 0 <= src < len(sizes) or not 0 <= dst < len(sizes):
            raise SpecError(f"{where}: layer out of range")
        if dst <= src:
            raise SpecError(f"{where}: rule must point to a later layer")
        if not 0.0 <= density <= 1.0:
            raise SpecError(f"{where}: field 'density' must be in [0, 1]")
        rules.append((src, dst, density))

    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SpecError("spec: field 'seed' must be an integer")
    return sizes, acts, head, rules, seed


def cmd_create(args: argparse.Namespace) -> int:
    with open(args.spec, "rb") as fh:
        try:
            obj = json.loads(fh.read().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SpecError(f"{args.spec}: {exc}") from exc
    sizes, acts, head, rules, seed = _parse_topology_spec(obj)

    net = Network(sizes[0], sizes[-1], head)
    for position in range(1, len(sizes) - 1):
        net.insert_layer(position)
        for _ in range(sizes[position]):
            net.insert_node(position, 0.0, acts[position])
    rng = random.Random(seed)
    for (src, dst, density) in rules:
        wire_layers(net, src, dst, density, rng)
    _write_network(net, args.out)
    return EXIT_OK


# ----------------------------------------------------------------------
# train / eval

def cmd_train(args: argparse.Namespace) -> int:
    net = _read_network(args.net)
    data = _load_samples(args.data, net.input_size, net.output_size,
                         args.has_header)
    cfg = TrainConfig(eta=args.eta, epochs=args.epochs, seed=args.seed,
                      shuffle=args.shuffle)
    history = engine.train_sgd(net, data, cfg)
    _write_network(net, args.out)
    if args.history:
        lines = ["epoch,mean_loss"]
        lines.extend(f"{i},{loss!r}" for i, loss in enumerate(history, 1))
        _atomic_write(args.history, ("\n".join(lines) + "\n").encode())
    print(f"trained {len(history)} epochs, final mean loss {history[-1]!r}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    net = _read_network(args.net)
    data = _load_samples(args.data, net.input_size, net.output_size,
                         args.has_header)
    result = engine.evaluate(net, data)
    print(f"mean_loss {result.mean_loss!r}")
    if result.accuracy is not None:
        print(f"accuracy {result.accuracy!r}")
    return EXIT_OK


# ----------------------------------------------------------------------
# grow / prune

def cmd_grow(args: argparse.Namespace) -> int:
    net = _read_network(args.net)
    if args.activation not in NODE_ACTIVATIONS:
        raise SpecError(f"unknown activation {args.activation!r}")
    for density, name in ((args.in_density, "--in-density"),
                          (args.out_density, "--out-density")):
        if not 0.0 <= density <= 1.0:
            raise SpecError(f"{name} must be in [0, 1]")
    position = args.position
    net.insert_layer(position)
    for _ in range(args.nodes):
        net.insert_node(position, 0.0, args.activation)
    rng = random.Random(args.seed)
    for earlier in range(position):
        wire_layers(net, earlier, position, args.in_density, rng)
    for later in range(position + 1, len(net.layers)):
        wire_layers(net, position, later, args.out_density, rng)
    _write_network(net, args.out)
    print(f"grew layer of {args.nodes} nodes at position {position}, "
          f"layer sizes now {net.layer_sizes()}")
    return EXIT_OK


def cmd_prune(args: argparse.Namespace) -> int:
    net = _read_network(args.net)
    if args.threshold < 0.0:
        raise SpecError("--threshold must be >= 0")
    removed = net.prune_edges(args.threshold)
    print(f"{removed} edges removed")
    if args.sweep_isolated:
        last = len(net.layers) - 1
        for li in range(1, last):
            for ni, node in enumerate(net.layers[li].nodes):
                if not node.edges:
                    net.mark_for_deletion((li, ni))
        report = net.sweep_deletions()
        print(f"{report.nodes_removed} isolated nodes swept "
              f"({report.edges_removed} edges, "
              f"{report.layers_removed} layers)")
    _write_network(net, args.out)
    return EXIT_OK


# ----------------------------------------------------------------------
# check / export-dot

def cmd_check(args: argparse.Namespace) -> int:
    net = _read_network(args.net)
    data = _load_samples(args.data, net.input_size, net.output_size,
                         args.has_header)
    sample = data[0]
    view = oracle.snapshot(net)

    outputs = engine.feed_forward(net, sample.input)
    expected = oracle.oracle_forward(view, sample.input)
    forward_dev = max(abs(a - b) for a, b in zip(outputs, expected))
    print(f"forward max deviation: {forward_dev:.3e}")
    ok = forward_dev <= FORWARD_TOLERANCE

    if not net.output_head.trainable:
        print("gradient check skipped: head is not trainable")
        return EXIT_OK if ok else EXIT_CHECK

    worst = 0.0
    probe = copy.deepcopy(net)
    before = oracle.snapshot(probe)
    engine.feed_forward(probe, sample.input)
    engine.back_propagate(probe, sample.target, CHECK_ETA)
    after = oracle.snapshot(probe)
    grads = oracle.numeric_gradient(view, sample)
    kinks = oracle.kink_parameters(view, sample)

    def rel_error(delta: float, grad: float) -> float:
        return abs(delta + CHECK_ETA * grad) / (CHECK_ETA * max(1.0, abs(grad)))

    for key, grad in grads.weights.items():
        if key in kinks.weights:
            continue
        worst = max(worst, rel_error(after.weights[key] - before.weights[key],
                                     grad))
    for addr, grad in grads.biases.items():
        if addr in kinks.biases:
            continue
        worst = max(worst, rel_error(after.biases[addr] - before.biases[addr],
                                     grad))

    skipped = len(kinks.weights) + len(kinks.biases)
    print(f"gradient max relative error: {worst:.3e}")
    if skipped:
        print(f"skipped kink-crossing parameters: {skipped}")
    ok = ok and worst <= GRADIENT_TOLERANCE
    return EXIT_OK if ok else EXIT_CHECK


def cmd_export_dot(args: argparse.Namespace) -> int:
    net = _read_network(args.net)
    net.assign_indices()
    lines = ["digraph network {", "  rankdir=LR;"]
    for li, layer in enumerate(net.layers):
        lines.append(f"  subgraph cluster_{li} {{")
        lines.append(f'    label="layer {li}";')
        for node in layer.nodes:
            name = f"{node.layerindex}_{node.nodeindex}"
            lines.append(f'    n{name} [label="({node.layerindex},'
                         f'{node.nodeindex})"];')
        lines.append("  }")
    for node, edge in net.iter_edges():
        src = f"{node.layerindex}_{node.nodeindex}"
        dst = f"{edge.target.layerindex}_{edge.target.nodeindex}"
        lines.append(f'  n{src} -> n{dst} [label="{edge.weight:.4g}"];')
    lines.append("}")
    _atomic_write(args.out, ("\n".join(lines) + "\n").encode())
    return EXIT_OK


# ----------------------------------------------------------------------
# parser

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0.0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _nonnegative_float(text: str) -> float:
    value = float(text)
    if value < 0.0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyann",
        description="Create, train, reshape and inspect dynamic neural "
                    "networks stored as .dyann.json files.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("create", help="build a network from a topology spec")
    p.add_argument("spec", help="topology spec (JSON)")
    p.add_argument("out", help="output network file")
    p.set_defaults(func=cmd_create)

    p = sub.add_parser("train", help="SGD-train a network on CSV data")
    p.add_argument("net", help="input network file")
    p.add_argument("data", help="CSV dataset (inputs, then targets)")
    p.add_argument("--eta", type=_positive_float, required=True,
                   help="learning rate")
    p.add_argument("--epochs", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shuffle", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--out", required=True, help="output network file")
    p.add_argument("--history", help="write per-epoch mean loss CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="mean loss (and accuracy) on CSV data")
    p.add_argument("net")
    p.add_argument("data")
    p.add_argument("--has-header", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grow", help="insert a freshly wired layer")
    p.add_argument("net")
    p.add_argument("--position", type=_positive_int, required=True,
                   help="index the new layer will occupy")
    p.add_argument("--nodes", type=_positive_int, required=True)
    p.add_argument("--activation", default="sigmoid")
    p.add_argument("--in-density", type=float, default=1.0)
    p.add_argument("--out-density", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grow)

    p = sub.add_parser("prune", help="drop near-zero edges")
    p.add_argument("net")
    p.add_argument("--threshold", type=_nonnegative_float, required=True,
                   help="remove edges with |weight| < threshold")
    p.add_argument("--sweep-isolated", action="store_true",
                   help="also delete hidden nodes left without outgoing "
                        "edges")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("check", help="oracle forward + gradient check")
    p.add_argument("net")
    p.add_argument("data", help="CSV dataset; the first sample is used")
    p.add_argument("--has-header", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("export-dot", help="write a graphviz rendering")
    p.add_argument("net")
    p.add_argument("out", help="output .dot file")
    p.set_defaults(func=cmd_export_dot)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DyannError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

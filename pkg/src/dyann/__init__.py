"""Dynamic artificial neural networks.

Layered graphs with forward skip edges, per-node activation functions
and live structural surgery (node/edge/layer insertion and deletion),
trained by per-sample stochastic gradient descent. A compiled kernel
accelerates the training loop when the `_speedups` extension is built;
otherwise a bit-identical pure-Python loop is used.
"""

from .activation import (
    HEAD_ACTIVATIONS,
    LOSSES,
    NODE_ACTIVATIONS,
    OutputHead,
    act_derivative,
    act_value,
    apply_output_head,
    loss_value,
    output_delta,
)
from .engine import (
    EvalResult,
    Sample,
    TrainConfig,
    back_propagate,
    compiled_available,
    evaluate,
    feed_forward,
    fire_node,
    train_sgd,
    update_input_node,
    update_node,
)
from .oracle import DenseView, GradientTable, numeric_gradient, oracle_forward, snapshot
from .persist import (
    FORMAT_VERSION,
    NetworkDocument,
    NodeRecord,
    from_bytes,
    load,
    read_text,
    save,
    to_bytes,
    write_text,
)
from .topology import (
    Edge,
    Layer,
    Network,
    Node,
    NodeAddress,
    SweepReport,
    check_invariants,
    glorot_uniform,
    new_network,
    wire_layers,
)

__version__ = "0.1.0"

__all__ = [
    "Edge",
    "EvalResult",
    "FORMAT_VERSION",
    "GradientTable",
    "HEAD_ACTIVATIONS",
    "LOSSES",
    "Layer",
    "Network",
    "NetworkDocument",
    "Node",
    "NodeAddress",
    "NodeRecord",
    "NODE_ACTIVATIONS",
    "OutputHead",
    "Sample",
    "SweepReport",
    "TrainConfig",
    "act_derivative",
    "act_value",
    "apply_output_head",
    "back_propagate",
    "check_invariants",
    "compiled_available",
    "DenseView",
    "evaluate",
    "feed_forward",
    "fire_node",
    "from_bytes",
    "glorot_uniform",
    "load",
    "loss_value",
    "new_network",
    "numeric_gradient",
    "oracle_forward",
    "output_delta",
    "read_text",
    "save",
    "snapshot",
    "to_bytes",
    "train_sgd",
    "update_input_node",
    "update_node",
    "wire_layers",
    "write_text",
]

"""Flattened array view of a network for the compiled SGD kernel.

Nodes are enumerated in (layer, list position) order and edges in a CSR
layout that preserves each node's edge-list order, so the kernel adds
contributions in exactly the same sequence as the object-graph walk and
the two backends stay bit-identical. While the kernel runs, weights,
biases and scratch live in the arrays; `writeback` copies them onto the
object graph afterwards.
"""
from __future__ import annotations

import random
from typing import Sequence

import numpy as np

from .engine import Sample, TrainConfig, fisher_yates, _speedups
from .topology import Network

ACT_CODES = {"linear": 0, "relu": 1, "sigmoid": 2, "tanh": 3}
HEAD_CODES = {"identity": 0, "sigmoid": 1, "softmax": 2}
LOSS_CODES = {"half_mse": 0, "cross_entropy": 1, "binary_cross_entropy": 2}


class TrainPlan:
    """CSR snapshot of a network, valid while its topology is unchanged."""

    def __init__(self, net: Network):
        nodes = []
        layer_ptr = [0]
        for layer in net.layers:
            nodes.extend(layer.nodes)
            layer_ptr.append(len(nodes))
        index = {id(n): i for i, n in enumerate(nodes)}

        acts = []
        out_start = layer_ptr[-2]
        for i, n in enumerate(nodes):
            # Output nodes go through the head, not the per-node table.
            acts.append(0 if i >= out_start else ACT_CODES[n.actfunction])

        edge_ptr = [0]
        edge_tgt: list[int] = []
        edge_w: list[float] = []
        for n in nodes:
            for e in n.edges:
                edge_tgt.append(index[id(e.target)])
                edge_w.append(e.weight)
            edge_ptr.append(len(edge_tgt))

        self.nodes = nodes
        self.layer_ptr = np.asarray(layer_ptr, dtype=np.intc)
        self.act = np.asarray(acts, dtype=np.intc)
        self.bias = np.asarray([n.bias for n in nodes], dtype=np.float64)
        self.edge_ptr = np.asarray(edge_ptr, dtype=np.intc)
        self.edge_tgt = np.asarray(edge_tgt, dtype=np.intc)
        self.edge_w = np.asarray(edge_w, dtype=np.float64)
        self.actval = np.asarray([n.actvalue for n in nodes], dtype=np.float64)
        self.pastsum = np.asarray([n.pastsum for n in nodes], dtype=np.float64)
        self.delta = np.asarray([n.delta for n in nodes], dtype=np.float64)
        self.sums = np.asarray([n.sum for n in nodes], dtype=np.float64)
        n_out = layer_ptr[-1] - layer_ptr[-2]
        self.z_out = np.zeros(n_out, dtype=np.float64)
        self.y_out = np.zeros(n_out, dtype=np.float64)
        self.exp_out = np.zeros(n_out, dtype=np.float64)
        self.head_code = HEAD_CODES[net.output_head.activation]
        self.loss_code = LOSS_CODES[net.output_head.loss]

    def run_epoch(self, X: np.ndarray, T: np.ndarray, order: np.ndarray,
                  eta: float) -> float:
        return _speedups.sgd_epoch(
            self.layer_ptr, self.act, self.bias,
            self.edge_ptr, self.edge_tgt, self.edge_w,
            self.actval, self.pastsum, self.delta, self.sums,
            self.z_out, self.y_out, self.exp_out,
            X, T, order, self.head_code, self.loss_code, eta)

    def writeback(self, net: Network) -> None:
        """Copy parameters and scratch back onto the object graph."""
        for i, n in enumerate(self.nodes):
            n.bias = float(self.bias[i])
            n.actvalue = float(self.actval[i])
            n.pastsum = float(self.pastsum[i])
            n.delta = float(self.delta[i])
            n.sum = float(self.sums[i])
        k = 0
        for n in self.nodes:
            for e in n.edges:
                e.weight = float(self.edge_w[k])
                k += 1


def run_compiled_sgd(net: Network, data: Sequence[Sample], cfg: TrainConfig,
                     rng: random.Random, order: list) -> list[float]:
    """Drive the compiled kernel with the same shuffle stream and early
    stop as the pure loop, then write the results back to the network."""
    plan = TrainPlan(net)
    X = np.asarray([list(s.input) for s in data], dtype=np.float64)
    T = np.asarray([list(s.target) for s in data], dtype=np.float64)
    order_arr = np.zeros(len(data), dtype=np.intc)

    history = []
    try:
        for _ in range(cfg.epochs):
            if cfg.shuffle:
                fisher_yates(order, rng)
            order_arr[:] = order
            mean = plan.run_epoch(X, T, order_arr, cfg.eta)
            history.append(mean)
            if cfg.stop_loss is not None and mean < cfg.stop_loss:
                break
    finally:
        plan.writeback(net)
    return history

"""Compare the pure-Python training loop against the compiled kernel.

Builds a mid-size network with skip edges, trains identical copies with
both backends, verifies the loss histories match bit for bit, and
reports throughput.

Usage: python benchmarks/bench_backends.py [--epochs N] [--samples N]
"""
import argparse
import copy
import random
import time

from dyann import Network, OutputHead, Sample, TrainConfig, train_sgd, wire_layers
from dyann.engine import compiled_available


def build_network(seed=0):
    rng = random.Random(seed)
    sizes = [16, 32, 32, 16, 8]
    net = Network(sizes[0], sizes[-1], OutputHead("softmax", "cross_entropy"))
    for position in range(1, len(sizes) - 1):
        net.insert_layer(position)
        for _ in range(sizes[position]):
            net.insert_node(position, rng.uniform(-0.3, 0.3),
                            rng.choice(["relu", "sigmoid", "tanh"]))
    for i in range(len(sizes) - 1):
        for j in range(i + 1, len(sizes)):
            wire_layers(net, i, j, 0.4, rng)
    return net


def build_dataset(net, n_samples, seed=1):
    rng = random.Random(seed)
    data = []
    for _ in range(n_samples):
        x = [rng.uniform(-1, 1) for _ in range(net.input_size)]
        hot = rng.randrange(net.output_size)
        t = [1.0 if i == hot else 0.0 for i in range(net.output_size)]
        data.append(Sample(x, t))
    return data


def timed_train(net, data, cfg, backend):
    started = time.perf_counter()
    history = train_sgd(net, data, cfg, backend=backend)
    return history, time.perf_counter() - started


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--samples", type=int, default=64)
    args = parser.parse_args()

    net = build_network()
    data = build_dataset(net, args.samples)
    cfg = TrainConfig(eta=0.01, epochs=args.epochs, seed=7, shuffle=True)
    steps = args.epochs * args.samples
    print(f"network: layers {net.layer_sizes()}, {net.edge_count()} edges; "
          f"{args.samples} samples x {args.epochs} epochs")

    # warm up both paths (first compiled call imports numpy lazily)
    warm = TrainConfig(eta=0.01, epochs=1, seed=7)
    train_sgd(copy.deepcopy(net), data, warm, backend="python")
    if compiled_available():
        train_sgd(copy.deepcopy(net), data, warm, backend="compiled")

    h_py, t_py = timed_train(copy.deepcopy(net), data, cfg, "python")
    print(f"python  : {t_py:8.3f}s  ({steps / t_py:10.0f} samples/s)  "
          f"final loss {h_py[-1]:.6f}")

    if not compiled_available():
        print("compiled: extension not built; skipping")
        return

    h_c, t_c = timed_train(copy.deepcopy(net), data, cfg, "compiled")
    print(f"compiled: {t_c:8.3f}s  ({steps / t_c:10.0f} samples/s)  "
          f"final loss {h_c[-1]:.6f}")
    print(f"speedup : {t_py / t_c:.1f}x")
    if h_py == h_c:
        print("histories bit-identical across backends")
    else:
        raise SystemExit("BACKEND MISMATCH: histories differ")


if __name__ == "__main__":
    main()

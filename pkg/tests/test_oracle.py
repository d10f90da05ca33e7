import copy
import math

import pytest

from dyann import (
    NodeAddress,
    OutputHead,
    Sample,
    back_propagate,
    feed_forward,
    new_network,
    numeric_gradient,
    oracle_forward,
    snapshot,
)
from dyann.errors import NonTrainableHeadError
from dyann.oracle import kink_parameters
from netgen import random_input, random_network, random_sample

IDENT = OutputHead("identity", "half_mse")
A = NodeAddress


class TestSnapshot:
    def test_copy_semantics(self):
        net, rng = random_network(1, density=0.8)
        view = snapshot(net)
        weights_before = dict(view.weights)
        for _, edge in net.iter_edges():
            edge.weight += 1.0
        assert view.weights == weights_before

    def test_empty_network_has_empty_weight_table(self):
        view = snapshot(new_network(2, 2, IDENT))
        assert view.weights == {}
        assert view.layer_sizes == [2, 2]

    def test_entry_count_matches_edges(self):
        net, _ = random_network(2, density=0.6)
        view = snapshot(net)
        assert len(view.weights) == net.edge_count()


class TestOracleForward:
    def test_agrees_on_tiny_example(self):
        net = new_network(1, 1, IDENT)
        net.add_edge(A(0, 0), A(1, 0), 2.0)
        net.layers[1].nodes[0].bias = 0.5
        view = snapshot(net)
        assert oracle_forward(view, [1.0]) == [2.5]

    def test_agrees_with_engine_on_random_nets(self):
        worst = 0.0
        for seed in range(30):
            net, rng = random_network(seed, density=0.6)
            view = snapshot(net)
            for _ in range(3):
                x = random_input(net, rng)
                eng = feed_forward(net, x)
                ora = oracle_forward(view, x)
                worst = max(worst,
                            max(abs(a - b) for a, b in zip(eng, ora)))
        assert worst <= 1e-12

    def test_unreachable_node_outputs_activation_of_bias(self):
        net = new_network(1, 1, IDENT)
        net.insert_layer(1)
        net.insert_node(1, 0.7, "sigmoid")
        net.add_edge(A(1, 0), A(2, 0), 1.0)
        view = snapshot(net)
        out = oracle_forward(view, [5.0])
        sigma = 1.0 / (1.0 + math.exp(-0.7))
        assert out[0] == pytest.approx(sigma, abs=1e-15)
        assert feed_forward(net, [5.0])[0] == pytest.approx(out[0],
                                                            abs=1e-15)

    def test_four_layer_sigmoid_softmax_case(self):
        # sizes 3,5,4,2; density 0.5 with skip pairs; sigmoid hidden;
        # softmax head
        import random as _random
        from dyann import Network, wire_layers
        rng = _random.Random(42)
        net = Network(3, 2, OutputHead("softmax", "cross_entropy"))
        for position, size in ((1, 5), (2, 4)):
            net.insert_layer(position)
            for _ in range(size):
                net.insert_node(position, rng.uniform(-0.5, 0.5), "sigmoid")
        for i in range(3):
            for j in range(i + 1, 4):
                wire_layers(net, i, j, 0.5, rng)
        view = snapshot(net)
        for _ in range(5):
            x = [rng.uniform(-1, 1) for _ in range(3)]
            eng = feed_forward(net, x)
            ora = oracle_forward(view, x)
            assert max(abs(a - b) for a, b in zip(eng, ora)) <= 1e-12

    def test_no_side_effects(self):
        net, rng = random_network(3, density=0.5)
        view = snapshot(net)
        x = random_input(net, rng)
        before = dict(view.weights), dict(view.biases)
        first = oracle_forward(view, x)
        second = oracle_forward(view, x)
        assert first == second
        assert (dict(view.weights), dict(view.biases)) == before


class TestNumericGradient:
    def test_hand_computed_chain(self):
        net = new_network(1, 1, IDENT)
        net.insert_layer(1)
        net.insert_node(1, 0.0, "linear")
        net.add_edge(A(0, 0), A(1, 0), 2.0)
        net.add_edge(A(1, 0), A(2, 0), 3.0)
        view = snapshot(net)
        grads = numeric_gradient(view, Sample([1.0], [0.0]))
        # dL/dw2 = delta_out * y_hidden = 6 * 2
        assert grads.weights[(A(1, 0), A(2, 0))] == pytest.approx(12.0,
                                                                  rel=1e-7)
        # dL/dw1 = delta_hidden * y_input = 18 * 1
        assert grads.weights[(A(0, 0), A(1, 0))] == pytest.approx(18.0,
                                                                  rel=1e-7)
        assert grads.biases[A(2, 0)] == pytest.approx(6.0, rel=1e-7)
        assert grads.biases[A(1, 0)] == pytest.approx(18.0, rel=1e-7)
        assert A(0, 0) not in grads.biases  # input bias is not a parameter

    def test_zero_gradient_at_perfect_prediction(self):
        net, rng = random_network(17, head=IDENT,
                                  acts=("linear", "sigmoid", "tanh"))
        x = random_input(net, rng)
        y = feed_forward(net, x)
        view = snapshot(net)
        grads = numeric_gradient(view, Sample(x, y))
        for value in list(grads.weights.values()) + list(grads.biases.values()):
            assert abs(value) <= 1e-9

    def test_dead_relu_kills_upstream_gradients(self):
        net = new_network(1, 1, IDENT)
        net.insert_layer(1)
        net.insert_node(1, -5.0, "relu")  # always dead for |x| <= 1
        net.add_edge(A(0, 0), A(1, 0), 1.0)
        net.add_edge(A(1, 0), A(2, 0), 2.0)
        view = snapshot(net)
        grads = numeric_gradient(view, Sample([0.5], [1.0]))
        assert abs(grads.weights[(A(0, 0), A(1, 0))]) <= 1e-9
        assert abs(grads.biases[A(1, 0)]) <= 1e-9

    def test_restores_view(self):
        net, rng = random_network(19)
        view = snapshot(net)
        before = dict(view.weights), dict(view.biases)
        numeric_gradient(view, random_sample(net, rng))
        assert (dict(view.weights), dict(view.biases)) == before

    def test_max_head_rejected(self):
        net = new_network(1, 2, OutputHead("max", "half_mse"))
        view = snapshot(net)
        with pytest.raises(NonTrainableHeadError):
            numeric_gradient(view, Sample([1.0], [1.0, 0.0]))

    def test_quadratic_convergence_in_h(self):
        # Richardson: g* = (4 g(h/2) - g(h)) / 3 has O(h^4) error, so
        # FD-error norms at h and h/2 should shrink by about 4.
        checked = 0
        for seed in range(20):
            if checked >= 10:
                break
            net, rng = random_network(seed, max_layers=4, max_nodes=5,
                                      density=0.8,
                                      head=IDENT,
                                      acts=("sigmoid", "tanh"))
            sample = random_sample(net, rng)
            view = snapshot(net)
            h = 1e-3
            g1 = numeric_gradient(view, sample, h)
            g2 = numeric_gradient(view, sample, h / 2)
            keys = list(g1.weights)
            star = {k: (4.0 * g2.weights[k] - g1.weights[k]) / 3.0
                    for k in keys}
            e1 = math.sqrt(sum((g1.weights[k] - star[k]) ** 2 for k in keys))
            e2 = math.sqrt(sum((g2.weights[k] - star[k]) ** 2 for k in keys))
            if e1 < 1e-11:  # curvature too flat to measure
                continue
            assert 2.5 <= e1 / e2 <= 6.0
            checked += 1
        assert checked >= 10


class TestKinkParameters:
    def test_flags_parameters_near_kink(self):
        net = new_network(1, 1, IDENT)
        net.insert_layer(1)
        net.insert_node(1, 0.0, "relu")  # z sits exactly on the kink
        net.add_edge(A(0, 0), A(1, 0), 1.0)
        net.add_edge(A(1, 0), A(2, 0), 1.0)
        view = snapshot(net)
        kinks = kink_parameters(view, Sample([0.0], [1.0]))
        assert A(1, 0) in kinks.biases

    def test_empty_for_smooth_nets(self):
        net, rng = random_network(23, acts=("sigmoid", "tanh", "linear"))
        view = snapshot(net)
        kinks = kink_parameters(view, random_sample(net, rng))
        assert not kinks.weights and not kinks.biases


class TestEngineAgainstNumericGradient:
    @pytest.mark.parametrize("seed", range(6))
    def test_update_equals_minus_eta_gradient(self, seed):
        net, rng = random_network(seed + 500, density=0.7)
        sample = random_sample(net, rng)
        view = snapshot(net)
        eta = 1e-3
        probe = copy.deepcopy(net)
        before = snapshot(probe)
        feed_forward(probe, sample.input)
        back_propagate(probe, sample.target, eta)
        after = snapshot(probe)
        grads = numeric_gradient(view, sample)
        kinks = kink_parameters(view, sample)
        for key, grad in grads.weights.items():
            if key in kinks.weights:
                continue
            change = after.weights[key] - before.weights[key]
            assert change == pytest.approx(-eta * grad,
                                           abs=1e-5 * eta * max(1.0, abs(grad)))
        for addr, grad in grads.biases.items():
            if addr in kinks.biases:
                continue
            change = after.biases[addr] - before.biases[addr]
            assert change == pytest.approx(-eta * grad,
                                           abs=1e-5 * eta * max(1.0, abs(grad)))

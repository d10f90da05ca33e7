import json

import pytest

from dyann import cli, engine, from_bytes
from netgen import XOR_DATA

XOR_SPEC = {
    "layer_sizes": [2, 2, 1],
    "activations": ["linear", "sigmoid", "sigmoid"],
    "head": {"activation": "sigmoid", "loss": "binary_cross_entropy"},
    "wiring": [
        {"from": 0, "to": 1, "density": 1.0},
        {"from": 1, "to": 2, "density": 1.0},
        {"from": 0, "to": 2, "density": 1.0},
    ],
    "seed": 7,
}


def write_spec(path, spec=XOR_SPEC):
    path.write_text(json.dumps(spec))
    return str(path)


def write_xor_csv(path):
    rows = [",".join(map(repr, list(s.input) + list(s.target)))
            for s in XOR_DATA]
    path.write_text("\n".join(rows) + "\n")
    return str(path)


@pytest.fixture
def workdir(tmp_path):
    return tmp_path


class TestCreate:
    def test_dense_wiring_count(self, workdir, capsys):
        spec = dict(XOR_SPEC, layer_sizes=[2, 2, 1])
        spec_path = write_spec(workdir / "spec.json", spec)
        out = workdir / "net.dyann.json"
        assert cli.main(["create", spec_path, str(out)]) == 0
        net = from_bytes(out.read_bytes())
        # 2*2 + 2*1 + 2*1 edges from the three dense rules
        assert net.edge_count() == 8
        assert net.layer_sizes() == [2, 2, 1]

    def test_consecutive_rules_only(self, workdir):
        spec = dict(XOR_SPEC)
        spec["wiring"] = [{"from": 0, "to": 1, "density": 1.0},
                          {"from": 1, "to": 2, "density": 1.0}]
        spec_path = write_spec(workdir / "spec.json", spec)
        out = workdir / "net.dyann.json"
        assert cli.main(["create", spec_path, str(out)]) == 0
        # 2*2 + 2*1 edges without the skip rule
        assert from_bytes(out.read_bytes()).edge_count() == 6

    def test_zero_density_means_no_edges(self, workdir):
        spec = dict(XOR_SPEC)
        spec["wiring"] = [{"from": 0, "to": 2, "density": 0.0}]
        spec_path = write_spec(workdir / "spec.json", spec)
        out = workdir / "net.dyann.json"
        assert cli.main(["create", spec_path, str(out)]) == 0
        assert from_bytes(out.read_bytes()).edge_count() == 0

    def test_deterministic(self, workdir):
        spec_path = write_spec(workdir / "spec.json")
        a, b = workdir / "a.json", workdir / "b.json"
        assert cli.main(["create", spec_path, str(a)]) == 0
        assert cli.main(["create", spec_path, str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_spec_names_field(self, workdir, capsys):
        spec = dict(XOR_SPEC)
        spec["wiring"] = [{"from": 0, "to": 1, "density": 1.5}]
        spec_path = write_spec(workdir / "spec.json", spec)
        rc = cli.main(["create", spec_path, str(workdir / "x.json")])
        assert rc == 2
        assert "density" in capsys.readouterr().err
        assert not (workdir / "x.json").exists()

    def test_missing_file_is_io_error(self, workdir):
        rc = cli.main(["create", str(workdir / "nope.json"),
                       str(workdir / "x.json")])
        assert rc == 3


class TestTrainEval:
    def make_net(self, workdir):
        spec_path = write_spec(workdir / "spec.json")
        net_path = workdir / "net.dyann.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        return net_path

    def test_xor_end_to_end(self, workdir, capsys):
        net_path = self.make_net(workdir)
        csv_path = write_xor_csv(workdir / "xor.csv")
        out = workdir / "trained.dyann.json"
        hist = workdir / "history.csv"
        rc = cli.main(["train", str(net_path), csv_path,
                       "--eta", "0.5", "--epochs", "3000", "--seed", "7",
                       "--out", str(out), "--history", str(hist)])
        assert rc == 0
        lines = hist.read_text().strip().splitlines()
        assert lines[0] == "epoch,mean_loss"
        assert len(lines) == 3001
        final = float(lines[-1].split(",")[1])
        assert final < 0.01
        capsys.readouterr()
        assert cli.main(["eval", str(out), csv_path]) == 0
        printed = capsys.readouterr().out
        assert printed.startswith("mean_loss ")
        assert float(printed.split()[1]) < 0.01

    def test_zero_epochs_rejected(self, workdir):
        net_path = self.make_net(workdir)
        csv_path = write_xor_csv(workdir / "xor.csv")
        with pytest.raises(SystemExit) as exc:
            cli.main(["train", str(net_path), csv_path, "--eta", "0.5",
                      "--epochs", "0", "--out", str(workdir / "o.json")])
        assert exc.value.code == 2

    def test_history_deterministic(self, workdir):
        net_path = self.make_net(workdir)
        csv_path = write_xor_csv(workdir / "xor.csv")
        args = ["train", str(net_path), csv_path, "--eta", "0.5",
                "--epochs", "50", "--seed", "3"]
        h1, h2 = workdir / "h1.csv", workdir / "h2.csv"
        o1, o2 = workdir / "o1.json", workdir / "o2.json"
        assert cli.main(args + ["--out", str(o1), "--history", str(h1)]) == 0
        assert cli.main(args + ["--out", str(o2), "--history", str(h2)]) == 0
        assert h1.read_bytes() == h2.read_bytes()
        assert o1.read_bytes() == o2.read_bytes()

    def test_dimension_mismatch(self, workdir, capsys):
        net_path = self.make_net(workdir)
        bad = workdir / "bad.csv"
        bad.write_text("1.0,2.0\n")
        rc = cli.main(["train", str(net_path), str(bad), "--eta", "0.5",
                       "--epochs", "1", "--out", str(workdir / "o.json")])
        assert rc == 2
        assert "columns" in capsys.readouterr().err

    def test_eval_after_roundtrip_matches(self, workdir, capsys):
        net_path = self.make_net(workdir)
        csv_path = write_xor_csv(workdir / "xor.csv")
        assert cli.main(["eval", str(net_path), csv_path]) == 0
        first = capsys.readouterr().out
        clone = workdir / "clone.json"
        clone.write_bytes(net_path.read_bytes())
        assert cli.main(["eval", str(clone), csv_path]) == 0
        assert capsys.readouterr().out == first

    def test_accuracy_only_for_classifier_heads(self, workdir, capsys):
        spec = {
            "layer_sizes": [2, 2],
            "head": {"activation": "softmax", "loss": "cross_entropy"},
            "wiring": [{"from": 0, "to": 1, "density": 1.0}],
            "seed": 1,
        }
        spec_path = write_spec(workdir / "s.json", spec)
        net_path = workdir / "n.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        csv_path = workdir / "d.csv"
        csv_path.write_text("0.5,0.25,1.0,0.0\n0.1,0.9,0.0,1.0\n")
        assert cli.main(["eval", str(net_path), str(csv_path)]) == 0
        out = capsys.readouterr().out
        assert "accuracy" in out
        # identity head: no accuracy line
        net2 = self.make_net(workdir)
        xor_csv = write_xor_csv(workdir / "xor.csv")
        assert cli.main(["eval", str(net2), xor_csv]) == 0
        assert "accuracy" not in capsys.readouterr().out


class TestGrowPrune:
    def make_small_net(self, workdir):
        spec = {
            "layer_sizes": [2, 1],
            "head": {"activation": "sigmoid",
                     "loss": "binary_cross_entropy"},
            "wiring": [{"from": 0, "to": 1, "density": 1.0}],
            "seed": 5,
        }
        spec_path = write_spec(workdir / "s.json", spec)
        net_path = workdir / "n.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        return net_path

    def test_grow_shapes(self, workdir):
        net_path = self.make_small_net(workdir)
        out = workdir / "grown.json"
        rc = cli.main(["grow", str(net_path), "--position", "1",
                       "--nodes", "3", "--activation", "sigmoid",
                       "--out", str(out)])
        assert rc == 0
        net = from_bytes(out.read_bytes())
        assert net.layer_sizes() == [2, 3, 1]

    def test_grow_with_zero_density_is_neutral(self, workdir):
        net_path = self.make_small_net(workdir)
        out = workdir / "grown.json"
        rc = cli.main(["grow", str(net_path), "--position", "1",
                       "--nodes", "2", "--in-density", "0",
                       "--out-density", "0", "--out", str(out)])
        assert rc == 0
        before = from_bytes(net_path.read_bytes())
        after = from_bytes(out.read_bytes())
        for x in ([0.0, 0.0], [1.0, 0.5], [-1.0, 2.0]):
            assert engine.feed_forward(before, x) == \
                   engine.feed_forward(after, x)

    def test_grow_invalid_position(self, workdir):
        net_path = self.make_small_net(workdir)
        rc = cli.main(["grow", str(net_path), "--position", "5",
                       "--nodes", "1", "--out", str(workdir / "g.json")])
        assert rc == 2

    def test_prune_counts(self, workdir, capsys):
        net_path = self.make_small_net(workdir)
        net = from_bytes(net_path.read_bytes())
        weights = [0.001, -0.5]
        for (_, edge), w in zip(net.iter_edges(), weights):
            edge.weight = w
        from dyann import to_bytes
        net_path.write_bytes(to_bytes(net))
        out = workdir / "pruned.json"
        rc = cli.main(["prune", str(net_path), "--threshold", "0.05",
                       "--out", str(out)])
        assert rc == 0
        assert "1 edges removed" in capsys.readouterr().out
        rc = cli.main(["prune", str(net_path), "--threshold", "0",
                       "--out", str(out)])
        assert rc == 0
        assert "0 edges removed" in capsys.readouterr().out

    def test_prune_sweeps_isolated_nodes(self, workdir, capsys):
        spec = {
            "layer_sizes": [1, 2, 1],
            "activations": ["linear", "sigmoid", "sigmoid"],
            "head": {"activation": "sigmoid",
                     "loss": "binary_cross_entropy"},
            "wiring": [{"from": 0, "to": 1, "density": 1.0},
                       {"from": 1, "to": 2, "density": 1.0}],
            "seed": 2,
        }
        spec_path = write_spec(workdir / "s.json", spec)
        net_path = workdir / "n.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        net = from_bytes(net_path.read_bytes())
        # make one hidden node's outgoing edge tiny so pruning isolates it
        hidden = net.layers[1].nodes[0]
        hidden.edges[0].weight = 1e-9
        from dyann import to_bytes
        net_path.write_bytes(to_bytes(net))
        out = workdir / "swept.json"
        rc = cli.main(["prune", str(net_path), "--threshold", "1e-6",
                       "--sweep-isolated", "--out", str(out)])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "1 edges removed" in printed
        assert "1 isolated nodes swept" in printed
        swept = from_bytes(out.read_bytes())
        assert swept.layer_sizes() == [1, 1, 1]
        from dyann import check_invariants
        check_invariants(swept)


class TestCheck:
    def test_healthy_net_passes(self, workdir, capsys):
        spec_path = write_spec(workdir / "spec.json")
        net_path = workdir / "net.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        csv_path = write_xor_csv(workdir / "xor.csv")
        rc = cli.main(["check", str(net_path), csv_path])
        out = capsys.readouterr().out
        assert rc == 0
        assert "forward max deviation" in out
        assert "gradient max relative error" in out

    def test_corrupted_engine_fails(self, workdir, capsys, monkeypatch):
        spec_path = write_spec(workdir / "spec.json")
        net_path = workdir / "net.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        csv_path = write_xor_csv(workdir / "xor.csv")

        true_forward = engine.feed_forward

        def skewed(net, x):
            return [v + 1e-6 for v in true_forward(net, x)]

        monkeypatch.setattr(cli.engine, "feed_forward", skewed)
        assert cli.main(["check", str(net_path), csv_path]) == 4

    def test_relu_kinks_reported_as_skipped(self, workdir, capsys):
        spec = {
            "layer_sizes": [1, 1, 1],
            "activations": ["linear", "relu", "identity"],
            "head": {"activation": "identity", "loss": "half_mse"},
            "wiring": [{"from": 0, "to": 1, "density": 1.0},
                       {"from": 1, "to": 2, "density": 1.0}],
            "seed": 4,
        }
        spec_path = write_spec(workdir / "s.json", spec)
        net_path = workdir / "n.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        csv_path = workdir / "d.csv"
        # input 0 puts the relu pre-activation exactly on its kink
        csv_path.write_text("0.0,1.0\n")
        rc = cli.main(["check", str(net_path), str(csv_path)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "skipped kink-crossing parameters" in out


class TestExportDot:
    def test_tiny_graph(self, workdir):
        spec = {
            "layer_sizes": [1, 1],
            "head": {"activation": "identity", "loss": "half_mse"},
            "wiring": [{"from": 0, "to": 1, "density": 1.0}],
            "seed": 1,
        }
        spec_path = write_spec(workdir / "s.json", spec)
        net_path = workdir / "n.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        dot_path = workdir / "g.dot"
        assert cli.main(["export-dot", str(net_path), str(dot_path)]) == 0
        text = dot_path.read_text()
        assert text.count("label=\"(") == 2  # two nodes
        assert text.count("->") == 1
        assert "cluster_0" in text and "cluster_1" in text

    def test_skip_edge_crosses_clusters(self, workdir):
        spec = {
            "layer_sizes": [1, 1, 1],
            "activations": ["linear", "tanh", "identity"],
            "head": {"activation": "identity", "loss": "half_mse"},
            "wiring": [{"from": 0, "to": 2, "density": 1.0}],
            "seed": 1,
        }
        spec_path = write_spec(workdir / "s.json", spec)
        net_path = workdir / "n.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        dot_path = workdir / "g.dot"
        assert cli.main(["export-dot", str(net_path), str(dot_path)]) == 0
        assert "n0_0 -> n2_0" in dot_path.read_text()

    def test_deterministic(self, workdir):
        spec_path = write_spec(workdir / "spec.json")
        net_path = workdir / "net.json"
        assert cli.main(["create", spec_path, str(net_path)]) == 0
        a, b = workdir / "a.dot", workdir / "b.dot"
        assert cli.main(["export-dot", str(net_path), str(a)]) == 0
        assert cli.main(["export-dot", str(net_path), str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

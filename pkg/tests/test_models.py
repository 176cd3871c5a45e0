"""Two-head network construction, parameter partition, checkpoints."""
import numpy as np
import pytest

from forgekit.errors import ConfigError
from forgekit.models import (NetworkSpec, TwoHeadNetwork, build_network,
                             forward_full, load_checkpoint, parameter_count,
                             save_checkpoint)
from forgekit.nn import (FullyConnected, GradientReversal, ReLU, Tensor,
                         finite_difference_gradient, relative_error,
                         softmax_cross_entropy)


def tiny_two_head(seed=0, in_dim=3, feat=4):
    rng = np.random.default_rng(seed)
    extractor = [FullyConnected(in_dim, 6, rng=rng, dtype=np.float64), ReLU(),
                 FullyConnected(6, feat, rng=rng, dtype=np.float64), ReLU()]
    source_head = [FullyConnected(feat, 2, rng=rng, dtype=np.float64)]
    domain_head = [GradientReversal(),
                   FullyConnected(feat, 5, rng=rng, dtype=np.float64), ReLU(),
                   FullyConnected(5, 2, rng=rng, dtype=np.float64)]
    return TwoHeadNetwork(extractor, source_head, domain_head)


class TestBuildNetwork:
    def test_same_seed_bit_identical(self):
        spec = NetworkSpec(preset="alexnet_small", input_side=32)
        a = build_network(spec, seed=4)
        b = build_network(spec, seed=4)
        for pa, pb in zip(a.all_parameters(), b.all_parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_different_seed_differs(self):
        spec = NetworkSpec(preset="alexnet_small", input_side=32)
        a = build_network(spec, seed=4)
        b = build_network(spec, seed=5)
        assert any(not np.array_equal(pa.data, pb.data)
                   for pa, pb in zip(a.all_parameters(), b.all_parameters()))

    def test_alexnet_feature_length_256(self):
        net = build_network(NetworkSpec(preset="alexnet_small", input_side=64), 0)
        x = Tensor(np.random.default_rng(0).uniform(
            0, 1, (2, 3, 64, 64)).astype(np.float32))
        feats = net.forward_features(x, cache=False)
        assert feats.shape == (2, 256)

    def test_vgg7_feature_length_256(self):
        net = build_network(NetworkSpec(preset="vgg7_small", input_side=64), 0)
        x = Tensor(np.random.default_rng(0).uniform(
            0, 1, (1, 3, 64, 64)).astype(np.float32))
        assert net.forward_features(x, cache=False).shape == (1, 256)

    def test_vgg7_has_more_parameters_than_alexnet(self):
        alex = build_network(NetworkSpec(preset="alexnet_small", input_side=64), 0)
        vgg = build_network(NetworkSpec(preset="vgg7_small", input_side=64), 0)
        assert parameter_count(vgg) > parameter_count(alex)

    def test_vgg7_has_seven_weight_layers(self):
        net = build_network(NetworkSpec(preset="vgg7_small", input_side=64), 0)
        weighted = [l for l in net.extractor if l.parameters()]
        assert len(weighted) == 7  # six convs plus the feature fc

    def test_bad_input_side_rejected(self):
        with pytest.raises(ConfigError):
            NetworkSpec(preset="alexnet_small", input_side=40)

    def test_parameter_groups_disjoint(self):
        net = build_network(NetworkSpec(preset="alexnet_small", input_side=32), 0)
        ids_e = {id(p) for p in net.extractor_parameters()}
        ids_s = {id(p) for p in net.source_parameters()}
        ids_d = {id(p) for p in net.domain_parameters()}
        assert not (ids_e & ids_s) and not (ids_e & ids_d) and not (ids_s & ids_d)


class TestForwardFull:
    def test_identical_inputs_identical_logits(self):
        net = build_network(NetworkSpec(preset="alexnet_small", input_side=32), 1)
        x = Tensor(np.random.default_rng(1).uniform(
            0, 1, (3, 3, 32, 32)).astype(np.float32))
        c1, d1, f1 = forward_full(net, x, lam=0.7)
        c2, d2, f2 = forward_full(net, x, lam=0.7)
        np.testing.assert_array_equal(c1.data, c2.data)
        np.testing.assert_array_equal(d1.data, d2.data)
        np.testing.assert_array_equal(f1.data, f2.data)

    def test_features_shared_by_both_heads(self):
        net = tiny_two_head()
        x = Tensor(np.random.default_rng(2).standard_normal((4, 3)))
        class_logits, domain_logits, feats = forward_full(net, x, lam=0.3)
        np.testing.assert_array_equal(
            net.forward_source(feats, cache=False).data, class_logits.data)
        np.testing.assert_array_equal(
            net.forward_domain(feats, 0.3, cache=False).data, domain_logits.data)

    def test_lambda_zero_blocks_domain_gradient_to_extractor(self):
        net = tiny_two_head()
        net.zero_grad()
        x = Tensor(np.random.default_rng(3).standard_normal((4, 3)))
        feats = net.forward_features(x)
        dlogits = net.forward_domain(feats, 0.0)
        _, grad = softmax_cross_entropy(dlogits, np.array([0, 1, 0, 1]))
        gfeat = net.backward_domain(grad)
        assert np.all(gfeat.data == 0.0)
        net.backward_extractor(gfeat)
        for p in net.extractor_parameters():
            assert np.all(p.grad == 0.0)

    def test_parameter_partition_in_backprop(self):
        # class loss touches only extractor+source params; domain loss only
        # extractor+domain params
        net = tiny_two_head()
        x = Tensor(np.random.default_rng(4).standard_normal((4, 3)))
        net.zero_grad()
        feats = net.forward_features(x)
        logits = net.forward_source(feats)
        _, dlog = softmax_cross_entropy(logits, np.array([0, 1, 1, 0]))
        net.backward_extractor(net.backward_source(dlog))
        assert all(np.any(p.grad != 0) for p in net.source_parameters())
        assert all(np.all(p.grad == 0) for p in net.domain_parameters())

        net.zero_grad()
        feats = net.forward_features(x)
        dlogits = net.forward_domain(feats, 1.0)
        _, ddom = softmax_cross_entropy(dlogits, np.array([0, 0, 1, 1]))
        net.backward_extractor(net.backward_domain(ddom))
        assert all(np.any(p.grad != 0) for p in net.domain_parameters())
        assert all(np.all(p.grad == 0) for p in net.source_parameters())

    def test_extractor_gradient_matches_finite_differences(self):
        net = tiny_two_head()
        x = np.random.default_rng(5).standard_normal((4, 3))
        labels = np.array([0, 1, 1, 0])
        domains = np.array([0, 0, 1, 1])
        lam = 0.6

        def total_loss():
            feats = net.forward_features(Tensor(x), cache=False)
            l_c, _ = softmax_cross_entropy(net.forward_source(feats, cache=False), labels)
            l_d, _ = softmax_cross_entropy(
                net.forward_domain(feats, lam, cache=False), domains)
            return l_c + l_d

        net.zero_grad()
        feats = net.forward_features(Tensor(x))
        _, dlog = softmax_cross_entropy(net.forward_source(feats), labels)
        gf_class = net.backward_source(dlog)
        _, ddom = softmax_cross_entropy(net.forward_domain(feats, lam), domains)
        gf_dom = net.backward_domain(ddom)
        net.backward_extractor(Tensor(gf_class.data + gf_dom.data))

        # reversal flips the domain term's sign for extractor params, so the
        # analytic extractor gradient equals grad(L_c) - lam * grad(L_d)
        def loss_signed():
            feats_ = net.forward_features(Tensor(x), cache=False)
            l_c, _ = softmax_cross_entropy(net.forward_source(feats_, cache=False), labels)
            l_d, _ = softmax_cross_entropy(
                net.forward_domain(feats_, lam, cache=False), domains)
            return l_c - lam * l_d

        numeric = finite_difference_gradient(loss_signed,
                                             net.extractor_parameters(), 1e-6)
        for p, n in zip(net.extractor_parameters(), numeric):
            assert relative_error(p.grad, n) < 1e-6
        assert total_loss() > 0  # sanity: losses well-defined


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        spec = NetworkSpec(preset="alexnet_small", input_side=32)
        net = build_network(spec, seed=9)
        path = tmp_path / "model.ckpt"
        save_checkpoint(net, path, meta={"color_space": "rgb", "seed": 9})
        loaded, meta = load_checkpoint(path)
        assert meta["color_space"] == "rgb"
        for pa, pb in zip(net.all_parameters(), loaded.all_parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_save_is_byte_stable(self, tmp_path):
        spec = NetworkSpec(preset="alexnet_small", input_side=32)
        net = build_network(spec, seed=9)
        save_checkpoint(net, tmp_path / "a.ckpt", meta={"k": 1})
        save_checkpoint(net, tmp_path / "b.ckpt", meta={"k": 1})
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_loaded_network_predicts_identically(self, tmp_path):
        spec = NetworkSpec(preset="alexnet_small", input_side=32)
        net = build_network(spec, seed=9)
        save_checkpoint(net, tmp_path / "m.ckpt")
        loaded, _ = load_checkpoint(tmp_path / "m.ckpt")
        x = Tensor(np.random.default_rng(0).uniform(
            0, 1, (2, 3, 32, 32)).astype(np.float32))
        np.testing.assert_array_equal(net.predict_classes(x),
                                      loaded.predict_classes(x))

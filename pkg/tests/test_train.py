"""Trainer contracts: schedules, MMD, step equivalences, epoch loops."""
import math

import numpy as np
import pytest

from forgekit.data import Batch, DatasetArrays
from forgekit.errors import UsageError
from forgekit.models import TwoHeadNetwork
from forgekit.nn import (Adam, FullyConnected, GradientReversal, ReLU,
                         SGDMomentum, Tensor, relative_error)
from forgekit.train import (DannConfig, DdcConfig, SourceOnlyConfig,
                            compute_mmd, dann_step, ddc_step, lambda_schedule,
                            make_optimizer, mmd_squared_with_grads,
                            source_only_step, train_arrays)


def tiny_net(seed=0, in_dim=2, hidden=12, feat=8, dtype=np.float32):
    rng = np.random.default_rng(seed)
    extractor = [FullyConnected(in_dim, hidden, rng=rng, dtype=dtype), ReLU(),
                 FullyConnected(hidden, feat, rng=rng, dtype=dtype), ReLU()]
    source_head = [FullyConnected(feat, 2, rng=rng, dtype=dtype)]
    domain_head = [GradientReversal(),
                   FullyConnected(feat, hidden, rng=rng, dtype=dtype), ReLU(),
                   FullyConnected(hidden, 2, rng=rng, dtype=dtype)]
    return TwoHeadNetwork(extractor, source_head, domain_head)


def point_batch(points, labels=None, domain=0):
    n = len(points)
    return Batch(images=Tensor(np.asarray(points, dtype=np.float32)),
                 domain_labels=np.full(n, domain, dtype=np.int64),
                 class_labels=None if labels is None else np.asarray(labels))


def blob_data(n, seed, shift=0.0, label_rule=None):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, 2)) + shift
    labels = (pts[:, 0] > shift).astype(np.int64) if label_rule is None \
        else label_rule(pts)
    return pts.astype(np.float32), labels


class TestLambdaSchedule:
    def test_annealed_zero(self):
        assert lambda_schedule(0.0, "annealed") == pytest.approx(0.0)

    def test_annealed_one(self):
        expected = 2.0 / (1.0 + math.exp(-10.0)) - 1.0
        assert lambda_schedule(1.0, "annealed") == pytest.approx(expected)
        assert expected == pytest.approx(0.99991, abs=1e-5)

    def test_constant(self):
        for p in (0.0, 0.3, 1.0):
            assert lambda_schedule(p, "constant", delta=0.5) == 0.5

    def test_progress_out_of_range(self):
        with pytest.raises(UsageError):
            lambda_schedule(1.5, "annealed")


class TestComputeMMD:
    def test_identical_sets_zero(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((6, 4))
        assert compute_mmd(x, x.copy()) <= 1e-12
        assert compute_mmd(x, x.copy(), kernel="rbf") <= 1e-6

    def test_single_points_euclidean(self):
        assert compute_mmd(np.array([[0.0, 0.0]]),
                           np.array([[3.0, 4.0]])) == pytest.approx(5.0)

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a = rng.standard_normal((5, 3))
            b = rng.standard_normal((7, 3))
            for kernel in ("identity", "rbf"):
                ab = compute_mmd(a, b, kernel=kernel)
                ba = compute_mmd(b, a, kernel=kernel)
                assert ab == pytest.approx(ba, abs=1e-12)
                assert ab >= 0.0

    def test_identity_matches_double_loop_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.standard_normal((8, 4))
            b = rng.standard_normal((6, 4))
            # brute-force kernel-mean form with the linear kernel
            kss = sum(float(x @ y) for x in a for y in a) / (8 * 8)
            ktt = sum(float(x @ y) for x in b for y in b) / (6 * 6)
            kst = sum(float(x @ y) for x in a for y in b) / (8 * 6)
            oracle = math.sqrt(max(0.0, kss + ktt - 2 * kst))
            assert compute_mmd(a, b) == pytest.approx(oracle, abs=1e-9)

    def test_rbf_matches_double_loop_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((5, 3))
        b = rng.standard_normal((4, 3))
        sigma = 1.3

        def k(x, y):
            return math.exp(-float(np.sum((x - y) ** 2)) / (2 * sigma * sigma))

        kss = sum(k(x, y) for x in a for y in a) / 25
        ktt = sum(k(x, y) for x in b for y in b) / 16
        kst = sum(k(x, y) for x in a for y in b) / 20
        oracle = math.sqrt(max(0.0, kss + ktt - 2 * kst))
        assert compute_mmd(a, b, kernel="rbf", bandwidth=sigma) == \
            pytest.approx(oracle, abs=1e-9)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(UsageError):
            compute_mmd(np.zeros((2, 3)), np.zeros((2, 4)))

    @pytest.mark.parametrize("kernel", ["identity", "rbf"])
    def test_gradients_match_finite_differences(self, kernel):
        rng = np.random.default_rng(4)
        s = rng.standard_normal((4, 3))
        t = rng.standard_normal((5, 3))
        mmd2, ds, dt = mmd_squared_with_grads(s, t, kernel=kernel, bandwidth=0.9)
        eps = 1e-6
        for arr, grad in ((s, ds), (t, dt)):
            numeric = np.zeros_like(arr)
            flat = arr.reshape(-1)
            nflat = numeric.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                plus = mmd_squared_with_grads(s, t, kernel=kernel, bandwidth=0.9,
                                              need_grads=False)[0]
                flat[i] = orig - eps
                minus = mmd_squared_with_grads(s, t, kernel=kernel, bandwidth=0.9,
                                               need_grads=False)[0]
                flat[i] = orig
                nflat[i] = (plus - minus) / (2 * eps)
            assert relative_error(grad, numeric) < 1e-6


def snapshot(params):
    return [p.data.copy() for p in params]


def assert_bit_equal(a, b):
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


class TestStepEquivalences:
    def test_dann_lambda_zero_matches_source_only_bitwise(self):
        pts_s, ys = blob_data(8, 0)
        pts_t, _ = blob_data(8, 1, shift=2.0)
        sb = point_batch(pts_s, ys, domain=0)
        tb = point_batch(pts_t, domain=1)

        net_a = tiny_net(7)
        net_b = tiny_net(7)
        opt_a = Adam(net_a.all_parameters(), lr=1e-3)
        opt_b = Adam(net_b.extractor_parameters() + net_b.source_parameters(), lr=1e-3)
        for _ in range(3):
            dann_step(net_a, sb, tb, 0.0, opt_a)
            source_only_step(net_b, sb, opt_b)
        assert_bit_equal(snapshot(net_a.extractor_parameters()),
                         snapshot(net_b.extractor_parameters()))
        assert_bit_equal(snapshot(net_a.source_parameters()),
                         snapshot(net_b.source_parameters()))

    def test_ddc_alpha_zero_matches_source_only_bitwise(self):
        pts_s, ys = blob_data(8, 0)
        pts_t, _ = blob_data(8, 1, shift=2.0)
        sb = point_batch(pts_s, ys, domain=0)
        tb = point_batch(pts_t, domain=1)

        net_a = tiny_net(7)
        net_b = tiny_net(7)
        config = DdcConfig(lr=1e-3, momentum=0.9, mmd_penalty=0.0)
        opt_a = SGDMomentum(net_a.extractor_parameters() + net_a.source_parameters(),
                            lr=1e-3, momentum=0.9)
        opt_b = SGDMomentum(net_b.extractor_parameters() + net_b.source_parameters(),
                            lr=1e-3, momentum=0.9)
        for _ in range(3):
            ddc_step(net_a, sb, tb, config, opt_a)
            source_only_step(net_b, sb, opt_b)
        assert_bit_equal(snapshot(net_a.extractor_parameters()),
                         snapshot(net_b.extractor_parameters()))
        assert_bit_equal(snapshot(net_a.source_parameters()),
                         snapshot(net_b.source_parameters()))

    def test_dann_domain_loss_near_ln2_at_init(self):
        # with a freshly initialized domain head the logits are near-uniform
        pts_s, ys = blob_data(16, 2)
        pts_t, _ = blob_data(16, 3, shift=1.0)
        net = tiny_net(11)
        opt = Adam(net.all_parameters(), lr=1e-3)
        _, loss_d = dann_step(net, point_batch(pts_s, ys, 0),
                              point_batch(pts_t, domain=1), 0.5, opt)
        assert loss_d == pytest.approx(math.log(2.0), abs=0.15)

    def test_dann_step_decreases_head_losses_on_frozen_features(self):
        from forgekit.nn import softmax_cross_entropy
        pts_s, ys = blob_data(16, 4)
        pts_t, _ = blob_data(16, 5, shift=2.0)
        sb = point_batch(pts_s, ys, 0)
        tb = point_batch(pts_t, domain=1)
        net = tiny_net(13)

        feats_s = net.forward_features(sb.images, cache=False)
        feats_t = net.forward_features(tb.images, cache=False)

        def head_losses():
            l_s, _ = softmax_cross_entropy(
                net.forward_source(feats_s, cache=False), ys)
            d_s, _ = softmax_cross_entropy(
                net.forward_domain(feats_s, 0.0, cache=False), sb.domain_labels)
            d_t, _ = softmax_cross_entropy(
                net.forward_domain(feats_t, 0.0, cache=False), tb.domain_labels)
            return l_s + 0.5 * (d_s + d_t)

        before = head_losses()
        dann_step(net, sb, tb, 0.5, Adam(net.all_parameters(), lr=1e-3))
        assert head_losses() < before

    def test_ddc_same_batch_gives_zero_mmd(self):
        pts_s, ys = blob_data(8, 6)
        sb = point_batch(pts_s, ys, 0)
        tb = point_batch(pts_s, domain=1)
        net = tiny_net(1)
        config = DdcConfig(lr=1e-4, mmd_penalty=0.25)
        opt = make_optimizer(net, config)
        _, mmd2 = ddc_step(net, sb, tb, config, opt)
        assert mmd2 == pytest.approx(0.0, abs=1e-15)

    def test_huge_penalty_shrinks_mmd(self):
        # separable blobs two units apart: with a dominant 1e6 penalty the
        # feature discrepancy must fall over 50 steps (median of 5 seeds)
        ratios = []
        for seed in range(5):
            pts_s, ys = blob_data(32, 10 + seed)
            pts_t, _ = blob_data(32, 20 + seed, shift=2.0)
            sb = point_batch(pts_s, ys, 0)
            tb = point_batch(pts_t, domain=1)
            net = tiny_net(seed)
            config = DdcConfig(lr=1e-7, momentum=0.9, mmd_penalty=1e6)
            opt = make_optimizer(net, config)
            first = last = None
            for _ in range(50):
                _, mmd2 = ddc_step(net, sb, tb, config, opt)
                first = mmd2 if first is None else first
                last = mmd2
            ratios.append(last / max(first, 1e-12))
        assert np.median(ratios) < 0.5

    def test_missing_source_labels_rejected(self):
        pts_s, _ = blob_data(4, 0)
        pts_t, _ = blob_data(4, 1)
        net = tiny_net(0)
        with pytest.raises(UsageError):
            dann_step(net, point_batch(pts_s), point_batch(pts_t, domain=1),
                      0.5, Adam(net.all_parameters()))


def arrays_from(points, labels):
    return DatasetArrays([f"p{i}" for i in range(len(points))],
                         np.asarray(points, dtype=np.float32),
                         np.asarray(labels, dtype=np.int64))


class TestTrainArrays:
    def test_zero_epochs_no_change(self):
        pts, ys = blob_data(16, 0)
        net = tiny_net(3)
        before = snapshot(net.all_parameters())
        history = train_arrays(net, arrays_from(pts, ys), None,
                               SourceOnlyConfig(epochs=0, batch_size=8))
        assert history.entries == []
        assert_bit_equal(before, snapshot(net.all_parameters()))

    def test_same_seed_identical_final_parameters(self):
        pts_s, ys = blob_data(32, 1)
        pts_t, yt = blob_data(32, 2, shift=1.0)
        config = DannConfig(epochs=2, batch_size=8, seed=5)
        net_a, net_b = tiny_net(9), tiny_net(9)
        train_arrays(net_a, arrays_from(pts_s, ys), arrays_from(pts_t, yt), config)
        train_arrays(net_b, arrays_from(pts_s, ys), arrays_from(pts_t, yt), config)
        assert_bit_equal(snapshot(net_a.all_parameters()),
                         snapshot(net_b.all_parameters()))

    def test_dann_constant_zero_trajectory_equals_source_only(self):
        pts_s, ys = blob_data(32, 3)
        pts_t, yt = blob_data(32, 4, shift=1.5)
        dann_cfg = DannConfig(epochs=1, batch_size=8, seed=2,
                              schedule="constant", delta=0.0)
        solo_cfg = SourceOnlyConfig(optimizer="adam", lr=dann_cfg.lr,
                                    epochs=1, batch_size=8, seed=2)
        net_a, net_b = tiny_net(21), tiny_net(21)
        train_arrays(net_a, arrays_from(pts_s, ys), arrays_from(pts_t, yt), dann_cfg)
        train_arrays(net_b, arrays_from(pts_s, ys), None, solo_cfg)
        assert_bit_equal(snapshot(net_a.extractor_parameters()),
                         snapshot(net_b.extractor_parameters()))
        assert_bit_equal(snapshot(net_a.source_parameters()),
                         snapshot(net_b.source_parameters()))

    def test_source_only_loss_nonincreasing_on_separable_data(self):
        pts, ys = blob_data(64, 5)
        net = tiny_net(17)
        history = train_arrays(net, arrays_from(pts, ys), None,
                               SourceOnlyConfig(epochs=5, batch_size=16, seed=1))
        losses = [e.loss_class for e in history.entries]
        assert all(b <= a + 1e-6 for a, b in zip(losses, losses[1:]))

    def test_history_csv_shape(self):
        pts, ys = blob_data(16, 6)
        net = tiny_net(2)
        history = train_arrays(net, arrays_from(pts, ys), None,
                               SourceOnlyConfig(epochs=2, batch_size=8, seed=1))
        csv = history.to_csv()
        lines = csv.strip().split("\n")
        assert lines[0].startswith("epoch,")
        assert len(lines) == 3

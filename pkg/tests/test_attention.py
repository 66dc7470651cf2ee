"""Attention paths, the multi-head block, classifier head, and cross-entropy."""

import numpy as np
import pytest

from comgrl import autodiff as ad
from comgrl.attention import (
    AttentionLayer,
    ClassifierHead,
    cross_entropy,
    efficient_attention,
    standard_attention,
)

from helpers import assert_grad_matches


def np_softmax(x, axis):
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def make_weights(rng, in_dim, head_dim):
    return tuple(ad.constant(rng.standard_normal((in_dim, head_dim))) for _ in range(3))


class TestStandardAttention:
    def test_single_node_returns_its_value_vector(self):
        rng = np.random.default_rng(0)
        wq, wk, wv = make_weights(rng, 4, 3)
        z = ad.constant(rng.standard_normal((1, 4)))
        out = standard_attention(z, wq, wk, wv).values
        np.testing.assert_allclose(out, z.values @ wv.values, atol=1e-12)

    def test_identical_rows_give_identical_outputs(self):
        rng = np.random.default_rng(1)
        wq, wk, wv = make_weights(rng, 4, 3)
        row = rng.standard_normal((1, 4))
        z = ad.constant(np.repeat(row, 5, axis=0))
        out = standard_attention(z, wq, wk, wv).values
        np.testing.assert_allclose(out, np.repeat(out[:1], 5, axis=0), atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_outputs_in_convex_hull_of_values(self, seed):
        rng = np.random.default_rng(seed)
        n, d_in, d = rng.integers(2, 10), 5, 4
        wq, wk, wv = make_weights(rng, d_in, d)
        z = ad.constant(rng.uniform(-3, 3, (n, d_in)))
        out = standard_attention(z, wq, wk, wv).values
        v = z.values @ wv.values
        assert np.all(out >= v.min(axis=0) - 1e-9)
        assert np.all(out <= v.max(axis=0) + 1e-9)


class TestEfficientAttention:
    def test_single_node_returns_its_value_vector(self):
        rng = np.random.default_rng(2)
        wq, wk, wv = make_weights(rng, 4, 3)
        z = ad.constant(rng.standard_normal((1, 4)))
        out = efficient_attention(z, wq, wk, wv).values
        np.testing.assert_allclose(out, z.values @ wv.values, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_outputs_within_context_row_range(self, seed):
        rng = np.random.default_rng(seed)
        n, d_in, d = rng.integers(2, 12), 6, 4
        wq, wk, wv = make_weights(rng, d_in, d)
        z = ad.constant(rng.uniform(-3, 3, (n, d_in)))
        out = efficient_attention(z, wq, wk, wv).values
        context = np_softmax(z.values @ wk.values, axis=0).T @ (z.values @ wv.values)
        assert np.all(out >= context.min(axis=0) - 1e-9)
        assert np.all(out <= context.max(axis=0) + 1e-9)

    def test_matches_factorized_numpy_composition(self):
        rng = np.random.default_rng(3)
        wq, wk, wv = make_weights(rng, 5, 4)
        z = ad.constant(rng.standard_normal((7, 5)))
        out = efficient_attention(z, wq, wk, wv).values
        q = np_softmax(z.values @ wq.values, axis=1)
        k = np_softmax(z.values @ wk.values, axis=0)
        expected = q @ (k.T @ (z.values @ wv.values))
        np.testing.assert_allclose(out, expected, atol=1e-12)


def layer_oracle(z, layer):
    """Independent numpy composition of the block's arithmetic."""
    heads = []
    for i in range(layer.heads):
        q = np_softmax(z @ layer.w_q[i].values, axis=1)
        k = np_softmax(z @ layer.w_k[i].values, axis=0)
        heads.append(q @ (k.T @ (z @ layer.w_v[i].values)))
    mixed = np.concatenate(heads, axis=1) @ layer.w_mix.values
    if z.shape[1] == layer.hidden:
        mixed = mixed + z
    mean = mixed.mean(axis=1, keepdims=True)
    var = mixed.var(axis=1, keepdims=True)
    normed = (mixed - mean) / np.sqrt(var + 1e-5)
    normed = normed * layer.ln_gain.values + layer.ln_shift.values
    ff = np.maximum(normed @ layer.w_ff_in.values, 0.0) @ layer.w_ff_out.values
    return ff + mixed


class TestAttentionLayer:
    def test_output_shape(self):
        layer = AttentionLayer(12, 12, 4, np.random.default_rng(0))
        out = layer(ad.constant(np.random.default_rng(1).standard_normal((9, 12))))
        assert out.shape == (9, 12)

    def test_matches_composition_oracle(self):
        rng = np.random.default_rng(4)
        layer = AttentionLayer(8, 8, 2, rng)
        z = rng.standard_normal((5, 8))
        out = layer(ad.constant(z)).values
        np.testing.assert_allclose(out, layer_oracle(z, layer), atol=1e-10, rtol=0)

    def test_width_changing_first_layer_skips_residual(self):
        rng = np.random.default_rng(5)
        layer = AttentionLayer(6, 8, 2, rng)
        z = rng.standard_normal((4, 6))
        out = layer(ad.constant(z)).values
        assert out.shape == (4, 8)
        np.testing.assert_allclose(out, layer_oracle(z, layer), atol=1e-10, rtol=0)

    def test_zeroed_heads_reduce_to_residual_and_feedforward(self):
        rng = np.random.default_rng(6)
        layer = AttentionLayer(8, 8, 2, rng)
        for w in layer.w_v:
            w.values[...] = 0.0
        z = rng.standard_normal((5, 8))
        out = layer(ad.constant(z)).values
        mean = z.mean(axis=1, keepdims=True)
        normed = (z - mean) / np.sqrt(z.var(axis=1, keepdims=True) + 1e-5)
        normed = normed * layer.ln_gain.values + layer.ln_shift.values
        expected = np.maximum(normed @ layer.w_ff_in.values, 0) @ layer.w_ff_out.values + z
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_single_head_full_width_equals_manual_path(self):
        rng = np.random.default_rng(7)
        layer = AttentionLayer(8, 8, 1, rng)
        z = rng.standard_normal((6, 8))
        out = layer(ad.constant(z)).values
        zt = ad.constant(z)
        head = efficient_attention(zt, layer.w_q[0], layer.w_k[0], layer.w_v[0])
        mixed = ad.add(ad.matmul(head, layer.w_mix), zt)
        normed = ad.layer_norm(mixed, layer.ln_gain, layer.ln_shift)
        ff = ad.matmul(ad.relu(ad.matmul(normed, layer.w_ff_in)), layer.w_ff_out)
        np.testing.assert_array_equal(out, ad.add(ff, mixed).values)

    @pytest.mark.parametrize("seed", range(3))
    def test_outputs_finite_for_wide_inputs(self, seed):
        rng = np.random.default_rng(seed)
        layer = AttentionLayer(8, 8, 4, rng, mode="efficient")
        z = rng.uniform(-10, 10, (20, 8))
        assert np.all(np.isfinite(layer(ad.constant(z)).values))

    def test_standard_mode_uses_quadratic_path(self):
        rng = np.random.default_rng(8)
        layer = AttentionLayer(8, 8, 2, rng, mode="standard")
        z = ad.constant(rng.standard_normal((5, 8)))
        head = standard_attention(z, layer.w_q[0], layer.w_k[0], layer.w_v[0])
        eff = efficient_attention(z, layer.w_q[0], layer.w_k[0], layer.w_v[0])
        assert not np.allclose(head.values, eff.values)
        assert np.all(np.isfinite(layer(z).values))

    def test_rejects_indivisible_heads(self):
        with pytest.raises(ValueError, match="divisible"):
            AttentionLayer(8, 9, 2, np.random.default_rng(0))


class TestClassifierHead:
    def test_zero_weights_give_uniform_rows(self):
        head = ClassifierHead(6, 4, np.random.default_rng(0))
        head.w_cls.values[...] = 0.0
        probs = head(ad.constant(np.random.default_rng(1).standard_normal((5, 6)))).values
        np.testing.assert_allclose(probs, 0.25, atol=1e-12)

    def test_softmax_shift_invariance(self):
        logits = np.array([[1.0, -2.0, 0.5]])
        base = ad.row_softmax(ad.constant(logits)).values
        shifted = ad.row_softmax(ad.constant(logits + 7.3)).values
        np.testing.assert_allclose(base, shifted, atol=1e-12)

    def test_two_class_toy_logits(self):
        probs = ad.row_softmax(ad.constant([[2.0, 0.0]])).values
        np.testing.assert_allclose(probs, [[0.8808, 0.1192]], atol=1e-4)


class TestCrossEntropy:
    def test_perfect_one_hot_prediction_is_zero(self):
        probs = ad.constant([[1.0, 0.0], [0.0, 1.0]])
        loss = cross_entropy(probs, np.array([0, 1]), np.array([0, 1]))
        assert loss.item() == 0.0

    def test_uniform_prediction_costs_log_k_per_node(self):
        k, n = 4, 3
        probs = ad.constant(np.full((n, k), 1.0 / k))
        loss = cross_entropy(probs, np.zeros(n, dtype=int), np.arange(n))
        np.testing.assert_allclose(loss.item(), n * np.log(4), rtol=1e-12)

    def test_permutation_invariant_over_index_order(self):
        rng = np.random.default_rng(9)
        probs_values = np_softmax(rng.standard_normal((6, 3)), axis=1)
        labels = rng.integers(0, 3, 6)
        idx = np.array([0, 2, 4])
        a = cross_entropy(ad.constant(probs_values), labels, idx).item()
        b = cross_entropy(ad.constant(probs_values), labels, idx[::-1]).item()
        assert a == b

    def test_rejects_empty_index_set(self):
        with pytest.raises(ValueError, match="empty"):
            cross_entropy(ad.constant(np.ones((2, 2))), np.array([0, 1]), np.array([], dtype=int))


class TestEndToEndGradients:
    def test_spot_check_parameters_through_two_layer_stack(self):
        """Central differences on randomly chosen parameter entries, loss =
        cross-entropy through encoder-free two-layer attention + classifier."""
        rng = np.random.default_rng(10)
        layers = [AttentionLayer(6, 6, 2, rng), AttentionLayer(6, 6, 2, rng)]
        head = ClassifierHead(6, 3, rng)
        z0 = rng.standard_normal((7, 6))
        labels = rng.integers(0, 3, 7)
        idx = np.arange(7)
        params = [p for layer in layers for p in layer.parameters()] + head.parameters()

        def loss_value():
            z = ad.constant(z0)
            for layer in layers:
                z = layer(z)
            return cross_entropy(head(z), labels, idx)

        loss = loss_value()
        loss.backward()
        picks = rng.integers(0, len(params), size=12)
        h = 1e-5
        for pi in picks:
            p = params[pi]
            i = rng.integers(0, p.rows)
            j = rng.integers(0, p.cols)
            orig = p.values[i, j]
            p.values[i, j] = orig + h
            hi = loss_value().item()
            p.values[i, j] = orig - h
            lo = loss_value().item()
            p.values[i, j] = orig
            fd = (hi - lo) / (2 * h)
            auto = p.grad[i, j]
            denom = max(abs(fd), abs(auto), 1e-8)
            assert abs(auto - fd) / denom < 1e-3, f"param {pi} entry ({i},{j})"

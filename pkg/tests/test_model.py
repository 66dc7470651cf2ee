"""Model assembly: forward wiring, parameter registry, state round-trip."""

import numpy as np
import pytest

from comgrl.model import ComGRLModel


def test_forward_shapes_full_pipeline():
    model = ComGRLModel(in_dim=5, n_classes=3, rng=np.random.default_rng(0),
                        hidden=16, heads=4, n_layers=2)
    x = np.random.default_rng(1).standard_normal((9, 5))
    embedding, probs = model.forward(x)
    assert embedding.shape == (9, 16)
    assert probs.shape == (9, 3)
    np.testing.assert_allclose(probs.values.sum(axis=1), 1.0, atol=1e-9)


def test_encoder_disabled_raw_width_enters_attention():
    model = ComGRLModel(in_dim=5, n_classes=3, rng=np.random.default_rng(0),
                        hidden=16, heads=4, n_layers=2, use_encoder=False)
    embedding, probs = model.forward(np.ones((4, 5)))
    assert embedding is None
    assert model.layers[0].in_dim == 5
    assert probs.shape == (4, 3)


def test_attention_disabled_classifies_embedding():
    model = ComGRLModel(in_dim=5, n_classes=3, rng=np.random.default_rng(0),
                        hidden=16, heads=4, use_attention=False)
    embedding, probs = model.forward(np.ones((4, 5)))
    assert model.layers == []
    assert embedding.shape == (4, 16)
    assert probs.shape == (4, 3)


def test_both_disabled_is_linear_softmax_classifier():
    model = ComGRLModel(in_dim=5, n_classes=3, rng=np.random.default_rng(0),
                        hidden=16, heads=4, use_encoder=False, use_attention=False)
    assert model.head.w_cls.shape == (5, 3)
    _, probs = model.forward(np.ones((2, 5)))
    assert probs.shape == (2, 3)


def test_parameter_count_and_state_round_trip():
    model = ComGRLModel(in_dim=5, n_classes=3, rng=np.random.default_rng(0),
                        hidden=16, heads=4, n_layers=2)
    params = model.parameters()
    # encoder 2 + per layer (3*4 heads + mix + 2 LN + 2 ff) + classifier 1
    assert len(params) == 2 + 2 * (12 + 5) + 1
    state = model.state_arrays()
    for p in params:
        p.values[...] = 0.0
    model.load_state_arrays(state)
    for p, s in zip(model.parameters(), state):
        np.testing.assert_array_equal(p.values, s)


def test_load_state_rejects_wrong_length():
    model = ComGRLModel(in_dim=5, n_classes=3, rng=np.random.default_rng(0),
                        hidden=16, heads=4)
    with pytest.raises(ValueError, match="arrays"):
        model.load_state_arrays([np.zeros((1, 1))])


def test_initialization_is_fan_in_scaled_uniform():
    model = ComGRLModel(in_dim=100, n_classes=3, rng=np.random.default_rng(0),
                        hidden=16, heads=4, n_layers=1)
    w1 = model.encoder.w1.values
    bound = 1.0 / np.sqrt(100)
    assert np.abs(w1).max() <= bound
    assert np.abs(w1).max() > 0.5 * bound


def test_dropout_only_affects_training_forward():
    model = ComGRLModel(in_dim=5, n_classes=3, rng=np.random.default_rng(0),
                        hidden=16, heads=4, dropout_rate=0.5)
    x = np.random.default_rng(2).standard_normal((6, 5))
    _, eval_probs = model.forward(x, training=False)
    _, eval_again = model.forward(x, training=False)
    np.testing.assert_array_equal(eval_probs.values, eval_again.values)
    _, train_probs = model.forward(x, training=True, rng=np.random.default_rng(3))
    assert not np.array_equal(train_probs.values, eval_probs.values)

"""Adam, EMA and gradient clipping contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowlab.errors import ConfigError, ShapeError
from flowlab.optim import (
    AdamState,
    FlatParams,
    adam_step,
    ema_update,
    ema_update_flat,
    grad_clip,
    grad_clip_flat,
)
from flowlab.tensor import Tensor


def test_zero_gradient_leaves_params_unchanged():
    p = {"w": np.array([1.0, -2.0], dtype=np.float32)}
    g = {"w": np.zeros(2, dtype=np.float32)}
    before = p["w"].copy()
    adam_step(p, g, AdamState(lr=0.1, weight_decay=0.0))
    np.testing.assert_array_equal(p["w"], before)


def test_single_step_hand_case():
    # beta1 = beta2 = 0, wd = 0, g = 1, lr = 0.1: p drops by 0.1/(1 + eps)
    eps = 1e-8
    p = {"w": np.array([0.0], dtype=np.float64)}
    g = {"w": np.array([1.0], dtype=np.float64)}
    adam_step(p, g, AdamState(lr=0.1, beta1=0.0, beta2=0.0, eps=eps, weight_decay=0.0))
    np.testing.assert_allclose(p["w"], [-0.1 / (1.0 + eps)], rtol=1e-12)


def test_quadratic_bowl_converges():
    p = {"w": np.array([3.0, -2.0], dtype=np.float32)}
    state = AdamState(lr=2e-2, beta1=0.9, beta2=0.95)
    for _ in range(1000):
        g = {"w": 2.0 * p["w"]}
        adam_step(p, g, state)
    assert np.abs(p["w"]).max() < 1e-3


def test_weight_decay_is_decoupled():
    # with zero gradient, weight decay alone shrinks the parameter
    p = {"w": np.array([1.0], dtype=np.float64)}
    g = {"w": np.array([0.0], dtype=np.float64)}
    adam_step(p, g, AdamState(lr=0.1, weight_decay=0.5))
    np.testing.assert_allclose(p["w"], [1.0 - 0.1 * 0.5], rtol=1e-12)


def test_invalid_lr_rejected():
    with pytest.raises(ConfigError):
        AdamState(lr=0.0)
    with pytest.raises(ConfigError):
        AdamState(lr=-1e-4)


def test_gradient_shape_mismatch_rejected():
    p = {"w": np.zeros(3, dtype=np.float32)}
    g = {"w": np.zeros(2, dtype=np.float32)}
    with pytest.raises(ShapeError):
        adam_step(p, g, AdamState())


class TestGradClip:
    def test_below_threshold_unchanged(self):
        g = {"a": np.array([0.3, 0.4], dtype=np.float64)}  # norm 0.5
        grad_clip(g, 1.0)
        np.testing.assert_array_equal(g["a"], [0.3, 0.4])

    def test_above_threshold_scaled(self):
        g = {"a": np.array([1.2, 1.6], dtype=np.float64)}  # norm 2.0
        grad_clip(g, 1.0)
        np.testing.assert_allclose(g["a"], [0.6, 0.8], rtol=1e-12)

    def test_post_clip_norm_bounded(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            g = {f"p{i}": rng.standard_normal(5) * (trial + 1) for i in range(3)}
            grad_clip(g, 1.0)
            norm = np.sqrt(sum(float(np.sum(v * v)) for v in g.values()))
            assert norm <= 1.0 + 1e-6

    def test_invalid_max_norm(self):
        with pytest.raises(ConfigError):
            grad_clip({"a": np.zeros(1)}, 0.0)

    def test_flat_variant_matches_dict(self):
        rng = np.random.default_rng(1)
        vec = rng.standard_normal(64).astype(np.float32) * 3
        flat = vec.copy()
        split = {"a": vec[:20].copy(), "b": vec[20:].copy()}
        grad_clip_flat(flat, 1.0)
        grad_clip(split, 1.0)
        np.testing.assert_allclose(flat, np.concatenate([split["a"], split["b"]]), rtol=1e-6)


class TestEma:
    def test_beta_zero_copies_params(self):
        ema = {"w": np.zeros(3, dtype=np.float32)}
        params = {"w": np.array([1.0, 2.0, 3.0], dtype=np.float32)}
        ema_update(ema, params, beta=0.0)
        np.testing.assert_array_equal(ema["w"], params["w"])

    def test_beta_one_keeps_ema(self):
        ema = {"w": np.array([5.0], dtype=np.float32)}
        ema_update(ema, {"w": np.array([1.0], dtype=np.float32)}, beta=1.0)
        np.testing.assert_array_equal(ema["w"], [5.0])

    def test_midpoint(self):
        ema = {"w": np.array([0.0], dtype=np.float32)}
        ema_update(ema, {"w": np.array([2.0], dtype=np.float32)}, beta=0.5)
        np.testing.assert_allclose(ema["w"], [1.0])

    def test_accepts_tensor_params(self):
        ema = {"w": np.array([0.0], dtype=np.float32)}
        ema_update(ema, {"w": Tensor(np.array([2.0], dtype=np.float32))}, beta=0.5)
        np.testing.assert_allclose(ema["w"], [1.0])

    def test_invalid_beta(self):
        with pytest.raises(ConfigError):
            ema_update({}, {}, beta=1.5)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ema_update(
                {"w": np.zeros(2, dtype=np.float32)},
                {"w": np.zeros(3, dtype=np.float32)},
                beta=0.5,
            )

    def test_flat_variant_matches_dict(self):
        ema_d = {"w": np.array([1.0, -1.0], dtype=np.float32)}
        par_d = {"w": np.array([3.0, 5.0], dtype=np.float32)}
        ema_f = ema_d["w"].copy()
        ema_update(ema_d, par_d, beta=0.9)
        ema_update_flat(ema_f, par_d["w"], beta=0.9)
        np.testing.assert_array_equal(ema_f, ema_d["w"])


class TestFlatParams:
    def test_views_track_updates(self):
        t1 = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
        t2 = Tensor(np.zeros(3, dtype=np.float32), requires_grad=True)
        flat = FlatParams({"a": t1, "b": t2})
        flat.flat += 1.0
        np.testing.assert_array_equal(t1.data, np.full((2, 2), 2.0))
        np.testing.assert_array_equal(t2.data, np.ones(3))

    def test_gather_grads_and_clear(self):
        t1 = Tensor(np.ones(2, dtype=np.float32), requires_grad=True)
        flat = FlatParams({"a": t1})
        t1.grad = np.array([3.0, 4.0], dtype=np.float32)
        buf = flat.gather_grads()
        np.testing.assert_array_equal(buf, [3.0, 4.0])
        assert t1.grad is None

    def test_flat_adam_matches_per_param_adam(self):
        rng = np.random.default_rng(2)
        values = {k: rng.standard_normal(s).astype(np.float32) for k, s in
                  [("a", (3, 2)), ("b", (4,))]}
        grads = {k: rng.standard_normal(v.shape).astype(np.float32) for k, v in values.items()}

        split_p = {k: v.copy() for k, v in values.items()}
        state_d = AdamState(lr=1e-2)
        for _ in range(5):
            adam_step(split_p, grads, state_d)

        tensors = {k: Tensor(v.copy(), requires_grad=True) for k, v in values.items()}
        flat = FlatParams(tensors)
        gflat = np.concatenate([grads[k].reshape(-1) for k in tensors])
        state_f = AdamState(lr=1e-2)
        for _ in range(5):
            adam_step({"flat": flat.flat}, {"flat": gflat}, state_f)

        for k in values:
            np.testing.assert_allclose(tensors[k].data, split_p[k], rtol=1e-6, atol=1e-7)

    def test_load_preserves_views(self):
        t1 = Tensor(np.zeros(2, dtype=np.float32), requires_grad=True)
        flat = FlatParams({"a": t1})
        flat.load({"a": np.array([7.0, 8.0], dtype=np.float32)})
        np.testing.assert_array_equal(flat.flat, [7.0, 8.0])
        assert t1.data.base is flat.flat


@given(st.floats(1e-5, 1e3), st.integers(1, 30))
@settings(max_examples=40, deadline=None)
def test_clip_never_increases_norm(max_norm, seed):
    rng = np.random.default_rng(seed)
    g = {"a": rng.standard_normal(8) * 10}
    before = float(np.linalg.norm(g["a"]))
    grad_clip(g, max_norm)
    after = float(np.linalg.norm(g["a"]))
    assert after <= max(before, max_norm) + 1e-9

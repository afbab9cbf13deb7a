"""Tensor engine: shape contracts, spec'd examples, gradient soundness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowlab import tensor as T
from flowlab.errors import ContractError, ShapeError
from flowlab.gradcheck import check_gradients


def t(data, requires_grad=False, dtype=np.float32):
    return T.Tensor(np.asarray(data, dtype=dtype), requires_grad=requires_grad)


class TestMatmul:
    def test_identity(self):
        a = np.array([[2.0, -1.0], [0.5, 3.0]], dtype=np.float32)
        out = T.matmul(t(np.eye(2)), t(a))
        np.testing.assert_array_equal(out.data, a)

    def test_hand_case(self):
        out = T.matmul(t([[1, 2], [3, 4]]), t([[1], [1]]))
        np.testing.assert_array_equal(out.data, [[3.0], [7.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            T.matmul(t(np.zeros((2, 3))), t(np.zeros((4, 3))))

    def test_rank_one_rejected(self):
        with pytest.raises(ShapeError):
            T.matmul(t(np.zeros(3)), t(np.zeros((3, 2))))

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 3, 5)).astype(np.float32)
        b = rng.standard_normal((5, 2)).astype(np.float32)
        out = T.matmul(t(a), t(b)).data
        for i in range(4):
            np.testing.assert_allclose(out[i], a[i] @ b, rtol=1e-6)


class TestLayerNorm:
    def test_fixed_point(self):
        x = np.array([[-1.3416407, -0.4472136, 0.4472136, 1.3416407]], dtype=np.float32)
        out = T.layer_norm(t(x), eps=1e-10).data
        np.testing.assert_allclose(out, x, atol=1e-5)

    def test_constant_token_goes_to_zero(self):
        out = T.layer_norm(t([[5.0, 5.0, 5.0, 5.0]]), eps=1e-6).data
        np.testing.assert_allclose(out, 0.0, atol=1e-5)

    def test_two_channel_hand_case(self):
        out = T.layer_norm(t([[1.0, 3.0]]), eps=1e-12).data
        np.testing.assert_allclose(out, [[-1.0, 1.0]], atol=1e-5)

    def test_moment_contract(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((8, 16, 32)).astype(np.float32) * 3 + 1.5
        out = T.layer_norm(t(x)).data
        assert np.abs(out.mean(-1)).max() < 1e-5
        assert np.abs(out.var(-1) - 1).max() < 1e-3

    def test_needs_two_channels(self):
        with pytest.raises(ShapeError):
            T.layer_norm(t([[1.0]]))


class TestBackward:
    def test_sum_of_squares(self):
        x = t([1.0, 2.0], requires_grad=True)
        loss = T.tsum(x * x)
        loss.backward()
        np.testing.assert_allclose(x.grad, [2.0, 4.0], rtol=1e-6)

    def test_unused_leaf_gets_no_gradient(self):
        x = t([1.0, 2.0], requires_grad=True)
        unused = t([3.0], requires_grad=True)
        T.tsum(x * x).backward()
        assert unused.grad is None

    def test_non_scalar_loss_rejected(self):
        x = t([1.0, 2.0], requires_grad=True)
        with pytest.raises(ContractError):
            (x * x).backward()

    def test_shared_node_accumulates(self):
        x = t([3.0], requires_grad=True)
        y = x * 2.0
        loss = T.tsum(y + y * y)  # d/dx = 2 + 8x = 26
        loss.backward()
        np.testing.assert_allclose(x.grad, [26.0], rtol=1e-6)

    def test_add_same_tensor_both_sides(self):
        x = t([1.0, -2.0], requires_grad=True)
        T.tsum(x + x).backward()
        np.testing.assert_allclose(x.grad, [2.0, 2.0])

    def test_no_grad_suppresses_tape(self):
        x = t([1.0], requires_grad=True)
        with T.no_grad():
            y = T.tsum(x * x)
        assert not y.requires_grad
        assert y._backward_fn is None


class TestPrimitiveGradients:
    """Finite-difference checks for every tape primitive.

    Relative error < 1e-3 against 64-bit central differences when the tape
    runs in float32; < 1e-6 when it re-runs in float64."""

    CASES = {}

    rng = np.random.default_rng(7)
    x23 = rng.standard_normal((2, 3)) * 0.8 + 0.1
    y23 = rng.standard_normal((2, 3)) * 0.6 + 1.7  # positive-ish for div/log
    m34 = rng.standard_normal((3, 4)) * 0.5
    m42 = rng.standard_normal((4, 2)) * 0.5
    b234 = rng.standard_normal((2, 3, 4)) * 0.7
    tok = rng.standard_normal((2, 4, 6)) * 0.9
    sh = rng.standard_normal((2, 1, 6)) * 0.3

    CASES["add"] = (lambda v: T.tsum(T.add(v[0], v[1]) * 0.7), [x23, y23])
    CASES["sub"] = (lambda v: T.tsum(T.sub(v[0], v[1]) ** 2.0), [x23, y23])
    CASES["mul"] = (lambda v: T.tsum(T.mul(v[0], v[1])), [x23, y23])
    CASES["div"] = (lambda v: T.tsum(T.div(v[0], v[1])), [x23, y23 + 2.0])
    CASES["neg"] = (lambda v: T.tsum(T.neg(v[0]) * v[0]), [x23])
    CASES["pow"] = (lambda v: T.tsum(T.pow_const(v[0], 3.0)), [x23])
    CASES["exp"] = (lambda v: T.tsum(T.exp(v[0])), [x23])
    CASES["log"] = (lambda v: T.tsum(T.log(v[0])), [np.abs(x23) + 0.5])
    CASES["sqrt"] = (lambda v: T.tsum(T.sqrt(v[0])), [np.abs(x23) + 0.5])
    CASES["abs"] = (lambda v: T.tsum(T.absolute(v[0])), [x23 + 0.3])
    CASES["tanh"] = (lambda v: T.tsum(T.tanh(v[0])), [x23])
    CASES["sigmoid"] = (lambda v: T.tsum(T.sigmoid(v[0])), [x23])
    CASES["silu"] = (lambda v: T.tsum(T.silu(v[0])), [x23])
    CASES["gelu"] = (lambda v: T.tsum(T.gelu(v[0])), [x23])
    CASES["cos"] = (lambda v: T.tsum(T.cos(v[0])), [x23])
    CASES["sin"] = (lambda v: T.tsum(T.sin(v[0])), [x23])
    CASES["matmul2d"] = (lambda v: T.tsum(T.matmul(v[0], v[1])), [m34, m42])
    CASES["matmul_batched_fast"] = (lambda v: T.tsum(T.matmul(v[0], v[1])), [b234, m42])
    CASES["matmul_full_batch"] = (
        lambda v: T.tsum(T.matmul(v[0], T.swapaxes(v[1], -1, -2))),
        [b234, b234],
    )
    CASES["reshape"] = (lambda v: T.tsum(T.reshape(v[0], (6,)) ** 2.0), [x23])
    CASES["permute"] = (lambda v: T.tsum(T.permute(v[0], (2, 0, 1)) * 0.5), [b234])
    CASES["swapaxes"] = (lambda v: T.tsum(T.swapaxes(v[0], 0, 1) ** 2.0), [x23])
    CASES["concat"] = (lambda v: T.tsum(T.concat([v[0], v[1]], axis=1) ** 2.0), [x23, y23])
    CASES["narrow"] = (lambda v: T.tsum(T.narrow(v[0], 1, 1, 2) ** 2.0), [b234])
    CASES["sum_axis"] = (lambda v: T.tsum(T.tsum(v[0], axis=1) ** 2.0), [b234])
    CASES["sum_keepdims"] = (lambda v: T.tsum(T.tsum(v[0], axis=(0, 2), keepdims=True) ** 2.0), [b234])
    CASES["mean"] = (lambda v: T.tsum(T.tmean(v[0], axis=-1) ** 2.0), [b234])
    CASES["mean_all"] = (lambda v: T.tmean(v[0] * v[0]), [b234])
    CASES["softmax"] = (lambda v: T.tsum(T.softmax(v[0], axis=-1) * v[0]), [x23])
    CASES["layer_norm"] = (lambda v: T.tsum(T.layer_norm(v[0]) * v[0]), [tok])
    CASES["modulated_layer_norm"] = (
        lambda v: T.tsum(T.modulated_layer_norm(v[0], v[1], v[2]) ** 2.0),
        [tok, sh, sh * 0.5],
    )
    CASES["gated_residual"] = (
        lambda v: T.tsum(T.gated_residual(v[0], v[1], v[2])),
        [tok, sh, tok * 0.5],
    )
    CASES["attention_core"] = (
        lambda v: T.tsum(T.attention_core(v[0], v[1], v[2], 2) ** 2.0),
        [tok, tok * 0.8, tok * 1.2],
    )

    @pytest.mark.parametrize("name", sorted(CASES))
    def test_primitive(self, name):
        fn, inputs = self.CASES[name]
        check_gradients(fn, inputs)

    def test_embedding_gradient(self):
        idx = np.array([0, 2, 2, 1])

        def fn(v):
            return T.tsum(T.embedding(v[0], idx) ** 2.0)

        table = np.random.default_rng(5).standard_normal((3, 4))
        check_gradients(fn, [table])

    def test_embedding_bad_index(self):
        table = t(np.zeros((3, 4)), requires_grad=True)
        with pytest.raises(ContractError):
            T.embedding(table, np.array([3]))


class TestDtypeFlow:
    def test_float64_propagates(self):
        x = t([1.0, 2.0], dtype=np.float64, requires_grad=True)
        loss = T.tmean(T.gelu(x * x))
        assert loss.dtype == np.float64
        loss.backward()
        assert x.grad.dtype == np.float64

    def test_float32_default(self):
        assert t([1, 2]).dtype == np.float32


@given(
    st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=8),
    st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=8),
)
@settings(max_examples=50, deadline=None)
def test_add_commutes(a, b):
    n = min(len(a), len(b))
    x, y = t(a[:n]), t(b[:n])
    np.testing.assert_array_equal(T.add(x, y).data, T.add(y, x).data)


@given(st.integers(2, 6), st.integers(2, 6))
@settings(max_examples=30, deadline=None)
def test_layer_norm_moments_property(rows, channels):
    rng = np.random.default_rng(rows * 31 + channels)
    x = rng.standard_normal((rows, channels)).astype(np.float32) * 5 + 2
    out = T.layer_norm(t(x)).data
    assert np.abs(out.mean(-1)).max() < 1e-4

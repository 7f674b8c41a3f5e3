"""Tensor op and reverse-mode gradient tests.

Numeric oracles here are independent of the library under test: matmul is
checked against a naive triple loop, softmax against closed forms, and every
gradient against central differences.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cn3 import autodiff as ad
from cn3.autodiff import NumericError, ShapeError, Tensor


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for t in range(k):
                out[i, j] += a[i, t] * b[t, j]
    return out


def central_diff(f, x: Tensor, eps: float = 1e-6) -> np.ndarray:
    flat = x.data.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        up = f().item()
        flat[i] = keep - eps
        down = f().item()
        flat[i] = keep
        grad[i] = (up - down) / (2 * eps)
    return grad.reshape(x.shape)


class TestMatmul:
    def test_identity(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        eye = Tensor(np.eye(2))
        np.testing.assert_array_equal(ad.matmul(a, eye).data, a.data)

    def test_hand_example(self):
        a = Tensor([[1.0, 2.0]])
        b = Tensor([[3.0], [4.0]])
        assert ad.matmul(a, b).data[0, 0] == 11.0

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 5))
        b = rng.normal(size=(5, 3))
        got = ad.matmul(Tensor(a), Tensor(b)).data
        np.testing.assert_allclose(got, naive_matmul(a, b), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_gradients(self):
        rng = np.random.default_rng(1)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)

        def f():
            return ad.sum_all(ad.matmul(a, b))

        loss = f()
        ad.backward(loss)
        np.testing.assert_allclose(a.grad, central_diff(f, a), atol=1e-6)
        np.testing.assert_allclose(b.grad, central_diff(f, b), atol=1e-6)


class TestElementwise:
    def test_add_sub_mul_values(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[10.0, 20.0], [30.0, 40.0]])
        np.testing.assert_array_equal((a + b).data, [[11, 22], [33, 44]])
        np.testing.assert_array_equal((b - a).data, [[9, 18], [27, 36]])
        np.testing.assert_array_equal((a * b).data, [[10, 40], [90, 160]])

    def test_row_vector_broadcast(self):
        m = Tensor(np.ones((3, 2)))
        bias = Tensor([1.0, 2.0])
        np.testing.assert_array_equal((m + bias).data, [[2, 3], [2, 3], [2, 3]])

    def test_row_broadcast_backward_sums_rows(self):
        m = Tensor(np.ones((3, 2)))
        bias = Tensor([1.0, 2.0], requires_grad=True)
        loss = ad.sum_all(m + bias)
        ad.backward(loss)
        np.testing.assert_array_equal(bias.grad, [3.0, 3.0])

    def test_column_broadcast_rejected(self):
        with pytest.raises(ShapeError):
            ad.add(Tensor(np.ones((3, 2))), Tensor(np.ones((3, 1))))

    def test_scalar_vs_matrix_rejected(self):
        with pytest.raises(ShapeError):
            ad.mul(Tensor(np.ones((2, 2))), Tensor(1.0))

    def test_mul_gradient_is_other_operand(self):
        x = Tensor([1.0, -2.0, 3.0], requires_grad=True)
        loss = ad.sum_all(x * x)
        ad.backward(loss)
        np.testing.assert_allclose(x.grad, 2 * x.data)

    def test_scale(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        ad.backward(ad.sum_all(ad.scale(x, -2.5)))
        np.testing.assert_array_equal(x.grad, [-2.5, -2.5])


class TestUnaries:
    def test_tanh_values(self):
        x = Tensor([0.0, 100.0, -100.0])
        np.testing.assert_allclose(ad.tanh(x).data, [0.0, 1.0, -1.0], atol=1e-12)

    def test_sigmoid_saturation(self):
        assert abs(ad.sigmoid(Tensor(50.0)).item() - 1.0) < 1e-12
        assert ad.sigmoid(Tensor(-745.0)).item() >= 0.0  # no overflow warning

    def test_sigmoid_half_at_zero(self):
        assert ad.sigmoid(Tensor(0.0)).item() == 0.5

    def test_abs_gradient(self):
        x = Tensor([-2.0, 0.0, 3.0], requires_grad=True)
        ad.backward(ad.sum_all(ad.absval(x)))
        np.testing.assert_array_equal(x.grad, [-1.0, 0.0, 1.0])

    def test_tanh_gradient_matches_numeric(self):
        x = Tensor(np.linspace(-2, 2, 7), requires_grad=True)

        def f():
            return ad.sum_all(ad.tanh(x))

        ad.backward(f())
        np.testing.assert_allclose(x.grad, central_diff(f, x), atol=1e-8)


class TestSoftmax:
    def test_uniform_rows(self):
        y = ad.row_softmax(Tensor(np.zeros((2, 4)))).data
        np.testing.assert_allclose(y, np.full((2, 4), 0.25), atol=1e-15)

    def test_shift_invariance(self):
        x = np.array([[1.0, 2.0, 3.0]])
        a = ad.row_softmax(Tensor(x)).data
        b = ad.row_softmax(Tensor(x + 123.0)).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_large_inputs_analytic(self):
        y = ad.row_softmax(Tensor([[1000.0, 1001.0]])).data
        expected = 1.0 / (1.0 + math.e)
        assert abs(y[0, 0] - expected) < 1e-12
        assert abs(y[0, 1] - (1.0 - expected)) < 1e-12

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericError):
            ad.row_softmax(Tensor([[1.0, np.inf]]))
        with pytest.raises(NumericError):
            ad.log_softmax_row(Tensor([[np.nan, 0.0]]))

    def test_log_softmax_agrees_with_log_of_softmax(self):
        x = Tensor(np.random.default_rng(2).normal(size=(3, 5)))
        np.testing.assert_allclose(ad.log_softmax_row(x).data,
                                   np.log(ad.row_softmax(x).data), atol=1e-12)

    def test_softmax_gradient(self):
        x = Tensor(np.random.default_rng(3).normal(size=(2, 4)), requires_grad=True)
        w = np.random.default_rng(4).normal(size=(2, 4))

        def f():
            return ad.sum_all(ad.row_softmax(x) * Tensor(w))

        ad.backward(f())
        np.testing.assert_allclose(x.grad, central_diff(f, x), atol=1e-7)

    def test_log_softmax_gradient(self):
        x = Tensor(np.random.default_rng(5).normal(size=(2, 3)), requires_grad=True)
        w = np.random.default_rng(6).normal(size=(2, 3))

        def f():
            return ad.sum_all(ad.log_softmax_row(x) * Tensor(w))

        ad.backward(f())
        np.testing.assert_allclose(x.grad, central_diff(f, x), atol=1e-7)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=6), st.floats(-100, 100))
    @settings(max_examples=50, deadline=None)
    def test_property_rows_sum_to_one_and_shift(self, row, shift):
        x = np.array([row])
        a = ad.row_softmax(Tensor(x)).data
        b = ad.row_softmax(Tensor(x + shift)).data
        assert abs(a.sum() - 1.0) < 1e-9
        np.testing.assert_allclose(a, b, atol=1e-9)


class TestReductions:
    def test_mean_sum_max_rows(self):
        x = Tensor([[1.0, 5.0], [3.0, 1.0]])
        np.testing.assert_array_equal(ad.mean_rows(x).data, [2.0, 3.0])
        np.testing.assert_array_equal(ad.sum_rows(x).data, [4.0, 6.0])
        np.testing.assert_array_equal(ad.max_rows(x).data, [3.0, 5.0])

    def test_mean_rows_shape_is_1d(self):
        assert ad.mean_rows(Tensor(np.ones((4, 3)))).shape == (3,)

    def test_logsumexp_stability(self):
        out = ad.logsumexp_row(Tensor([1000.0, 1000.0])).item()
        assert abs(out - (1000.0 + math.log(2.0))) < 1e-9

    def test_logsumexp_2d_rowwise(self):
        x = np.array([[0.0, 0.0], [1.0, 2.0]])
        got = ad.logsumexp_row(Tensor(x)).data
        expect = np.log(np.exp(x).sum(axis=1))
        np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_logsumexp_gradient_is_softmax(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        ad.backward(ad.logsumexp_row(x))
        np.testing.assert_allclose(x.grad, ad.row_softmax(Tensor([[1.0, 2.0, 3.0]])).data[0],
                                   atol=1e-12)

    def test_max_rows_gradient_goes_to_argmax(self):
        x = Tensor([[1.0, 5.0], [3.0, 1.0]], requires_grad=True)
        ad.backward(ad.sum_all(ad.max_rows(x)))
        np.testing.assert_array_equal(x.grad, [[0.0, 1.0], [1.0, 0.0]])

    def test_sum_all_gradient(self):
        x = Tensor(np.ones((2, 3)), requires_grad=True)
        ad.backward(ad.sum_all(x))
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_reduce_dispatch(self):
        x = Tensor([[1.0, 2.0]])
        np.testing.assert_array_equal(ad.reduce(x, "sum_rows").data,
                                      ad.sum_rows(x).data)
        with pytest.raises(ValueError):
            ad.reduce(x, "prod_rows")


class TestStructureOps:
    def test_concat_cols_roundtrip(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        b = Tensor(2 * np.ones((2, 3)), requires_grad=True)
        cat = ad.concat_cols([a, b])
        assert cat.shape == (2, 5)
        ad.backward(ad.sum_all(ad.slice_cols(cat, 2, 5)))
        np.testing.assert_array_equal(a.grad, np.zeros((2, 2)))
        np.testing.assert_array_equal(b.grad, np.ones((2, 3)))

    def test_concat_rows(self):
        a = Tensor([[1.0, 2.0]])
        b = Tensor([[3.0, 4.0], [5.0, 6.0]])
        np.testing.assert_array_equal(ad.concat_rows([a, b]).data,
                                      [[1, 2], [3, 4], [5, 6]])

    def test_gather_rows_repeated_ids_accumulate(self):
        x = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
        g = ad.gather_rows(x, [0, 0, 1])
        ad.backward(ad.sum_all(g))
        np.testing.assert_array_equal(x.grad, [[2.0, 2.0], [1.0, 1.0]])

    def test_gather_rows_out_of_range(self):
        with pytest.raises(IndexError):
            ad.gather_rows(Tensor(np.ones((2, 2))), [2])

    def test_take_flat_indices(self):
        x = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
        t = ad.take(x, [3, 0])
        np.testing.assert_array_equal(t.data, [4.0, 1.0])
        ad.backward(ad.sum_all(ad.reshape(t, (1, 2))))
        np.testing.assert_array_equal(x.grad, [[1.0, 0.0], [0.0, 1.0]])

    def test_transpose_gradient(self):
        x = Tensor(np.arange(6, dtype=float).reshape(2, 3), requires_grad=True)
        w = np.random.default_rng(7).normal(size=(3, 2))
        ad.backward(ad.sum_all(ad.transpose(x) * Tensor(w)))
        np.testing.assert_array_equal(x.grad, w.T)

    def test_reshape_size_mismatch(self):
        with pytest.raises(ShapeError):
            ad.reshape(Tensor(np.ones((2, 3))), (4, 2))

    def test_zero_size_rejected(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((0, 3)))


class TestBackwardMachinery:
    def test_backward_requires_scalar(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ShapeError):
            ad.backward(x + x)

    def test_fanout_accumulates(self):
        x = Tensor([2.0], requires_grad=True)
        y = x + x
        ad.backward(ad.sum_all(y))
        np.testing.assert_array_equal(x.grad, [2.0])

    def test_fanout_matches_duplicated_graph(self):
        # z = x*x + x*x through shared x must equal grad of 2*x*x.
        x = Tensor([3.0], requires_grad=True)
        t = x * x
        ad.backward(ad.sum_all(t + t))
        np.testing.assert_allclose(x.grad, [12.0])

    def test_no_grad_leaf_stays_none(self):
        x = Tensor([1.0])
        y = Tensor([2.0], requires_grad=True)
        ad.backward(ad.sum_all(x * y))
        assert x.grad is None
        np.testing.assert_array_equal(y.grad, [1.0])

    def test_deep_chain_no_recursion_error(self):
        x = Tensor([[0.1]], requires_grad=True)
        y = x
        for _ in range(3000):
            y = ad.scale(y, 1.0)
        ad.backward(ad.sum_all(y))
        np.testing.assert_allclose(x.grad, [[1.0]])

    def test_composite_graph_vs_finite_difference(self):
        rng = np.random.default_rng(8)
        w = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
        x = Tensor(rng.normal(size=(2, 3)))

        def f():
            h = ad.tanh(ad.matmul(x, w))
            a = ad.row_softmax(h)
            return ad.sum_all(a * h)

        ad.zero_grads([w])
        ad.backward(f())
        np.testing.assert_allclose(w.grad, central_diff(f, w), atol=1e-6)


class TestGradCheck:
    def test_quadratic_is_tight(self):
        x = Tensor([1.0, -2.0, 0.5], requires_grad=True)

        def f():
            return ad.sum_all(x * x)

        assert ad.grad_check(f, [x]) < 1e-9

    def test_eps_validation(self):
        x = Tensor([1.0], requires_grad=True)
        with pytest.raises(ValueError):
            ad.grad_check(lambda: ad.sum_all(x), [x], eps=0.0)
        with pytest.raises(ValueError):
            ad.grad_check(lambda: ad.sum_all(x), [x], eps=0.1)

    def test_corrupted_backward_is_caught(self, monkeypatch):
        # Negative control: a deliberately wrong tanh derivative must trip it.
        real_tanh = ad.tanh

        def bad_tanh(t):
            t = ad.as_tensor(t)
            y = np.tanh(t.data)

            def back(g):
                ad._accum(t, (1.0 - 0.5 * y * y) * g)

            return ad._result(y, (t,), "tanh", back)

        monkeypatch.setattr(ad, "tanh", bad_tanh)
        x = Tensor([0.7, -1.3], requires_grad=True)

        def f():
            return ad.sum_all(ad.tanh(x))

        assert ad.grad_check(f, [x]) > 1e-4
        monkeypatch.setattr(ad, "tanh", real_tanh)

    def test_pointwise_dispatch(self):
        x = Tensor([[1.0, -2.0]])
        np.testing.assert_array_equal(ad.pointwise(x, "abs").data, [[1.0, 2.0]])
        np.testing.assert_array_equal(
            ad.pointwise(x, "add", other=x).data, [[2.0, -4.0]])
        with pytest.raises(ValueError):
            ad.pointwise(x, "exp")
        with pytest.raises(ValueError):
            ad.pointwise(x, "mul")

"""Unit tests for the reverse-mode autodiff engine."""

import numpy as np
import pytest

from jscclab import autodiff as ad
from jscclab.autodiff import (ShapeError, Tensor, load_parameters, numerical_grad,
                              parameter, save_parameters)

RNG = np.random.Generator(np.random.Philox(key=[0, 0xAD]))


def numeric_of(build, x0, eps=1e-5):
    return numerical_grad(lambda x: float(build(Tensor(x)).data), x0, eps)


class TestArithmetic:
    def test_add_broadcast_backward(self):
        a = RNG.standard_normal((3, 4))
        x0 = RNG.standard_normal(4)
        build = lambda p: ad.tsum(ad.square(Tensor(a) + p))
        p = parameter(x0.copy())
        build(p).backward()
        assert p.grad.shape == (4,)
        np.testing.assert_allclose(p.grad, numeric_of(build, x0), rtol=1e-6, atol=1e-8)

    def test_scalar_broadcast(self):
        p = parameter(np.array([1.0, 2.0]))
        (ad.tsum(3.0 * p + 1.0)).backward()
        np.testing.assert_allclose(p.grad, [3.0, 3.0])

    def test_div_backward(self):
        x0 = RNG.standard_normal((2, 3)) + 3.0
        build = lambda p: ad.tsum(Tensor(np.ones((2, 3))) / p)
        p = parameter(x0.copy())
        build(p).backward()
        np.testing.assert_allclose(p.grad, -1.0 / x0 ** 2, rtol=1e-12)

    def test_incompatible_shapes_raise(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 3))) + Tensor(np.zeros((4, 5)))

    def test_matmul_shape_check(self):
        with pytest.raises(ShapeError):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


class TestBackwardProtocol:
    def test_non_scalar_loss_rejected(self):
        p = parameter(np.ones(3))
        with pytest.raises(ShapeError):
            (p * 2.0).backward()

    def test_second_backward_without_zero_grad_raises(self):
        p = parameter(np.ones(3))
        ad.tsum(ad.square(p)).backward()
        with pytest.raises(RuntimeError, match="stale"):
            ad.tsum(ad.square(p)).backward()
        p.zero_grad()
        ad.tsum(ad.square(p)).backward()  # fine after clearing
        np.testing.assert_allclose(p.grad, 2.0 * np.ones(3))

    def test_grad_accumulates_across_graph_paths(self):
        p = parameter(np.array(2.0))
        # p appears twice: d/dp (p*p + 3p) = 2p + 3 = 7
        (p * p + 3.0 * p).backward()
        np.testing.assert_allclose(p.grad, 7.0)

    def test_requires_grad_propagates(self):
        a = Tensor(np.ones(3))
        p = parameter(np.ones(3))
        assert not (a + 1.0).requires_grad
        assert (a + p).requires_grad


class TestShapedOps:
    def test_conv2d_matches_naive_loop(self):
        x = RNG.standard_normal((1, 2, 5, 5))
        w = RNG.standard_normal((3, 2, 3, 3))
        out = ad.conv2d(Tensor(x), Tensor(w), stride=1).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        ref = np.zeros((1, 3, 5, 5))
        for o in range(3):
            for i in range(5):
                for j in range(5):
                    ref[0, o, i, j] = np.sum(xp[0, :, i:i + 3, j:j + 3] * w[o])
        np.testing.assert_allclose(out, ref, rtol=1e-12)

    def test_conv2d_stride2_shape(self):
        out = ad.conv2d(Tensor(np.zeros((2, 3, 8, 8))),
                        Tensor(np.zeros((5, 3, 3, 3))), stride=2)
        assert out.shape == (2, 5, 4, 4)

    def test_conv2d_rejects_bad_stride_and_channels(self):
        x, w = Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((2, 3, 3, 3)))
        with pytest.raises(ShapeError):
            ad.conv2d(x, w, stride=3)
        with pytest.raises(ShapeError):
            ad.conv2d(Tensor(np.zeros((1, 2, 4, 4))), w)

    def test_pixel_shuffle_inverse_of_manual_packing(self):
        x = RNG.standard_normal((1, 8, 2, 2))
        out = ad.pixel_shuffle(Tensor(x), 2).data
        assert out.shape == (1, 2, 4, 4)
        # element (c, 2i+di, 2j+dj) comes from channel c*4 + di*2 + dj
        for c in range(2):
            for i in range(2):
                for j in range(2):
                    for di in range(2):
                        for dj in range(2):
                            assert out[0, c, 2 * i + di, 2 * j + dj] == \
                                x[0, 4 * c + 2 * di + dj, i, j]

    def test_pixel_shuffle_backward(self):
        x0 = RNG.standard_normal((2, 4, 3, 3))
        sel = RNG.standard_normal((2, 1, 6, 6))
        build = lambda p: ad.tsum(ad.pixel_shuffle(p, 2) * Tensor(sel))
        p = parameter(x0.copy())
        build(p).backward()
        np.testing.assert_allclose(p.grad, numeric_of(build, x0), rtol=1e-6, atol=1e-8)

    def test_reshape_concat_roundtrip(self):
        x0 = RNG.standard_normal((2, 6))
        p = parameter(x0.copy())
        halves = ad.reshape(p, (2, 2, 3))
        again = ad.reshape(halves, (2, 6))
        cat = ad.concat([again, again], axis=0)
        ad.tsum(ad.square(cat)).backward()
        np.testing.assert_allclose(p.grad, 4.0 * x0)

    def test_mean_keepdims(self):
        x = RNG.standard_normal((3, 4, 5))
        out = ad.mean(Tensor(x), axis=(1, 2), keepdims=True)
        assert out.shape == (3, 1, 1)
        np.testing.assert_allclose(out.data, x.mean(axis=(1, 2), keepdims=True))


class TestActivations:
    @pytest.mark.parametrize("fn,x0", [
        (ad.relu, RNG.standard_normal(30) + 0.05),
        (ad.sigmoid, RNG.standard_normal(30)),
        (ad.exp, RNG.standard_normal(30)),
        (lambda t: ad.log(t), RNG.standard_normal(30) ** 2 + 0.5),
        (lambda t: ad.sqrt(t), RNG.standard_normal(30) ** 2 + 0.5),
        (ad.square, RNG.standard_normal(30)),
    ])
    def test_pointwise_backward(self, fn, x0):
        build = lambda p: ad.tsum(fn(p))
        p = parameter(x0.copy())
        build(p).backward()
        np.testing.assert_allclose(p.grad, numeric_of(build, x0), rtol=1e-5, atol=1e-7)

    def test_sigmoid_saturates_without_overflow(self):
        out = ad.sigmoid(Tensor(np.array([-1000.0, 1000.0]))).data
        np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-12)

    def test_prelu_slope_gradient(self):
        x = np.array([-2.0, -1.0, 3.0])
        p = parameter(np.array(0.25))
        ad.tsum(ad.prelu(Tensor(x), p)).backward()
        # gradient wrt slope is the sum of the negative inputs
        np.testing.assert_allclose(p.grad, -3.0)

    def test_prelu_rejects_vector_slope(self):
        with pytest.raises(ShapeError):
            ad.prelu(Tensor(np.ones(3)), Tensor(np.ones(2)))


class TestSerialization:
    def test_roundtrip(self):
        params = {"a.w": RNG.standard_normal((2, 3, 4)),
                  "b": np.array(1.5),
                  "name-with-punct.b": RNG.standard_normal(7)}
        back = load_parameters(save_parameters(params))
        assert set(back) == set(params)
        for k in params:
            np.testing.assert_array_equal(back[k], np.asarray(params[k], dtype=np.float64))

    def test_accepts_tensors(self):
        blob = save_parameters({"p": parameter(np.arange(3.0))})
        np.testing.assert_array_equal(load_parameters(blob)["p"], [0.0, 1.0, 2.0])

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError, match="magic"):
            load_parameters(b"NOPE" + b"\x00" * 16)


def test_numerical_grad_on_quadratic():
    q = np.diag([1.0, 2.0, 3.0])
    x0 = np.array([1.0, -1.0, 2.0])
    g = numerical_grad(lambda x: float(x @ q @ x), x0)
    np.testing.assert_allclose(g, 2.0 * q @ x0, rtol=1e-7)

# -*- coding: utf-8 -*-
import unittest
import numpy as np
from gastwin.errors import ConfigError, GeometryError, NumericalError, \
    UsageError
from gastwin.selftest import conv2d_reference
from gastwin.tensor import (
    Tensor, RngState, default_dtype, get_default_dtype, no_grad,
    is_grad_enabled, finite_diff_grad, check_gradients, relative_error,
    concat, pad)
from gastwin.tensor import functional as F


class TestTensor(unittest.TestCase):
    def test_default_dtype(self):
        self.assertIs(get_default_dtype(), np.float32)
        self.assertEqual(Tensor([1., 2.]).dtype, np.float32)
        with default_dtype(np.float64):
            self.assertEqual(Tensor([1., 2.]).dtype, np.float64)
        self.assertIs(get_default_dtype(), np.float32)
        with self.assertRaises(ValueError):
            with default_dtype(np.int32):
                pass

    def test_backward_arithmetic(self):
        with default_dtype(np.float64):
            a = Tensor([[1., 2.], [3., 4.]], requires_grad=True)
            b = Tensor([0.5, -1.], requires_grad=True)
            loss = ((a * b + a / 2. - b) ** 2).sum()
            loss.backward()
        expected_a = 2. * (a.data * b.data + a.data / 2. - b.data) * (
            b.data + 0.5)
        self.assertTrue(np.allclose(a.grad, expected_a))
        expected_b = (2. * (a.data * b.data + a.data / 2. - b.data) * (
            a.data - 1.)).sum(axis=0)
        self.assertTrue(np.allclose(b.grad, expected_b))

    def test_gradients_accumulate(self):
        a = Tensor([1., 2.], requires_grad=True)
        (a * 3.).sum().backward()
        (a * 2.).sum().backward()
        self.assertTrue(np.allclose(a.grad, [5., 5.]))
        a.zero_grad()
        self.assertIsNone(a.grad)

    def test_backward_errors(self):
        a = Tensor([1., 2.], requires_grad=True)
        with self.assertRaises(UsageError):
            (a * 2.).backward()
        with self.assertRaises(UsageError):
            Tensor(1.).backward()

    def test_non_finite(self):
        with self.assertRaises(NumericalError):
            Tensor([0., 1.]).log()
        with self.assertRaises(NumericalError):
            Tensor([1.]) / Tensor([0.])

    def test_no_grad(self):
        a = Tensor([1., 2.], requires_grad=True)
        with no_grad():
            self.assertFalse(is_grad_enabled())
            b = a * 2.
        self.assertTrue(is_grad_enabled())
        self.assertFalse(b.requires_grad)

    def test_concat_pad_getitem(self):
        with default_dtype(np.float64):
            a = Tensor(np.arange(6.).reshape(2, 3), requires_grad=True)
            b = Tensor(np.ones((1, 3)), requires_grad=True)
            c = concat([a, b], axis=0)
            self.assertEqual(c.shape, (3, 3))
            p = pad(c, ((1, 0), (0, 2)))
            self.assertEqual(p.shape, (4, 5))
            (p[1:3, :2] * 2.).sum().backward()
        self.assertTrue(np.allclose(a.grad, [[2., 2., 0.], [2., 2., 0.]]))
        self.assertTrue(np.allclose(b.grad, 0.))


class TestRngState(unittest.TestCase):
    def test_reproducible(self):
        self.assertTrue(np.array_equal(RngState(3).normal(size=5),
                                       RngState(3).normal(size=5)))
        self.assertFalse(np.array_equal(RngState(3).normal(size=5),
                                        RngState(4).normal(size=5)))

    def test_spawn(self):
        rng = RngState(7)
        first = rng.spawn('frame_00001').random(3)
        rng.random(100)
        self.assertTrue(np.array_equal(rng.spawn('frame_00001').random(3),
                                       first))
        self.assertFalse(np.array_equal(rng.spawn('frame_00002').random(3),
                                        first))

    def test_seed_range(self):
        with self.assertRaises(ValueError):
            RngState(-1)
        with self.assertRaises(ValueError):
            RngState(2**64)


class TestFunctional(unittest.TestCase):
    def test_conv2d(self):
        rng = RngState(0)
        x = rng.normal(size=(1, 3, 6, 5))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        with default_dtype(np.float64):
            out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), padding=1).data
        self.assertEqual(out.shape, (1, 4, 6, 5))
        self.assertTrue(np.allclose(out, conv2d_reference(x, w, b, 1, 1, 1)))

    def test_depthwise_conv2d(self):
        rng = RngState(1)
        x = rng.normal(size=(2, 4, 5, 5))
        w = rng.normal(size=(4, 1, 3, 3))
        b = np.zeros(4)
        with default_dtype(np.float64):
            out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=2,
                           padding=1, groups=4).data
        self.assertEqual(out.shape, (2, 4, 3, 3))
        self.assertTrue(np.allclose(out, conv2d_reference(x, w, b, 2, 1, 4)))

    def test_gelu(self):
        y = F.gelu(Tensor([1.], dtype=np.float64)).data
        self.assertAlmostEqual(y[0], 0.8412, places=4)

    def test_softmax_stable(self):
        y = F.softmax(Tensor([[1000., 1000.], [-1000., 0.]],
                             dtype=np.float64)).data
        self.assertTrue(np.allclose(y, [[0.5, 0.5], [0., 1.]]))

    def test_layer_norm_eps(self):
        x = Tensor(np.ones((2, 3)))
        with self.assertRaises(ConfigError):
            F.layer_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), 0.)

    def test_bilinear_resize(self):
        x = Tensor(np.array([[0., 1.], [2., 3.]]).reshape(1, 1, 2, 2),
                   dtype=np.float64)
        r = np.array([0., 0.25, 0.75, 1.])
        up = F.bilinear_resize(x, 4, 4).data[0, 0]
        self.assertTrue(np.allclose(up, 2. * r[:, None] + r[None, :]))
        self.assertTrue(np.array_equal(F.bilinear_resize(x, 2, 2).data,
                                       x.data))
        with self.assertRaises(GeometryError):
            F.bilinear_resize(x, 0, 4)

    def test_dropout(self):
        x = Tensor(np.ones((1000,)))
        self.assertIs(F.dropout(x, 0.5, RngState(0), training=False), x)
        y = F.dropout(x, 0.5, RngState(0)).data
        self.assertTrue(set(np.unique(y)) <= {0., 2.})
        self.assertAlmostEqual(float(y.mean()), 1., delta=0.15)

    def test_one_hot(self):
        self.assertTrue(np.array_equal(F.one_hot([2, 0], 3),
                                       [[0., 0., 1.], [1., 0., 0.]]))


class TestGradcheck(unittest.TestCase):
    def test_finite_diff_grad(self):
        x = np.array([1., -2., 0.5])
        grad = finite_diff_grad(lambda t: (t ** 3).sum(), x).data
        self.assertTrue(np.allclose(grad, 3. * x ** 2, rtol=1e-6))
        with self.assertRaises(ValueError):
            finite_diff_grad(lambda t: t.sum(), x, h=0.)

    def test_check_gradients(self):
        rng = RngState(2)
        with default_dtype(np.float64):
            x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
            w = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
            errors = check_gradients(
                lambda: F.gelu(F.linear(x, w)).sum(), {'x': x, 'w': w})
        self.assertEqual(set(errors), {'x', 'w'})
        self.assertLess(max(errors.values()), 1e-6)

    def test_relative_error(self):
        self.assertEqual(relative_error([1., 2.], [1., 2.]), 0.)
        self.assertAlmostEqual(relative_error([1., 2.], [1., 1.]), 0.5)


if __name__ == '__main__':
    unittest.main()

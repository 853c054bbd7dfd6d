import unittest

from torch import Generator, arange, complex128, float64, long, randn, \
    tensor, zeros

from torchqgml.autodiff import ADJOINTS, Tape, backward, grad_check, \
    adjoint_mismatch, ops, record
from torchqgml.exceptions import AdjointError, NonFiniteError, \
    SizeMismatchError


class TestTape(unittest.TestCase):
    """Tests for `torchqgml.autodiff.tape`."""

    def setUp(self):
        self.generator = Generator().manual_seed(0)

    def randn(self, *shape, dtype=float64):
        return randn(shape, generator=self.generator, dtype=dtype)

    def test_record(self):
        a, b = tensor([1., 2.], dtype=float64), tensor([3., 4.], dtype=float64)
        assert ops.add(a, b).tolist() == [4., 6.]
        assert ops.relu(tensor([-1., 0., 2.], dtype=float64)).tolist() == \
            [0., 0., 2.]

        x = self.randn(1, 2, 5, 5)
        kernel = zeros(2, 2, 3, 3, dtype=float64)
        kernel[0, 0, 1, 1] = kernel[1, 1, 1, 1] = 1.
        assert (ops.conv2_periodic(x, kernel) - x).abs().max() == 0

        with Tape() as tape:
            ops.square(ops.add(a, b))
        assert len(tape) == 2
        assert [n.kind for n in tape.nodes] == ['add', 'square']
        assert tape.nodes[1].inputs == (0,)

    def test_record_errors(self):
        with self.assertRaises(SizeMismatchError):
            ops.add(self.randn(3), self.randn(4))
        with self.assertRaises(SizeMismatchError):
            ops.conv2_periodic(self.randn(1, 2, 5, 5),
                               self.randn(4, 3, 3, 3))
        with self.assertRaises(SizeMismatchError):
            ops.ifft2(self.randn(2, 8, 4, dtype=complex128), (8, 8))
        with self.assertRaises(AdjointError):
            record('no-such-op', self.randn(3))

    def test_backward(self):
        x = tensor([1., 2., 3.], dtype=float64, requires_grad=True)
        with Tape() as tape:
            ops.reduce_sum(ops.square(x))
        assert backward(tape).of(x).tolist() == [2., 4., 6.]

        x = tensor([1., 2., 3., 4.], dtype=float64, requires_grad=True)
        with Tape() as tape:
            ops.reduce_mean(x)
        assert backward(tape).of(x).tolist() == [0.25] * 4

        x = self.randn(2, 8, 8).requires_grad_(True)
        with Tape() as tape:
            roundtrip = ops.ifft2(ops.fft2(x), (8, 8))
            ops.reduce_sum(ops.square(ops.sub(roundtrip, x)))
        assert backward(tape).of(x).abs().max() < 1e-12

    def test_backward_errors(self):
        with self.assertRaises(AdjointError):
            backward(Tape())
        x = self.randn(3).requires_grad_(True)
        with Tape() as tape:
            ops.square(x)
        with self.assertRaises(SizeMismatchError):
            backward(tape)

    def test_absent_leaf(self):
        x = self.randn(3).requires_grad_(True)
        y = self.randn(3).requires_grad_(True)
        with Tape() as tape:
            ops.reduce_sum(ops.square(x))
        grads = backward(tape, inputs=[x, y])
        assert grads.of(y).shape == y.shape
        assert (grads.of(y) == 0).all()

    def test_replay_determinism(self):
        x = self.randn(2, 8, 8)
        results = []
        for _ in range(2):
            leaf = x.clone().requires_grad_(True)
            with Tape() as tape:
                xh = ops.fft2(leaf)
                y = ops.ifft2(ops.spectral_multiply(xh, xh), (8, 8))
                ops.reduce_mean(ops.square(y))
            results.append((tape.output.item(),
                            backward(tape).of(leaf).clone()))
        assert results[0][0] == results[1][0]
        assert (results[0][1] == results[1][1]).all()


class TestAdjoints(unittest.TestCase):
    """Inner-product identity of the linear op-kinds."""

    def setUp(self):
        self.generator = Generator().manual_seed(1)
        self.x = randn((3, 2, 8, 8), generator=self.generator, dtype=float64)

    def randn(self, *shape, dtype=float64):
        return randn(shape, generator=self.generator, dtype=dtype)

    def check(self, op, x):
        with Tape():
            out = op(x)
        y = self.randn(*out.shape, dtype=out.dtype)
        assert adjoint_mismatch(op, x, y) < 1e-10

    def test_linear_ops(self):
        x = self.x
        self.check(lambda t: ops.scale(t, 2.5), x)
        self.check(ops.fft2, x)
        self.check(lambda t: ops.ifft2(t, (8, 8)),
                   self.randn(3, 2, 8, 5, dtype=complex128))
        xh = self.randn(3, 2, 8, 5, dtype=complex128)
        self.check(lambda t: ops.spectral_multiply(
            t, self.randn(8, 5, dtype=complex128)), xh)
        mix = self.randn(2, 2, 8, 5, dtype=complex128)
        self.check(lambda t: ops.layer_mix(t, mix), xh)
        rows, cols = tensor([0, 1, 6, 7], dtype=long), arange(3)
        self.check(lambda t: ops.select_modes(t, rows, cols), xh)
        self.check(lambda t: ops.pad_periodic(t, 2), x)
        kernel = self.randn(4, 2, 3, 3)
        self.check(lambda t: ops.conv2_periodic(t, kernel), x)
        self.check(ops.reduce_sum, x)
        self.check(ops.reduce_mean, x)

    def test_registry(self):
        for kind in ('add', 'sub', 'mul', 'scale', 'square', 'reciprocal',
                     'sqrt', 'sum', 'mean', 'relu', 'fft2', 'ifft2',
                     'spectral-diagonal-multiply', 'layer-mix',
                     'select-modes', 'pad-periodic', 'conv2-periodic'):
            assert kind in ADJOINTS


class TestGradCheck(unittest.TestCase):
    """Tests for `torchqgml.autodiff.gradcheck`."""

    def setUp(self):
        self.generator = Generator().manual_seed(2)

    def test_quadratic(self):
        x = randn(8, generator=self.generator, dtype=float64)
        assert grad_check(lambda t: ops.reduce_sum(ops.square(t)), x) < 1e-7

    def test_nonlinear_ops(self):
        x = randn((2, 6, 6), generator=self.generator, dtype=float64).abs() \
            + 0.5
        assert grad_check(lambda t: ops.reduce_sum(ops.reciprocal(t)),
                          x) < 1e-6
        assert grad_check(lambda t: ops.reduce_sum(ops.sqrt(t)), x) < 1e-6
        y = randn((2, 6, 6), generator=self.generator, dtype=float64)
        assert grad_check(lambda t: ops.reduce_sum(ops.mul(t, ops.square(y))),
                          x) < 1e-6

    def test_conv_weights(self):
        x = randn((1, 2, 6, 6), generator=self.generator, dtype=float64)
        w = randn((3, 2, 3, 3), generator=self.generator, dtype=float64)
        b = randn(3, generator=self.generator, dtype=float64)
        assert grad_check(lambda t: ops.reduce_mean(ops.square(
            ops.conv2_periodic(x, t, b))), w) < 1e-5
        assert grad_check(lambda t: ops.reduce_mean(ops.square(
            ops.conv2_periodic(x, w, t))), b) < 1e-5

    def test_errors(self):
        x = tensor([1., float('nan')], dtype=float64)
        with self.assertRaises(NonFiniteError):
            grad_check(lambda t: ops.reduce_sum(t), x)
        with self.assertRaises(SizeMismatchError):
            grad_check(lambda t: ops.square(t), tensor([1., 2.],
                                                       dtype=float64))

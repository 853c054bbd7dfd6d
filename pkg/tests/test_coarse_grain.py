import unittest

from math import exp, pi

from torch import Generator, complex128, float64, full, randn, zeros
from torch import fft

from torchqgml.dynamics import FilterSpec, PhysicalParams, SpectralField, \
    apply_filter, coarsen, get_grid, random_initial_condition, refine, \
    rollout, subgrid_tendency, tendency
from torchqgml.dynamics.coarse_grain import truncation_indices
from torchqgml.exceptions import WrongArgumentsError


class TestFilter(unittest.TestCase):
    """Tests of the coarse-graining filter."""

    def setUp(self):
        self.spec = FilterSpec.for_grid(16, 1e6)
        self.grid = get_grid(64, 64, 1e6)

    def test_for_grid(self):
        assert self.spec.dx == 1e6 / 16
        assert abs(self.spec.cutoff - 0.65 * pi / self.spec.dx) < 1e-18
        assert self.spec.coefficient == 23.6 and self.spec.exponent == 4
        with self.assertRaises(WrongArgumentsError):
            FilterSpec(cutoff=0., dx=1., domain_length=1.)

    def test_transfer(self):
        kappa = full((1,), 0.5 * self.spec.cutoff, dtype=float64)
        assert self.spec.transfer(kappa).item() == 1.
        kappa = full((1,), self.spec.cutoff + 1 / self.spec.dx, dtype=float64)
        value = self.spec.transfer(kappa).item()
        assert abs(value - exp(-23.6)) < 1e-6 * exp(-23.6)
        assert abs(value - 5.6e-11) < 0.1e-11

    def test_pass_band(self):
        generator = Generator().manual_seed(0)
        values = randn((2, 64, 33), generator=generator, dtype=complex128)
        filtered = apply_filter(SpectralField(values, self.grid), self.spec)
        below = self.grid.kappa < self.spec.cutoff
        assert (filtered.values[:, below] == values[:, below]).all()
        assert (filtered.values.abs() <= values.abs()).all()

    def test_energy(self):
        q = random_initial_condition(PhysicalParams(nx=64), 1)
        before = fft.rfft2(q).abs().pow(2).sum()
        after = apply_filter(SpectralField.from_grid(q, self.grid),
                             self.spec).values.abs().pow(2).sum()
        assert after < before

    def test_cutoff_above_nyquist(self):
        spec = FilterSpec.for_grid(16, 1e6, fraction=0.65)
        with self.assertRaises(WrongArgumentsError):
            apply_filter(SpectralField(zeros(2, 8, 5, dtype=complex128),
                                       get_grid(8, 8, 1e6)), spec)


class TestCoarsen(unittest.TestCase):
    """Tests of the projection on the coarse grid."""

    def setUp(self):
        self.spec = FilterSpec.for_grid(16, 1e6)
        generator = Generator().manual_seed(2)
        self.x = randn((2, 64, 64), generator=generator, dtype=float64)
        self.y = randn((2, 64, 64), generator=generator, dtype=float64)

    def test_constant(self):
        field = full((2, 64, 64), 3.5, dtype=float64)
        assert (coarsen(field, 16, 16, self.spec) - 3.5).abs().max() < 1e-12

    def test_spectrum(self):
        lo = coarsen(self.x, 16, 16, self.spec)
        assert lo.shape == (2, 16, 16)
        grid = get_grid(64, 64, 1e6)
        rows, cols = truncation_indices(64, 16, 16)
        expected = (fft.rfft2(self.x) * self.spec.transfer(grid.kappa))[
            ..., rows, :][..., cols] / 16
        actual = fft.rfft2(lo)
        # the Nyquist row and column of the coarse grid are not represented
        # as conjugate pairs
        scale = expected.abs().max()
        assert (actual[..., :8, :8] - expected[..., :8, :8]).abs().max() < \
            1e-12 * scale
        assert (actual[..., 9:, :8] - expected[..., 9:, :8]).abs().max() < \
            1e-12 * scale

    def test_linear(self):
        a, b = 0.7, -2.3
        combined = coarsen(a * self.x + b * self.y, 16, 16, self.spec)
        separate = a * coarsen(self.x, 16, 16, self.spec) + \
            b * coarsen(self.y, 16, 16, self.spec)
        assert (combined - separate).abs().max() < 1e-12

    def test_band_limited(self):
        spectrum = zeros(2, 16, 9, dtype=complex128)
        spectrum[0, 1, 2] = 3. - 1j
        spectrum[1, 3, 0] = 2.
        spectrum[1, 15, 1] = 1j
        field = fft.irfft2(spectrum, s=(16, 16))
        hi = refine(field, 64, 64)
        assert (coarsen(hi, 16, 16, self.spec) - field).abs().max() < 1e-12

    def test_sizes(self):
        with self.assertRaises(WrongArgumentsError):
            coarsen(zeros(2, 16, 16, dtype=float64), 32, 32, self.spec)
        with self.assertRaises(WrongArgumentsError):
            coarsen(zeros(2, 16, 16, dtype=float64), 7, 7, self.spec)


class TestSubgridTendency(unittest.TestCase):
    """Tests of the sub-grid total tendency."""

    def setUp(self):
        self.params_hi = PhysicalParams(nx=64, trainable=())
        self.params_lo = self.params_hi.with_grid(16, trainable=())
        self.spec = FilterSpec.for_grid(16, 1e6)
        q0 = random_initial_condition(self.params_hi, 0, amplitude=1e-5)
        self.q = rollout(q0, 1, 4, self.params_hi)[-1].detach()

    def test_zero(self):
        pair = subgrid_tendency(zeros(2, 64, 64, dtype=float64),
                                self.params_hi, self.params_lo, self.spec)
        assert (pair.target == 0).all()
        assert pair.q.shape == pair.target.shape == (2, 16, 16)

    def test_linear_dynamics(self):
        hi = PhysicalParams(nx=64, nonlinear=False, trainable=())
        lo = hi.with_grid(16, trainable=())
        pair = subgrid_tendency(self.q, hi, lo, self.spec)
        resolved = tendency(pair.q, lo)
        assert pair.target.abs().max() <= 1e-12 * resolved.abs().max()

    def test_composition(self):
        pair = subgrid_tendency(self.q, self.params_hi, self.params_lo,
                                self.spec, time=3600.)
        q_bar = coarsen(self.q, 16, 16, self.spec)
        expected = coarsen(tendency(self.q, self.params_hi), 16, 16,
                           self.spec) - tendency(q_bar, self.params_lo)
        assert (pair.target - expected).abs().max() <= \
            1e-12 * expected.abs().max()
        assert pair.target.abs().max() > 0
        assert pair.time == 3600.

    def test_mismatched_physics(self):
        lo = PhysicalParams(nx=16, delta=0.3, trainable=())
        with self.assertRaises(WrongArgumentsError):
            subgrid_tendency(self.q, self.params_hi, lo, self.spec)

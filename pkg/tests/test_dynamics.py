import unittest

from math import exp, pi

from torch import Generator, arange, complex128, cos, float64, no_grad, \
    randn, roll, sin, stack, tensor, zeros

from torchqgml.autodiff import grad_check_parameters, ops
from torchqgml.dynamics import ModelState, PhysicalParams, SpectralField, \
    adams_bashforth, forward_pv, invert, jacobian, random_initial_condition, \
    rollout, step_ab3, tendency, total_kinetic_energy
from torchqgml.exceptions import IntegrationBlowupError, SizeMismatchError, \
    WrongArgumentsError


def grid_coordinates(params):
    x = arange(params.nx, dtype=float64) * params.grid.dx
    y = arange(params.ny, dtype=float64) * params.grid.dy
    return x.view(1, -1), y.view(-1, 1)


def smooth_field(params, seed, n_modes=3, amplitude=1.):
    """Sum of a few low wavenumber modes, zero mean."""
    generator = Generator().manual_seed(seed)
    x, y = grid_coordinates(params)
    k0 = 2 * pi / params.domain_length
    field = zeros(params.ny, params.nx, dtype=float64)
    for m in range(1, n_modes + 1):
        a, b, phase = randn(3, generator=generator, dtype=float64).tolist()
        field = field + a * cos(k0 * (m * x + (m - 1) * y) + phase) + \
            b * sin(k0 * ((m - 1) * x - m * y))
    return amplitude * field


def psi_to_q(psi, params):
    return ops.ifft2(forward_pv(SpectralField.from_grid(psi, params.grid),
                                params).values, params.grid.shape)


class TestInversion(unittest.TestCase):
    """Tests of the PV inversion."""

    def setUp(self):
        self.params = PhysicalParams(nx=16)

    def test_zero(self):
        psi = zeros(2, 16, 16, dtype=float64)
        assert (psi_to_q(psi, self.params) == 0).all()
        qh = zeros(2, 16, 9, dtype=complex128)
        assert (invert(SpectralField(qh, self.params.grid),
                       self.params).values == 0).all()

    def test_single_mode(self):
        # kappa^2 = 1e-8 for the first zonal mode
        params = PhysicalParams(nx=8, domain_length=2 * pi / 1e-4)
        psi_h = zeros(2, 8, 5, dtype=complex128)
        psi_h[0, 0, 1] = 1.
        q_h = forward_pv(SpectralField(psi_h, params.grid), params).values
        assert abs(q_h[0, 0, 1].real + (1e-8 + 1 / (1.5e4 ** 2 * 1.25))) < \
            1e-20
        assert abs(q_h[1, 0, 1].real - 0.25 / (1.5e4 ** 2 * 1.25)) < 1e-20
        assert abs(q_h[0, 0, 1].real + 1.3556e-8) < 1e-12
        assert abs(q_h[1, 0, 1].real - 8.889e-10) < 1e-12
        back = invert(SpectralField(q_h, params.grid), params).values
        assert (back - psi_h).abs().max() < 1e-12

    def test_roundtrip(self):
        generator = Generator().manual_seed(0)
        psi = randn((2, 16, 16), generator=generator, dtype=float64)
        psi = psi - psi.mean(dim=(-2, -1), keepdim=True)
        q = psi_to_q(psi, self.params)
        back = ops.ifft2(invert(SpectralField.from_grid(q, self.params.grid),
                                self.params).values, (16, 16))
        assert (back - psi).abs().max() < 1e-10

    def test_wrong_grid(self):
        qh = zeros(2, 8, 5, dtype=complex128)
        with self.assertRaises(SizeMismatchError):
            invert(SpectralField(qh, self.params.grid), self.params)


class TestTendency(unittest.TestCase):
    """Tests of the right-hand side of the model."""

    def setUp(self):
        self.params = PhysicalParams(nx=16)

    def test_zero_state(self):
        q = zeros(2, 16, 16, dtype=float64)
        assert (tendency(q, self.params) == 0).all()

    def test_zonally_uniform(self):
        params = PhysicalParams(nx=16, beta=0., U1=0., rek=0.)
        _, y = grid_coordinates(params)
        k0 = 2 * pi / params.domain_length
        q = stack([cos(k0 * y).expand(16, 16),
                   sin(2 * k0 * y).expand(16, 16)]) * 1e-5
        assert tendency(q, params).abs().max() < 1e-20

    def test_jacobian(self):
        params = PhysicalParams(nx=64)
        grid = params.grid
        psi = smooth_field(params, 1, n_modes=1)
        q = smooth_field(params, 2, n_modes=1)
        spectral = jacobian(psi, q, grid)

        def dx(f):
            return (roll(f, -1, dims=-1) - roll(f, 1, dims=-1)) / (2 * grid.dx)

        def dy(f):
            return (roll(f, -1, dims=-2) - roll(f, 1, dims=-2)) / (2 * grid.dy)

        finite = dx(psi) * dy(q) - dy(psi) * dx(q)
        assert ((spectral - finite).norm() / finite.norm()).item() < 1e-2

    def test_closure_shape(self):
        q = random_initial_condition(self.params, 0)
        with self.assertRaises(SizeMismatchError):
            tendency(q, self.params, zeros(2, 8, 8, dtype=float64))
        with self.assertRaises(SizeMismatchError):
            tendency(zeros(2, 8, 8, dtype=float64), self.params)


class TestTimeStepping(unittest.TestCase):
    """Tests of the Adams-Bashforth solver."""

    def setUp(self):
        self.params = PhysicalParams(nx=16)
        self.q0 = random_initial_condition(self.params, 3, amplitude=1e-6)

    @staticmethod
    def ab3_error(dt, t_end=1.):
        # exact history bootstraps the third order phase
        y = tensor(1., dtype=float64)
        history = (-y, -tensor(exp(dt), dtype=float64),
                   -tensor(exp(2 * dt), dtype=float64))
        for _ in range(int(round(t_end / dt))):
            y = y + dt * adams_bashforth(history)
            history = (-y,) + history[:2]
        return abs(y.item() - exp(-t_end))

    def test_ab3_order(self):
        errors = [self.ab3_error(dt) for dt in (0.1, 0.05, 0.025)]
        for coarse, fine in zip(errors[:-1], errors[1:]):
            assert coarse / fine > 2 ** 2.7

    def test_zero_state(self):
        state = ModelState(zeros(2, 16, 16, dtype=float64))
        for _ in range(3):
            state = step_ab3(state, self.params)
        assert (state.q == 0).all()
        assert state.step == 3
        assert len(state.history) == 2

    def test_fixed_point(self):
        params = PhysicalParams(nx=16, beta=0., U1=0., rek=0.,
                                nonlinear=False)
        q = smooth_field(params, 4, amplitude=1e-6)
        q = stack([q, -q])
        state = ModelState(q)
        for _ in range(4):
            state = step_ab3(state, params)
        assert (state.q - q).abs().max() < 1e-12 * q.abs().max()

    def test_constant_closure(self):
        c = 1e-12
        with_closure = step_ab3(ModelState(self.q0), self.params,
                                lambda q, p: q.new_full(q.shape, c))
        without = step_ab3(ModelState(self.q0), self.params)
        difference = with_closure.q - without.q
        assert (difference - self.params.dt * c).abs().max() < 1e-18

    def test_rollout(self):
        states = rollout(self.q0, 0, 5, self.params)
        assert len(states) == 1 and states[0] is self.q0

        states = rollout(self.q0, 2, 1, self.params)
        state = ModelState(self.q0)
        expected = [self.q0]
        for _ in range(2):
            state = step_ab3(state, self.params)
            expected.append(state.q)
        assert len(states) == 3
        for a, b in zip(states, expected):
            assert (a == b).all()

        batch = stack([self.q0, 2 * self.q0])
        assert rollout(batch, 2, 3, self.params)[-1].shape == (2, 2, 16, 16)

        with self.assertRaises(WrongArgumentsError):
            rollout(self.q0, -1, 1, self.params)
        with self.assertRaises(WrongArgumentsError):
            rollout(self.q0, 1, 0, self.params)

    def test_rollout_gradient(self):
        params = PhysicalParams(nx=8)
        q0 = random_initial_condition(params, 5, amplitude=1e-5)

        def loss():
            q = rollout(q0, 2, 4, params)[-1]
            return ops.reduce_sum(ops.square(ops.scale(q, 1e5)))

        error = grad_check_parameters(loss, [params.delta, params.U1],
                                      floor=1e-8)
        assert error < 1e-5

    def test_blowup(self):
        q0 = self.q0.clone()
        q0[0, 3, 3] = float('inf')
        with self.assertRaises(IntegrationBlowupError) as context:
            rollout(q0, 2, 3, self.params)
        assert context.exception.step == 0
        assert context.exception.obs_index == 1

        batch = stack([self.q0, q0])
        with self.assertRaises(IntegrationBlowupError) as context:
            rollout(batch, 1, 1, self.params)
        assert context.exception.trajectory == 1

    def test_initial_condition(self):
        a = random_initial_condition(self.params, 7)
        b = random_initial_condition(self.params, 7)
        assert (a == b).all()
        assert a.mean(dim=(-2, -1)).abs().max() < 1e-20
        assert random_initial_condition(self.params, 7, batch=3).shape == \
            (3, 2, 16, 16)


class TestKineticEnergy(unittest.TestCase):
    """Tests of the total kinetic energy diagnostic."""

    def setUp(self):
        self.params = PhysicalParams(nx=16)

    def test_zero(self):
        q = zeros(2, 16, 16, dtype=float64)
        assert total_kinetic_energy(q, self.params).item() == 0.

    def test_single_mode(self):
        amplitude = 1e3
        x, _ = grid_coordinates(self.params)
        k = 2 * 2 * pi / self.params.domain_length
        psi = zeros(2, 16, 16, dtype=float64)
        psi[0] = amplitude * sin(k * x).expand(16, 16)
        q = psi_to_q(psi, self.params)
        expected = 0.2 * amplitude ** 2 * k ** 2 / 4
        for spectral in (True, False):
            ke = total_kinetic_energy(q, self.params, spectral=spectral)
            assert abs(ke.item() - expected) < 1e-10 * expected

    def test_parseval(self):
        q = random_initial_condition(self.params, 11, amplitude=1e-5,
                                     batch=3)
        spectral = total_kinetic_energy(q, self.params)
        grid = total_kinetic_energy(q, self.params, spectral=False)
        assert spectral.shape == (3,)
        assert ((spectral - grid).abs() / grid.abs()).max() < 1e-10


class TestPhysicalParams(unittest.TestCase):

    def test_defaults(self):
        params = PhysicalParams()
        assert params.theta_phy() == {'delta': 0.25, 'U1': 0.025}
        assert params.trainable == ('delta', 'U1')
        assert abs(params.F1.item() - 1 / (1.5e4 ** 2 * 1.25)) < 1e-22
        w1, w2 = params.layer_weights()
        assert abs(w1.item() - 0.2) < 1e-15 and abs(w2.item() - 0.8) < 1e-15

    def test_clamp_and_grid(self):
        params = PhysicalParams(nx=16)
        params.set_theta_phy(delta=-1.)
        params.clamp_()
        assert params.delta.item() == 1e-4
        lo = params.with_grid(8, trainable=())
        assert lo.grid.shape == (8, 8)
        assert lo.trainable == ()
        assert lo.delta.item() == 1e-4

    def test_errors(self):
        with self.assertRaises(WrongArgumentsError):
            PhysicalParams(nx=15)
        with self.assertRaises(WrongArgumentsError):
            PhysicalParams(delta=0.)
        with self.assertRaises(WrongArgumentsError):
            PhysicalParams(trainable=('beta',))

    def test_no_grad_rollout(self):
        params = PhysicalParams(nx=8)
        q0 = random_initial_condition(params, 0)
        with no_grad():
            q = rollout(q0, 1, 2, params)[-1]
        assert not q.requires_grad
        q = rollout(q0, 1, 2, params)[-1]
        assert q.requires_grad

# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from torch import float64, no_grad, tensor
from torch.nn import Module, Parameter

from ..autodiff import ops
from ..exceptions import WrongArgumentsError
from .grid import get_grid

TRAINABLE = ('delta', 'U1')


class PhysicalParams(Module):
    """Constants of the two-layer quasi-geostrophic model and of its grid.
    The layer thickness ratio `delta` and the upper-layer background velocity
    `U1` are stored as :class:`torch.nn.Parameter` so that they form the
    physical parameter group :math:`\\theta_{phy}`; whether they receive
    gradients is decided by `trainable`. Defaults are the ground-truth values
    of the twin experiments.

    Parameters
    ----------
    nx: int
        Grid points along x (even).
    ny: int, optional
        Grid points along y (even). Defaults to `nx`.
    domain_length: float
        Side L of the periodic domain (m).
    dt: float
        Solver timestep (s).
    beta: float
        Planetary vorticity gradient (1/(m s)).
    rek: float
        Linear bottom drag coefficient (1/s).
    rd: float
        Deformation radius (m).
    delta: float
        Layer thickness ratio H1/H2.
    U1: float
        Upper-layer background velocity (m/s).
    U2: float
        Lower-layer background velocity (m/s).
    trainable: tuple of str
        Subset of ('delta', 'U1') which receives gradients.
    effective_beta: bool
        If True (default), the background shear adds the layer-wise mean PV
        gradients :math:`\\pm F_i (U_1 - U_2)` to :math:`\\beta`. If False,
        the bare :math:`\\beta` is used in both layers.
    nonlinear: bool
        If False, the Jacobian term is dropped from the tendency.

    """

    def __init__(self, nx=16, ny=None, domain_length=1e6, dt=3600.,
                 beta=1.5e-11, rek=5.787e-7, rd=1.5e4, delta=0.25, U1=2.5e-2,
                 U2=0., trainable=TRAINABLE, effective_beta=True,
                 nonlinear=True):
        super().__init__()
        ny = nx if ny is None else ny
        try:
            assert nx % 2 == 0 and ny % 2 == 0 and nx > 0 and ny > 0
        except AssertionError:
            raise WrongArgumentsError('Grid sizes must be positive and even, '
                                      'got nx={}, ny={}.'.format(nx, ny))
        try:
            assert delta > 0 and rd > 0 and dt > 0 and domain_length > 0
        except AssertionError:
            raise WrongArgumentsError('delta, rd, dt and domain_length must '
                                      'be positive.')
        unknown = set(trainable) - set(TRAINABLE)
        if unknown:
            raise WrongArgumentsError('Only {} can be trainable, got '
                                      '{}.'.format(TRAINABLE, sorted(unknown)))

        self.nx, self.ny = nx, ny
        self.domain_length = float(domain_length)
        self.dt = float(dt)
        self.beta = float(beta)
        self.rek = float(rek)
        self.rd = float(rd)
        self.U2 = float(U2)
        self.effective_beta = effective_beta
        self.nonlinear = nonlinear

        self.delta = Parameter(tensor(float(delta), dtype=float64),
                               requires_grad='delta' in trainable)
        self.U1 = Parameter(tensor(float(U1), dtype=float64),
                            requires_grad='U1' in trainable)

    @property
    def grid(self):
        return get_grid(self.nx, self.ny, self.domain_length)

    @property
    def trainable(self):
        return tuple(n for n in TRAINABLE if getattr(self, n).requires_grad)

    def _one_plus_delta(self):
        return ops.add(self.delta, tensor(1., dtype=float64))

    @property
    def F1(self):
        """:math:`1 / (r_d^2 (1 + \\delta))`."""
        return ops.reciprocal(ops.scale(self._one_plus_delta(), self.rd ** 2))

    @property
    def F2(self):
        """:math:`\\delta / (r_d^2 (1 + \\delta))`."""
        return ops.mul(self.delta, self.F1)

    def layer_weights(self):
        """Thickness fractions (H1/H, H2/H) derived from the ratio delta."""
        w2 = ops.reciprocal(self._one_plus_delta())
        return ops.mul(self.delta, w2), w2

    def theta_phy(self):
        return {'delta': self.delta.item(), 'U1': self.U1.item()}

    def set_theta_phy(self, delta=None, U1=None):
        with no_grad():
            if delta is not None:
                self.delta.fill_(float(delta))
            if U1 is not None:
                self.U1.fill_(float(U1))

    def clamp_(self, min_delta=1e-4):
        """Project delta back onto delta >= `min_delta`."""
        with no_grad():
            self.delta.clamp_(min=min_delta)
        return self

    def with_grid(self, nx, ny=None, trainable=None):
        """Same physics (current values, detached) on another grid."""
        return PhysicalParams(
            nx=nx, ny=ny, domain_length=self.domain_length, dt=self.dt,
            beta=self.beta, rek=self.rek, rd=self.rd,
            delta=self.delta.item(), U1=self.U1.item(), U2=self.U2,
            trainable=self.trainable if trainable is None else trainable,
            effective_beta=self.effective_beta, nonlinear=self.nonlinear)

    def extra_repr(self):
        return 'nx={}, ny={}, L={:g}, dt={:g}, delta={:.4g}, U1={:.4g}'.format(
            self.nx, self.ny, self.domain_length, self.dt, self.delta.item(),
            self.U1.item())

# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from ..autodiff import ops
from ..dynamics.grid import SpectralField
from ..dynamics.solver import invert
from ..exceptions import WrongArgumentsError
from .interfaces import Closure


def strain_magnitude(psi_h, grid):
    """:math:`|\\bar S| = \\sqrt{4 u_x^2 + (v_x + u_y)^2}` of the velocities
    :math:`u = -\\psi_y`, :math:`v = \\psi_x`.

    """
    def derivative(coefficients):
        return ops.ifft2(ops.spectral_multiply(psi_h, coefficients),
                         grid.shape)

    u_x = derivative(-grid.ik * grid.il)
    u_y = derivative(-grid.il * grid.il)
    v_x = derivative(grid.ik * grid.ik)
    shear = ops.add(v_x, u_y)
    return ops.sqrt(ops.add(ops.scale(ops.square(u_x), 4.),
                            ops.square(shear)))


def eddy_diffusion(q, psi_h, grid, constant):
    """:math:`\\nabla \\cdot (\\nu_e \\nabla q)` with
    :math:`\\nu_e = (C_s \\Delta)^2 |\\bar S|`.

    """
    nu = ops.scale(strain_magnitude(psi_h, grid),
                   (constant * grid.dx) ** 2)
    qh = ops.fft2(q)
    q_x = ops.ifft2(ops.spectral_multiply(qh, grid.ik), grid.shape)
    q_y = ops.ifft2(ops.spectral_multiply(qh, grid.il), grid.shape)
    flux_x = ops.fft2(ops.mul(nu, q_x))
    flux_y = ops.fft2(ops.mul(nu, q_y))
    return ops.ifft2(ops.add(ops.spectral_multiply(flux_x, grid.ik),
                             ops.spectral_multiply(flux_y, grid.il)),
                     grid.shape)


class SmagorinskyClosure(Closure):
    """Smagorinsky eddy-viscosity closure applied to the PV of each layer.

    Parameters
    ----------
    constant: float
        Smagorinsky constant :math:`C_s \\geq 0`. The filter width
        :math:`\\Delta` is the coarse grid spacing.

    """
    def __init__(self, constant=0.1):
        super().__init__()
        if constant < 0:
            raise WrongArgumentsError('The Smagorinsky constant must be '
                                      'non-negative, got {}.'.format(constant))
        self.constant = float(constant)

    def forward(self, q, params):
        grid = params.grid
        psi_h = invert(SpectralField.from_grid(q, grid), params).values
        return eddy_diffusion(q, psi_h, grid, self.constant)

    def extra_repr(self):
        return 'constant={}'.format(self.constant)

# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from dataclasses import dataclass
from functools import lru_cache
from math import pi

from torch import exp, fft, float64, ones, sqrt, where

from ..autodiff import ops


def exponential_transfer(kappa, cutoff, dx, coefficient=23.6, exponent=4):
    """Spectral filter transfer function: 1 below `cutoff` and
    :math:`\\exp(-a ((\\kappa - \\kappa_c) \\Delta x)^p)` above it.

    """
    rolloff = exp(-coefficient * ((kappa - cutoff) * dx) ** exponent)
    return where(kappa < cutoff, ones(1, dtype=kappa.dtype), rolloff)


class SpectralGrid:
    """Wavenumbers of a doubly periodic square-cell grid in the half-spectrum
    layout of :func:`torch.fft.rfft2`: arrays have shape (ny, nx // 2 + 1).

    Parameters
    ----------
    nx: int
        Grid points along x.
    ny: int
        Grid points along y.
    domain_length: float
        Side of the domain in meters.

    Attributes
    ----------
    k: torch.Tensor
        Zonal wavenumbers (1/m).
    l: torch.Tensor
        Meridional wavenumbers (1/m).
    kappa2: torch.Tensor
        :math:`k^2 + l^2`.
    kappa: torch.Tensor
        :math:`\\sqrt{k^2 + l^2}`.
    ik: torch.Tensor, dtype: torch.complex128
        Spectral x-derivative, zero on the Nyquist column.
    il: torch.Tensor, dtype: torch.complex128
        Spectral y-derivative, zero on the Nyquist row.
    parseval_weights: torch.Tensor
        Multiplicity of each half-spectrum coefficient in the full spectrum.
    kappa_nyquist: float
        :math:`\\pi / \\Delta x`.
    step_filter: torch.Tensor
        Per-step stabilisation filter (cutoff at 0.65 of the Nyquist
        wavenumber, coefficient 23.6, exponent 4).

    """
    def __init__(self, nx, ny, domain_length, dtype=float64):
        self.nx, self.ny = nx, ny
        self.domain_length = domain_length
        self.dx = domain_length / nx
        self.dy = domain_length / ny
        self.shape = (ny, nx)
        self.spectral_shape = (ny, nx // 2 + 1)

        k = 2 * pi * fft.rfftfreq(nx, d=self.dx, dtype=dtype)
        l = 2 * pi * fft.fftfreq(ny, d=self.dy, dtype=dtype)
        self.k = k.view(1, -1).expand(self.spectral_shape).clone()
        self.l = l.view(-1, 1).expand(self.spectral_shape).clone()
        self.kappa2 = self.k ** 2 + self.l ** 2
        self.kappa = sqrt(self.kappa2)

        k_odd, l_odd = self.k.clone(), self.l.clone()
        if nx % 2 == 0:
            k_odd[:, -1] = 0
        if ny % 2 == 0:
            l_odd[ny // 2, :] = 0
        self.ik = 1j * k_odd
        self.il = 1j * l_odd

        self.parseval_weights = 2 * ones(self.spectral_shape, dtype=dtype)
        self.parseval_weights[:, 0] = 1
        if nx % 2 == 0:
            self.parseval_weights[:, -1] = 1

        self.kappa_nyquist = pi / max(self.dx, self.dy)
        self.step_filter = exponential_transfer(
            self.kappa, 0.65 * self.kappa_nyquist, max(self.dx, self.dy))

    def __repr__(self):
        return 'SpectralGrid(nx={}, ny={}, domain_length={})'.format(
            self.nx, self.ny, self.domain_length)


@lru_cache(maxsize=None)
def get_grid(nx, ny, domain_length):
    return SpectralGrid(nx, ny, domain_length)


@dataclass
class SpectralField:
    """Half-spectrum of a layered grid field together with its grid."""
    values: object
    grid: SpectralGrid

    @classmethod
    def from_grid(cls, field, grid):
        return cls(ops.fft2(field), grid)

    def to_grid(self):
        return ops.ifft2(self.values, self.grid.shape)

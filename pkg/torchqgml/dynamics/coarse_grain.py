# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from dataclasses import dataclass
from math import pi

from torch import arange, cat, complex128, fft, long, zeros

from ..autodiff import ops
from ..exceptions import WrongArgumentsError
from .grid import SpectralField, exponential_transfer, get_grid
from .solver import tendency


@dataclass(frozen=True)
class FilterSpec:
    """Coarse-graining filter: identity below the cutoff, exponential
    roll-off :math:`\\exp(-a ((\\kappa - \\kappa_c) \\Delta x)^p)` above.

    Attributes
    ----------
    cutoff: float
        :math:`\\kappa_c` (1/m).
    dx: float
        Low resolution grid spacing (m).
    domain_length: float
        Side of the periodic domain (m).
    coefficient: float
        Attenuation coefficient a.
    exponent: int
        Exponent p.

    """
    cutoff: float
    dx: float
    domain_length: float
    coefficient: float = 23.6
    exponent: int = 4

    def __post_init__(self):
        if not self.cutoff > 0 or not self.dx > 0:
            raise WrongArgumentsError('FilterSpec needs a positive cutoff and '
                                      'spacing, got cutoff={}, dx={}.'.format(
                                          self.cutoff, self.dx))

    @classmethod
    def for_grid(cls, nx_lo, domain_length, fraction=0.65, **kwargs):
        """Filter whose cutoff is `fraction` of the Nyquist wavenumber of an
        `nx_lo` grid.

        """
        dx = domain_length / nx_lo
        return cls(cutoff=fraction * pi / dx, dx=dx,
                   domain_length=domain_length, **kwargs)

    def transfer(self, kappa):
        return exponential_transfer(kappa, self.cutoff, self.dx,
                                    self.coefficient, self.exponent)


@dataclass
class TrainingPair:
    """Coarse state and its sub-grid total tendency."""
    q: object
    target: object
    time: float = 0.


def apply_filter(field_spec, spec):
    """Multiply every coefficient of a spectrum by the filter transfer
    function. Coefficients strictly below the cutoff are returned unchanged.

    """
    grid = field_spec.grid
    if grid.kappa_nyquist < spec.cutoff:
        raise WrongArgumentsError('Filter cutoff {:.4g} lies above the '
                                  'Nyquist wavenumber {:.4g} of {}.'.format(
                                      spec.cutoff, grid.kappa_nyquist, grid))
    return SpectralField(ops.spectral_multiply(field_spec.values,
                                               spec.transfer(grid.kappa)),
                         grid)


def truncation_indices(ny_hi, ny_lo, nx_lo):
    """Rows and columns of a high resolution half spectrum which make up the
    half spectrum of an (ny_lo, nx_lo) grid.

    """
    rows = cat([arange(ny_lo // 2), arange(ny_hi - ny_lo // 2, ny_hi)])
    cols = arange(nx_lo // 2 + 1)
    return rows.to(long), cols.to(long)


def _check_sizes(n_small, n_large):
    try:
        assert n_small % 2 == 0 and n_large % 2 == 0 and 0 < n_small <= n_large
    except AssertionError:
        raise WrongArgumentsError('Cannot map a {} point axis onto {} points '
                                  '(sizes must be even and the coarse one '
                                  'not larger).'.format(n_large, n_small))


def coarsen(field_hi, nx_lo, ny_lo, spec):
    """Filter a high resolution field and project it on an (ny_lo, nx_lo)
    grid. Retained mode amplitudes are preserved.

    Parameters
    ----------
    field_hi: torch.Tensor, shape: (..., ny_hi, nx_hi)
    nx_lo: int
    ny_lo: int
    spec: FilterSpec

    Returns
    -------
    field_lo: torch.Tensor, shape: (..., ny_lo, nx_lo)

    """
    ny_hi, nx_hi = field_hi.shape[-2:]
    _check_sizes(nx_lo, nx_hi)
    _check_sizes(ny_lo, ny_hi)
    grid_hi = get_grid(nx_hi, ny_hi, spec.domain_length)
    filtered = apply_filter(SpectralField.from_grid(field_hi, grid_hi), spec)
    rows, cols = truncation_indices(ny_hi, ny_lo, nx_lo)
    lo = ops.select_modes(filtered.values, rows, cols)
    lo = ops.scale(lo, (nx_lo * ny_lo) / (nx_hi * ny_hi))
    return ops.ifft2(lo, (ny_lo, nx_lo))


def refine(field_lo, nx_hi, ny_hi):
    """Exact spectral upsampling by zero padding. The Nyquist row and
    column of the coarse spectrum are dropped.

    """
    ny_lo, nx_lo = field_lo.shape[-2:]
    _check_sizes(nx_lo, nx_hi)
    _check_sizes(ny_lo, ny_hi)
    lo = fft.rfft2(field_lo)
    hi = zeros(field_lo.shape[:-2] + (ny_hi, nx_hi // 2 + 1),
               dtype=complex128)
    half = ny_lo // 2
    hi[..., :half, :nx_lo // 2] = lo[..., :half, :nx_lo // 2]
    hi[..., ny_hi - half + 1:, :nx_lo // 2] = lo[..., half + 1:, :nx_lo // 2]
    return fft.irfft2(hi * (nx_hi * ny_hi) / (nx_lo * ny_lo),
                      s=(ny_hi, nx_hi))


def _same_physics(params_hi, params_lo):
    keys = ('domain_length', 'beta', 'rek', 'rd', 'U2', 'effective_beta',
            'nonlinear')
    return all(getattr(params_hi, k) == getattr(params_lo, k) for k in keys) \
        and params_hi.theta_phy() == params_lo.theta_phy()


def subgrid_tendency(q_hi, params_hi, params_lo, spec, time=0.):
    """Sub-grid total tendency of a high resolution snapshot: the coarsened
    high resolution tendency minus the low resolution tendency of the
    coarsened state.

    Parameters
    ----------
    q_hi: torch.Tensor, shape: (..., 2, ny_hi, nx_hi)
    params_hi: torchqgml.dynamics.PhysicalParams
    params_lo: torchqgml.dynamics.PhysicalParams
        Same physics as `params_hi` on the coarse grid.
    spec: FilterSpec
    time: float
        Timestamp stored in the returned pair.

    Returns
    -------
    pair: TrainingPair

    """
    if not _same_physics(params_hi, params_lo):
        raise WrongArgumentsError('High and low resolution parameters must '
                                  'only differ by their grid.')
    nx, ny = params_lo.nx, params_lo.ny
    q_bar = coarsen(q_hi, nx, ny, spec)
    resolved = coarsen(tendency(q_hi, params_hi), nx, ny, spec)
    target = ops.sub(resolved, tendency(q_bar, params_lo))
    return TrainingPair(q_bar, target, time)

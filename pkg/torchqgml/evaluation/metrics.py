# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers

Forecast skill scores. Fields have shape (..., 2, ny, nx); scores are
pooled over the layers and the grid points, so one value is returned per
leading index (typically per time).
"""

from ..exceptions import SanityError, SizeMismatchError

FIELD_DIMS = (-3, -2, -1)


def _check_shapes(*tensors):
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors[1:]):
        raise SizeMismatchError('Fields of shapes {} cannot be '
                                'compared.'.format([tuple(t.shape)
                                                    for t in tensors]))
    if len(shape) < 3:
        raise SizeMismatchError('Fields must have shape (..., 2, ny, nx), got '
                                '{}.'.format(tuple(shape)))


def mse(truth, pred):
    """Mean squared error.

    Returns
    -------
    mse: torch.Tensor, shape: truth.shape[:-3]

    """
    _check_shapes(truth, pred)
    return ((truth - pred) ** 2).mean(dim=FIELD_DIMS)


def r2(truth, pred):
    """Coefficient of determination :math:`1 - SS_{res} / SS_{tot}`.

    Returns
    -------
    r2: torch.Tensor, shape: truth.shape[:-3]

    Raises
    ------
    SanityError
        When a truth field is constant.

    """
    _check_shapes(truth, pred)
    anomaly = truth - truth.mean(dim=FIELD_DIMS, keepdim=True)
    ss_tot = (anomaly ** 2).sum(dim=FIELD_DIMS)
    if (ss_tot == 0).any():
        raise SanityError('R2 is undefined for a constant truth field.')
    ss_res = ((truth - pred) ** 2).sum(dim=FIELD_DIMS)
    return 1 - ss_res / ss_tot


def coverage(truth, mean, sigma, width=2.):
    """Fraction of points where :math:`|truth - mean| \\leq width \\cdot
    \\sigma`.

    """
    _check_shapes(truth, mean, sigma)
    return ((truth - mean).abs() <= width * sigma).double().mean().item()


def coverage_series(truth, mean, sigma, width=2.):
    """:func:`coverage` per leading index."""
    _check_shapes(truth, mean, sigma)
    inside = ((truth - mean).abs() <= width * sigma).double()
    return inside.mean(dim=FIELD_DIMS)

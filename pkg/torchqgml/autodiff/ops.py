# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers

Functional entry points of the tape op-kinds.
"""

from .tape import record


def add(a, b):
    return record('add', a, b)


def sub(a, b):
    return record('sub', a, b)


def mul(a, b):
    return record('mul', a, b)


def scale(x, factor):
    return record('scale', x, factor=float(factor))


def square(x):
    return record('square', x)


def reciprocal(x):
    return record('reciprocal', x)


def sqrt(x):
    return record('sqrt', x)


def reduce_sum(x):
    return record('sum', x)


def reduce_mean(x):
    return record('mean', x)


def relu(x):
    return record('relu', x)


def fft2(x):
    """Unnormalized real-to-half-spectrum transform of the last two dims."""
    return record('fft2', x)


def ifft2(xh, shape):
    """Inverse of :func:`fft2` (scaled by 1/N) onto a field of `shape`."""
    return record('ifft2', xh, shape=tuple(shape))


def spectral_multiply(xh, coefficients):
    return record('spectral-diagonal-multiply', xh, coefficients)


def layer_mix(xh, matrix):
    """Per-wavenumber linear coupling of the layers of a spectrum."""
    return record('layer-mix', xh, matrix)


def select_modes(xh, rows, cols):
    return record('select-modes', xh, rows=rows, cols=cols)


def pad_periodic(x, width):
    return record('pad-periodic', x, width=int(width))


def conv2_periodic(x, weight, bias=None):
    """Periodic 2D convolution. Accepts (C, H, W) or (B, C, H, W) inputs."""
    if x.dim() == 3:
        return record('conv2-periodic', x.unsqueeze(0), weight,
                      bias).squeeze(0)
    return record('conv2-periodic', x, weight, bias)

# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from torch import float64, isfinite, no_grad, view_as_real

from ..exceptions import NonFiniteError, SizeMismatchError
from .tape import Tape, backward


def grad_check(f, x, eps=1e-6, indices=None, floor=1e-12):
    """Compare the tape gradient of a scalar function with central finite
    differences.

    Parameters
    ----------
    f: callable
        Function mapping a tensor shaped like `x` to a scalar tensor. It must
        issue at least one tape operation.
    x: torch.Tensor
        Evaluation point.
    eps: float
        Finite-difference step.
    indices: iterable of int, optional
        Flat indices of the components to check. All components by default.
    floor: float
        Added to the magnitude of the finite difference in the relative
        error.

    Returns
    -------
    error: float
        :math:`\\max_j |g_j - d_j| / (|d_j| + floor)` where `g` is the
        adjoint gradient and `d` the central difference.

    """
    if eps <= 0:
        raise SizeMismatchError('The finite-difference step must be '
                                'positive, got {}.'.format(eps))
    x = x.detach().to(float64).clone()
    if not isfinite(x).all():
        raise NonFiniteError('grad_check called at a non-finite point.')

    leaf = x.clone().requires_grad_(True)
    with Tape() as tape:
        y = f(leaf)
    if y.numel() != 1:
        raise SizeMismatchError('grad_check needs a scalar function, got an '
                                'output of shape {}.'.format(tuple(y.shape)))
    if not isfinite(y).all():
        raise NonFiniteError('Non-finite function value in grad_check.')
    adjoint = backward(tape, output=y, inputs=[leaf]).of(leaf).reshape(-1)
    if not isfinite(adjoint).all():
        raise NonFiniteError('Non-finite adjoint gradient in grad_check.')

    flat = x.reshape(-1)
    if indices is None:
        indices = range(flat.numel())
    error = 0.
    with no_grad():
        for j in indices:
            xp, xm = flat.clone(), flat.clone()
            xp[j] += eps
            xm[j] -= eps
            fd = (f(xp.view_as(x)) - f(xm.view_as(x))).item() / (2 * eps)
            if fd != fd or abs(fd) == float('inf'):
                raise NonFiniteError('Non-finite finite difference at '
                                     'component {}.'.format(j))
            error = max(error,
                        abs(adjoint[j].item() - fd) / (abs(fd) + floor))
    return error


def grad_check_parameters(f, params, rel_step=1e-6, indices=None,
                          floor=1e-12):
    """Compare the tape gradients of a scalar function of module parameters
    with central finite differences taken by perturbing the parameters in
    place.

    Parameters
    ----------
    f: callable
        Function without arguments returning a scalar tensor computed from
        `params`.
    params: list of torch.nn.Parameter
    rel_step: float
        The step of a component p is `rel_step` * max(|p|, 1e-3).
    indices: list, optional
        For every parameter, the flat indices to check (all by default).
    floor: float

    Returns
    -------
    error: float
        Maximum relative error over the checked components.

    """
    with Tape() as tape:
        y = f()
    if y.numel() != 1:
        raise SizeMismatchError('grad_check_parameters needs a scalar '
                                'function, got an output of shape '
                                '{}.'.format(tuple(y.shape)))
    grads = backward(tape, output=y, inputs=params)
    error = 0.
    with no_grad():
        for n, p in enumerate(params):
            adjoint = grads.of(p).reshape(-1)
            flat = p.data.view(-1)
            checked = range(flat.numel()) if indices is None else indices[n]
            for j in checked:
                value = flat[j].item()
                h = rel_step * max(abs(value), 1e-3)
                flat[j] = value + h
                up = f().item()
                flat[j] = value - h
                down = f().item()
                flat[j] = value
                fd = (up - down) / (2 * h)
                if fd != fd or abs(fd) == float('inf'):
                    raise NonFiniteError('Non-finite finite difference for '
                                         'parameter {}, component '
                                         '{}.'.format(n, j))
                error = max(error, abs(adjoint[j].item() - fd) /
                            (abs(fd) + floor))
    return error


def inner(a, b):
    """Real inner product, complex tensors seen as interleaved real pairs."""
    if a.is_complex():
        a, b = view_as_real(a), view_as_real(b)
    return (a * b).sum()


def adjoint_mismatch(op, x, y):
    """Relative mismatch of :math:`\\langle L x, y\\rangle` and
    :math:`\\langle x, L^* y\\rangle` for a linear op `L`, where the adjoint
    is applied by reverse traversal of the tape with seed `y`.

    """
    leaf = x.detach().clone().requires_grad_(True)
    with Tape() as tape:
        out = op(leaf)
    if out.shape != y.shape:
        raise SizeMismatchError('Probe of shape {} for an output of shape '
                                '{}.'.format(tuple(y.shape), tuple(out.shape)))
    adj = backward(tape, seed=y, output=out, inputs=[leaf]).of(leaf)
    lhs = inner(out.detach(), y).item()
    rhs = inner(x, adj).item()
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)

# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers

Pseudo-spectral two-layer quasi-geostrophic solver. Fields are real tensors of
shape (2, ny, nx), optionally with a leading batch dimension; every operation
acting on them is issued through :mod:`torchqgml.autodiff.ops` so that
rollouts are differentiable with respect to the physical parameters, the
closure parameters and the initial state.
"""

from dataclasses import dataclass
from functools import lru_cache

from torch import Generator, float64, isfinite, ones_like, randn, stack, \
    tensor, where, zeros_like

from ..autodiff import ops
from ..exceptions import IntegrationBlowupError, SingularInversionError, \
    SizeMismatchError, WrongArgumentsError
from .grid import SpectralField

AB_COEFFICIENTS = ((1.,), (3 / 2, -1 / 2), (23 / 12, -16 / 12, 5 / 12))


def _matrix(a11, a12, a21, a22):
    return stack([stack([a11, a12]), stack([a21, a22])])


@lru_cache(maxsize=None)
def _forward_basis(grid):
    k2 = grid.kappa2
    zero, one = zeros_like(k2), ones_like(k2)
    return (_matrix(-k2, zero, zero, -k2),
            _matrix(-one, one, zero, zero),
            _matrix(zero, zero, one, -one))


@lru_cache(maxsize=None)
def _inversion_basis(grid, rd):
    k2 = grid.kappa2
    nonzero = k2 > 0
    det = k2 * (k2 + 1. / rd ** 2)
    if not (det[nonzero] > 0).all() or not isfinite(det).all():
        raise SingularInversionError('Singular PV inversion at a nonzero '
                                     'wavenumber (rd={}).'.format(rd))
    inv = where(nonzero, 1. / where(nonzero, det, ones_like(det)),
                zeros_like(det))
    zero = zeros_like(k2)
    return (_matrix(-k2 * inv, zero, zero, -k2 * inv),
            _matrix(zero, -inv, zero, -inv),
            _matrix(-inv, zero, -inv, zero))


def _couple(basis, params):
    m0, b1, b2 = basis
    F1, F2 = params.F1, params.F2
    if not (isfinite(F1) and isfinite(F2)):
        raise SingularInversionError('Non-finite layer coupling F1={}, F2={} '
                                     '(delta={}).'.format(F1.item(),
                                                          F2.item(),
                                                          params.delta.item()))
    return ops.add(ops.add(m0, ops.mul(b1, F1)), ops.mul(b2, F2))


def _check_grid(field, params, what):
    if field.shape[-3:] != (2,) + params.grid.shape:
        raise SizeMismatchError('{} of shape {} does not live on the {}x{} '
                                'two-layer grid.'.format(
                                    what, tuple(field.shape), params.ny,
                                    params.nx))


def forward_pv(psi_spec, params):
    """Potential vorticity spectrum of a stream function spectrum:
    :math:`\\hat q_1 = -(\\kappa^2 + F_1) \\hat\\psi_1 + F_1 \\hat\\psi_2` and
    :math:`\\hat q_2 = F_2 \\hat\\psi_1 - (\\kappa^2 + F_2) \\hat\\psi_2`.

    """
    coupling = _couple(_forward_basis(params.grid), params)
    return SpectralField(ops.layer_mix(psi_spec.values, coupling),
                         params.grid)


def invert(q_spec, params):
    """Stream function spectrum of a potential vorticity spectrum. The
    2x2 system of :func:`forward_pv` is solved in closed form at every
    nonzero wavenumber; the mean mode of the stream function is set to zero.

    Parameters
    ----------
    q_spec: torchqgml.dynamics.SpectralField
        PV half-spectrum, shape (..., 2, ny, nx // 2 + 1).
    params: torchqgml.dynamics.PhysicalParams

    Returns
    -------
    psi_spec: torchqgml.dynamics.SpectralField

    """
    grid = params.grid
    if q_spec.values.shape[-3:] != (2,) + grid.spectral_shape:
        raise SizeMismatchError('Spectrum of shape {} does not match the '
                                'grid of the parameters ({}).'.format(
                                    tuple(q_spec.values.shape), grid))
    coupling = _couple(_inversion_basis(grid, params.rd), params)
    return SpectralField(ops.layer_mix(q_spec.values, coupling), grid)


def velocities(psi_h, grid):
    """Grid velocities :math:`u = -\\psi_y`, :math:`v = \\psi_x`."""
    u = ops.ifft2(ops.spectral_multiply(psi_h, -grid.il), grid.shape)
    v = ops.ifft2(ops.spectral_multiply(psi_h, grid.ik), grid.shape)
    return u, v


def advection_spectrum(psi_h, q, grid):
    """Spectrum of :math:`J(\\psi, q) = \\partial_x(u q) + \\partial_y(v q)`.
    Derivatives are taken in spectral space, products on the grid.

    """
    u, v = velocities(psi_h, grid)
    return ops.add(ops.spectral_multiply(ops.fft2(ops.mul(u, q)), grid.ik),
                   ops.spectral_multiply(ops.fft2(ops.mul(v, q)), grid.il))


def jacobian(psi, q, grid):
    """Grid-space Jacobian :math:`\\psi_x q_y - \\psi_y q_x`."""
    return ops.ifft2(advection_spectrum(ops.fft2(psi), q, grid), grid.shape)


@lru_cache(maxsize=None)
def _mean_flow_basis(grid, rek):
    minus_ik = -grid.ik
    zero = zeros_like(minus_ik)
    drag = (rek * grid.kappa2).to(minus_ik.dtype)
    return (stack([minus_ik, zero]), stack([zero, minus_ik]),
            stack([zero, drag]))


def _first_bad(x):
    if x.dim() < 4:
        return None
    bad = (~isfinite(x)).flatten(1).any(1).nonzero()
    return int(bad[0]) if len(bad) else None


def tendency(q, params, closure_output=None):
    """Right-hand side :math:`\\partial q_i / \\partial t` of the two-layer
    model, optionally augmented by a closure term.

    Parameters
    ----------
    q: torch.Tensor, shape: (..., 2, ny, nx), dtype: torch.float64
        Potential vorticity.
    params: torchqgml.dynamics.PhysicalParams
    closure_output: torch.Tensor, optional
        Sub-grid tendency added to the resolved one. Same shape as `q`.

    Returns
    -------
    dq: torch.Tensor
        :math:`-J(\\psi_i, q_i) - Q_{y,i} \\partial_x\\psi_i -
        U_i \\partial_x q_i`, with :math:`-r_{ek} \\nabla^2 \\psi_2` in the
        lower layer. With `params.effective_beta` the mean PV gradients are
        :math:`Q_{y,1} = \\beta + F_1 (U_1 - U_2)` and
        :math:`Q_{y,2} = \\beta - F_2 (U_1 - U_2)`, otherwise both are
        :math:`\\beta`.

    """
    _check_grid(q, params, 'PV field')
    grid = params.grid
    qh = ops.fft2(q)
    psi_h = invert(SpectralField(qh, grid), params).values

    e1, e2, drag = _mean_flow_basis(grid, params.rek)
    beta = tensor(params.beta, dtype=float64)
    U2 = tensor(params.U2, dtype=float64)
    if params.effective_beta:
        shear = ops.sub(params.U1, U2)
        qy1 = ops.add(beta, ops.mul(params.F1, shear))
        qy2 = ops.sub(beta, ops.mul(params.F2, shear))
    else:
        qy1 = qy2 = beta
    c_psi = ops.add(ops.add(ops.mul(e1, qy1), ops.mul(e2, qy2)), drag)
    c_q = ops.add(ops.mul(e1, params.U1), ops.mul(e2, U2))

    dqh = ops.add(ops.spectral_multiply(psi_h, c_psi),
                  ops.spectral_multiply(qh, c_q))
    if params.nonlinear:
        dqh = ops.sub(dqh, advection_spectrum(psi_h, q, grid))
    dq = ops.ifft2(dqh, grid.shape)

    if closure_output is not None:
        if closure_output.shape != dq.shape:
            raise SizeMismatchError('Closure output of shape {} for a state '
                                    'of shape {}.'.format(
                                        tuple(closure_output.shape),
                                        tuple(dq.shape)))
        dq = ops.add(dq, closure_output)

    if not isfinite(dq).all():
        raise IntegrationBlowupError('Non-finite tendency.',
                                     trajectory=_first_bad(dq))
    return dq


def filter_state(q, params):
    """Per-step spectral stabilisation filter."""
    grid = params.grid
    return ops.ifft2(ops.spectral_multiply(ops.fft2(q), grid.step_filter),
                     grid.shape)


def adams_bashforth(tendencies):
    """Adams-Bashforth increment of order len(tendencies), newest first."""
    coefficients = AB_COEFFICIENTS[len(tendencies) - 1]
    increment = ops.scale(tendencies[0], coefficients[0])
    for c, t in zip(coefficients[1:], tendencies[1:]):
        increment = ops.add(increment, ops.scale(t, c))
    return increment


@dataclass(frozen=True)
class ModelState:
    """Prognostic state of the solver.

    Attributes
    ----------
    q: torch.Tensor
        Potential vorticity (1/s).
    history: tuple of torch.Tensor
        Up to two previous tendencies, newest first.
    step: int
        Number of steps taken.

    """
    q: object
    history: tuple = ()
    step: int = 0


def step_ab3(state, params, closure=None):
    """Advance the state by one timestep: forward Euler, then AB2, then AB3
    with coefficients (23/12, -16/12, 5/12). The stabilisation filter is
    applied to the updated state.

    Parameters
    ----------
    state: ModelState
    params: torchqgml.dynamics.PhysicalParams
    closure: callable, optional
        Maps (q, params) to a closure tendency or None.

    Returns
    -------
    state: ModelState

    """
    try:
        assert len(state.history) <= 2
    except AssertionError:
        raise WrongArgumentsError('At most two past tendencies are used, got '
                                  '{}.'.format(len(state.history)))
    try:
        closure_output = None if closure is None else closure(state.q, params)
        dq = tendency(state.q, params, closure_output)
    except IntegrationBlowupError as e:
        raise IntegrationBlowupError('Non-finite tendency at step '
                                     '{}.'.format(state.step),
                                     step=state.step, trajectory=e.trajectory)

    tendencies = (dq,) + tuple(state.history)
    q = ops.add(state.q, ops.scale(adams_bashforth(tendencies), params.dt))
    q = filter_state(q, params)
    if not isfinite(q).all():
        raise IntegrationBlowupError('Non-finite state after step '
                                     '{}.'.format(state.step),
                                     step=state.step, trajectory=_first_bad(q))
    return ModelState(q, tendencies[:2], state.step + 1)


def iterate(state, n_obs, k, params, closure=None):
    """Generator over the states reached every `k` steps, `n_obs` times."""
    try:
        assert n_obs >= 0 and k >= 1
    except AssertionError:
        raise WrongArgumentsError('Rollouts need n_obs >= 0 and k >= 1, got '
                                  'n_obs={}, k={}.'.format(n_obs, k))
    for i in range(n_obs):
        for _ in range(k):
            try:
                state = step_ab3(state, params, closure)
            except IntegrationBlowupError as e:
                raise IntegrationBlowupError(
                    'Rollout blew up at step {} before observation '
                    '{}{}.'.format(
                        e.step, i + 1,
                        '' if e.trajectory is None else
                        ' (trajectory {})'.format(e.trajectory)),
                    step=e.step, obs_index=i + 1, trajectory=e.trajectory)
        yield state


def rollout(q0, n_obs, k, params, closure=None):
    """Sparse trajectory :math:`\\{M^{ik}(q_0)\\}_{i=0..N}`.

    Parameters
    ----------
    q0: torch.Tensor, shape: (..., 2, ny, nx)
        Initial PV. A leading batch dimension integrates several
        trajectories at once.
    n_obs: int
        Number N of observations after the initial one.
    k: int
        Solver steps between observations.
    params: torchqgml.dynamics.PhysicalParams
    closure: callable, optional

    Returns
    -------
    states: list of torch.Tensor
        N + 1 fields, the first being `q0`.

    """
    _check_grid(q0, params, 'Initial state')
    states = [q0]
    for state in iterate(ModelState(q0), n_obs, k, params, closure):
        states.append(state.q)
    return states


def total_kinetic_energy(q, params, spectral=True):
    """Thickness-weighted domain-mean kinetic energy
    :math:`\\sum_i w_i \\langle |\\nabla\\psi_i|^2 \\rangle / 2` with
    :math:`w_1 = \\delta / (1 + \\delta)` and :math:`w_2 = 1 / (1 + \\delta)`.

    Parameters
    ----------
    q: torch.Tensor, shape: (..., 2, ny, nx)
    params: torchqgml.dynamics.PhysicalParams
    spectral: bool
        Evaluate the gradients' energy from the spectral coefficients
        (Parseval) rather than on the grid.

    Returns
    -------
    ke: torch.Tensor, shape: (...)
        In m^2/s^2.

    """
    _check_grid(q, params, 'PV field')
    grid = params.grid
    psi_h = invert(SpectralField.from_grid(q, grid), params).values
    if spectral:
        density = (abs(psi_h * grid.ik) ** 2 + abs(psi_h * grid.il) ** 2)
        energy = (density * grid.parseval_weights).sum((-2, -1)) / \
            (grid.nx * grid.ny) ** 2
    else:
        u, v = velocities(psi_h, grid)
        energy = (u ** 2 + v ** 2).mean((-2, -1))
    w1, w2 = params.layer_weights()
    return 0.5 * (w1 * energy[..., 0] + w2 * energy[..., 1])


def random_initial_condition(params, seed, amplitude=1e-7, batch=None):
    """Zero-mean Gaussian PV noise of standard deviation `amplitude`."""
    generator = Generator().manual_seed(int(seed))
    shape = (2,) + params.grid.shape
    if batch is not None:
        shape = (batch,) + shape
    q = amplitude * randn(shape, generator=generator, dtype=float64)
    return q - q.mean(dim=(-2, -1), keepdim=True)

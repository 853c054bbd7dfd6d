# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from math import exp, log, pi

from torch import no_grad

from ..autodiff import Tape, backward, ops
from ..dynamics import rollout
from ..exceptions import WrongArgumentsError

LOG_2PI = log(2 * pi)


def residual_sum_of_squares(model, truth, k):
    """Sum over trajectories, observations 1..N, layers and grid points of
    the squared forecast residuals.

    Parameters
    ----------
    model: torchqgml.models.QGModel
    truth: torch.Tensor, shape: (b_size, N + 1, 2, ny, nx)
    k: int

    Returns
    -------
    rss: torch.Tensor, shape: ()
        Recorded on the active tape, if any.
    n_points: int
        Number D of residual scalars.

    """
    n_obs = truth.shape[1] - 1
    if n_obs < 1 or truth.shape[0] < 1:
        raise WrongArgumentsError('The likelihood needs a nonempty batch with '
                                  'at least one observation after the '
                                  'initial state.')
    forecast = rollout(truth[:, 0], n_obs, k, model.params, model.closure)
    rss = None
    for i in range(1, n_obs + 1):
        term = ops.reduce_sum(ops.square(ops.sub(forecast[i], truth[:, i])))
        rss = term if rss is None else ops.add(rss, term)
    return rss, truth[:, 1:].numel()


def gaussian_log_likelihood(rss, n_points, gamma, factor=1.):
    """:math:`f (\\frac{D}{2} \\log \\frac{\\gamma}{2\\pi} - \\frac{\\gamma}{2}
    RSS)` where f scales a minibatch to the whole dataset.

    """
    try:
        assert gamma > 0
    except AssertionError:
        raise WrongArgumentsError('The observation precision must be '
                                  'positive, got {}.'.format(gamma))
    return factor * (0.5 * n_points * (log(gamma) - LOG_2PI) -
                     0.5 * gamma * rss)


def minibatch_log_likelihood(model, batch, k, gamma, n_total=None):
    """Gaussian log likelihood of a minibatch of truth trajectories given the
    forecasts of `model`, scaled by `n_total` / batch size.

    Parameters
    ----------
    model: torchqgml.models.QGModel
    batch: torch.Tensor, shape: (b_size, N + 1, 2, ny, nx)
    k: int
    gamma: float
        Observation precision.
    n_total: int, optional
        Number of trajectories of the dataset. Defaults to the batch size
        (no scaling).

    Returns
    -------
    log_likelihood: torch.Tensor, shape: ()
        Differentiable with respect to the model parameters through the
        tape.

    """
    b_size = batch.shape[0]
    factor = 1. if n_total is None else n_total / b_size
    rss, n_points = residual_sum_of_squares(model, batch, k)
    constant = gaussian_log_likelihood(0., n_points, gamma, factor)
    return ops.add(ops.scale(rss, -0.5 * gamma * factor),
                   rss.new_tensor(constant))


def likelihood_terms(model, params, batch, k, log_gamma, n_total=None):
    """Scaled log likelihood and its gradients with respect to `params` and
    to :math:`\\log \\gamma`.

    Returns
    -------
    log_likelihood: float
    grads: list of torch.Tensor
    d_log_gamma: float

    Raises
    ------
    IntegrationBlowupError
        When a forecast blows up.

    """
    gamma = exp(float(log_gamma))
    factor = 1. if n_total is None else n_total / batch.shape[0]
    with Tape() as tape:
        rss, n_points = residual_sum_of_squares(model, batch, k)
    grads = backward(tape, output=rss, inputs=params)
    rss_value = rss.item()
    log_likelihood = gaussian_log_likelihood(rss_value, n_points, gamma,
                                             factor)
    d_params = [-0.5 * gamma * factor * grads.of(p).detach() for p in params]
    d_log_gamma = factor * (0.5 * n_points - 0.5 * gamma * rss_value)
    return log_likelihood, d_params, d_log_gamma


def mean_squared_residual(model, dataset, k, batch_size=4):
    """Mean squared forecast residual over a dataset, without gradients."""
    total, count = 0., 0
    with no_grad():
        for start in range(0, len(dataset), batch_size):
            batch = dataset.states[start:start + batch_size]
            rss, n_points = residual_sum_of_squares(model, batch, k)
            total += rss.item()
            count += n_points
    if count == 0:
        raise WrongArgumentsError('Empty dataset.')
    return total / count

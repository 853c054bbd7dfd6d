# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from dataclasses import dataclass
from math import exp, inf, lgamma, log

from torch import as_tensor, float64

from ..exceptions import WrongArgumentsError

MODES = ('log', 'value')


@dataclass(frozen=True)
class Hyperpriors:
    """Gamma shapes and rates of the hyperpriors of the Laplace precision
    :math:`\\lambda` (`alpha1`, `beta1`) and of the observation precision
    :math:`\\gamma` (`alpha2`, `beta2`).

    """
    alpha1: float = 1.
    beta1: float = 1.
    alpha2: float = 1.
    beta2: float = 1.

    def __post_init__(self):
        if min(self.alpha1, self.beta1, self.alpha2, self.beta2) <= 0:
            raise WrongArgumentsError('Hyperprior shapes and rates must be '
                                      'positive, got {}.'.format(self))

    @classmethod
    def from_config(cls, config):
        return cls(config.alpha1, config.beta1, config.alpha2, config.beta2)


def log_prior(theta, lam):
    """Laplace log density :math:`\\sum_j \\log(\\lambda / 2) - \\lambda
    |\\theta_j|`.

    Parameters
    ----------
    theta: torch.Tensor
        Parameters, any shape.
    lam: float
        Precision :math:`\\lambda > 0`.

    Returns
    -------
    log_p: torch.Tensor, shape: ()

    """
    lam = float(lam)
    try:
        assert lam > 0
    except AssertionError:
        raise WrongArgumentsError('The Laplace precision must be positive, '
                                  'got {}.'.format(lam))
    theta = as_tensor(theta, dtype=float64)
    return theta.numel() * log(lam / 2) - lam * theta.abs().sum()


def log_prior_gradient(theta, log_lambda):
    """Gradients of :func:`log_prior` with respect to `theta` and to
    :math:`\\log \\lambda`.

    """
    lam = exp(float(log_lambda))
    return -lam * theta.sign(), theta.numel() - lam * theta.abs().sum().item()


def gamma_log_density(x, shape, rate):
    """Log density of Gamma(`shape`, `rate`) at `x`, :math:`-\\infty` outside
    of its support.

    """
    if x <= 0:
        return -inf
    return shape * log(rate) - lgamma(shape) + (shape - 1) * log(x) - rate * x


def _hyperprior_term(x, shape, rate, mode):
    """Log density and derivative of one hyperprior as a function of the
    sampled log precision `x`.

    """
    if mode == 'log':
        if x <= 0:
            return -inf, 0.
        return gamma_log_density(x, shape, rate), (shape - 1) / x - rate
    value = exp(x)
    # density of the precision itself, plus log |d value / dx| = x
    return (shape * log(rate) - lgamma(shape) + shape * x - rate * value,
            shape - rate * value)


def _check_mode(mode):
    if mode not in MODES:
        raise WrongArgumentsError('Unknown hyperprior mode `{}` (expected one '
                                  'of {}).'.format(mode, MODES))


def log_hyperprior(log_lambda, log_gamma, hyperpriors=None, mode='log'):
    """Joint hyperprior log density of the sampled log precisions.

    Parameters
    ----------
    log_lambda: float
    log_gamma: float
    hyperpriors: Hyperpriors, optional
    mode: str
        'log' evaluates the Gamma densities at the log precisions
        themselves, whose support is then the positive half line. 'value'
        puts the Gamma densities on the precisions and adds the Jacobian of
        the log transform.

    Returns
    -------
    log_p: float
        :math:`-\\infty` outside of the support.

    """
    return hyperprior_terms(log_lambda, log_gamma, hyperpriors, mode)[0]


def hyperprior_terms(log_lambda, log_gamma, hyperpriors=None, mode='log'):
    """:func:`log_hyperprior` and its derivatives with respect to the two
    log precisions.

    """
    _check_mode(mode)
    h = Hyperpriors() if hyperpriors is None else hyperpriors
    lp1, g1 = _hyperprior_term(float(log_lambda), h.alpha1, h.beta1, mode)
    lp2, g2 = _hyperprior_term(float(log_gamma), h.alpha2, h.beta2, mode)
    return lp1 + lp2, g1, g2

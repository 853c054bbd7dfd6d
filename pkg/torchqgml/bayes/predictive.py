# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

import warnings

from dataclasses import dataclass
from math import exp, sqrt

from torch import Generator, float64, no_grad, randn, stack, tensor, zeros
from tqdm.autonotebook import tqdm

from ..dynamics import rollout, total_kinetic_energy
from ..exceptions import IntegrationBlowupError, SanityError, \
    WrongArgumentsError
from .sghmc import FlatParameters


class RunningMoments:
    """Streaming mean and population variance (Welford's algorithm)."""
    def __init__(self):
        self.count = 0
        self.mean = None
        self.m2 = None

    def update(self, x):
        x = x.detach().to(float64)
        self.count += 1
        if self.mean is None:
            self.mean = x.clone()
            self.m2 = zeros(x.shape, dtype=float64)
            return
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    @property
    def variance(self):
        if self.count == 0:
            raise SanityError('No sample accumulated.')
        return self.m2 / self.count


def welford_moments(values):
    """Mean and population variance over the leading dimension of `values`
    (or over an iterable of tensors).

    """
    moments = RunningMoments()
    for x in values:
        moments.update(x if hasattr(x, 'detach') else tensor(x,
                                                             dtype=float64))
    if moments.count == 0:
        raise SanityError('Cannot compute the moments of an empty set.')
    return moments.mean, moments.variance


@dataclass
class PosteriorMoments:
    """Posterior mean and variance of a forecast.

    Attributes
    ----------
    mean: torch.Tensor, shape: (n_obs + 1, 2, ny, nx)
    variance: torch.Tensor, shape: (n_obs + 1, 2, ny, nx)
    ke_mean: torch.Tensor, shape: (n_obs + 1)
        Posterior mean of the total kinetic energy.
    ke_variance: torch.Tensor, shape: (n_obs + 1)
    n_valid: int
    n_invalid: int
        Samples whose forecast blew up; they are excluded.

    """
    mean: object
    variance: object
    ke_mean: object
    ke_variance: object
    n_valid: int
    n_invalid: int

    @property
    def sigma(self):
        return self.variance.sqrt()

    def band(self, width=2.):
        """Lower and upper edges of the `width`-sigma band."""
        return self.mean - width * self.sigma, self.mean + width * self.sigma


def _use_sample(model, ensemble, index, layout=None):
    layout = FlatParameters(model) if layout is None else layout
    if layout.dim + 2 != ensemble.dim:
        raise WrongArgumentsError('Ensemble of dimension {} for a model with '
                                  '{} parameters.'.format(ensemble.dim,
                                                          layout.dim))
    layout.assign(ensemble.theta(index))
    return layout


def predictive_draw(model, ensemble, index, q0, horizon, generator=None,
                    noise=True):
    """Posterior-predictive draw :math:`M^l(X_0; \\theta_i) + \\epsilon` with
    :math:`\\epsilon \\sim \\mathcal{N}(0, \\gamma_i^{-1})`.

    Parameters
    ----------
    model: torchqgml.models.QGModel
        Model whose parameters are overwritten by sample `index`.
    ensemble: torchqgml.bayes.PosteriorEnsemble
    index: int
    q0: torch.Tensor, shape: (2, ny, nx)
    horizon: int
        Number l of solver steps.
    generator: torch.Generator, optional
    noise: bool
        Add the observation noise.

    Returns
    -------
    draw: torch.Tensor, shape: (2, ny, nx)

    Raises
    ------
    IntegrationBlowupError

    """
    if horizon < 0:
        raise WrongArgumentsError('Negative horizon {}.'.format(horizon))
    _use_sample(model, ensemble, index)
    with no_grad():
        forecast = q0 if horizon == 0 else \
            rollout(q0, 1, horizon, model.params, model.closure)[-1]
    if not noise:
        return forecast
    std = 1 / sqrt(exp(ensemble.log_gamma(index)))
    return forecast + std * randn(forecast.shape, generator=generator,
                                  dtype=float64)


def predictive_ensemble(model, ensemble, q0, horizon, n_draws=None, seed=0,
                        verbose=True):
    """Posterior-predictive draws, cycling over the samples of `ensemble`.

    Returns
    -------
    draws: torch.Tensor, shape: (n_valid, 2, ny, nx)
    n_invalid: int
        Draws excluded because their forecast blew up.

    """
    if len(ensemble) == 0:
        raise SanityError('Empty posterior ensemble.')
    n_draws = len(ensemble) if n_draws is None else n_draws
    generator = Generator().manual_seed(int(seed))
    start = FlatParameters(model).vector()
    draws, n_invalid = [], 0
    try:
        for i in tqdm(range(n_draws), unit='draw', disable=not verbose):
            try:
                draws.append(predictive_draw(model, ensemble,
                                             i % len(ensemble), q0, horizon,
                                             generator))
            except IntegrationBlowupError as e:
                n_invalid += 1
                warnings.warn('Predictive draw {} excluded: {}'.format(i, e))
    finally:
        FlatParameters(model).assign(start)
    if not draws:
        raise SanityError('All {} predictive draws blew up.'.format(n_draws))
    return stack(draws), n_invalid


def posterior_moments(model, ensemble, q0, n_obs, k, verbose=True):
    """Posterior mean and variance of the deterministic forecasts
    :math:`M^{ik}(X_0; \\theta_s)` over the samples of `ensemble`. The
    observation noise is not included in the variance.

    Parameters
    ----------
    model: torchqgml.models.QGModel
    ensemble: torchqgml.bayes.PosteriorEnsemble
    q0: torch.Tensor, shape: (2, ny, nx)
    n_obs: int
        Number of forecast times after the initial one.
    k: int
        Solver steps between forecast times.
    verbose: bool

    Returns
    -------
    moments: PosteriorMoments

    """
    if len(ensemble) == 0:
        raise SanityError('Empty posterior ensemble.')
    layout = FlatParameters(model)
    start = layout.vector()
    fields, energies = RunningMoments(), RunningMoments()
    n_invalid = 0
    try:
        for i in tqdm(range(len(ensemble)), unit='sample',
                      disable=not verbose):
            _use_sample(model, ensemble, i, layout)
            with no_grad():
                try:
                    trajectory = stack(rollout(q0, n_obs, k, model.params,
                                               model.closure))
                except IntegrationBlowupError as e:
                    n_invalid += 1
                    warnings.warn('Posterior sample {} excluded: {}'.format(
                        i, e))
                    continue
                fields.update(trajectory)
                energies.update(total_kinetic_energy(trajectory,
                                                     model.params))
    finally:
        layout.assign(start)
    if fields.count == 0:
        raise SanityError('The forecasts of all {} posterior samples blew '
                          'up.'.format(len(ensemble)))
    return PosteriorMoments(fields.mean, fields.variance, energies.mean,
                            energies.variance, fields.count, n_invalid)


def map_estimate(ensemble):
    """Retained sample of maximal log posterior, the earliest one on ties.

    Returns
    -------
    index: int
    position: torch.Tensor, shape: (dim)

    """
    if len(ensemble) == 0:
        raise SanityError('Empty posterior ensemble.')
    log_p = ensemble.log_posteriors.tolist()
    index = max(range(len(log_p)), key=lambda i: (log_p[i], -i))
    return index, ensemble.samples[index]


def posterior_mean_estimate(ensemble):
    """Posterior mean of the positions."""
    if len(ensemble) == 0:
        raise SanityError('Empty posterior ensemble.')
    return ensemble.mean_position()

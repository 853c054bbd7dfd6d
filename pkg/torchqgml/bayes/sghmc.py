# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

import warnings

from dataclasses import dataclass, replace
from math import exp, inf, isfinite as is_finite, log, nan, sqrt

from pandas import DataFrame
from torch import Generator, cat, float64, full, isfinite, long, no_grad, \
    rand, randn, stack, tensor, zeros
from tqdm.autonotebook import tqdm

from ..exceptions import IntegrationBlowupError, NonFiniteError, \
    SamplerDivergedError, WrongArgumentsError
from ..utils.config import SamplerConfig
from ..utils.data import TrajectoryLoader
from ..utils.io import read_ensemble, write_ensemble
from .likelihood import gaussian_log_likelihood, likelihood_terms, \
    mean_squared_residual
from .priors import Hyperpriors, hyperprior_terms, log_prior, \
    log_prior_gradient

ENSEMBLE_COLUMNS = ['iteration', 'log_posterior', 'delta', 'U1',
                    'log_lambda', 'log_gamma']


class FlatParameters:
    """View of the trainable parameters of a model as one flat vector.

    Parameters
    ----------
    model: torch.nn.Module

    Attributes
    ----------
    names: list of str
    tensors: list of torch.nn.Parameter
    shapes: list of torch.Size
    dim: int

    """
    def __init__(self, model):
        named = [(n, p) for n, p in model.named_parameters()
                 if p.requires_grad]
        self.names = [n for n, _ in named]
        self.tensors = [p for _, p in named]
        self.shapes = [p.shape for p in self.tensors]
        self.dim = sum(p.numel() for p in self.tensors)

    def vector(self):
        if not self.tensors:
            return zeros(0, dtype=float64)
        return cat([p.detach().reshape(-1) for p in self.tensors])

    def assign(self, vector):
        if vector.numel() != self.dim:
            raise WrongArgumentsError('Vector of size {} for {} '
                                      'parameters.'.format(vector.numel(),
                                                           self.dim))
        with no_grad():
            start = 0
            for p in self.tensors:
                p.copy_(vector[start:start + p.numel()].view(p.shape))
                start += p.numel()

    def offset(self, name):
        """Position of the first scalar of parameter `name`, None if it is not
        part of the vector.

        """
        start = 0
        for n, p in zip(self.names, self.tensors):
            if n == name:
                return start
            start += p.numel()
        return None

    def flatten(self, tensors):
        return cat([t.reshape(-1) for t in tensors]) if tensors else \
            zeros(0, dtype=float64)


class HierarchicalPosterior:
    """Potential energy :math:`U = -\\log p(\\theta, \\log\\lambda,
    \\log\\gamma | data)` (up to a constant) of the hierarchical model:
    Laplace prior of precision :math:`\\lambda` on every parameter, Gaussian
    observation noise of precision :math:`\\gamma` and Gamma hyperpriors on
    the two precisions.

    Positions are flat vectors (parameters of the model, log lambda,
    log gamma). Calling the object on a position and a minibatch returns
    the potential and its gradient; the likelihood is scaled to the whole
    dataset.

    Parameters
    ----------
    model: torchqgml.models.QGModel
    dataset: torchqgml.data_structures.TrajectoryDataset
    hyperpriors: Hyperpriors, optional
    mode: str
        Hyperprior mode, see :func:`torchqgml.bayes.log_hyperprior`.

    """
    def __init__(self, model, dataset, hyperpriors=None, mode='log'):
        self.model = model
        self.dataset = dataset
        self.k = dataset.k
        self.hyperpriors = Hyperpriors() if hyperpriors is None else \
            hyperpriors
        self.mode = mode
        self.layout = FlatParameters(model)
        self.dim = self.layout.dim + 2

    def initial_position(self, log_lambda=1., log_gamma=None):
        """Current model parameters with the given log precisions. The
        default log gamma is minus the log of the mean squared residual of
        the current model on the dataset.

        """
        if log_gamma is None:
            log_gamma = -log(mean_squared_residual(self.model, self.dataset,
                                                   self.k))
        return cat([self.layout.vector(),
                    tensor([float(log_lambda), float(log_gamma)],
                           dtype=float64)])

    def _assign(self, position):
        if position.shape != (self.dim,):
            raise WrongArgumentsError('Position of shape {} for a {} '
                                      'dimensional posterior.'.format(
                                          tuple(position.shape), self.dim))
        theta, log_lambda, log_gamma = (position[:-2], position[-2].item(),
                                        position[-1].item())
        self.layout.assign(theta)
        hyper = hyperprior_terms(log_lambda, log_gamma, self.hyperpriors,
                                 self.mode)
        inside = self.model.params.delta.item() > 0 and is_finite(hyper[0])
        return theta, log_lambda, log_gamma, hyper, inside

    def log_posterior(self, position, batch=None):
        """Unnormalized log posterior and its gradient.

        Parameters
        ----------
        position: torch.Tensor, shape: (dim)
        batch: torch.Tensor, optional
            Minibatch of truth trajectories, the whole dataset by default.

        Returns
        -------
        log_p: float
            :math:`-\\infty` outside of the support (delta <= 0, or a log
            precision outside of the hyperprior support).
        grad: torch.Tensor, shape: (dim)
            NaN outside of the support, so that samplers reject the move.

        """
        theta, log_lambda, log_gamma, hyper, inside = self._assign(position)
        if not inside:
            return -inf, full((self.dim,), nan, dtype=float64)
        batch = self.dataset.states if batch is None else batch

        ll, d_params, d_log_gamma = likelihood_terms(
            self.model, self.layout.tensors, batch, self.k, log_gamma,
            len(self.dataset))
        lp = log_prior(theta, exp(log_lambda)).item()
        d_theta, d_log_lambda = log_prior_gradient(theta, log_lambda)
        lh, dh_lambda, dh_gamma = hyper

        grad = cat([self.layout.flatten(d_params) + d_theta,
                    tensor([d_log_lambda + dh_lambda, d_log_gamma + dh_gamma],
                           dtype=float64)])
        return ll + lp + lh, grad

    def log_density(self, position, batch_size=4):
        """Log posterior on the whole dataset, without gradient. Retained
        samples are ranked with it.

        Returns
        -------
        log_p: float
            :math:`-\\infty` outside of the support or when a forecast
            blows up.

        """
        theta, log_lambda, log_gamma, hyper, inside = self._assign(position)
        if not inside:
            return -inf
        try:
            mean_square = mean_squared_residual(self.model, self.dataset,
                                              self.k, batch_size)
        except IntegrationBlowupError:
            return -inf
        n_points = self.dataset.states[:, 1:].numel()
        ll = gaussian_log_likelihood(mean_square * n_points, n_points,
                                     exp(log_gamma))
        return ll + log_prior(theta, exp(log_lambda)).item() + hyper[0]

    def __call__(self, position, batch=None):
        log_p, grad = self.log_posterior(position, batch)
        return -log_p, -grad


@dataclass
class HmcState:
    """State of an SG-HMC chain.

    Attributes
    ----------
    position: torch.Tensor, shape: (dim)
    momentum: torch.Tensor, shape: (dim)
    step_size: float
    n_leapfrog: int
    friction: float
    scale: float
        Dataset size over minibatch size.

    """
    position: object
    momentum: object
    step_size: float
    n_leapfrog: int = 10
    friction: float = 0.
    scale: float = 1.

    def __post_init__(self):
        try:
            assert self.position.shape == self.momentum.shape
            assert self.position.dim() == 1
        except AssertionError:
            raise WrongArgumentsError('Position and momentum must be vectors '
                                      'of the same size, got {} and '
                                      '{}.'.format(tuple(self.position.shape),
                                                   tuple(self.momentum.shape)))
        try:
            assert self.step_size >= 0 and self.n_leapfrog >= 1
            assert self.friction >= 0
        except AssertionError:
            raise WrongArgumentsError('Invalid step size {}, leapfrog '
                                      'count {} or friction {}.'.format(
                                          self.step_size, self.n_leapfrog,
                                          self.friction))

    @property
    def dim(self):
        return self.position.numel()


def _check_finite(x, what):
    if not isfinite(x).all():
        raise NonFiniteError('Non-finite {}.'.format(what))


def sghmc_step(state, potential, batch=None, generator=None,
               inject_noise=True):
    """`n_leapfrog` substeps of SG-HMC with identity mass matrix:
    :math:`p \\leftarrow p - \\epsilon \\nabla U - \\epsilon C p +
    \\mathcal{N}(0, 2 C \\epsilon)` then :math:`x \\leftarrow x + \\epsilon
    p`. There is no Metropolis correction.

    Parameters
    ----------
    state: HmcState
    potential: callable
        Maps (position, batch) to the potential and its gradient.
    batch: object, optional
        Passed to `potential`.
    generator: torch.Generator, optional
    inject_noise: bool

    Returns
    -------
    state: HmcState
        `state` itself when the step is rejected.
    accepted: bool
        False if a gradient or a position stopped being finite, a forecast
        blew up or the final position has an infinite potential (it lies
        outside of the support).

    """
    eps, friction = state.step_size, state.friction
    x, p = state.position.clone(), state.momentum.clone()
    noise_std = sqrt(2 * friction * eps)
    try:
        for _ in range(state.n_leapfrog):
            _, grad = potential(x, batch)
            _check_finite(grad, 'gradient')
            p = p - eps * grad - eps * friction * p
            if inject_noise and noise_std > 0:
                p = p + noise_std * randn(p.shape, generator=generator,
                                          dtype=float64)
            x = x + eps * p
            _check_finite(x, 'position')
        if not is_finite(potential(x, batch)[0]):
            return state, False
    except (IntegrationBlowupError, NonFiniteError):
        return state, False
    return replace(state, position=x, momentum=p), True


def leapfrog(position, momentum, potential, step_size, n_steps, batch=None):
    """Störmer-Verlet integration of Hamilton's equations with identity mass
    matrix.

    Returns
    -------
    position, momentum: torch.Tensor
    potential_value: float
        Potential at the final position.
    grad: torch.Tensor

    """
    x, p = position.clone(), momentum.clone()
    _, grad = potential(x, batch)
    p = p - 0.5 * step_size * grad
    for i in range(n_steps):
        x = x + step_size * p
        u, grad = potential(x, batch)
        if i < n_steps - 1:
            p = p - step_size * grad
    p = p - 0.5 * step_size * grad
    return x, p, u, grad


def hamiltonian(potential_value, momentum):
    return potential_value + 0.5 * (momentum * momentum).sum().item()


def metropolis_step(state, potential, batch=None, generator=None):
    """Full HMC transition: leapfrog trajectory and Metropolis check. Used in
    test mode, with full-batch gradients.

    """
    u0, _ = potential(state.position, batch)
    h0 = hamiltonian(u0, state.momentum)
    try:
        x, p, u1, grad = leapfrog(state.position, state.momentum, potential,
                                  state.step_size, state.n_leapfrog, batch)
        _check_finite(grad, 'gradient')
        _check_finite(x, 'position')
    except (IntegrationBlowupError, NonFiniteError):
        return state, False
    h1 = hamiltonian(u1, p)
    if not is_finite(h1):
        return state, False
    if log(rand(1, generator=generator, dtype=float64).item() + 1e-300) < \
            h0 - h1:
        return replace(state, position=x, momentum=p), True
    return state, False


class SGHMCSampler:
    """Stochastic-gradient Hamiltonian Monte Carlo.

    Parameters
    ----------
    potential: callable
        Maps (position, batch) to the potential energy and its gradient.
    step_size: float
    n_leapfrog: int
    friction: float, optional
        Friction C. Defaults to 0.1 / `step_size`.
    resample_momentum: bool
        Draw a fresh standard normal momentum at every iteration.
    test_mode: bool
        Replace the SG-HMC dynamics by exact leapfrog with a Metropolis
        check (no friction, no injected noise).
    inject_noise: bool
    seed: int
    log_density: callable, optional
        Maps a position to the log posterior recorded with a retained
        sample. Defaults to minus the potential on the minibatch of the
        iteration, a noisy estimate.

    Attributes
    ----------
    n_rejected: int
    n_steps: int

    """
    def __init__(self, potential, step_size, n_leapfrog=10, friction=None,
                 resample_momentum=True, test_mode=False, inject_noise=True,
                 seed=0, log_density=None):
        self.potential = potential
        self.log_density = log_density
        self.step_size = float(step_size)
        self.n_leapfrog = int(n_leapfrog)
        if friction is None:
            friction = 0.1 / self.step_size if self.step_size > 0 else 0.
        self.friction = 0. if test_mode else float(friction)
        self.resample_momentum = resample_momentum
        self.test_mode = test_mode
        self.inject_noise = inject_noise and not test_mode
        self.generator = Generator().manual_seed(int(seed))
        self.n_rejected = 0
        self.n_steps = 0

    def init_state(self, position, scale=1.):
        momentum = randn(position.shape, generator=self.generator,
                         dtype=float64) if self.resample_momentum else \
            zeros(position.shape, dtype=float64)
        return HmcState(position.detach().clone(), momentum, self.step_size,
                        self.n_leapfrog, self.friction, scale)

    def step(self, state, batch=None):
        if self.resample_momentum:
            state = replace(state, momentum=randn(
                state.position.shape, generator=self.generator,
                dtype=float64))
        if self.test_mode:
            new, accepted = metropolis_step(state, self.potential, batch,
                                            self.generator)
        else:
            new, accepted = sghmc_step(state, self.potential, batch,
                                       self.generator, self.inject_noise)
        self.n_steps += 1
        if not accepted:
            self.n_rejected += 1
        return new, accepted

    def run(self, position, n_iterations, batches=None, burn_in=0, thin=1,
            max_reject_fraction=0.5, record_log_posterior=True, scale=1.,
            verbose=True):
        """Run a chain and keep every `thin`-th state after `burn_in`
        iterations.

        Parameters
        ----------
        position: torch.Tensor
            Initial position.
        n_iterations: int
        batches: callable, optional
            Maps the iteration index to the minibatch of that iteration.
        burn_in: int
            Number of discarded iterations.
        thin: int
        max_reject_fraction: float
            The chain aborts once more than this fraction of `n_iterations`
            steps have been rejected.
        record_log_posterior: bool
            Evaluate the log posterior of every retained sample. Samples
            whose log posterior is not finite are dropped with a warning.
        scale: float
        verbose: bool

        Returns
        -------
        samples: torch.Tensor, shape: (n_retained, dim)
        log_posteriors: torch.Tensor, shape: (n_retained)
        iterations: torch.Tensor, shape: (n_retained)

        """
        if not (0 <= burn_in < n_iterations and thin >= 1):
            raise WrongArgumentsError('Need 0 <= burn_in < n_iterations and '
                                      'thin >= 1, got burn_in={}, '
                                      'n_iterations={}, thin={}.'.format(
                                          burn_in, n_iterations, thin))
        if not is_finite(self._log_density(position, None)):
            raise SamplerDivergedError('The initial position lies outside of '
                                       'the support of the target.',
                                       n_rejected=0, n_iterations=0)
        state = self.init_state(position, scale)
        samples, log_posteriors, iterations = [], [], []
        iterator = tqdm(range(n_iterations), unit='iteration',
                        disable=not verbose)
        for i in iterator:
            batch = None if batches is None else batches(i)
            state, accepted = self.step(state, batch)
            if not accepted:
                warnings.warn('Iteration {}: step rejected.'.format(i))
                if self.n_rejected > max_reject_fraction * n_iterations:
                    raise SamplerDivergedError(
                        'Sampler diverged: {} of {} steps rejected after {} '
                        'iterations.'.format(self.n_rejected, n_iterations,
                                             i + 1),
                        n_rejected=self.n_rejected, n_iterations=i + 1)
            if i >= burn_in and (i - burn_in) % thin == 0:
                log_p = nan
                if record_log_posterior:
                    log_p = self._log_density(state.position, batch)
                    if not is_finite(log_p):
                        warnings.warn('Iteration {}: sample dropped, log '
                                      'posterior {}.'.format(i, log_p))
                        continue
                samples.append(state.position)
                log_posteriors.append(log_p)
                iterations.append(i)
                iterator.set_description(
                    'Iteration {} | log posterior: {:.5g} | rejected: '
                    '{}'.format(i + 1, log_p, self.n_rejected))
        if not samples:
            raise SamplerDivergedError('No sample retained after {} '
                                       'iterations.'.format(n_iterations),
                                       n_rejected=self.n_rejected,
                                       n_iterations=n_iterations)
        return (stack(samples), tensor(log_posteriors, dtype=float64),
                tensor(iterations, dtype=long))

    def _log_density(self, position, batch):
        if self.log_density is not None:
            return self.log_density(position)
        return -self.potential(position, batch)[0]


@dataclass
class PosteriorEnsemble:
    """Retained samples of a chain.

    Attributes
    ----------
    samples: torch.Tensor, shape: (n_samples, dim)
        Positions (model parameters, log lambda, log gamma).
    log_posteriors: torch.Tensor, shape: (n_samples)
    iterations: torch.Tensor, shape: (n_samples)
    layout: FlatParameters, optional
        Parameter layout of the model the samples belong to.
    n_rejected: int
    n_iterations: int

    """
    samples: object
    log_posteriors: object
    iterations: object
    layout: object = None
    n_rejected: int = 0
    n_iterations: int = 0

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    def theta(self, i):
        return self.samples[i, :-2]

    def log_lambda(self, i):
        return self.samples[i, -2].item()

    def log_gamma(self, i):
        return self.samples[i, -1].item()

    def column(self, name):
        offset = None if self.layout is None else self.layout.offset(name)
        if offset is None:
            return [nan] * len(self)
        return self.samples[:, offset].tolist()

    def mean_position(self):
        return self.samples.mean(dim=0)

    def to_dataframe(self):
        return DataFrame({'iteration': self.iterations.tolist(),
                          'log_posterior': self.log_posteriors.tolist(),
                          'delta': self.column('params.delta'),
                          'U1': self.column('params.U1'),
                          'log_lambda': self.samples[:, -2].tolist(),
                          'log_gamma': self.samples[:, -1].tolist()},
                         columns=ENSEMBLE_COLUMNS)

    def to_csv(self, path):
        self.to_dataframe().to_csv(path, index=False, float_format='%.17g')

    def save(self, path):
        write_ensemble(path, self.samples, self.log_posteriors,
                       self.iterations)

    @classmethod
    def load(cls, path, layout=None):
        samples, log_posteriors, iterations = read_ensemble(path)
        if layout is not None and layout.dim + 2 != samples.shape[1]:
            raise WrongArgumentsError('Ensemble of dimension {} for a model '
                                      'with {} parameters.'.format(
                                          samples.shape[1], layout.dim))
        return cls(samples, log_posteriors, iterations, layout)


class _CyclingBatches:
    """Minibatch of every iteration, reshuffled at each pass over the data."""
    def __init__(self, dataset, batch_size, seed):
        self.loader = TrajectoryLoader(dataset, batch_size, shuffle=True,
                                       seed=seed)
        self.epoch = -1
        self.iterator = iter(())

    def __call__(self, i):
        try:
            _, batch = next(self.iterator)
        except StopIteration:
            self.epoch += 1
            self.loader.set_epoch(self.epoch)
            self.iterator = iter(self.loader)
            _, batch = next(self.iterator)
        return batch


def sample_chain(model, dataset, config=None, log_lambda=1., log_gamma=None,
                 verbose=True):
    """SG-HMC chain over the parameters of `model` and the two log
    precisions, started at the current (trained) parameters of `model`.

    Parameters
    ----------
    model: torchqgml.models.QGModel
    dataset: torchqgml.data_structures.TrajectoryDataset
    config: torchqgml.utils.config.SamplerConfig, optional
    log_lambda: float
        Initial log precision of the Laplace prior.
    log_gamma: float, optional
        Initial log observation precision. Defaults to minus the log mean
        squared residual of `model` on `dataset`.
    verbose: bool

    Returns
    -------
    ensemble: PosteriorEnsemble
        The model is left at its initial parameters.

    """
    config = SamplerConfig() if config is None else config
    config.validate()
    dataset = dataset.window(min(config.n_obs, dataset.n_obs))
    posterior = HierarchicalPosterior(model, dataset,
                                      Hyperpriors.from_config(config),
                                      config.hyperprior_mode)
    start = posterior.layout.vector()
    position = posterior.initial_position(log_lambda, log_gamma)
    batch_size = min(config.batch_size, len(dataset))
    sampler = SGHMCSampler(posterior, config.step_size, config.n_leapfrog,
                           config.friction, config.resample_momentum,
                           seed=config.seed,
                           log_density=posterior.log_density)
    try:
        samples, log_posteriors, iterations = sampler.run(
            position, config.n_iterations,
            _CyclingBatches(dataset, batch_size, config.seed),
            burn_in=int(config.burn_in * config.n_iterations),
            thin=config.thin,
            max_reject_fraction=config.max_reject_fraction,
            scale=len(dataset) / batch_size, verbose=verbose)
    finally:
        posterior.layout.assign(start)
    return PosteriorEnsemble(samples, log_posteriors, iterations,
                             posterior.layout, sampler.n_rejected,
                             config.n_iterations)

import unittest

from math import exp, inf, isfinite, log, pi

from torch import Generator, float64, full, long, no_grad, randn, stack, \
    tensor, zeros

from torchqgml.bayes import FlatParameters, HierarchicalPosterior, \
    HmcState, Hyperpriors, PosteriorEnsemble, SGHMCSampler, \
    gaussian_log_likelihood, hamiltonian, leapfrog, log_hyperprior, \
    log_prior, map_estimate, minibatch_log_likelihood, \
    posterior_mean_estimate, posterior_moments, predictive_ensemble, \
    residual_sum_of_squares, sample_chain, sghmc_step, welford_moments
from torchqgml.bayes.likelihood import likelihood_terms
from torchqgml.bayes.priors import gamma_log_density, log_prior_gradient
from torchqgml.data_structures import TrajectoryDataset
from torchqgml.dynamics import PhysicalParams, random_initial_condition, \
    rollout
from torchqgml.exceptions import SamplerDivergedError, SanityError, \
    WrongArgumentsError
from torchqgml.models import QGModel
from torchqgml.utils import SamplerConfig


def gaussian_potential(x, batch=None):
    return 0.5 * (x * x).sum().item(), x.clone()


def make_dataset(n_traj=4, n_obs=2, k=2, nx=8):
    params = PhysicalParams(nx=nx, trainable=())
    q0 = random_initial_condition(params, 0, amplitude=1e-5, batch=n_traj)
    with no_grad():
        states = stack(rollout(q0, n_obs, k, params), dim=1)
    return TrajectoryDataset(states, params.dt, k, params.domain_length)


class TestPriors(unittest.TestCase):

    def test_laplace(self):
        assert abs(log_prior(tensor([0.]), 1.).item() + 0.6931) < 1e-4
        assert abs(log_prior(tensor([1., -1.]), 2.).item() + 4.) < 1e-12
        with self.assertRaises(WrongArgumentsError):
            log_prior(tensor([0.]), 0.)

    def test_hyperprior(self):
        assert abs(gamma_log_density(1., 1., 1.) + 1.) < 1e-15
        assert abs(gamma_log_density(0.5, 1., 1.) + 0.5) < 1e-15
        assert abs(log_hyperprior(1., 0.5) + 1.5) < 1e-15
        assert log_hyperprior(-1., 1.) == -inf
        # the value mode puts the Gamma density on exp(x)
        assert abs(log_hyperprior(0., 0., mode='value') + 2.) < 1e-15
        with self.assertRaises(WrongArgumentsError):
            log_hyperprior(1., 1., mode='other')
        with self.assertRaises(WrongArgumentsError):
            Hyperpriors(alpha1=0.)


class TestLikelihood(unittest.TestCase):

    def setUp(self):
        self.dataset = make_dataset()
        self.model = QGModel(PhysicalParams(nx=8, delta=0.3, U1=0.02))

    def test_zero_residual(self):
        n = 768
        value = gaussian_log_likelihood(0., n, 3.)
        assert abs(value - 0.5 * n * log(3. / (2 * pi))) < 1e-9
        doubled = gaussian_log_likelihood(0., n, 6.)
        assert abs(doubled - value - 0.5 * n * log(2.)) < 1e-9
        with self.assertRaises(WrongArgumentsError):
            gaussian_log_likelihood(0., n, 0.)

        model = QGModel(PhysicalParams(nx=8))
        rss, n_points = residual_sum_of_squares(model, self.dataset.states, 2)
        assert rss.item() < 1e-30
        assert n_points == 4 * 2 * 2 * 64

    def test_log_gamma_gradient(self):
        log_gamma, h = 25., 1e-4
        params = self.model.physical_parameters()
        ll, _, d_log_gamma = likelihood_terms(self.model, params,
                                              self.dataset.states, 2,
                                              log_gamma)
        rss, n_points = residual_sum_of_squares(self.model,
                                                self.dataset.states, 2)
        up = gaussian_log_likelihood(rss.item(), n_points,
                                     exp(log_gamma + h))
        down = gaussian_log_likelihood(rss.item(), n_points,
                                       exp(log_gamma - h))
        fd = (up - down) / (2 * h)
        assert abs(d_log_gamma - fd) < 1e-5 * (abs(fd) + 1.)
        assert abs(ll - gaussian_log_likelihood(rss.item(), n_points,
                                                exp(log_gamma))) < 1e-8

    def test_unbiased_minibatches(self):
        gamma = 1e12
        full_ll = minibatch_log_likelihood(self.model, self.dataset.states, 2,
                                           gamma).item()
        halves = [minibatch_log_likelihood(self.model,
                                           self.dataset.states[i:i + 2], 2,
                                           gamma, n_total=4).item()
                  for i in (0, 2)]
        assert abs(sum(halves) / 2 - full_ll) < 1e-10 * abs(full_ll)


class TestPosterior(unittest.TestCase):

    def setUp(self):
        self.dataset = make_dataset(n_traj=3)
        self.model = QGModel(PhysicalParams(nx=8, delta=0.2, U1=0.02))
        self.posterior = HierarchicalPosterior(self.model, self.dataset)

    def test_layout(self):
        layout = self.posterior.layout
        assert layout.names == ['params.delta', 'params.U1']
        assert layout.dim == 2 and self.posterior.dim == 4
        assert layout.offset('params.U1') == 1
        assert layout.offset('closure.weight') is None
        with self.assertRaises(WrongArgumentsError):
            layout.assign(zeros(3, dtype=float64))

    def test_gradient(self):
        x = self.posterior.initial_position(log_lambda=1.)
        _, grad = self.posterior(x, self.dataset.states)
        for j, h in ((0, 2e-7), (1, 2e-8), (2, 1e-5), (3, 1e-5)):
            xp, xm = x.clone(), x.clone()
            xp[j] += h
            xm[j] -= h
            fd = (self.posterior(xp, self.dataset.states)[0] -
                  self.posterior(xm, self.dataset.states)[0]) / (2 * h)
            assert abs(grad[j].item() - fd) < 1e-4 * (abs(fd) + 1.)

    def test_support(self):
        x = self.posterior.initial_position(log_lambda=1.)
        x[0] = -0.1
        u, _ = self.posterior(x, self.dataset.states)
        assert u == inf
        with self.assertRaises(WrongArgumentsError):
            self.posterior(x[:3], self.dataset.states)

    def test_negative_log_lambda(self):
        x = self.posterior.initial_position(log_lambda=-0.5)
        u, grad = self.posterior(x, self.dataset.states)
        assert u == inf
        assert grad.isnan().all()
        assert self.posterior.log_density(x) == -inf
        sampler = SGHMCSampler(self.posterior, 5e-5, n_leapfrog=2)
        with self.assertRaises(SamplerDivergedError):
            sampler.run(x, 5, verbose=False)

    def test_step_leaving_support(self):
        x = self.posterior.initial_position(log_lambda=1e-6)
        p = zeros(4, dtype=float64)
        p[2] = -1.
        state = HmcState(x, p, step_size=1e-4, n_leapfrog=1, friction=0.)
        new, accepted = sghmc_step(state, self.posterior,
                                   self.dataset.states, inject_noise=False)
        assert not accepted and new is state

    def test_log_density(self):
        x = self.posterior.initial_position(log_lambda=1.)
        full_data = self.posterior.log_posterior(x, self.dataset.states)[0]
        assert abs(self.posterior.log_density(x) - full_data) < \
            1e-10 * abs(full_data)
        assert abs(self.posterior.log_density(x, batch_size=1) -
                   full_data) < 1e-10 * abs(full_data)


class TestSGHMC(unittest.TestCase):

    def test_friction(self):
        p = tensor([1., -2.], dtype=float64)
        state = HmcState(zeros(2, dtype=float64), p, step_size=0.1,
                         n_leapfrog=1, friction=2.)
        new, accepted = sghmc_step(state, lambda x, b: (0., zeros(2)),
                                   inject_noise=False)
        assert accepted
        assert (new.momentum - 0.8 * p).abs().max() < 1e-15
        assert (new.position - 0.1 * 0.8 * p).abs().max() < 1e-15

    def test_zero_step(self):
        generator = Generator().manual_seed(0)
        x = randn(3, generator=generator, dtype=float64)
        p = randn(3, generator=generator, dtype=float64)
        state = HmcState(x, p, step_size=0., n_leapfrog=5)
        new, accepted = sghmc_step(state, gaussian_potential,
                                   generator=generator)
        assert accepted
        assert (new.position == x).all() and (new.momentum == p).all()

    def test_rejection(self):
        state = HmcState(zeros(2, dtype=float64), zeros(2, dtype=float64),
                         step_size=0.1)
        new, accepted = sghmc_step(
            state, lambda x, b: (0., full((2,), float('nan'))))
        assert not accepted and new is state
        sampler = SGHMCSampler(lambda x, b: (0., full((2,), float('nan'))),
                               0.1)
        with self.assertRaises(SamplerDivergedError):
            sampler.run(zeros(2, dtype=float64), 10, verbose=False)
        with self.assertRaises(WrongArgumentsError):
            HmcState(zeros(2), zeros(3), step_size=0.1)

    def test_leapfrog_energy(self):
        x = tensor([1., -0.5], dtype=float64)
        p = tensor([0.3, 0.2], dtype=float64)
        h0 = hamiltonian(gaussian_potential(x)[0], p)
        x1, p1, u1, _ = leapfrog(x, p, gaussian_potential, 1e-3, 10)
        assert abs(hamiltonian(u1, p1) - h0) < 1e-6
        assert (x1 - x).abs().max() > 0

    def test_gaussian_moments(self):
        sampler = SGHMCSampler(gaussian_potential, 0.1, n_leapfrog=10,
                               seed=0)
        assert sampler.friction == 1.
        samples, _, iterations = sampler.run(
            zeros(1, dtype=float64), 5000, burn_in=500,
            record_log_posterior=False, verbose=False)
        assert samples.shape == (4500, 1)
        assert iterations[0].item() == 500
        mean, variance = welford_moments(samples)
        # standard error from the means of 45 batches of 100 iterations
        batch_means = samples[:, 0].view(45, 100).mean(dim=1)
        std_error = batch_means.std().item() / 45 ** 0.5
        assert abs(mean.item()) < 3 * std_error
        assert abs(variance.item() - 1) < 0.2

    def test_laplace_marginal(self):
        lam = 2.

        def prior_potential(x, batch=None):
            return (-log_prior(x, lam).item(),
                    -log_prior_gradient(x, log(lam))[0])

        sampler = SGHMCSampler(prior_potential, 0.05, n_leapfrog=20,
                               seed=2)
        samples, _, _ = sampler.run(zeros(8, dtype=float64), 4000,
                                    burn_in=500, record_log_posterior=False,
                                    verbose=False)
        assert abs(samples.abs().mean().item() * lam - 1) < 0.1

    def test_metropolis_mode(self):
        sampler = SGHMCSampler(gaussian_potential, 0.1, n_leapfrog=10,
                               test_mode=True, seed=1)
        assert sampler.friction == 0. and not sampler.inject_noise
        samples, log_p, _ = sampler.run(zeros(2, dtype=float64), 200,
                                        thin=2, verbose=False)
        assert len(samples) == 100
        assert sampler.n_rejected < 20
        assert (log_p <= 0).all()

    def test_sample_chain(self):
        dataset = make_dataset(n_traj=3)
        model = QGModel(PhysicalParams(nx=8, delta=0.2, U1=0.02))
        config = SamplerConfig(n_iterations=6, step_size=1e-6, n_leapfrog=2,
                               burn_in=0., thin=2, batch_size=2, n_obs=2)
        ensemble = sample_chain(model, dataset, config, verbose=False)
        assert len(ensemble) == 3 and ensemble.dim == 4
        assert ensemble.iterations.tolist() == [0, 2, 4]
        assert model.params.delta.item() == 0.2
        df = ensemble.to_dataframe()
        assert list(df.columns) == ['iteration', 'log_posterior', 'delta',
                                    'U1', 'log_lambda', 'log_gamma']
        assert abs(df['delta'][0] - 0.2) < 1e-3

        # recorded values are full-data log posteriors, not minibatch ones
        posterior = HierarchicalPosterior(model, dataset.window(2),
                                          Hyperpriors.from_config(config),
                                          config.hyperprior_mode)
        for i in range(len(ensemble)):
            recorded = ensemble.log_posteriors[i].item()
            expected = posterior.log_density(ensemble.samples[i])
            assert isfinite(recorded)
            assert abs(recorded - expected) <= 1e-10 * abs(expected)


class TestPredictive(unittest.TestCase):

    def ensemble(self, log_posteriors, dim=4):
        n = len(log_posteriors)
        samples = zeros(n, dim, dtype=float64)
        samples[:, 0] = tensor(range(n), dtype=float64)
        return PosteriorEnsemble(samples, tensor(log_posteriors,
                                                 dtype=float64),
                                 tensor(range(n), dtype=long))

    def test_moments(self):
        mean, variance = welford_moments([tensor(2.), tensor(4.)])
        assert mean.item() == 3. and variance.item() == 1.
        with self.assertRaises(SanityError):
            welford_moments([])

    def test_map(self):
        index, position = map_estimate(self.ensemble([-5., -3., -9.]))
        assert index == 1 and position[0].item() == 1.
        assert map_estimate(self.ensemble([-1., -2., -1.]))[0] == 0
        assert posterior_mean_estimate(
            self.ensemble([0., 0., 0.]))[0].item() == 1.
        with self.assertRaises(SanityError):
            map_estimate(self.ensemble([]))

    def test_posterior_moments(self):
        model = QGModel(PhysicalParams(nx=8))
        q0 = random_initial_condition(model.params, 3, amplitude=1e-5)
        position = FlatParameters(model).vector().tolist()
        same = tensor([position + [1., 0.]] * 2, dtype=float64)
        ensemble = PosteriorEnsemble(same, zeros(2, dtype=float64),
                                     tensor([0, 1], dtype=long))
        moments = posterior_moments(model, ensemble, q0, 3, 2, verbose=False)
        with no_grad():
            expected = stack(rollout(q0, 3, 2, model.params))
        assert moments.n_valid == 2 and moments.n_invalid == 0
        assert moments.mean.shape == (4, 2, 8, 8)
        assert (moments.mean - expected).abs().max().item() == 0.
        assert moments.variance.abs().max().item() == 0.

        spread = same.clone()
        spread[1, 0] = 2 * spread[0, 0]
        moments = posterior_moments(model, PosteriorEnsemble(
            spread, zeros(2, dtype=float64), tensor([0, 1], dtype=long)),
            q0, 3, 2, verbose=False)
        assert moments.variance[-1].max().item() > 0
        assert model.params.delta.item() == position[0]

        with self.assertRaises(WrongArgumentsError):
            posterior_moments(model, PosteriorEnsemble(
                same[:, 1:], zeros(2, dtype=float64),
                tensor([0, 1], dtype=long)), q0, 3, 2, verbose=False)

    def test_moments_order(self):
        model = QGModel(PhysicalParams(nx=8))
        q0 = random_initial_condition(model.params, 4, amplitude=1e-5)
        layout = FlatParameters(model)
        delta, U1 = layout.vector().tolist()
        samples = tensor([[delta, U1, 1., 0.],
                          [1.1 * delta, 0.8 * U1, 1., 0.],
                          [0.9 * delta, 1.2 * U1, 1., 0.]], dtype=float64)

        def moments(order):
            return posterior_moments(model, PosteriorEnsemble(
                samples[order], zeros(3, dtype=float64),
                tensor(order, dtype=long)), q0, 3, 2, verbose=False)

        forward, shuffled = moments([0, 1, 2]), moments([2, 0, 1])
        trajectories = []
        for i in range(3):
            layout.assign(samples[i, :2])
            with no_grad():
                trajectories.append(stack(rollout(q0, 3, 2, model.params)))
        layout.assign(tensor([delta, U1], dtype=float64))
        trajectories = stack(trajectories)
        mean = trajectories.mean(dim=0)
        variance = ((trajectories - mean) ** 2).mean(dim=0)

        scale = mean.abs().max().item()
        for result in (forward, shuffled):
            assert result.n_valid == 3
            assert (result.mean - mean).abs().max().item() <= 1e-12 * scale
            assert (result.variance - variance).abs().max().item() <= \
                1e-12 * scale ** 2
        assert variance[-1].max().item() > 0

    def test_noise(self):
        model = QGModel(PhysicalParams(nx=16))
        position = FlatParameters(model).vector()
        samples = stack([tensor(position.tolist() + [1., log(4.)],
                                dtype=float64)])
        ensemble = PosteriorEnsemble(samples, zeros(1, dtype=float64),
                                     zeros(1, dtype=long))
        q0 = zeros(2, 16, 16, dtype=float64)
        draws, n_invalid = predictive_ensemble(model, ensemble, q0, 0,
                                               n_draws=20, verbose=False)
        assert draws.shape == (20, 2, 16, 16) and n_invalid == 0
        assert abs(draws.std().item() - 0.5) < 0.02

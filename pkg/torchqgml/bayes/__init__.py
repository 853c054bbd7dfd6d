from .priors import Hyperpriors, log_prior, log_hyperprior, hyperprior_terms
from .likelihood import minibatch_log_likelihood, gaussian_log_likelihood, \
    residual_sum_of_squares
from .sghmc import HmcState, SGHMCSampler, PosteriorEnsemble, \
    HierarchicalPosterior, FlatParameters, sghmc_step, leapfrog, \
    hamiltonian, sample_chain
from .predictive import predictive_draw, predictive_ensemble, \
    posterior_moments, map_estimate, posterior_mean_estimate, \
    welford_moments, PosteriorMoments

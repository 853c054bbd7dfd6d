# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

import json

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from os.path import join

from torch import cat, no_grad, stack
from tqdm.autonotebook import tqdm

from ..data_structures import TrajectoryDataset
from ..dynamics import FilterSpec, ModelState, PhysicalParams, \
    random_initial_condition, step_ab3, subgrid_tendency
from ..exceptions import ConfigError, IntegrationBlowupError
from .config import ExperimentConfig
from .io import VERSION, write_dataset

SEED_STRIDE = 1000
FILES = {'train': 'train.dqgd', 'test': 'test.dqgd', 'eval': 'eval.dqgd'}


@dataclass
class Simulation:
    """Coarse record of one truth simulation after spin-up.

    Attributes
    ----------
    seed: int
    states: torch.Tensor, shape: (n_samples, 2, ny_lo, nx_lo)
        Coarse PV every k steps.
    targets: torch.Tensor, shape: (n_samples, 2, ny_lo, nx_lo)
        Sub-grid total tendencies of the samples.

    """
    seed: int
    states: object
    targets: object

    def windows(self, n_obs):
        """Non-overlapping windows of `n_obs` + 1 consecutive samples."""
        n = len(self.states) // (n_obs + 1)
        shape = (n, n_obs + 1) + tuple(self.states.shape[1:])
        return (self.states[:n * (n_obs + 1)].reshape(shape),
                self.targets[:n * (n_obs + 1)].reshape(shape))


def truth_params(config, nx=None):
    physics = config.physics
    return PhysicalParams(nx=config.data.nx_hi if nx is None else nx,
                          domain_length=physics.domain_length, dt=physics.dt,
                          beta=physics.beta, rek=physics.rek, rd=physics.rd,
                          delta=physics.delta, U1=physics.U1, U2=physics.U2,
                          trainable=(), effective_beta=physics.effective_beta)


def simulation_seed(config, index):
    return config.data.seed * SEED_STRIDE + index


def sample_counts(config):
    """Solver steps of the spin-up, of the whole run, and number of coarse
    samples kept after the spin-up.

    """
    data, dt = config.data, config.physics.dt
    n_spin = data.n_steps(data.spin_up_years, dt)
    n_total = data.n_steps(data.duration_years, dt)
    n_samples = (n_total - n_spin) // data.k + 1
    if n_samples < data.n_obs + 1:
        raise ConfigError('The post spin-up period holds {} observations, a '
                          'trajectory needs {}.'.format(n_samples,
                                                        data.n_obs + 1))
    return n_spin, n_total, n_samples


def simulate(config, index):
    """Run the truth simulation `index` and coarse-grain its post spin-up
    samples.

    Returns
    -------
    simulation: Simulation

    """
    data = config.data
    params_hi = truth_params(config)
    params_lo = params_hi.with_grid(data.nx_lo, trainable=())
    spec = FilterSpec.for_grid(data.nx_lo, config.physics.domain_length,
                               fraction=data.filter_fraction)
    n_spin, _, n_samples = sample_counts(config)
    seed = simulation_seed(config, index)

    states, targets = [], []
    with no_grad():
        state = ModelState(random_initial_condition(params_hi, seed,
                                                    data.ic_amplitude))
        try:
            for step in range(n_spin + (n_samples - 1) * data.k + 1):
                if step >= n_spin and (step - n_spin) % data.k == 0:
                    pair = subgrid_tendency(state.q, params_hi, params_lo,
                                            spec, time=step * params_hi.dt)
                    states.append(pair.q)
                    targets.append(pair.target)
                if len(states) == n_samples:
                    break
                state = step_ab3(state, params_hi)
        except IntegrationBlowupError as e:
            raise IntegrationBlowupError(
                'Truth simulation {} (seed {}) blew up: {}'.format(index, seed,
                                                                   e),
                step=e.step)
    return Simulation(seed, stack(states), stack(targets))


def _run_simulations(config, indices, verbose):
    with ThreadPoolExecutor(max_workers=config.data.n_workers) as pool:
        results = pool.map(lambda i: simulate(config, i), indices)
        return list(tqdm(results, total=len(indices), unit='simulation',
                         disable=not verbose))


def _trajectories(simulations, config):
    data = config.data
    windows = [s.windows(data.n_obs) for s in simulations]
    states = [w[0] for w in windows]
    targets = [w[1] for w in windows]
    return TrajectoryDataset(cat(states), config.physics.dt, data.k,
                             config.physics.domain_length,
                             cat(targets))


def generate_data(config=None, out_dir=None, verbose=True):
    """Truth simulations of the twin experiment, coarse-grained into sparse
    trajectory datasets.

    Simulations ``0 .. n_train_sims - 1`` make up the training set, the
    next ``n_test_sims`` the test set. Each test simulation also yields one
    long evaluation trajectory covering the whole post spin-up period.

    Parameters
    ----------
    config: torchqgml.utils.config.ExperimentConfig, optional
    out_dir: str, optional
        If given, the datasets, the configuration snapshot and a manifest are
        written there.
    verbose: bool

    Returns
    -------
    datasets: dict
        'train', 'test' and 'eval' TrajectoryDatasets (None when the
        corresponding simulation count is zero).

    """
    config = ExperimentConfig() if config is None else config
    config.validate()
    sample_counts(config)
    n_train, n_test = config.data.n_train_sims, config.data.n_test_sims

    simulations = _run_simulations(config, list(range(n_train + n_test)),
                                   verbose)
    train_sims, test_sims = simulations[:n_train], simulations[n_train:]
    datasets = {'train': None, 'test': None, 'eval': None}
    if train_sims:
        datasets['train'] = _trajectories(train_sims, config)
    if test_sims:
        datasets['test'] = _trajectories(test_sims, config)
        datasets['eval'] = TrajectoryDataset(
            stack([s.states for s in test_sims]), config.physics.dt,
            config.data.k, config.physics.domain_length,
            stack([s.targets for s in test_sims]))

    if out_dir is not None:
        files = {}
        for name, dataset in datasets.items():
            if dataset is not None:
                write_dataset(join(out_dir, FILES[name]), dataset)
                files[name] = FILES[name]
        config.save(join(out_dir, 'config.cfg'))
        write_manifest(out_dir, config, files,
                       seeds=[s.seed for s in simulations],
                       counts={k: (0 if d is None else len(d))
                               for k, d in datasets.items()})
    return datasets


def write_manifest(out_dir, config, files, **extra):
    """Write ``manifest.json`` next to the outputs of a pipeline stage. An
    existing manifest is updated.

    """
    path = join(out_dir, 'manifest.json')
    try:
        with open(path) as f:
            manifest = json.load(f)
    except (OSError, ValueError):
        manifest = {}
    manifest['config_hash'] = config.hash()
    manifest['format_versions'] = {'DQGD': VERSION, 'DCNN': VERSION,
                                   'DPEN': VERSION}
    manifest.setdefault('files', {}).update(files)
    manifest.update(extra)
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest

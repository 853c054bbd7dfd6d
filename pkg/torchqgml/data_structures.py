# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from torch import Generator, isfinite, randperm, zeros
from torch.utils.data import Dataset

from torchqgml.exceptions import SanityError, SizeMismatchError, \
    WrongArgumentsError, WrongDimensionError


class TrajectoryDataset(Dataset):
    """Sparse trajectories of coarse two-layer states
    :math:`\\{X_{t_0 + i \\Delta T}\\}_{i=0..N}` with :math:`\\Delta T =
    k \\Delta t`.

    Parameters
    ----------
    states: torch.Tensor, shape: (n_traj, N + 1, 2, ny, nx), dtype:
        torch.float64
        Observed coarse PV.
    dt: float
        Solver timestep (s).
    k: int
        Solver steps between two observations.
    domain_length: float
        Side of the periodic domain (m).
    targets: torch.Tensor, optional
        Sub-grid total tendencies at the observations, same shape as
        `states`.

    Attributes
    ----------
    n_traj: int
        Number of trajectories.
    n_obs: int
        Number N of observations following each initial state.
    ny, nx: int
        Coarse grid.
    has_targets: bool

    """

    def __init__(self, states, dt, k, domain_length=1e6, targets=None):
        if states.dim() != 5:
            raise WrongDimensionError('Trajectories must be 5-dimensional '
                                      '(n_traj, N + 1, 2, ny, nx), got {} '
                                      'dimensions.'.format(states.dim()))
        if states.shape[2] != 2:
            raise SizeMismatchError('Trajectories must have two layers, got '
                                    'shape {}.'.format(tuple(states.shape)))
        if targets is not None and targets.shape != states.shape:
            raise SizeMismatchError('Targets of shape {} for states of shape '
                                    '{}.'.format(tuple(targets.shape),
                                                 tuple(states.shape)))
        try:
            assert dt > 0 and k >= 1 and domain_length > 0
        except AssertionError:
            raise WrongArgumentsError('dt, k and domain_length must be '
                                      'positive.')

        self.states = states
        self.targets = targets
        self.dt = float(dt)
        self.k = int(k)
        self.domain_length = float(domain_length)
        self.n_traj = states.shape[0]
        self.n_obs = states.shape[1] - 1
        self.ny, self.nx = states.shape[-2:]

        try:
            self.sanity_check()
        except AssertionError:
            raise SanityError('Trajectories contain non-finite values.')

    @property
    def has_targets(self):
        return self.targets is not None

    def sanity_check(self):
        assert isfinite(self.states).all()
        if self.targets is not None:
            assert isfinite(self.targets).all()

    def __len__(self):
        return self.n_traj

    def __getitem__(self, item):
        return self.states[item]

    def subset(self, idx):
        return TrajectoryDataset(
            self.states[idx], self.dt, self.k, self.domain_length,
            None if self.targets is None else self.targets[idx])

    def split(self, share=0.9, seed=0):
        """Random split of the trajectories into a training and a validation
        subset.

        Parameters
        ----------
        share: float
            Share of trajectories allocated to the training subset. At least
            one trajectory goes to each side when there are two or more.
        seed: int

        Returns
        -------
        train: TrajectoryDataset
        val: TrajectoryDataset or None
            None when there is a single trajectory.

        """
        try:
            assert 0 < share <= 1
        except AssertionError:
            raise WrongArgumentsError('share must lie in (0, 1], got '
                                      '{}.'.format(share))
        n_train = self.get_sizes(self.n_traj, share)
        order = randperm(self.n_traj, generator=Generator().manual_seed(seed))
        mask = zeros(self.n_traj, dtype=bool)
        mask[order[:n_train]] = True
        if n_train == self.n_traj:
            return self, None
        return self.subset(mask), self.subset(~mask)

    @staticmethod
    def get_sizes(count, share):
        if count == 1 or share == 1:
            return count
        n_train = int(count * share)
        return min(max(n_train, 1), count - 1)

    def field_std(self):
        """Pooled standard deviation of the observed PV."""
        return self.states.std(unbiased=False).item()

    def window(self, n_obs):
        """Same trajectories cut after `n_obs` observations."""
        if not 0 <= n_obs <= self.n_obs:
            raise WrongArgumentsError('Cannot keep {} of {} '
                                      'observations.'.format(n_obs,
                                                             self.n_obs))
        return TrajectoryDataset(
            self.states[:, :n_obs + 1], self.dt, self.k, self.domain_length,
            None if self.targets is None else self.targets[:, :n_obs + 1])

# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

import shutil

from os import environ, makedirs
from os.path import exists, expanduser, join

from torch import Generator, arange, randperm


def get_run_home(run_home=None):
    if run_home is None:
        run_home = environ.get('TORCHQGML_RUNS',
                               join('~', 'torchqgml_runs'))
    run_home = expanduser(run_home)
    if not exists(run_home):
        makedirs(run_home)
    return run_home


def clear_run_home(run_home=None):
    run_home = get_run_home(run_home)
    shutil.rmtree(run_home)


def get_run_dir(name, run_home=None):
    """Directory `name` under the run home (absolute paths are kept)."""
    path = expanduser(name)
    if not path.startswith('/'):
        path = join(get_run_home(run_home), path)
    if not exists(path):
        makedirs(path)
    return path


def get_n_batches(n, b_size):
    n_batch = n // b_size
    if n % b_size > 0:
        n_batch += 1
    return n_batch


class TrajectoryLoader:
    """Mini-batches of trajectories. This class is inspired from
    :class:`torch.utils.data.DataLoader` but is way simpler: batches are
    tensors of shape (b_size, N + 1, 2, ny, nx) and the shuffling order only
    depends on `seed` and the epoch index.

    Parameters
    ----------
    dataset: torchqgml.data_structures.TrajectoryDataset
    batch_size: int
    shuffle: bool
    seed: int

    """
    def __init__(self, dataset, batch_size, shuffle=True, seed=0):
        self.dataset = dataset
        self.batch_size = batch_size
        self.shuffle = shuffle
        self.seed = seed
        self.epoch = 0

    def __len__(self):
        return get_n_batches(len(self.dataset), self.batch_size)

    def set_epoch(self, epoch):
        self.epoch = epoch

    def order(self):
        n = len(self.dataset)
        if not self.shuffle:
            return arange(n)
        generator = Generator().manual_seed(self.seed * 100003 + self.epoch)
        return randperm(n, generator=generator)

    def __iter__(self):
        return _TrajectoryLoaderIter(self)


class _TrajectoryLoaderIter:
    def __init__(self, loader):
        self.states = loader.dataset.states
        self.order = loader.order()
        self.batch_size = loader.batch_size

        self.n_batches = len(loader)
        self.current_batch = 0

    def __next__(self):
        if self.current_batch == self.n_batches:
            raise StopIteration
        else:
            i = self.current_batch
            self.current_batch += 1
            idx = self.order[i * self.batch_size: (i + 1) * self.batch_size]
            return idx, self.states[idx]

    def __iter__(self):
        return self

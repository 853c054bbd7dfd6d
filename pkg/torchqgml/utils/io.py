# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers

Binary files of the package. All of them start with a four byte magic and a
little-endian uint32 version, followed by a fixed header and float64
payloads. Layouts are documented in ``docs/formats.rst``.
"""

from dataclasses import dataclass

import numpy as np

from torch import from_numpy

from ..data_structures import TrajectoryDataset
from ..exceptions import FileFormatError
from ..models import CNNClosure, NullClosure

VERSION = 1
DATASET_MAGIC = b'DQGD'
CHECKPOINT_MAGIC = b'DCNN'
ENSEMBLE_MAGIC = b'DPEN'

PREFIX = np.dtype([('magic', 'S4'), ('version', '<u4')])
DATASET_HEADER = np.dtype([('magic', 'S4'), ('version', '<u4'),
                           ('nx', '<u4'), ('ny', '<u4'),
                           ('n_layers', '<u4'), ('k', '<u4'),
                           ('n_obs', '<u4'), ('n_traj', '<u4'),
                           ('has_targets', '<u4'), ('reserved', '<u4'),
                           ('dt', '<f8'), ('domain_length', '<f8')])
CHECKPOINT_HEADER = np.dtype([('magic', 'S4'), ('version', '<u4'),
                              ('kind', '<u4'), ('n_channels', '<u4')])
ENSEMBLE_HEADER = np.dtype([('magic', 'S4'), ('version', '<u4'),
                            ('dim', '<u4'), ('n_samples', '<u4')])
F64 = np.dtype('<f8')
U32 = np.dtype('<u4')

KIND_NONE, KIND_CNN = 0, 1


def _read_bytes(path):
    try:
        with open(path, 'rb') as f:
            return f.read()
    except OSError as e:
        raise FileFormatError('Cannot read {}: {}.'.format(path, e.strerror),
                              offset=0)


class _Reader:
    """Sequential reader of a byte string which reports the offset of every
    inconsistency.

    """
    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, dtype, count=1, what='payload'):
        n_bytes = dtype.itemsize * count
        if self.offset + n_bytes > len(self.data):
            raise FileFormatError(
                '{}: truncated {} at byte {} (expected {} bytes in total, '
                'got {}).'.format(self.path, what, self.offset,
                                  self.offset + n_bytes, len(self.data)),
                offset=self.offset)
        values = np.frombuffer(self.data, dtype=dtype, count=count,
                               offset=self.offset)
        self.offset += n_bytes
        return values

    def finish(self):
        if self.offset != len(self.data):
            raise FileFormatError(
                '{}: {} trailing bytes after the declared payload '
                '(expected {} bytes in total, got {}).'.format(
                    self.path, len(self.data) - self.offset, self.offset,
                    len(self.data)),
                offset=self.offset)


def _check_prefix(reader, magic, header_dtype):
    prefix = reader.take(PREFIX, what='magic')[0]
    if prefix['magic'] != magic:
        raise FileFormatError('{}: bad magic {!r} (expected {!r}).'.format(
            reader.path, bytes(prefix['magic']), magic), offset=0)
    if prefix['version'] != VERSION:
        raise FileFormatError('{}: unsupported version {} (expected '
                              '{}).'.format(reader.path, prefix['version'],
                                            VERSION),
                              offset=4)
    reader.offset = 0
    return reader.take(header_dtype, what='header')[0]


def _f64(tensor):
    return tensor.detach().cpu().numpy().astype(F64, copy=False).tobytes()


def _tensor(values, shape):
    return from_numpy(values.astype(np.float64).reshape(shape))


def write_dataset(path, dataset):
    """Write a :class:`TrajectoryDataset` as a DQGD file."""
    header = np.zeros(1, dtype=DATASET_HEADER)
    header['magic'] = DATASET_MAGIC
    header['version'] = VERSION
    header['nx'], header['ny'] = dataset.nx, dataset.ny
    header['n_layers'] = dataset.states.shape[2]
    header['k'] = dataset.k
    header['n_obs'] = dataset.n_obs
    header['n_traj'] = dataset.n_traj
    header['has_targets'] = int(dataset.has_targets)
    header['dt'] = dataset.dt
    header['domain_length'] = dataset.domain_length
    with open(path, 'wb') as f:
        f.write(header.tobytes())
        f.write(_f64(dataset.states))
        if dataset.has_targets:
            f.write(_f64(dataset.targets))


def read_dataset(path):
    """Read a DQGD file.

    Returns
    -------
    dataset: torchqgml.data_structures.TrajectoryDataset

    """
    reader = _Reader(_read_bytes(path), path)
    header = _check_prefix(reader, DATASET_MAGIC, DATASET_HEADER)
    shape = (int(header['n_traj']), int(header['n_obs']) + 1,
             int(header['n_layers']), int(header['ny']), int(header['nx']))
    if shape[2] != 2:
        raise FileFormatError('{}: {} layers declared, two-layer data '
                              'expected.'.format(path, shape[2]),
                              offset=DATASET_HEADER.fields['n_layers'][1])
    count = int(np.prod(shape))
    states = reader.take(F64, count, 'states')
    targets = None
    if header['has_targets']:
        targets = _tensor(reader.take(F64, count, 'targets'), shape)
    reader.finish()
    return TrajectoryDataset(_tensor(states, shape), float(header['dt']),
                             int(header['k']),
                             float(header['domain_length']), targets)


@dataclass
class Checkpoint:
    """Trained parameters: the physical pair and the closure."""
    delta: float
    U1: float
    closure: object


def _cnn_arrays(closure):
    arrays = [closure.in_mean, closure.in_std, closure.out_mean,
              closure.out_std]
    for layer in closure.layers:
        arrays += [layer.weight, layer.bias]
    return arrays


def write_checkpoint(path, model):
    """Write the physical parameters and the closure of a
    :class:`torchqgml.models.QGModel` as a DCNN file. Only the null and
    convolutional closures are learnable, hence storable.

    """
    closure = model.closure
    if isinstance(closure, CNNClosure):
        kind, channels = KIND_CNN, closure.channels
    elif isinstance(closure, NullClosure):
        kind, channels = KIND_NONE, ()
    else:
        raise FileFormatError('Cannot store a closure of type {}.'.format(
            type(closure).__name__))
    header = np.zeros(1, dtype=CHECKPOINT_HEADER)
    header['magic'] = CHECKPOINT_MAGIC
    header['version'] = VERSION
    header['kind'] = kind
    header['n_channels'] = len(channels)
    with open(path, 'wb') as f:
        f.write(header.tobytes())
        f.write(np.asarray(channels, dtype=U32).tobytes())
        f.write(np.asarray([model.params.delta.item(), model.params.U1.item()],
                           dtype=F64).tobytes())
        if kind == KIND_CNN:
            for array in _cnn_arrays(closure):
                f.write(_f64(array))


def read_checkpoint(path):
    """Read a DCNN file.

    Returns
    -------
    checkpoint: Checkpoint
        The closure is a ready-to-use :class:`CNNClosure` or
        :class:`NullClosure`.

    """
    reader = _Reader(_read_bytes(path), path)
    header = _check_prefix(reader, CHECKPOINT_MAGIC, CHECKPOINT_HEADER)
    kind = int(header['kind'])
    if kind not in (KIND_NONE, KIND_CNN):
        raise FileFormatError('{}: unknown closure kind {}.'.format(
            path, kind), offset=CHECKPOINT_HEADER.fields['kind'][1])
    n_channels = int(header['n_channels'])
    channels = tuple(int(c) for c in reader.take(U32, n_channels, 'channels'))
    delta, U1 = (float(v) for v in reader.take(F64, 2, 'physical parameters'))
    if kind == KIND_NONE:
        reader.finish()
        return Checkpoint(delta, U1, NullClosure())

    if len(channels) < 2:
        raise FileFormatError('{}: a convolutional closure needs at least two '
                              'channel counts, got {}.'.format(path, channels),
                              offset=CHECKPOINT_HEADER.itemsize)
    closure = CNNClosure(channels=channels)
    for array in _cnn_arrays(closure):
        values = reader.take(F64, array.numel(), 'closure parameters')
        array.data.copy_(_tensor(values, tuple(array.shape)))
    reader.finish()
    return Checkpoint(delta, U1, closure)


def write_ensemble(path, samples, log_posteriors, iterations):
    """Write posterior samples as a DPEN file.

    Parameters
    ----------
    samples: torch.Tensor, shape: (n_samples, dim)
        Flattened positions (physical parameters, closure parameters,
        log lambda, log gamma).
    log_posteriors: torch.Tensor, shape: (n_samples)
    iterations: torch.Tensor, shape: (n_samples), dtype: int
        Chain iteration of every sample.

    """
    n_samples, dim = samples.shape
    if log_posteriors.shape != (n_samples,) or \
            iterations.shape != (n_samples,):
        raise FileFormatError('Ensemble of {} samples with {} log posteriors '
                              'and {} iterations.'.format(
                                  n_samples, len(log_posteriors),
                                  len(iterations)))
    header = np.zeros(1, dtype=ENSEMBLE_HEADER)
    header['magic'] = ENSEMBLE_MAGIC
    header['version'] = VERSION
    header['dim'] = dim
    header['n_samples'] = n_samples
    with open(path, 'wb') as f:
        f.write(header.tobytes())
        f.write(_f64(samples))
        f.write(_f64(log_posteriors))
        f.write(iterations.detach().cpu().numpy().astype(U32).tobytes())


def read_ensemble(path):
    """Read a DPEN file.

    Returns
    -------
    samples: torch.Tensor, shape: (n_samples, dim)
    log_posteriors: torch.Tensor, shape: (n_samples)
    iterations: torch.Tensor, shape: (n_samples)

    """
    reader = _Reader(_read_bytes(path), path)
    header = _check_prefix(reader, ENSEMBLE_MAGIC, ENSEMBLE_HEADER)
    n, dim = int(header['n_samples']), int(header['dim'])
    samples = reader.take(F64, n * dim, 'samples')
    log_posteriors = reader.take(F64, n, 'log posteriors')
    iterations = reader.take(U32, n, 'iterations')
    reader.finish()
    return (_tensor(samples, (n, dim)), _tensor(log_posteriors, (n,)),
            from_numpy(iterations.astype(np.int64)))

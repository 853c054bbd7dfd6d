import unittest

from os.path import getsize, join
from tempfile import TemporaryDirectory

from torch import Generator, float64, long, randn, tensor

from torchqgml.bayes import FlatParameters, PosteriorEnsemble
from torchqgml.data_structures import TrajectoryDataset
from torchqgml.dynamics import PhysicalParams
from torchqgml.exceptions import FileFormatError, WrongArgumentsError
from torchqgml.models import CNNClosure, QGModel, SmagorinskyClosure
from torchqgml.utils import read_checkpoint, read_dataset, read_ensemble, \
    write_checkpoint, write_dataset, write_ensemble
from torchqgml.utils.io import DATASET_HEADER

HEADER_SIZE = 56


class TestFiles(unittest.TestCase):
    """Tests of the DQGD, DCNN and DPEN files."""

    def setUp(self):
        self.tmp = TemporaryDirectory()
        self.generator = Generator().manual_seed(0)
        states = randn((3, 4, 2, 8, 8), generator=self.generator,
                       dtype=float64)
        targets = randn((3, 4, 2, 8, 8), generator=self.generator,
                        dtype=float64)
        self.dataset = TrajectoryDataset(states, 1800., 6, 2e6, targets)

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return join(self.tmp.name, name)

    def rewrite(self, path, data):
        with open(path, 'wb') as f:
            f.write(data)

    def content(self, path):
        with open(path, 'rb') as f:
            return f.read()

    def test_dataset(self):
        path = self.path('train.dqgd')
        write_dataset(path, self.dataset)
        assert DATASET_HEADER.itemsize == HEADER_SIZE
        assert getsize(path) == HEADER_SIZE + 2 * 3 * 4 * 2 * 64 * 8
        loaded = read_dataset(path)
        assert (loaded.states == self.dataset.states).all()
        assert (loaded.targets == self.dataset.targets).all()
        assert (loaded.dt, loaded.k, loaded.domain_length) == (1800., 6, 2e6)

        write_dataset(path, TrajectoryDataset(self.dataset.states, 1800., 6))
        assert not read_dataset(path).has_targets

    def test_dataset_errors(self):
        path = self.path('train.dqgd')
        write_dataset(path, self.dataset)
        data = self.content(path)
        count = 3 * 4 * 2 * 64

        self.rewrite(path, data[:-8])
        with self.assertRaises(FileFormatError) as context:
            read_dataset(path)
        assert context.exception.offset == HEADER_SIZE + count * 8

        self.rewrite(path, data + b'\x00' * 8)
        with self.assertRaises(FileFormatError):
            read_dataset(path)

        self.rewrite(path, b'XXXX' + data[4:])
        with self.assertRaises(FileFormatError) as context:
            read_dataset(path)
        assert context.exception.offset == 0

        self.rewrite(path, data[:4] + bytes([2, 0, 0, 0]) + data[8:])
        with self.assertRaises(FileFormatError) as context:
            read_dataset(path)
        assert context.exception.offset == 4

        # the header declares one trajectory more than the payload holds
        offset = DATASET_HEADER.fields['n_traj'][1]
        self.rewrite(path, data[:offset] + bytes([4, 0, 0, 0]) +
                     data[offset + 4:])
        with self.assertRaises(FileFormatError):
            read_dataset(path)

        self.rewrite(path, data[:5])
        with self.assertRaises(FileFormatError) as context:
            read_dataset(path)
        assert context.exception.offset == 0

        with self.assertRaises(FileFormatError):
            read_dataset(self.path('missing.dqgd'))

    def test_checkpoint(self):
        closure = CNNClosure(channels=(2, 4, 3, 2), seed=5)
        closure.set_normalization(self.dataset.states, self.dataset.targets)
        model = QGModel(PhysicalParams(nx=8, delta=0.31, U1=0.021), closure)
        path = self.path('checkpoint.dcnn')
        write_checkpoint(path, model)
        checkpoint = read_checkpoint(path)
        assert (checkpoint.delta, checkpoint.U1) == (0.31, 0.021)
        assert checkpoint.closure.channels == (2, 4, 3, 2)
        for name, value in closure.state_dict().items():
            assert (checkpoint.closure.state_dict()[name] == value).all()

        model = QGModel(PhysicalParams(nx=8))
        write_checkpoint(path, model)
        assert getsize(path) == 16 + 16
        checkpoint = read_checkpoint(path)
        assert checkpoint.closure(None, None) is None

        data = self.content(path)
        self.rewrite(path, data[:8] + bytes([7, 0, 0, 0]) + data[12:])
        with self.assertRaises(FileFormatError) as context:
            read_checkpoint(path)
        assert context.exception.offset == 8

        with self.assertRaises(FileFormatError):
            write_checkpoint(path, QGModel(PhysicalParams(nx=8),
                                           SmagorinskyClosure()))

    def test_ensemble(self):
        samples = randn((5, 4), generator=self.generator, dtype=float64)
        log_p = randn(5, generator=self.generator, dtype=float64)
        iterations = tensor([10, 12, 14, 16, 18], dtype=long)
        path = self.path('ensemble.dpen')
        write_ensemble(path, samples, log_p, iterations)
        assert getsize(path) == 16 + 5 * 4 * 8 + 5 * 8 + 5 * 4
        s, lp, it = read_ensemble(path)
        assert (s == samples).all() and (lp == log_p).all()
        assert it.tolist() == iterations.tolist()

        with self.assertRaises(FileFormatError):
            write_ensemble(path, samples, log_p[:4], iterations)

        layout = FlatParameters(QGModel(PhysicalParams(nx=8)))
        ensemble = PosteriorEnsemble(samples, log_p, iterations, layout)
        ensemble.save(path)
        loaded = PosteriorEnsemble.load(path, layout)
        assert (loaded.samples == samples).all()
        assert loaded.column('params.delta') == samples[:, 0].tolist()
        wrong = FlatParameters(QGModel(PhysicalParams(nx=8,
                                                      trainable=('U1',))))
        with self.assertRaises(WrongArgumentsError):
            PosteriorEnsemble.load(path, wrong)

        self.rewrite(path, self.content(path)[:-1])
        with self.assertRaises(FileFormatError):
            read_ensemble(path)

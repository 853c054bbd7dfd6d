# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

import warnings

from copy import deepcopy
from dataclasses import dataclass, field
from math import inf, isfinite

from pandas import DataFrame, read_csv
from torch import no_grad
from tqdm.autonotebook import tqdm

from ..autodiff import Tape, backward
from ..dynamics import PhysicalParams
from ..exceptions import IntegrationBlowupError, NonFiniteError, \
    TrainingDivergedError, WrongArgumentsError
from ..models import CNNClosure, NullClosure, QGModel
from .config import PhysicsConfig, TrainConfig
from .data import TrajectoryLoader
from .losses import TrajectoryMSELoss, trajectory_loss
from .optim import AdaBelief, lr_schedule

HISTORY_COLUMNS = ['epoch', 'train_loss', 'val_loss', 'delta', 'U1']


@dataclass
class TrainHistory:
    """Per-epoch record of an online training run. All lists have one entry
    per completed epoch.

    """
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    delta: list = field(default_factory=list)
    U1: list = field(default_factory=list)
    n_skipped: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def append(self, train_loss, val_loss, delta, U1, n_skipped=0):
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.delta.append(delta)
        self.U1.append(U1)
        self.n_skipped.append(n_skipped)

    def best_epoch(self):
        """Index of the epoch with the lowest validation loss (first one on
        ties).

        """
        if len(self) == 0:
            return None
        return min(range(len(self)), key=lambda i: (self.val_loss[i], i))

    def to_dataframe(self):
        return DataFrame({'epoch': list(range(1, len(self) + 1)),
                          'train_loss': self.train_loss,
                          'val_loss': self.val_loss,
                          'delta': self.delta,
                          'U1': self.U1},
                         columns=HISTORY_COLUMNS)

    def to_csv(self, path):
        self.to_dataframe().to_csv(path, index=False, float_format='%.17g')

    @classmethod
    def from_csv(cls, path):
        df = read_csv(path)
        return cls(df['train_loss'].tolist(), df['val_loss'].tolist(),
                   df['delta'].tolist(), df['U1'].tolist(), [0] * len(df))


def build_model(dataset, config, physics=None):
    """Coarse model to be trained on `dataset`: the constants of `physics`
    on the dataset grid with the initial guess of `config` for
    (delta, U1), and the closure named by ``config.closure``.

    The CNN standardization constants are taken from the dataset states and
    sub-grid targets, which are therefore required.

    """
    physics = PhysicsConfig() if physics is None else physics
    params = PhysicalParams(nx=dataset.nx, ny=dataset.ny,
                            domain_length=dataset.domain_length, dt=dataset.dt,
                            beta=physics.beta, rek=physics.rek, rd=physics.rd,
                            delta=config.init_delta, U1=config.init_U1,
                            U2=physics.U2,
                            effective_beta=physics.effective_beta)
    if config.closure == 'none':
        return QGModel(params, NullClosure())
    if not dataset.has_targets:
        raise WrongArgumentsError('The CNN closure is standardized with the '
                                  'sub-grid targets, which this dataset '
                                  'lacks.')
    closure = CNNClosure(seed=config.seed)
    closure.set_normalization(dataset.states, dataset.targets)
    return QGModel(params, closure)


class Trainer:
    """Two-phase online training. During the first `phase_switch` epochs
    the physical parameters and the closure are both updated, each by its
    own AdaBelief optimizer and learning rate schedule; afterwards the
    physical parameters are frozen and only the closure is trained.

    Parameters
    ----------
    model: torchqgml.models.QGModel
        Model to be trained.
    train_set: torchqgml.data_structures.TrajectoryDataset
    config: torchqgml.utils.config.TrainConfig
    val_set: torchqgml.data_structures.TrajectoryDataset, optional
        Held-out trajectories. The training loss selects the returned
        parameters when absent.
    criterion: TrajectoryMSELoss, optional
        Defaults to the MSE scaled by the training PV standard deviation
        (``config.scale_loss``) or to the plain MSE.

    Attributes
    ----------
    history: TrainHistory
    best_state: dict
        State dict of the model at the best validation epoch.
    n_skipped: int
        Total number of batches skipped after a blowup.

    """
    def __init__(self, model, train_set, config, val_set=None,
                 criterion=None):
        if train_set.k != config.k:
            raise WrongArgumentsError('The trajectories were sampled every {} '
                                      'steps but k={} is configured.'.format(
                                          train_set.k, config.k))
        n_obs = min(config.n_obs, train_set.n_obs)
        self.model = model
        self.config = config
        self.train_set = train_set.window(n_obs)
        self.val_set = None if val_set is None else val_set.window(
            min(n_obs, val_set.n_obs))
        if criterion is None:
            criterion = TrajectoryMSELoss(
                self.train_set.field_std() if config.scale_loss else 1.)
        self.criterion = criterion

        betas = (config.beta1, config.beta2)
        self.schedules = config.schedules()
        self.optimizers = {}
        for group, params in (('phy', model.physical_parameters()),
                              ('nn', model.closure_parameters())):
            if params:
                self.optimizers[group] = AdaBelief(
                    params, lr=lr_schedule(group, 0, self.schedules),
                    betas=betas, eps=config.eps)

        self.history = TrainHistory()
        self.best_state = deepcopy(model.state_dict())
        self.n_skipped = 0
        self._consecutive_blowups = 0

    def frozen(self, epoch):
        return epoch >= self.config.phase_switch

    def trainable_groups(self, epoch):
        return [g for g in self.optimizers
                if g == 'nn' or not self.frozen(epoch)]

    def process_batch(self, idx, batch, epoch):
        groups = self.trainable_groups(epoch)
        params = [p for g in groups
                  for group in self.optimizers[g].param_groups
                  for p in group['params']]
        for g in groups:
            self.optimizers[g].zero_grad()

        with Tape() as tape:
            loss = trajectory_loss(self.model, batch, self.config.k,
                                   self.criterion, idx)
        grads = backward(tape, output=loss, inputs=params)
        for p in params:
            p.grad = grads.of(p).detach()

        for g in groups:
            self.optimizers[g].step()
        self.model.params.clamp_()

        return loss.detach().item()

    def _skip(self, e, epoch):
        self.n_skipped += 1
        self._consecutive_blowups += 1
        warnings.warn('Epoch {}: batch skipped ({}).'.format(epoch + 1, e))
        if self._consecutive_blowups > self.config.max_blowups:
            raise TrainingDivergedError(
                'Training diverged: {} consecutive batches blew up (last at '
                'epoch {}, delta={:.4g}, U1={:.4g}): {}'.format(
                    self._consecutive_blowups, epoch + 1,
                    self.model.params.delta.item(),
                    self.model.params.U1.item(), e))

    def validation_loss(self):
        dataset = self.val_set if self.val_set is not None else self.train_set
        loader = TrajectoryLoader(dataset, self.config.batch_size,
                                  shuffle=False)
        total = 0.
        with no_grad():
            for idx, batch in loader:
                try:
                    loss = trajectory_loss(self.model, batch, self.config.k,
                                           self.criterion, idx)
                except IntegrationBlowupError as e:
                    warnings.warn('Validation rollout blew up: {}'.format(e))
                    return inf
                total += loss.item() * len(idx)
        return total / len(dataset)

    def run(self, verbose=True):
        """Train for ``config.epochs`` epochs and load the parameters of the
        best validation epoch into the model.

        Returns
        -------
        history: TrainHistory

        """
        loader = TrajectoryLoader(self.train_set, self.config.batch_size,
                                  shuffle=True, seed=self.config.seed)
        iterator = tqdm(range(self.config.epochs), unit='epoch',
                        disable=not verbose)
        best = inf
        for epoch in iterator:
            for group, optimizer in self.optimizers.items():
                optimizer.set_learning_rate(
                    lr_schedule(group, epoch, self.schedules))
            loader.set_epoch(epoch)

            sum_, n_done, n_skipped = 0., 0, 0
            for idx, batch in loader:
                try:
                    loss = self.process_batch(idx, batch, epoch)
                except (IntegrationBlowupError, NonFiniteError) as e:
                    n_skipped += 1
                    self._skip(e, epoch)
                    continue
                self._consecutive_blowups = 0
                sum_ += loss
                n_done += 1
            if n_done == 0:
                raise TrainingDivergedError('Every batch of epoch {} blew '
                                            'up.'.format(epoch + 1))

            train_loss = sum_ / n_done
            val_loss = self.validation_loss() if self.val_set is not None \
                else train_loss
            theta = self.model.params.theta_phy()
            self.history.append(train_loss, val_loss, theta['delta'],
                                theta['U1'], n_skipped)
            if isfinite(val_loss) and val_loss < best:
                best = val_loss
                self.best_state = deepcopy(self.model.state_dict())

            iterator.set_description(
                'Epoch {} | train loss: {:.5f} | val loss: {:.5f} | '
                'delta: {:.4f} | U1: {:.5f}'.format(
                    epoch + 1, train_loss, val_loss, theta['delta'],
                    theta['U1']))

        self.model.load_state_dict(self.best_state)
        return self.history


def train(dataset, config=None, physics=None, model=None, verbose=True):
    """Online training on the trajectories of `dataset`. A share
    ``config.val_share`` of the trajectories is held out for validation.

    Parameters
    ----------
    dataset: torchqgml.data_structures.TrajectoryDataset
    config: torchqgml.utils.config.TrainConfig, optional
    physics: torchqgml.utils.config.PhysicsConfig, optional
        Constants of the coarse model which are not trained.
    model: torchqgml.models.QGModel, optional
        Defaults to :func:`build_model`.
    verbose: bool

    Returns
    -------
    theta_phy: dict
        Best-validation delta and U1.
    theta_nn: dict
        Best-validation closure state dict.
    history: TrainHistory

    """
    config = TrainConfig() if config is None else config
    config.validate()
    train_set, val_set = dataset.split(1 - config.val_share, seed=config.seed)
    if model is None:
        model = build_model(train_set, config, physics)
    trainer = Trainer(model, train_set, config, val_set)
    history = trainer.run(verbose=verbose)
    return model.params.theta_phy(), model.closure.state_dict(), history

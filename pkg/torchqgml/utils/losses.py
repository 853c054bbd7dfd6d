# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from torch.nn import Module

from ..autodiff import ops
from ..dynamics.solver import rollout
from ..exceptions import IntegrationBlowupError, SizeMismatchError, \
    WrongArgumentsError


class TrajectoryMSELoss(Module):
    """Mean squared error between a forecast rollout and a truth trajectory,
    averaged over the N forecast observations, the batch, the layers and the
    grid points. The initial observation, identical in both, is skipped.
    This class implements :class:`torch.nn.Module` interface.

    Parameters
    ----------
    scale: float
        Fields are divided by `scale` before comparison. With the PV standard
        deviation of the training set the loss is O(1); `scale` = 1 gives the
        plain MSE.

    """
    def __init__(self, scale=1.):
        super().__init__()
        if not scale > 0:
            raise WrongArgumentsError('The loss scale must be positive, got '
                                      '{}.'.format(scale))
        self.scale = float(scale)

    def forward(self, forecast, truth):
        """
        Parameters
        ----------
        forecast: list of torch.Tensor
            N + 1 states of shape (b_size, 2, ny, nx) as returned by
            :func:`torchqgml.dynamics.rollout`.
        truth: torch.Tensor, shape: (b_size, N + 1, 2, ny, nx)

        Returns
        -------
        loss: torch.Tensor, shape: ()
            :math:`\\frac{1}{N} \\sum_{i=1}^N \\langle (M^{ik}(X_0) -
            X_i)^2 \\rangle / s^2` where :math:`s` is the scale.

        """
        n_obs = len(forecast) - 1
        if n_obs < 1:
            raise WrongArgumentsError('The trajectory loss needs at least one '
                                      'forecast observation.')
        if truth.shape[-4] != n_obs + 1 or \
                forecast[1].shape != truth[..., 1, :, :, :].shape:
            raise SizeMismatchError('Forecast of {} states of shape {} '
                                    'against a truth of shape {}.'.format(
                                        n_obs + 1, tuple(forecast[1].shape),
                                        tuple(truth.shape)))
        total = None
        for i in range(1, n_obs + 1):
            residual = ops.scale(ops.sub(forecast[i], truth[..., i, :, :, :]),
                                 1. / self.scale)
            term = ops.reduce_mean(ops.square(residual))
            total = term if total is None else ops.add(total, term)
        return ops.scale(total, 1. / n_obs)


def trajectory_loss(model, truth, k, criterion=None, idx=None):
    """Forecast the batch of trajectories `truth` from their initial states
    with `model` and evaluate `criterion` on them.

    Parameters
    ----------
    model: torchqgml.models.QGModel
    truth: torch.Tensor, shape: (b_size, N + 1, 2, ny, nx)
    k: int
        Solver steps between observations.
    criterion: TrajectoryMSELoss, optional
    idx: torch.Tensor, optional
        Dataset indices of the batch, used in error messages.

    Returns
    -------
    loss: torch.Tensor, shape: ()

    """
    criterion = TrajectoryMSELoss() if criterion is None else criterion
    try:
        forecast = rollout(truth[:, 0], truth.shape[1] - 1, k, model.params,
                           model.closure)
    except IntegrationBlowupError as e:
        trajectory = e.trajectory
        if trajectory is not None and idx is not None:
            trajectory = int(idx[trajectory])
        raise IntegrationBlowupError(
            '{} Trajectory: {}.'.format(e, trajectory), step=e.step,
            obs_index=e.obs_index, trajectory=trajectory)
    return criterion(forecast, truth)

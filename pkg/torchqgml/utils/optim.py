# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from dataclasses import dataclass, field

from torch import isfinite, no_grad, zeros_like
from torch.optim import Optimizer

from ..exceptions import NonFiniteError, WrongArgumentsError


@dataclass(frozen=True)
class ExponentialDecay:
    """Learning rate :math:`\\max(floor, start \\cdot rate^{epoch})`."""
    start: float
    floor: float
    rate: float

    def __call__(self, epoch):
        if epoch < 0:
            raise WrongArgumentsError('Negative epoch {}.'.format(epoch))
        return max(self.floor, self.start * self.rate ** epoch)


SCHEDULES = {'phy': ExponentialDecay(start=1e-2, floor=1e-3, rate=0.9),
             'nn': ExponentialDecay(start=5e-4, floor=1e-4, rate=0.95)}


def lr_schedule(group, epoch, schedules=None):
    """Per-epoch learning rate of the parameter group `group` ('phy' for the
    physical parameters, 'nn' for the closure).

    """
    schedules = SCHEDULES if schedules is None else schedules
    try:
        return schedules[group](epoch)
    except KeyError:
        raise WrongArgumentsError('Unknown parameter group `{}` (expected one '
                                  'of {}).'.format(group, sorted(schedules)))


def _check_finite(grads):
    for i, g in enumerate(grads):
        if not isfinite(g).all():
            raise NonFiniteError('Non-finite gradient for parameter '
                                 '{}.'.format(i))


def _update(p, g, m, s, step, lr, betas, eps):
    beta1, beta2 = betas
    m = beta1 * m + (1 - beta1) * g
    s = beta2 * s + (1 - beta2) * (g - m) ** 2 + eps
    m_hat = m / (1 - beta1 ** step)
    s_hat = s / (1 - beta2 ** step)
    return p - lr * m_hat / (s_hat.sqrt() + eps), m, s


@dataclass
class OptimizerState:
    """AdaBelief moments of a list of parameters.

    Attributes
    ----------
    m: list of torch.Tensor
        First moments.
    s: list of torch.Tensor
        Belief (centred second) moments.
    step: int
    lr: float
    betas: tuple of float
    eps: float

    """
    m: list
    s: list
    step: int = 0
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    schedule: object = field(default=None, compare=False)

    @classmethod
    def zeros_like(cls, params, **kwargs):
        return cls([zeros_like(p) for p in params],
                   [zeros_like(p) for p in params], **kwargs)


def adabelief_step(params, grads, state):
    """Functional AdaBelief update with bias correction.

    Parameters
    ----------
    params: list of torch.Tensor
    grads: list of torch.Tensor
    state: OptimizerState

    Returns
    -------
    params: list of torch.Tensor
        Updated parameters (new tensors).
    state: OptimizerState

    """
    if len(params) != len(grads) or len(params) != len(state.m) or \
            any(p.shape != g.shape for p, g in zip(params, grads)):
        raise WrongArgumentsError('Parameters, gradients and moments must '
                                  'agree in number and shape.')
    _check_finite(grads)
    step = state.step + 1
    new_params, new_m, new_s = [], [], []
    for p, g, m, s in zip(params, grads, state.m, state.s):
        p, m, s = _update(p.detach(), g, m, s, step, state.lr, state.betas,
                          state.eps)
        new_params.append(p)
        new_m.append(m)
        new_s.append(s)
    return new_params, OptimizerState(new_m, new_s, step, state.lr,
                                      state.betas, state.eps, state.schedule)


class AdaBelief(Optimizer):
    """AdaBelief optimizer: Adam whose second moment tracks the squared
    deviation of the gradient from its running mean.

    Parameters
    ----------
    params: iterable
        Parameters or parameter groups.
    lr: float
    betas: tuple of float
    eps: float

    """
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        if not lr >= 0:
            raise WrongArgumentsError('Invalid learning rate {}.'.format(lr))
        defaults = dict(lr=lr, betas=betas, eps=eps)
        super().__init__(params, defaults)

    def set_learning_rate(self, lr):
        for group in self.param_groups:
            group['lr'] = lr

    @no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            loss = closure()

        for group in self.param_groups:
            params = [p for p in group['params'] if p.grad is not None]
            _check_finite([p.grad for p in params])
            for p in params:
                state = self.state[p]
                if len(state) == 0:
                    state['step'] = 0
                    state['exp_avg'] = zeros_like(p)
                    state['exp_avg_var'] = zeros_like(p)
                state['step'] += 1
                new, state['exp_avg'], state['exp_avg_var'] = _update(
                    p, p.grad, state['exp_avg'], state['exp_avg_var'],
                    state['step'], group['lr'], group['betas'], group['eps'])
                p.copy_(new)
        return loss

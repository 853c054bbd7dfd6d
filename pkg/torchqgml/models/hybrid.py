# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from torch import stack
from torch.nn import Module

from ..dynamics.solver import ModelState, rollout, step_ab3
from .interfaces import NullClosure


class QGModel(Module):
    """Coarse quasi-geostrophic model augmented by a closure. The physical
    parameters and the closure parameters are the two parameter groups of
    online training.

    Parameters
    ----------
    params: torchqgml.dynamics.PhysicalParams
        Parameters of the coarse solver.
    closure: torchqgml.models.interfaces.Closure, optional
        Defaults to :class:`NullClosure`.

    """
    def __init__(self, params, closure=None):
        super().__init__()
        self.params = params
        self.closure = NullClosure() if closure is None else closure

    def physical_parameters(self):
        return [p for p in self.params.parameters() if p.requires_grad]

    def closure_parameters(self):
        return [p for p in self.closure.parameters() if p.requires_grad]

    def step(self, state):
        return step_ab3(state, self.params, self.closure)

    def initial_state(self, q0):
        return ModelState(q0)

    def forward(self, q0, n_obs, k):
        """Sparse-trajectory forecast.

        Parameters
        ----------
        q0: torch.Tensor, shape: (2, ny, nx) or (b_size, 2, ny, nx)
        n_obs: int
        k: int

        Returns
        -------
        trajectory: torch.Tensor, shape: ([b_size,] n_obs + 1, 2, ny, nx)

        """
        states = rollout(q0, n_obs, k, self.params, self.closure)
        return stack(states, dim=q0.dim() - 3)

    forecast = forward

# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from torch.nn import Module


class Closure(Module):
    """Interface of the sub-grid closures :math:`G(\\bar X; \\theta)` added to
    the resolved tendency of the coarse model. It is only required to
    implement the method `forward`.

    """
    def forward(self, q, params):
        """

        Parameters
        ----------
        q: torch.Tensor, shape: (2, ny, nx) or (b_size, 2, ny, nx), dtype:
            torch.float64
            Coarse potential vorticity.
        params: torchqgml.dynamics.PhysicalParams
            Parameters of the coarse model.

        Returns
        -------
        closure_output: torch.Tensor or None
            Sub-grid tendency of the same shape as `q` (1/s^2), or None when
            the closure contributes nothing.

        """
        raise NotImplementedError

    @property
    def n_parameters(self):
        return count_parameters(self)


class NullClosure(Closure):
    """No parameterization."""
    def forward(self, q, params):
        return None


def count_parameters(closure):
    """Number of scalar parameters of a closure."""
    return sum(p.numel() for p in closure.parameters())

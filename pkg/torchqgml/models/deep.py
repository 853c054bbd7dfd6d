# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

from torch import Generator, diag, empty, float64, isfinite, ones, zeros
from torch.nn import Module, ModuleList, Parameter
from torch.nn.init import kaiming_uniform_, zeros_

from ..autodiff import ops
from ..exceptions import SanityError, SizeMismatchError, \
    WrongDimensionError
from .interfaces import Closure

CHANNELS = (2, 128, 64, 32, 32, 32, 2)


class PeriodicConv2d(Module):
    """Square-kernel convolution with periodic padding, so that the output
    keeps the spatial shape of the input.

    Parameters
    ----------
    in_channels: int
    out_channels: int
    kernel_size: int
        Odd kernel side.

    Attributes
    ----------
    weight: torch.nn.Parameter, shape: (out_channels, in_channels,
        kernel_size, kernel_size)
    bias: torch.nn.Parameter, shape: (out_channels)

    """
    def __init__(self, in_channels, out_channels, kernel_size=3):
        super().__init__()
        self.weight = Parameter(empty(out_channels, in_channels, kernel_size,
                                      kernel_size, dtype=float64))
        self.bias = Parameter(zeros(out_channels, dtype=float64))

    def reset_parameters(self, generator):
        """He-uniform weights (bound :math:`\\sqrt{6 / (c_{in} k^2)}`), zero
        biases.

        """
        kaiming_uniform_(self.weight.data, nonlinearity='relu',
                         generator=generator)
        zeros_(self.bias.data)

    def forward(self, x):
        return ops.conv2_periodic(x, self.weight, self.bias)


class CNNClosure(Closure):
    """Convolutional sub-grid closure. Both layers' vorticities enter as
    the two input channels and the two output channels are the sub-grid
    tendencies of the two layers. Six 3x3 periodic convolutions with ReLU
    activations in between (none after the last layer) map the standardized
    input to the standardized output.

    Parameters
    ----------
    channels: tuple of int
        Channels of the successive feature maps, from input to output.
    seed: int
        Seed of the weight initialization.

    Attributes
    ----------
    layers: torch.nn.ModuleList
        The :class:`PeriodicConv2d` layers.
    in_mean, in_std: torch.Tensor, shape: (2)
        Per-channel standardization constants of the input PV.
    out_mean, out_std: torch.Tensor, shape: (2)
        Per-channel constants mapping the network output to a tendency.

    """

    def __init__(self, channels=CHANNELS, seed=0):
        super().__init__()
        self.channels = tuple(channels)
        self.layers = ModuleList(PeriodicConv2d(c_in, c_out)
                                 for c_in, c_out in zip(self.channels[:-1],
                                                        self.channels[1:]))
        n_in, n_out = self.channels[0], self.channels[-1]
        self.register_buffer('in_mean', zeros(n_in, dtype=float64))
        self.register_buffer('in_std', ones(n_in, dtype=float64))
        self.register_buffer('out_mean', zeros(n_out, dtype=float64))
        self.register_buffer('out_std', ones(n_out, dtype=float64))
        self.reset_parameters(seed)

    def reset_parameters(self, seed):
        generator = Generator().manual_seed(int(seed))
        for layer in self.layers:
            layer.reset_parameters(generator)

    def set_normalization(self, q_samples, target_samples):
        """Set the standardization constants from training data.

        Parameters
        ----------
        q_samples: torch.Tensor, shape: (..., 2, ny, nx)
            Coarse PV states.
        target_samples: torch.Tensor, shape: (..., 2, ny, nx)
            Sub-grid tendencies.

        """
        in_mean, in_std = _channel_moments(q_samples)
        out_mean, out_std = _channel_moments(target_samples)
        self.set_normalization_constants(in_mean, in_std, out_mean, out_std)

    def set_normalization_constants(self, in_mean, in_std, out_mean, out_std):
        values = (in_mean, in_std, out_mean, out_std)
        if not all(isfinite(v).all() for v in values):
            raise SanityError('Normalization constants must be finite.')
        if not ((in_std > 0).all() and (out_std > 0).all()):
            raise SanityError('Normalization scales must be nonzero.')
        self.in_mean.copy_(in_mean)
        self.in_std.copy_(in_std)
        self.out_mean.copy_(out_mean)
        self.out_std.copy_(out_std)

    def forward(self, q, params=None):
        """Predicted sub-grid tendency of `q`.

        Parameters
        ----------
        q: torch.Tensor, shape: (2, ny, nx) or (b_size, 2, ny, nx)
        params: torchqgml.dynamics.PhysicalParams, optional
            Unused, present for the closure interface.

        Returns
        -------
        s: torch.Tensor
            Same shape as `q`.

        """
        if q.dim() not in (3, 4):
            raise WrongDimensionError('CNNClosure expects 3 or 4-dimensional '
                                      'inputs, got {} dimensions.'.format(
                                          q.dim()))
        if q.shape[-3] != self.channels[0] or \
                min(q.shape[-2:]) < 3:
            raise SizeMismatchError('CNNClosure expects inputs of shape '
                                    '([b_size,] {}, ny >= 3, nx >= 3), got '
                                    '{}.'.format(self.channels[0],
                                                 tuple(q.shape)))
        h = ops.conv2_periodic(q, _pointwise(1 / self.in_std),
                               -self.in_mean / self.in_std)
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = ops.relu(h)
        return ops.conv2_periodic(h, _pointwise(self.out_std), self.out_mean)

    def extra_repr(self):
        return 'channels={}'.format(self.channels)


def _pointwise(scale):
    """1x1 kernel scaling each channel independently."""
    return diag(scale).view(len(scale), len(scale), 1, 1)


def _channel_moments(x):
    per_channel = x.detach().transpose(0, -3).reshape(x.shape[-3], -1)
    return per_channel.mean(dim=1), per_channel.std(dim=1, unbiased=False)


def init_cnn(seed, channels=CHANNELS):
    """Freshly initialized :class:`CNNClosure`, deterministic given `seed`."""
    return CNNClosure(channels=channels, seed=seed)

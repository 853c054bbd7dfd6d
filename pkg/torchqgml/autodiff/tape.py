# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

import threading

from dataclasses import dataclass
from torch import ones_like, zeros_like
from torch.autograd import grad as autograd_grad

from ..exceptions import AdjointError, SizeMismatchError
from .functions import ADJOINTS

_active = threading.local()


@dataclass(frozen=True)
class TapeNode:
    """One recorded operation.

    Attributes
    ----------
    index: int
        Position of the node in recording order.
    kind: str
        Op-kind, key of :data:`torchqgml.autodiff.functions.ADJOINTS`.
    inputs: tuple
        For each tensor input, index of the node which produced it or -1
        when it was created outside the tape (leaves, constants).
    output: torch.Tensor
        Forward result. The values saved for the adjoint live in
        `output.grad_fn`.

    """
    index: int
    kind: str
    inputs: tuple
    output: object


class GradientMap(dict):
    """Gradients of a tape output keyed by `id` of the leaf tensors. Leaves
    which do not influence the output are absent and have zero gradient.

    """
    def __init__(self, grads=(), leaves=()):
        super().__init__(grads)
        self.leaves = list(leaves)

    def of(self, tensor):
        """Gradient with respect to `tensor` (zeros if absent)."""
        g = self.get(id(tensor))
        return zeros_like(tensor) if g is None else g


class Tape:
    """Record of the operations issued through :func:`record` while the tape
    is active. Tapes are activated as context managers and are local to the
    thread which entered them, so independent tapes can be recorded
    concurrently.

    Example
    -------
    >>> with Tape() as tape:
    ...     loss = ops.reduce_sum(ops.square(x))
    >>> grads = backward(tape)

    Attributes
    ----------
    nodes: list of TapeNode
        Recorded operations in topological (recording) order.

    """
    def __init__(self):
        self.nodes = []
        self._producers = {}

    def __len__(self):
        return len(self.nodes)

    def __enter__(self):
        stack = getattr(_active, 'stack', None)
        if stack is None:
            stack = _active.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _active.stack.pop()
        return False

    @property
    def output(self):
        """Result of the last recorded operation."""
        if not self.nodes:
            raise AdjointError('The tape is empty.')
        return self.nodes[-1].output

    def append(self, kind, inputs, output):
        index = len(self.nodes)
        ids = tuple(self._producers.get(id(t), -1) for t in inputs)
        self.nodes.append(TapeNode(index, kind, ids, output))
        self._producers[id(output)] = index


def active_tape():
    stack = getattr(_active, 'stack', None)
    return stack[-1] if stack else None


def _shape_str(t):
    return tuple(t.shape)


def _check_binary(kind, a, b):
    if a.shape == b.shape or a.numel() == 1 or b.numel() == 1:
        return
    raise SizeMismatchError('{}: incompatible shapes {} and {}.'.format(
        kind, _shape_str(a), _shape_str(b)))


def _check(kind, tensors, attrs):
    if kind in ('add', 'sub', 'mul'):
        _check_binary(kind, *tensors)
    elif kind == 'spectral-diagonal-multiply':
        x, d = tensors
        if not (d.numel() == 1 or d.shape == x.shape[x.dim() - d.dim():]):
            raise SizeMismatchError(
                '{}: coefficients of shape {} do not match the trailing '
                'dimensions of {}.'.format(kind, _shape_str(d), _shape_str(x)))
    elif kind == 'layer-mix':
        x, m = tensors
        c = x.shape[-3] if x.dim() >= 3 else -1
        if m.shape != (c, c) + tuple(x.shape[-2:]):
            raise SizeMismatchError(
                '{}: coupling matrix of shape {} does not match a layered '
                'spectrum of shape {}.'.format(kind, _shape_str(m),
                                               _shape_str(x)))
    elif kind in ('square', 'sqrt', 'relu', 'fft2', 'pad-periodic'):
        x, = tensors
        if x.is_complex():
            raise SizeMismatchError('{}: expected a real tensor, got '
                                    '{}.'.format(kind, x.dtype))
        if kind == 'fft2' and x.dim() < 2:
            raise SizeMismatchError('{}: expected at least 2 dimensions, got '
                                    'shape {}.'.format(kind, _shape_str(x)))
        if kind == 'pad-periodic' and \
                attrs['width'] > min(x.shape[-2:]):
            raise SizeMismatchError('{}: width {} exceeds the field shape '
                                    '{}.'.format(kind, attrs['width'],
                                                 _shape_str(x)))
    elif kind == 'ifft2':
        xh, = tensors
        ny, nx = attrs['shape']
        if xh.shape[-2:] != (ny, nx // 2 + 1):
            raise SizeMismatchError(
                '{}: half spectrum of shape {} does not match a field of '
                'shape {}.'.format(kind, _shape_str(xh), (ny, nx)))
    elif kind == 'select-modes':
        xh, = tensors
        rows, cols = attrs['rows'], attrs['cols']
        if rows.numel() and int(rows.max()) >= xh.shape[-2] or \
                cols.numel() and int(cols.max()) >= xh.shape[-1]:
            raise SizeMismatchError('{}: selected modes fall outside a '
                                    'spectrum of shape {}.'.format(
                                        kind, _shape_str(xh)))
    elif kind == 'conv2-periodic':
        x, w = tensors[:2]
        if x.dim() != 4 or w.dim() != 4 or x.shape[1] != w.shape[1] or \
                w.shape[-1] % 2 == 0 or w.shape[-1] != w.shape[-2]:
            raise SizeMismatchError(
                '{}: input {} and kernel {} are not compatible (expected '
                '(B, C, H, W) and (C_out, C, k, k) with odd k).'.format(
                    kind, _shape_str(x), _shape_str(w)))
        if len(tensors) == 3 and tensors[2].shape != (w.shape[0],):
            raise SizeMismatchError('{}: bias of shape {} for {} output '
                                    'channels.'.format(kind,
                                                       _shape_str(tensors[2]),
                                                       w.shape[0]))


def record(kind, *inputs, **attrs):
    """Evaluate op-kind `kind` on `inputs` and append a node to the active
    tape (if any).

    Parameters
    ----------
    kind: str
        Op-kind.
    inputs: torch.Tensor
        Tensor operands. `None` is accepted for an absent convolution bias.
    attrs:
        Non-differentiable attributes of the op-kind (e.g. `shape` for
        `ifft2`, `factor` for `scale`).

    Returns
    -------
    output: torch.Tensor

    """
    try:
        fn = ADJOINTS[kind]
    except KeyError:
        raise AdjointError('No adjoint registered for op-kind '
                           '`{}`.'.format(kind))
    tensors = [t for t in inputs if t is not None]
    _check(kind, tensors, attrs)
    output = fn.apply(*inputs, *[attrs[a] for a in fn.attrs])
    tape = active_tape()
    if tape is not None:
        tape.append(kind, tensors, output)
    return output


def _leaves(output):
    if output.grad_fn is None:
        return [output] if output.requires_grad else []
    leaves, seen, stack = [], set(), [output.grad_fn]
    while stack:
        fn = stack.pop()
        if fn is None or fn in seen:
            continue
        seen.add(fn)
        variable = getattr(fn, 'variable', None)
        if variable is not None:
            leaves.append(variable)
        stack.extend(f for f, _ in fn.next_functions)
    return leaves


def backward(tape, seed=None, output=None, inputs=None):
    """Reverse traversal of the tape.

    Parameters
    ----------
    tape: Tape
    seed: torch.Tensor, optional
        Cotangent of the output. Defaults to one for a scalar output.
    output: torch.Tensor, optional
        Tensor to differentiate. Defaults to the last recorded node.
    inputs: list of torch.Tensor, optional
        Tensors to differentiate with respect to. Defaults to every leaf
        tensor requiring a gradient that the output depends on.

    Returns
    -------
    grads: GradientMap

    """
    if len(tape) == 0:
        raise AdjointError('backward called on an empty tape.')
    if output is None:
        output = tape.output
    if seed is None:
        if output.numel() != 1:
            raise SizeMismatchError('A seed is required for a non-scalar '
                                    'output of shape {}.'.format(
                                        _shape_str(output)))
        seed = ones_like(output)
    if seed.shape != output.shape:
        raise SizeMismatchError('Seed of shape {} for an output of shape '
                                '{}.'.format(_shape_str(seed),
                                             _shape_str(output)))
    if inputs is None:
        inputs = _leaves(output)
    inputs = list(inputs)
    if not output.requires_grad or not inputs:
        return GradientMap(leaves=inputs)

    grads = autograd_grad(output, inputs, grad_outputs=seed,
                          allow_unused=True)
    return GradientMap({id(t): g for t, g in zip(inputs, grads)
                        if g is not None}, leaves=inputs)

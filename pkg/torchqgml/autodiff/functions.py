# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers

Hand-written adjoint rules. Each op-kind of the tape is a
:class:`torch.autograd.Function` whose `backward` is the adjoint of its
`forward` with respect to the real inner product (complex tensors are seen as
interleaved real and imaginary parts). PyTorch's engine only schedules the
reverse traversal; no derivative used here is generated automatically.

FFT convention: the forward transform is unnormalized and the inverse is
scaled by 1/N with N = ny * nx. Transforms act on the last two dimensions and
use the real-to-half-spectrum layout of :func:`torch.fft.rfft2`.
"""

from torch import cat, fft, ones_like, where
from torch.autograd import Function
from torch.nn.functional import conv2d
from torch.nn.grad import conv2d_input, conv2d_weight


def match_input(grad, shape, is_complex):
    """Bring an output cotangent back to the shape and dtype of an input.
    Inputs which were broadcast (scalar or trailing-shape operands) receive
    the sum of the cotangent over the broadcast dimensions, real inputs
    receive the real part of a complex cotangent.

    """
    if grad.is_complex() and not is_complex:
        grad = grad.real
    if grad.shape != shape:
        if len(shape) == 0:
            grad = grad.sum()
        else:
            grad = grad.sum_to_size(shape)
    return grad


def circular_pad(x, p):
    """Periodic padding of width `p` on the last two dimensions."""
    if p == 0:
        return x
    x = cat([x[..., -p:, :], x, x[..., :p, :]], dim=-2)
    return cat([x[..., :, -p:], x, x[..., :, :p]], dim=-1)


def fold_periodic(g, p):
    """Adjoint of :func:`circular_pad`: wrap the halo back onto the core."""
    if p == 0:
        return g
    return _fold_axis(_fold_axis(g, p, -2), p, -1)


def _fold_axis(g, p, dim):
    n = g.shape[dim] - 2 * p
    core = g.narrow(dim, p, n).clone()
    core.narrow(dim, n - p, p).add_(g.narrow(dim, 0, p))
    core.narrow(dim, 0, p).add_(g.narrow(dim, n + p, p))
    return core


def _interior_columns(nx):
    """Slice of half-spectrum columns which stand for a conjugate pair."""
    nkx = nx // 2 + 1
    return slice(1, nkx - 1 if nx % 2 == 0 else nkx)


class Add(Function):
    attrs = ()

    @staticmethod
    def forward(ctx, a, b):
        ctx.metas = ((a.shape, a.is_complex()), (b.shape, b.is_complex()))
        return a + b

    @staticmethod
    def backward(ctx, g):
        (sa, ca), (sb, cb) = ctx.metas
        return match_input(g, sa, ca), match_input(g, sb, cb)


class Sub(Function):
    attrs = ()

    @staticmethod
    def forward(ctx, a, b):
        ctx.metas = ((a.shape, a.is_complex()), (b.shape, b.is_complex()))
        return a - b

    @staticmethod
    def backward(ctx, g):
        (sa, ca), (sb, cb) = ctx.metas
        return match_input(g, sa, ca), match_input(-g, sb, cb)


class Mul(Function):
    attrs = ()

    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a, b)
        return a * b

    @staticmethod
    def backward(ctx, g):
        a, b = ctx.saved_tensors
        ga = gb = None
        if ctx.needs_input_grad[0]:
            ga = match_input(g * b.conj(), a.shape, a.is_complex())
        if ctx.needs_input_grad[1]:
            gb = match_input(g * a.conj(), b.shape, b.is_complex())
        return ga, gb


class Scale(Function):
    attrs = ('factor',)

    @staticmethod
    def forward(ctx, x, factor):
        ctx.factor = factor
        return x * factor

    @staticmethod
    def backward(ctx, g):
        return g * ctx.factor, None


class Square(Function):
    attrs = ()

    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x * x

    @staticmethod
    def backward(ctx, g):
        x, = ctx.saved_tensors
        return 2 * x * g


class Reciprocal(Function):
    attrs = ()

    @staticmethod
    def forward(ctx, x):
        y = 1 / x
        ctx.save_for_backward(y)
        return y

    @staticmethod
    def backward(ctx, g):
        y, = ctx.saved_tensors
        return -g * (y * y).conj()


class Sqrt(Function):
    """Square root of a non-negative real tensor; the derivative is taken as
    zero where the input vanishes.

    """
    attrs = ()

    @staticmethod
    def forward(ctx, x):
        y = x.clamp(min=0).sqrt()
        ctx.save_for_backward(y)
        return y

    @staticmethod
    def backward(ctx, g):
        y, = ctx.saved_tensors
        positive = y > 0
        return g * positive / (2 * where(positive, y, ones_like(y)))


class Sum(Function):
    attrs = ()

    @staticmethod
    def forward(ctx, x):
        ctx.shape = x.shape
        return x.sum()

    @staticmethod
    def backward(ctx, g):
        return g.expand(ctx.shape).clone()


class Mean(Function):
    attrs = ()

    @staticmethod
    def forward(ctx, x):
        ctx.shape = x.shape
        ctx.numel = x.numel()
        return x.mean()

    @staticmethod
    def backward(ctx, g):
        return g.expand(ctx.shape) / ctx.numel


class ReLU(Function):
    attrs = ()

    @staticmethod
    def forward(ctx, x):
        mask = x > 0
        ctx.save_for_backward(mask)
        return x * mask

    @staticmethod
    def backward(ctx, g):
        mask, = ctx.saved_tensors
        return g * mask


class FFT2(Function):
    """Real field (..., ny, nx) to half spectrum (..., ny, nx // 2 + 1)."""
    attrs = ()

    @staticmethod
    def forward(ctx, x):
        ctx.shape = x.shape
        return fft.rfft2(x)

    @staticmethod
    def backward(ctx, g):
        ny, nx = ctx.shape[-2:]
        full = g.new_zeros(ctx.shape)
        full[..., :g.shape[-1]] = g
        return fft.ifft2(full).real * (ny * nx)


class IFFT2(Function):
    """Half spectrum to real field of spatial shape `shape` (ny, nx)."""
    attrs = ('shape',)

    @staticmethod
    def forward(ctx, xh, shape):
        ctx.shape = tuple(shape)
        return fft.irfft2(xh, s=tuple(shape))

    @staticmethod
    def backward(ctx, g):
        ny, nx = ctx.shape
        gh = fft.rfft2(g) / (ny * nx)
        gh[..., _interior_columns(nx)] *= 2
        return gh, None


class SpectralDiagonalMultiply(Function):
    """Multiply a spectrum by coefficients defined on its trailing dims."""
    attrs = ()

    @staticmethod
    def forward(ctx, xh, d):
        ctx.save_for_backward(xh, d)
        return xh * d

    @staticmethod
    def backward(ctx, g):
        xh, d = ctx.saved_tensors
        gx = gd = None
        if ctx.needs_input_grad[0]:
            gx = match_input(g * d.conj(), xh.shape, xh.is_complex())
        if ctx.needs_input_grad[1]:
            gd = match_input(g * xh.conj(), d.shape, d.is_complex())
        return gx, gd


class LayerMix(Function):
    """Couple the layer dimension (-3) of a spectrum through a matrix of
    coefficients `m` of shape (C, C, ny, nkx):
    :math:`y_i = \\sum_j m_{ij} x_j` at each wavenumber.

    """
    attrs = ()

    @staticmethod
    def forward(ctx, xh, m):
        ctx.save_for_backward(xh, m)
        return (xh.unsqueeze(-4) * m).sum(dim=-3)

    @staticmethod
    def backward(ctx, g):
        xh, m = ctx.saved_tensors
        gx = gm = None
        if ctx.needs_input_grad[0]:
            gx = match_input((g.unsqueeze(-3) * m.conj()).sum(dim=-4),
                             xh.shape, xh.is_complex())
        if ctx.needs_input_grad[1]:
            gm = match_input(g.unsqueeze(-3) * xh.conj().unsqueeze(-4),
                             m.shape, m.is_complex())
        return gx, gm


class SelectModes(Function):
    """Keep the spectral rows `rows` and columns `cols` of a spectrum."""
    attrs = ('rows', 'cols')

    @staticmethod
    def forward(ctx, xh, rows, cols):
        ctx.shape = xh.shape
        ctx.rows, ctx.cols = rows, cols
        return xh.index_select(-2, rows).index_select(-1, cols)

    @staticmethod
    def backward(ctx, g):
        gx = g.new_zeros(ctx.shape)
        gx[..., ctx.rows.view(-1, 1), ctx.cols.view(1, -1)] = g
        return gx, None, None


class PadPeriodic(Function):
    attrs = ('width',)

    @staticmethod
    def forward(ctx, x, width):
        ctx.width = width
        return circular_pad(x, width)

    @staticmethod
    def backward(ctx, g):
        return fold_periodic(g, ctx.width), None


class Conv2dPeriodic(Function):
    """Cross-correlation of a (B, C, H, W) input with periodic boundaries:
    the output keeps the spatial shape of the input.

    """
    attrs = ()

    @staticmethod
    def forward(ctx, x, weight, bias):
        p = weight.shape[-1] // 2
        xp = circular_pad(x, p)
        ctx.save_for_backward(xp, weight)
        ctx.p = p
        ctx.has_bias = bias is not None
        return conv2d(xp, weight, bias)

    @staticmethod
    def backward(ctx, g):
        xp, weight = ctx.saved_tensors
        gx = gw = gb = None
        if ctx.needs_input_grad[0]:
            gx = fold_periodic(conv2d_input(xp.shape, weight, g), ctx.p)
        if ctx.needs_input_grad[1]:
            gw = conv2d_weight(xp, weight.shape, g)
        if ctx.has_bias and ctx.needs_input_grad[2]:
            gb = g.sum(dim=(0, 2, 3))
        return gx, gw, gb


ADJOINTS = {
    'add': Add,
    'sub': Sub,
    'mul': Mul,
    'scale': Scale,
    'square': Square,
    'reciprocal': Reciprocal,
    'sqrt': Sqrt,
    'sum': Sum,
    'mean': Mean,
    'relu': ReLU,
    'fft2': FFT2,
    'ifft2': IFFT2,
    'spectral-diagonal-multiply': SpectralDiagonalMultiply,
    'layer-mix': LayerMix,
    'select-modes': SelectModes,
    'pad-periodic': PadPeriodic,
    'conv2-periodic': Conv2dPeriodic,
}

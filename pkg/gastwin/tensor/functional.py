# -*- coding: utf-8 -*-
"""
Neural network operations on :class:`gastwin.tensor.Tensor` objects.

Each operation computes its forward result with numpy and records an
analytic backward function.
"""
from functools import lru_cache
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gastwin.errors import ConfigError, GeometryError
from gastwin.tensor.core import (
    make_result, as_tensor, relu, sigmoid, tanh, concat, pad)

__all__ = ('conv2d', 'linear', 'softmax', 'log_softmax', 'layer_norm',
           'gelu', 'bilinear_resize', 'global_avg_pool', 'dropout',
           'relu', 'sigmoid', 'tanh', 'concat', 'pad')

GELU_COEFF = 0.044715
"""Cubic coefficient of the tanh approximation of GELU."""


def _int_pair(value, name):
    if isinstance(value, int):
        return value, value
    value = tuple(int(v) for v in value)
    if len(value) != 2:
        raise ConfigError('{} must be an int or an int pair'.format(name))
    return value


def conv2d(x, weight, bias=None, stride=1, padding=0, groups=1):
    """
    2D cross-correlation with zero padding and channel groups.

    Parameters
    ----------
    x : :class:`Tensor`
        Input of shape ``(N, C_in, H, W)``.
    weight : :class:`Tensor`
        Kernel of shape ``(C_out, C_in // groups, kH, kW)``.
    bias : :class:`Tensor`, optional
        Bias of shape ``(C_out,)``.
    stride, padding : int or int pair
    groups : int, optional
        Number of channel groups. ``groups == C_in == C_out`` gives a
        depth-wise convolution.

    Returns
    -------
    out : :class:`Tensor`
        Shape ``(N, C_out, H', W')`` with
        ``H' = (H + 2 * pad_h - kH) // stride_h + 1`` (``W'`` analogously).
    """
    sh, sw = _int_pair(stride, 'stride')
    ph, pw = _int_pair(padding, 'padding')
    if x.ndim != 4 or weight.ndim != 4:
        raise ConfigError('conv2d: expected 4D input and kernel, got shapes '
                          '{} and {}'.format(x.shape, weight.shape))
    n, c_in, h, w = x.shape
    c_out, c_in_g, kh, kw = weight.shape
    if groups < 1 or c_in % groups or c_out % groups:
        raise ConfigError('conv2d: channels in={}, out={} not divisible by '
                          'groups={}'.format(c_in, c_out, groups))
    if c_in // groups != c_in_g:
        raise ConfigError('conv2d: kernel expects {} input channels per '
                          'group, input provides {} (C_in={}, groups={})'
                          .format(c_in_g, c_in // groups, c_in, groups))
    if bias is not None and bias.shape != (c_out,):
        raise ConfigError('conv2d: bias shape {} does not match C_out={}'
                          .format(bias.shape, c_out))
    if kh > h + 2 * ph or kw > w + 2 * pw:
        raise GeometryError('conv2d: kernel {}x{} exceeds padded input {}x{}'
                            .format(kh, kw, h + 2 * ph, w + 2 * pw))
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    xp = (np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
          if ph or pw else x.data)
    # (n, c_in, ho, wo, kh, kw)
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[
        :, :, ::sh, ::sw][:, :, :ho, :wo]
    cols = cols.reshape(n, groups, c_in_g, ho, wo, kh, kw)
    wg = weight.data.reshape(groups, c_out // groups, c_in_g, kh, kw)
    out = np.einsum('ngchwij,gocij->ngohw', cols, wg, optimize=True)
    out = out.reshape(n, c_out, ho, wo)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gg = g.reshape(n, groups, c_out // groups, ho, wo)
        gx = gw = gb = None
        if x.requires_grad:
            dcols = np.einsum('ngohw,gocij->ngchwij', gg, wg, optimize=True)
            dcols = dcols.reshape(n, c_in, ho, wo, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += \
                        dcols[..., i, j]
            gx = gxp[:, :, ph:ph + h, pw:pw + w]
        if weight.requires_grad:
            gw = np.einsum('ngohw,ngchwij->gocij', gg, cols, optimize=True)
            gw = gw.reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw) if bias is None else (gx, gw, gb)
    return make_result(out, parents, backward, 'conv2d')


def linear(x, weight, bias=None):
    """Affine map ``x @ weight.T + bias`` over the last axis of `x`;
    `weight` has shape ``(out_features, in_features)``."""
    out = x @ weight.T
    if bias is not None:
        out = out + bias
    return out


def softmax(x):
    """Softmax over the last axis, stabilized by subtracting the maximum."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)
    return make_result(out, (x,), backward, 'softmax')


def log_softmax(x):
    """Logarithm of :func:`softmax`, computed by log-sum-exp."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)
    return make_result(out, (x,), backward, 'log_softmax')


def layer_norm(x, gamma, beta, eps):
    """
    Normalize over the last axis to zero mean and unit variance, then scale
    by `gamma` and shift by `beta`.

    Parameters
    ----------
    x : :class:`Tensor`
        Shape ``(..., C)``.
    gamma, beta : :class:`Tensor`
        Shape ``(C,)``.
    eps : float
        Positive constant added to the variance.
    """
    if not eps > 0:
        raise ConfigError('layer_norm: eps must be positive, got {}'
                          .format(eps))
    c = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    rstd = 1. / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * rstd
    out = xhat * gamma.data + beta.data

    def backward(g):
        gxhat = g * gamma.data
        gx = rstd / c * (c * gxhat - gxhat.sum(axis=-1, keepdims=True)
                         - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True))
        ggamma = (g * xhat).reshape(-1, c).sum(axis=0)
        gbeta = g.reshape(-1, c).sum(axis=0)
        return gx, ggamma, gbeta
    return make_result(out, (x, gamma, beta), backward, 'layer_norm')


def gelu(x):
    """
    GELU in the tanh approximation

    ``0.5 * x * (1 + tanh(sqrt(2 / pi) * (x + 0.044715 * x**3)))``.
    """
    k = float(np.sqrt(2. / np.pi))
    xd = x.data
    t = np.tanh(k * (xd + GELU_COEFF * xd ** 3))
    out = 0.5 * xd * (1. + t)

    def backward(g):
        dt = (1. - t * t) * k * (1. + 3. * GELU_COEFF * xd * xd)
        return (g * (0.5 * (1. + t) + 0.5 * xd * dt),)
    return make_result(out.astype(xd.dtype, copy=False), (x,), backward,
                       'gelu')


@lru_cache(maxsize=128)
def _interpolation_matrix(n_in, n_out, align_corners, dtype_name):
    if align_corners:
        src = (np.arange(n_out) * ((n_in - 1) / (n_out - 1)) if n_out > 1
               else np.zeros(1))
    else:
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.maximum(src, 0.)
    i0 = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    lam = src - i0
    matrix = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(matrix, (rows, i0), 1. - lam)
    np.add.at(matrix, (rows, i1), lam)
    matrix = matrix.astype(dtype_name)
    matrix.setflags(write=False)
    return matrix


def bilinear_resize(x, out_h, out_w, align_corners=False):
    """
    Bilinear resize of the two trailing axes of a ``(N, C, H, W)`` tensor.

    The library uses ``align_corners=False`` everywhere: output pixel ``i``
    samples the input at ``(i + 0.5) * in / out - 0.5``, clamped at ``0``,
    with the upper neighbour clamped at the border.
    Resizing to the same size returns the input values unchanged.
    """
    if out_h < 1 or out_w < 1:
        raise GeometryError('bilinear_resize: output size must be positive, '
                            'got {}x{}'.format(out_h, out_w))
    h, w = x.shape[-2:]
    dtype_name = x.data.dtype.name
    mh = _interpolation_matrix(h, out_h, bool(align_corners), dtype_name)
    mw = _interpolation_matrix(w, out_w, bool(align_corners), dtype_name)
    out = np.matmul(np.matmul(mh, x.data), mw.T)

    def backward(g):
        return (np.matmul(mh.T, np.matmul(g, mw)),)
    return make_result(out, (x,), backward, 'bilinear_resize')


def global_avg_pool(x):
    """Mean over the spatial axes of ``(N, C, H, W)``, keeping them as
    extents 1."""
    return x.mean(axis=(2, 3), keepdims=True)


def dropout(x, rate, rng, training=True):
    """
    Zero elements with probability `rate` and rescale the rest by
    ``1 / (1 - rate)``. Identity if not `training` or ``rate == 0``.

    Parameters
    ----------
    rng : :class:`gastwin.tensor.RngState`
        Source of the dropout mask.
    """
    if not training or rate == 0.:
        return x
    if not 0. <= rate < 1.:
        raise ConfigError('dropout rate must be in [0, 1), got {}'
                          .format(rate))
    keep = (rng.random(x.shape) >= rate) / (1. - rate)
    return x * as_tensor(keep, like=x)


def one_hot(index, num_classes, dtype=None):
    """Return a float array of shape ``index.shape + (num_classes,)``."""
    index = np.asarray(index)
    out = np.zeros(index.shape + (num_classes,),
                   dtype=dtype or np.float64)
    np.put_along_axis(out, index[..., None], 1., axis=-1)
    return out

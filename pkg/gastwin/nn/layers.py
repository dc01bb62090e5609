# -*- coding: utf-8 -*-
"""
Basic layers: linear map, convolution, layer normalization and dropout.

Initialization follows the hierarchical transformer convention: truncated
normal weights (std 0.02) for linear layers, ``N(0, 2 / fan_out)`` for
convolutions, ones/zeros for normalization layers, zero biases.
"""
import numpy as np

from gastwin.nn.module import Module, Parameter
from gastwin.tensor import RngState
from gastwin.tensor.functional import (
    conv2d, linear, layer_norm, dropout, _int_pair)


def trunc_normal(rng, shape, std=0.02):
    """Normal samples clipped to two standard deviations."""
    return np.clip(rng.normal(0., std, shape), -2. * std, 2. * std)


class Linear(Module):
    def __init__(self, in_features, out_features, bias=True, rng=None):
        super().__init__()
        rng = rng or RngState()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(trunc_normal(rng, (out_features,
                                                   in_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x):
        return linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding=0, groups=1, bias=True, rng=None):
        super().__init__()
        rng = rng or RngState()
        kh, kw = _int_pair(kernel_size, 'kernel_size')
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = (kh, kw)
        self.stride = _int_pair(stride, 'stride')
        self.padding = _int_pair(padding, 'padding')
        self.groups = groups
        fan_out = kh * kw * out_channels // groups
        self.weight = Parameter(rng.normal(
            0., np.sqrt(2. / fan_out),
            (out_channels, in_channels // groups, kh, kw)))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, stride=self.stride,
                      padding=self.padding, groups=self.groups)


class LayerNorm(Module):
    """Layer normalization over the last axis."""
    def __init__(self, dim, eps=1e-6):
        super().__init__()
        self.eps = eps
        self.weight = Parameter(np.ones(dim), is_norm=True)
        self.bias = Parameter(np.zeros(dim), is_norm=True)

    def forward(self, x):
        return layer_norm(x, self.weight, self.bias, self.eps)


class Dropout(Module):
    """Dropout, active in training mode only."""
    def __init__(self, rate=0., rng=None):
        super().__init__()
        self.rate = rate
        self.rng = rng or RngState()

    def forward(self, x):
        return dropout(x, self.rate, self.rng, training=self.training)

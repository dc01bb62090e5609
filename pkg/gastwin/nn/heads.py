# -*- coding: utf-8 -*-
"""
Prediction heads: the hierarchical LR-ASPP segmentation decoder and the
diet classifier.
"""
import numpy as np

from gastwin.errors import GeometryError
from gastwin.nn.module import Module, ModuleList
from gastwin.nn.layers import Conv2d, Linear, Dropout
from gastwin.tensor import RngState, Tensor, concat
from gastwin.tensor.functional import (
    bilinear_resize, global_avg_pool, sigmoid, relu)

BRANCH_STAGES = {'F1': 1, 'F2': 2, 'F3': 3}


class DecoderIntermediates:
    """
    Intermediate maps of :class:`LRASPPDecoder`.

    Attributes
    ----------
    pool : :class:`Tensor`
        Sigmoid gate ``(N, internal, 1, 1)``.
    aspp : :class:`Tensor`
        Gated F4 path.
    branches : dict
        Branch name (``'F1'`` ...) -> projected branch map.
    out : :class:`Tensor`
        Fused map at the shallowest selected resolution (before the
        classifier convolution).
    """
    def __init__(self, pool, aspp, branches, out):
        self.pool = pool
        self.aspp = aspp
        self.branches = branches
        self.out = out


class LRASPPDecoder(Module):
    """
    Lightweight decoder gating the deepest features with globally pooled
    context and fusing selected shallow branches from deep to shallow.

    ``pool = sigmoid(conv1x1(avgpool(F4)))``, ``aspp = conv1x1(F4) * pool``;
    each selected branch ``F_i`` is projected by a 1x1 convolution; the
    current map is resized to the next (shallower) branch, concatenated with
    it and fused by a 1x1 convolution. A last 1x1 convolution maps to class
    logits, which are bilinearly resized to the input resolution.

    Parameters
    ----------
    cfg : :class:`gastwin.modelconfig.DecoderConfig`
    in_channels : sequence of int
        Channels of F1..F4.
    rng : :class:`RngState`, optional
    """
    def __init__(self, cfg, in_channels, rng=None):
        super().__init__()
        rng = rng or RngState()
        ch = cfg.internal_channels
        self.branch_set = tuple(sorted(cfg.branch_set,
                                       key=BRANCH_STAGES.get))
        self.pool_conv = Conv2d(in_channels[3], ch, 1, rng=rng)
        self.aspp_conv = Conv2d(in_channels[3], ch, 1, rng=rng)
        self.branch_convs = ModuleList(
            Conv2d(in_channels[BRANCH_STAGES[b] - 1], ch, 1, rng=rng)
            for b in self.branch_set)
        self.fuse_convs = ModuleList(
            Conv2d(2 * ch, ch, 1, rng=rng) for _ in self.branch_set)
        self.cls_conv = Conv2d(ch, cfg.num_seg_classes, 1, rng=rng)

    def forward(self, pyramid, return_intermediates=False):
        """
        Parameters
        ----------
        pyramid : :class:`gastwin.nn.encoder.FeaturePyramid`
        return_intermediates : bool, optional
            Whether to also return :class:`DecoderIntermediates`.

        Returns
        -------
        logits : :class:`Tensor`
            ``(N, num_seg_classes, H, W)`` at the input resolution.
        """
        if len(pyramid) < 4:
            raise GeometryError('decoder expects 4 pyramid levels, got {}'
                                .format(len(pyramid)))
        f4 = pyramid[4]
        pool = sigmoid(self.pool_conv(global_avg_pool(f4)))
        aspp = self.aspp_conv(f4) * pool
        x, branches = aspp, {}
        # deepest to shallowest
        for i in reversed(range(len(self.branch_set))):
            name = self.branch_set[i]
            branch = self.branch_convs[i](pyramid[BRANCH_STAGES[name]])
            branches[name] = branch
            x = bilinear_resize(x, *branch.shape[2:])
            x = self.fuse_convs[i](concat([x, branch], axis=1))
        logits = bilinear_resize(self.cls_conv(x), *pyramid.input_size)
        if return_intermediates:
            return logits, DecoderIntermediates(pool, aspp, branches, x)
        return logits


class DietClassifier(Module):
    """
    Scene classifier on one encoder stage: global average pooling, linear
    layer, ReLU, dropout (training only) and output layer.
    """
    def __init__(self, cfg, in_channels, rng=None):
        super().__init__()
        rng = rng or RngState()
        self.source_stage = cfg.source_stage
        self.fc1 = Linear(in_channels[cfg.source_stage - 1], cfg.hidden,
                          rng=rng)
        self.drop = Dropout(cfg.dropout_rate, rng=rng.spawn('cls_drop'))
        self.fc2 = Linear(cfg.hidden, cfg.num_classes, rng=rng)

    def forward(self, pyramid):
        """Return diet logits ``(N, num_classes)``."""
        if len(pyramid) < self.source_stage:
            raise GeometryError('pyramid has no stage {}'.format(
                self.source_stage))
        f = pyramid[self.source_stage]
        x = global_avg_pool(f).reshape(f.shape[0], f.shape[1])
        return self.fc2(self.drop(relu(self.fc1(x))))


def segment(logits):
    """
    Per-pixel class decision.

    Parameters
    ----------
    logits : :class:`Tensor` or :class:`numpy.ndarray`
        ``(N, K, H, W)``.

    Returns
    -------
    mask : :class:`numpy.ndarray`
        ``(N, H, W)`` integer map; ties go to the lower class index.
    """
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return np.argmax(data, axis=1)

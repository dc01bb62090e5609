# -*- coding: utf-8 -*-
"""
The complete segmentation/classification network.
"""
from collections import OrderedDict
import numpy as np

from gastwin.nn.module import Module
from gastwin.nn.encoder import MixTwinEncoder
from gastwin.nn.heads import LRASPPDecoder, DietClassifier, segment
from gastwin.tensor import RngState, Tensor, no_grad
from gastwin.tensor.functional import softmax

PARAMETER_GROUPS = ('backbone', 'head', 'norm')


class GasTwinFormer(Module):
    """
    Mix Twin encoder with LR-ASPP decoder and diet classifier.

    Parameters
    ----------
    cfg : :class:`gastwin.modelconfig.ModelConfig`
        Validated configuration.
    rng : :class:`RngState`, optional
        Initialization randomness. Default: ``RngState(cfg.seed)``.

    Attributes
    ----------
    encoder : :class:`gastwin.nn.encoder.MixTwinEncoder`
    decoder : :class:`gastwin.nn.heads.LRASPPDecoder`
    classifier : :class:`gastwin.nn.heads.DietClassifier`
    """
    def __init__(self, cfg, rng=None):
        super().__init__()
        rng = rng or RngState(cfg.seed)
        self.cfg = cfg
        self.encoder = MixTwinEncoder(cfg, rng=rng.spawn('encoder'))
        channels = [s.out_channels for s in cfg.stages]
        self.decoder = LRASPPDecoder(cfg.decoder, channels,
                                     rng=rng.spawn('decoder'))
        self.classifier = DietClassifier(cfg.classifier, channels,
                                         rng=rng.spawn('classifier'))

    def forward(self, images):
        """
        Parameters
        ----------
        images : :class:`Tensor`
            ``(N, C, H, W)``, extents multiples of 32.

        Returns
        -------
        seg_logits : :class:`Tensor`
            ``(N, num_seg_classes, H, W)``.
        cls_logits : :class:`Tensor`
            ``(N, num_diet_classes)``.
        """
        pyramid = self.encoder(images)
        return self.decoder(pyramid), self.classifier(pyramid)

    def predict(self, images):
        """
        Inference without gradient recording, in evaluation mode.

        Returns
        -------
        mask : :class:`numpy.ndarray`
            ``(N, H, W)`` predicted classes.
        diet_probs : :class:`numpy.ndarray`
            ``(N, num_diet_classes)`` softmax probabilities.
        """
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                images = images if isinstance(images, Tensor) else Tensor(
                    images)
                seg_logits, cls_logits = self.forward(images)
                return segment(seg_logits), softmax(cls_logits).data.copy()
        finally:
            self.train(was_training)


def parameter_groups(model):
    """
    Partition trainable parameters into ``'backbone'`` (encoder), ``'head'``
    (decoder and classifier) and ``'norm'`` (normalization layers anywhere).

    Returns
    -------
    groups : OrderedDict
        Group name -> list of ``(name, parameter)``.
    """
    groups = OrderedDict((g, []) for g in PARAMETER_GROUPS)
    for name, p in model.named_parameters():
        if p.is_norm:
            groups['norm'].append((name, p))
        elif name.startswith(('decoder.', 'classifier.')):
            groups['head'].append((name, p))
        else:
            groups['backbone'].append((name, p))
    return groups


def format_parameter_groups(model):
    """Return a printable audit of :func:`parameter_groups`."""
    lines = []
    for group, params in parameter_groups(model).items():
        count = int(np.sum([p.size for _, p in params]))
        lines.append('{} ({} tensors, {} values)'.format(group, len(params),
                                                         count))
        lines.extend('    ' + name for name, _ in params)
    return '\n'.join(lines)

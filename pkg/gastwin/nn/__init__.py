# -*- coding: utf-8 -*-
"""
Network modules built on :mod:`gastwin.tensor`.
"""
__all__ = ['Module', 'ModuleList', 'Parameter', 'Linear', 'Conv2d',
           'LayerNorm', 'Dropout', 'MixTwinEncoder', 'FeaturePyramid',
           'LRASPPDecoder', 'DietClassifier', 'segment', 'GasTwinFormer',
           'parameter_groups', 'format_parameter_groups']

from gastwin.nn.module import Module, ModuleList, Parameter
from gastwin.nn.layers import Linear, Conv2d, LayerNorm, Dropout
from gastwin.nn.encoder import MixTwinEncoder, FeaturePyramid
from gastwin.nn.heads import LRASPPDecoder, DietClassifier, segment
from gastwin.nn.model import (
    GasTwinFormer, parameter_groups, format_parameter_groups)

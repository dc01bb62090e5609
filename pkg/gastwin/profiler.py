# -*- coding: utf-8 -*-
"""
Analytic parameter and operation counting.

Counting convention
-------------------
* Convolutions and linear layers: one multiply-accumulate (MAC) per kernel
  weight and output element, plus one FLOP per bias addition.
* Attention: query/key/value and output projections as linear layers; the
  score matmul ``Q K^T`` and the probability-value matmul count
  ``T_q * T_k * C`` MACs each; the score scaling 1 FLOP and the softmax
  :data:`SOFTMAX_FLOPS` FLOPs per score element.
* One MAC is two FLOPs.
* Element-wise work is counted in FLOPs only: layer normalization
  (:data:`LAYER_NORM_FLOPS` per element), GELU (:data:`GELU_FLOPS`),
  sigmoid (:data:`SIGMOID_FLOPS`), ReLU, residual additions and gating
  products (1), average pooling (1 per input element) and bilinear
  interpolation (:data:`BILINEAR_FLOPS` per output element).

:attr:`CostReport.macs` is the quantity usually published as "FLOPs" by
convolution-centric counting tools; :attr:`CostReport.flops` is the full
count under the convention above.
"""
import json
from math import ceil
import numpy as np
import pandas as pd

from gastwin.errors import GeometryError
from gastwin.nn.encoder import INPUT_MULTIPLE
from gastwin.nn.heads import BRANCH_STAGES

SOFTMAX_FLOPS = 5
LAYER_NORM_FLOPS = 7
GELU_FLOPS = 8
SIGMOID_FLOPS = 4
BILINEAR_FLOPS = 7

COLUMNS = ['module', 'stage', 'attention', 'kind', 'params', 'macs', 'flops']


def count_params(model):
    """Number of trainable values of `model`."""
    return int(sum(p.size for p in model.parameters()))


def param_table(model):
    """
    Per-tensor parameter breakdown.

    Returns
    -------
    table : :class:`pandas.DataFrame`
        Columns ``'name'``, ``'shape'``, ``'params'``.
    """
    rows = [{'name': name, 'shape': 'x'.join(str(n) for n in p.shape),
             'params': int(p.size)} for name, p in model.named_parameters()]
    return pd.DataFrame(rows, columns=['name', 'shape', 'params'])


class _Counter:
    def __init__(self, batch):
        self.batch = batch
        self.rows = []

    def add(self, module, kind, stage, attention='-', params=0, macs=0,
            extra_flops=0):
        self.rows.append({
            'module': module, 'stage': stage, 'attention': attention,
            'kind': kind, 'params': int(params), 'macs': int(macs),
            'flops': int(2 * macs + extra_flops)})

    def conv(self, module, c_in, c_out, kernel, h_out, w_out, stage,
             attention='-', groups=1):
        weights = c_out * (c_in // groups) * kernel * kernel
        outputs = self.batch * h_out * w_out * c_out
        self.add(module, 'conv', stage, attention, params=weights + c_out,
                 macs=outputs * (c_in // groups) * kernel * kernel,
                 extra_flops=outputs)

    def linear(self, module, tokens, f_in, f_out, stage, attention='-'):
        outputs = self.batch * tokens * f_out
        self.add(module, 'linear', stage, attention,
                 params=f_in * f_out + f_out, macs=outputs * f_in,
                 extra_flops=outputs)

    def layer_norm(self, module, tokens, c, stage, attention='-'):
        self.add(module, 'norm', stage, attention, params=2 * c,
                 extra_flops=LAYER_NORM_FLOPS * self.batch * tokens * c)

    def elementwise(self, module, kind, elements, per_element, stage,
                    attention='-'):
        self.add(module, kind, stage, attention,
                 extra_flops=per_element * self.batch * elements)

    def attention(self, module, t_q, t_k, c, heads, stage, attention,
                  windows=1):
        scores = self.batch * windows * heads * t_q * t_k
        macs = self.batch * windows * t_q * t_k * c
        self.add(module + '.scores', 'attn_score', stage, attention,
                 macs=macs, extra_flops=scores)
        self.add(module + '.softmax', 'softmax', stage, attention,
                 extra_flops=SOFTMAX_FLOPS * scores)
        self.add(module + '.values', 'attn_value', stage, attention,
                 macs=macs)


def _count_encoder(counter, cfg, h, w):
    c_in, geometry = cfg.in_channels, []
    for i, st in enumerate(cfg.stages):
        stage = 'stage{}'.format(i + 1)
        prefix = 'encoder.stages.{}'.format(i)
        c = st.out_channels
        h = (h + 2 * st.patch_pad - st.patch_kernel) // st.patch_stride + 1
        w = (w + 2 * st.patch_pad - st.patch_kernel) // st.patch_stride + 1
        t = h * w
        counter.conv(prefix + '.patch_embed.proj', c_in, c, st.patch_kernel,
                     h, w, stage)
        counter.layer_norm(prefix + '.patch_embed.norm', t, c, stage)
        for b, kind in enumerate(st.pattern):
            blk = '{}.blocks.{}'.format(prefix, b)
            counter.layer_norm(blk + '.attn.norm', t, c, stage, kind)
            if kind == 'E':
                counter.linear(blk + '.attn.q', t, c, c, stage, kind)
                r = st.reduction_ratio
                t_k = t
                if r > 1:
                    hr, wr = ceil(h / r), ceil(w / r)
                    t_k = hr * wr
                    counter.conv(blk + '.attn.sr', c, c, r, hr, wr, stage,
                                 kind)
                    counter.layer_norm(blk + '.attn.sr_norm', t_k, c, stage,
                                       kind)
                counter.linear(blk + '.attn.kv', t_k, c, 2 * c, stage, kind)
                counter.attention(blk + '.attn', t, t_k, c, st.heads, stage,
                                  kind)
            else:
                w1, w2 = st.window
                hp, wp = ceil(h / w1) * w1, ceil(w / w2) * w2
                counter.linear(blk + '.attn.qkv', hp * wp, c, 3 * c, stage,
                               kind)
                counter.attention(blk + '.attn', w1 * w2, w1 * w2, c,
                                  st.heads, stage, kind,
                                  windows=(hp // w1) * (wp // w2))
            counter.linear(blk + '.attn.proj', t, c, c, stage, kind)
            counter.elementwise(blk + '.attn.residual', 'add', t * c, 1,
                                stage, kind)
            hidden = c * st.mlp_expansion
            counter.layer_norm(blk + '.ffn.norm', t, c, stage)
            counter.linear(blk + '.ffn.fc1', t, c, hidden, stage)
            if st.ffn == 'mix':
                counter.conv(blk + '.ffn.dwconv', hidden, hidden, 3, h, w,
                             stage, groups=hidden)
            counter.elementwise(blk + '.ffn.gelu', 'gelu', t * hidden,
                                GELU_FLOPS, stage)
            counter.linear(blk + '.ffn.fc2', t, hidden, c, stage)
            counter.elementwise(blk + '.ffn.residual', 'add', t * c, 1,
                                stage)
        counter.layer_norm(prefix + '.norm', t, c, stage)
        geometry.append((c, h, w))
        c_in = c
    return geometry


def _count_decoder(counter, cfg, geometry, input_size):
    dec = cfg.decoder
    ch = dec.internal_channels
    c4, h4, w4 = geometry[3]
    counter.elementwise('decoder.pool', 'pool', c4 * h4 * w4, 1, 'decoder')
    counter.conv('decoder.pool_conv', c4, ch, 1, 1, 1, 'decoder')
    counter.elementwise('decoder.gate', 'sigmoid', ch, SIGMOID_FLOPS,
                        'decoder')
    counter.conv('decoder.aspp_conv', c4, ch, 1, h4, w4, 'decoder')
    counter.elementwise('decoder.gating', 'mul', ch * h4 * w4, 1, 'decoder')
    branches = sorted(dec.branch_set, key=BRANCH_STAGES.get)
    h, w = h4, w4
    for i in reversed(range(len(branches))):
        c_b, h, w = geometry[BRANCH_STAGES[branches[i]] - 1]
        counter.conv('decoder.branch_convs.{}'.format(i), c_b, ch, 1, h, w,
                     'decoder')
        counter.elementwise('decoder.resize.{}'.format(i), 'interp',
                            ch * h * w, BILINEAR_FLOPS, 'decoder')
        counter.conv('decoder.fuse_convs.{}'.format(i), 2 * ch, ch, 1, h, w,
                     'decoder')
    counter.conv('decoder.cls_conv', ch, dec.num_seg_classes, 1, h, w,
                 'decoder')
    counter.elementwise('decoder.resize.out', 'interp',
                        dec.num_seg_classes * input_size[0] * input_size[1],
                        BILINEAR_FLOPS, 'decoder')


def _count_classifier(counter, cfg, geometry):
    cls = cfg.classifier
    c, h, w = geometry[cls.source_stage - 1]
    counter.elementwise('classifier.pool', 'pool', c * h * w, 1,
                        'classifier')
    counter.linear('classifier.fc1', 1, c, cls.hidden, 'classifier')
    counter.elementwise('classifier.relu', 'relu', cls.hidden, 1,
                        'classifier')
    counter.linear('classifier.fc2', 1, cls.hidden, cls.num_classes,
                   'classifier')


class CostReport:
    """
    Parameter and operation counts of a configuration.

    Attributes
    ----------
    breakdown : :class:`pandas.DataFrame`
        One row per counted operation with columns ``'module'``,
        ``'stage'`` (``'stage1'`` ... ``'stage4'``, ``'decoder'``,
        ``'classifier'``), ``'attention'`` (``'E'``, ``'L'`` or ``'-'``),
        ``'kind'``, ``'params'``, ``'macs'`` and ``'flops'``.
    input_size : (int, int)
    batch : int
    """
    def __init__(self, breakdown, input_size, batch=1):
        self.breakdown = breakdown
        self.input_size = tuple(input_size)
        self.batch = batch

    @property
    def params(self):
        return int(self.breakdown['params'].sum())

    @property
    def macs(self):
        return int(self.breakdown['macs'].sum())

    @property
    def flops(self):
        return int(self.breakdown['flops'].sum())

    @property
    def mparams(self):
        return self.params / 1e6

    @property
    def gmacs(self):
        return self.macs / 1e9

    @property
    def gflops(self):
        return self.flops / 1e9

    def total(self, column='flops', **filters):
        """Sum of `column` over the rows matching all `filters` (column ->
        value)."""
        rows = self.breakdown
        for key, value in filters.items():
            rows = rows[rows[key] == value]
        return int(rows[column].sum())

    def by_stage(self):
        """Totals per stage (encoder stages, decoder, classifier)."""
        return self.breakdown.groupby('stage', sort=False)[
            ['params', 'macs', 'flops']].sum()

    def by_attention(self):
        """Totals of the attention blocks per attention type."""
        rows = self.breakdown[self.breakdown['attention'] != '-']
        return rows.groupby('attention')[['params', 'macs', 'flops']].sum()

    def summary(self):
        return {'input': '{}x{}'.format(*self.input_size),
                'batch': self.batch,
                'params': self.params, 'macs': self.macs,
                'flops': self.flops,
                'params_m': round(self.mparams, 4),
                'gmacs': round(self.gmacs, 4),
                'gflops': round(self.gflops, 4)}

    def to_dict(self):
        by_stage = self.by_stage()
        return dict(self.summary(), stages={
            stage: {k: int(v) for k, v in row.items()}
            for stage, row in by_stage.iterrows()})

    def to_json(self, indent=1):
        return json.dumps(self.to_dict(), indent=indent)

    def to_table(self):
        """Aligned text table: totals and per-stage breakdown."""
        lines = ['input {}  params {:,} ({:.3f} M)  MACs {:,} ({:.3f} G)  '
                 'FLOPs {:,} ({:.3f} G)'.format(
                     '{}x{}'.format(*self.input_size), self.params,
                     self.mparams, self.macs, self.gmacs, self.flops,
                     self.gflops),
                 'published "FLOPs (G)" values count multiply-accumulates: '
                 'compare them with the MACs column', '']
        table = self.by_stage()
        table.loc['total'] = table.sum()
        table.columns = ['params', 'MACs', 'FLOPs']
        lines.append(table.to_string())
        return '\n'.join(lines)

    def __str__(self):
        return self.to_table()


def count_flops(cfg, input_h=None, input_w=None, batch=1):
    """
    Count parameters, MACs and FLOPs of a configuration analytically.

    Parameters
    ----------
    cfg : :class:`gastwin.modelconfig.ModelConfig`
    input_h, input_w : int, optional
        Input extents, multiples of 32. Default: ``cfg.input_size``.
    batch : int, optional
        Batch size.

    Returns
    -------
    report : :class:`CostReport`
    """
    if input_h is None:
        input_h = cfg.input_size[0]
    if input_w is None:
        input_w = cfg.input_size[1]
    if input_h % INPUT_MULTIPLE or input_w % INPUT_MULTIPLE or \
            min(input_h, input_w) < INPUT_MULTIPLE:
        raise GeometryError('input extents {}x{} must be positive multiples '
                            'of {}'.format(input_h, input_w, INPUT_MULTIPLE))
    counter = _Counter(batch)
    geometry = _count_encoder(counter, cfg, input_h, input_w)
    _count_decoder(counter, cfg, geometry, (input_h, input_w))
    _count_classifier(counter, cfg, geometry)
    breakdown = pd.DataFrame(counter.rows, columns=COLUMNS)
    return CostReport(breakdown, (input_h, input_w), batch=batch)


def count_params_from_config(cfg):
    """Parameter count of a configuration, without building the model."""
    return count_flops(cfg, INPUT_MULTIPLE, INPUT_MULTIPLE).params


def relative_deviation(value, reference):
    """``(value - reference) / reference``."""
    return (np.float64(value) - reference) / reference

# -*- coding: utf-8 -*-
"""
Model and experiment configuration.

A :class:`ModelConfig` describes the architecture, the losses, the optimizer
schedule and the input pipeline of one experiment. It is read from a line
oriented text format::

    # comment
    model.pattern = EL,EL,EL,EL
    model.window = 5x5
    decoder.branches = F1,F2,F3
    optim.total_iters = 2000

Grammar: one ``section.key = value`` assignment per line, sections
``model``, ``decoder``, ``classifier``, ``loss``, ``optim`` and ``data``;
``#`` starts a comment; blank lines are ignored; a key may only be assigned
once. Value types:

* ``int``, ``real``, ``string``
* ``int-pair``: ``5x5``, ``5,5`` or, where noted, a single int ``5``
* ``int-list``, ``real-list``, ``real-pair``, ``string-list``: comma separated

Unspecified keys take the defaults listed in :data:`KEYS`; the architecture
defaults are those of the published model (EL pattern in all four stages,
channels 32/64/160/256, reduction ratios 8/4/2/1, 5x5 windows, decoder with
128 channels fed by F1, F2 and F3, classifier on stage 4, Gaussian plume
loss). The optimizer defaults use the published values except for the
schedule lengths, which are shortened for desk-scale runs.
"""
from collections import OrderedDict, namedtuple
from dataclasses import dataclass, field
import os

from gastwin.errors import ConfigError

SECTIONS = ('model', 'decoder', 'classifier', 'loss', 'optim', 'data')

NUM_STAGES = 4

PATCH_GEOMETRY = ((7, 4, 3), (3, 2, 1), (3, 2, 1), (3, 2, 1))
"""(kernel, stride, padding) of the overlapped patch embedding per stage."""

SEG_LOSSES = ('cross_entropy', 'dice', 'focal', 'gaussian_plume')

FFN_TYPES = ('mix', 'plain')

BRANCHES = ('F1', 'F2', 'F3')


@dataclass
class StageConfig:
    """
    Configuration of one encoder stage.

    Attributes
    ----------
    out_channels : int
        Token width of the stage.
    pattern : str
        Attention block sequence over ``{'E', 'L'}``; ``'E'`` selects
        efficient (spatially reduced) attention, ``'L'`` locally grouped
        attention. Each block is followed by a feed-forward network.
    heads : int
        Number of attention heads, must divide `out_channels`.
    reduction_ratio : int
        Key/value reduction ratio of the efficient attention.
    window : (int, int)
        Window extents ``(w1, w2)`` (height, width) of the locally grouped
        attention.
    mlp_expansion : int
        Hidden width factor of the feed-forward network.
    patch_kernel, patch_stride, patch_pad : int
        Geometry of the overlapped patch embedding.
    ffn : str
        ``'mix'`` (with 3x3 depth-wise convolution) or ``'plain'``.
    dropout : float
        Dropout rate for attention probabilities and feed-forward outputs.
    norm_eps : float
        Layer normalization epsilon.
    """
    out_channels: int
    pattern: str
    heads: int
    reduction_ratio: int
    window: tuple = (5, 5)
    mlp_expansion: int = 4
    patch_kernel: int = 3
    patch_stride: int = 2
    patch_pad: int = 1
    ffn: str = 'mix'
    dropout: float = 0.
    norm_eps: float = 1e-6

    def validate(self):
        if self.out_channels < 1:
            raise _Violation('model.channels', 'channels must be >= 1')
        if self.heads < 1 or self.out_channels % self.heads:
            raise _Violation('model.heads', 'out_channels ({}) must be '
                             'divisible by heads ({})'.format(
                                 self.out_channels, self.heads))
        if not self.pattern or set(self.pattern) - set('EL'):
            raise _Violation('model.pattern', "pattern '{}' must be a "
                             "non-empty string over {{E, L}}".format(
                                 self.pattern))
        if self.reduction_ratio < 1:
            raise _Violation('model.reduction',
                             'reduction ratio must be >= 1')
        if min(self.window) < 1:
            raise _Violation('model.window', 'window extents must be >= 1')
        if self.mlp_expansion < 1:
            raise _Violation('model.mlp_expansion',
                             'mlp expansion must be >= 1')
        if self.ffn not in FFN_TYPES:
            raise _Violation('model.ffn', "ffn must be one of {}".format(
                FFN_TYPES))
        if not 0. <= self.dropout < 1.:
            raise _Violation('model.dropout', 'dropout must be in [0, 1)')
        if not self.norm_eps > 0.:
            raise _Violation('model.norm_eps', 'norm_eps must be > 0')


@dataclass
class DecoderConfig:
    """
    Attributes
    ----------
    internal_channels : int
        Width of the decoder feature maps.
    branch_set : tuple of str
        Selected shallow branches, a subset of ``('F1', 'F2', 'F3')`` in
        stage order. May be empty (gated F4 path only).
    num_seg_classes : int
        Number of segmentation classes (background, methane).
    """
    internal_channels: int = 128
    branch_set: tuple = BRANCHES
    num_seg_classes: int = 2

    def validate(self):
        if self.internal_channels < 1:
            raise _Violation('decoder.channels',
                             'decoder channels must be >= 1, got {}'.format(
                                 self.internal_channels))
        unknown = set(self.branch_set) - set(BRANCHES)
        if unknown or len(set(self.branch_set)) != len(self.branch_set):
            raise _Violation('decoder.branches', 'branches must be distinct '
                             'entries of {}'.format(BRANCHES))
        if self.num_seg_classes < 2:
            raise _Violation('decoder.num_classes',
                             'num_classes must be >= 2')


@dataclass
class ClassifierConfig:
    """
    Attributes
    ----------
    source_stage : int
        Encoder stage (2, 3 or 4) whose features are pooled.
    hidden : int
        Hidden width of the two-layer classifier.
    dropout_rate : float
        Dropout between the two layers (training mode only).
    num_classes : int
        Number of diet classes.
    """
    source_stage: int = 4
    hidden: int = 256
    dropout_rate: float = 0.1
    num_classes: int = 3

    def validate(self):
        if self.source_stage not in (2, 3, 4):
            raise _Violation('classifier.source_stage',
                             'source stage must be one of 2, 3, 4')
        if self.hidden < 1:
            raise _Violation('classifier.hidden', 'hidden must be >= 1')
        if not 0. <= self.dropout_rate < 1.:
            raise _Violation('classifier.dropout', 'dropout must be in [0, 1)')
        if self.num_classes < 2:
            raise _Violation('classifier.num_classes',
                             'num_classes must be >= 2')


@dataclass
class LossConfig:
    """
    Attributes
    ----------
    seg_loss : str
        One of ``'cross_entropy'``, ``'dice'``, ``'focal'``,
        ``'gaussian_plume'``.
    focal_gamma, focal_alpha : float
        Focal loss parameters.
    dice_eps : float
        Smoothing constant of the Dice losses.
    task_weights : (float, float)
        ``(lambda_seg, lambda_cls)``.
    """
    seg_loss: str = 'gaussian_plume'
    focal_gamma: float = 2.
    focal_alpha: float = 0.25
    dice_eps: float = 1e-6
    task_weights: tuple = (1., 1.)

    def validate(self):
        if self.seg_loss not in SEG_LOSSES:
            raise _Violation('loss.seg', 'seg loss must be one of {}'.format(
                SEG_LOSSES))
        if self.focal_gamma < 0.:
            raise _Violation('loss.focal_gamma', 'focal gamma must be >= 0')
        if not self.focal_alpha > 0.:
            raise _Violation('loss.focal_alpha', 'focal alpha must be > 0')
        if not self.dice_eps > 0.:
            raise _Violation('loss.dice_eps', 'dice eps must be > 0')
        if self.task_weights[0] < 0.:
            raise _Violation('loss.seg_weight', 'seg weight must be >= 0')
        if self.task_weights[1] < 0.:
            raise _Violation('loss.cls_weight', 'cls weight must be >= 0')


@dataclass
class OptimConfig:
    """
    AdamW and learning rate schedule settings, plus the training schedule
    (batch size, validation interval, number of retained checkpoints).
    """
    base_lr: float = 6e-5
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    warmup_start_lr: float = 1e-6
    warmup_iters: int = 150
    total_iters: int = 2000
    poly_power: float = 1.
    head_lr_multiplier: float = 10.
    norm_weight_decay: float = 0.
    batch_size: int = 8
    val_every: int = 200
    keep_top_k: int = 3

    def validate(self):
        if not self.base_lr > 0.:
            raise _Violation('optim.lr', 'base lr must be > 0')
        if not all(0. <= b < 1. for b in self.betas):
            raise _Violation('optim.betas', 'betas must be in [0, 1)')
        if not self.eps > 0.:
            raise _Violation('optim.eps', 'eps must be > 0')
        if self.weight_decay < 0.:
            raise _Violation('optim.weight_decay',
                             'weight decay must be >= 0')
        if self.warmup_start_lr < 0.:
            raise _Violation('optim.warmup_start_lr',
                             'warmup start lr must be >= 0')
        if not 0 < self.warmup_iters < self.total_iters:
            raise _Violation('optim.warmup_iters',
                             '0 < warmup_iters < total_iters must hold ({} vs.'
                             ' {})'.format(self.warmup_iters,
                                           self.total_iters))
        if not self.poly_power > 0.:
            raise _Violation('optim.poly_power', 'poly power must be > 0')
        if not self.head_lr_multiplier > 0.:
            raise _Violation('optim.head_lr_mult',
                             'head lr multiplier must be > 0')
        if self.norm_weight_decay < 0.:
            raise _Violation('optim.norm_weight_decay',
                             'norm weight decay must be >= 0')
        if self.batch_size < 1:
            raise _Violation('optim.batch_size', 'batch size must be >= 1')
        if self.val_every < 1:
            raise _Violation('optim.val_every', 'val_every must be >= 1')
        if self.keep_top_k < 1:
            raise _Violation('optim.keep_top_k', 'keep_top_k must be >= 1')


@dataclass
class DataConfig:
    """
    Attributes
    ----------
    input_size : (int, int)
        Network input ``(height, width)``, multiples of 32.
    seed : int
        Run seed (initialization, shuffling, augmentation, dropout).
    augment : bool
        Whether training samples are augmented.
    flip_prob : float
        Horizontal flip probability.
    brightness : float
        Maximum absolute additive brightness shift.
    contrast : (float, float)
        Range of the contrast factor.
    """
    input_size: tuple = (512, 512)
    seed: int = 0
    augment: bool = True
    flip_prob: float = 0.5
    brightness: float = 0.125
    contrast: tuple = (0.5, 1.5)

    def validate(self):
        if any(n < 32 or n % 32 for n in self.input_size):
            raise _Violation('data.input', 'input extents {} must be positive '
                             'multiples of 32'.format(self.input_size))
        if not 0 <= self.seed < 2**64:
            raise _Violation('data.seed', 'seed must be an unsigned 64 bit '
                             'integer')
        if not 0. <= self.flip_prob <= 1.:
            raise _Violation('data.flip_prob', 'flip_prob must be in [0, 1]')
        if self.brightness < 0.:
            raise _Violation('data.brightness', 'brightness must be >= 0')
        if not 0. < self.contrast[0] <= self.contrast[1]:
            raise _Violation('data.contrast',
                             'contrast range must satisfy 0 < low <= high')


def default_stages():
    channels = (32, 64, 160, 256)
    heads = (1, 2, 5, 8)
    reduction = (8, 4, 2, 1)
    return [StageConfig(out_channels=c, pattern='EL', heads=h,
                        reduction_ratio=r, patch_kernel=k, patch_stride=s,
                        patch_pad=p)
            for c, h, r, (k, s, p) in zip(channels, heads, reduction,
                                          PATCH_GEOMETRY)]


@dataclass
class ModelConfig:
    """
    Complete experiment description.

    Every ablation axis (attention pattern, window, feed-forward type,
    decoder width and branches, classifier source stage, segmentation loss)
    is a field of this object, see :mod:`gastwin.ablation`.
    """
    stages: list = field(default_factory=default_stages)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    data: DataConfig = field(default_factory=DataConfig)
    in_channels: int = 3

    @property
    def input_size(self):
        return self.data.input_size

    @property
    def seed(self):
        return self.data.seed

    def validate(self):
        """Raise :class:`gastwin.errors.ConfigError` if an invariant is
        violated."""
        try:
            self._validate()
        except _Violation as v:
            raise ConfigError('{}: {}'.format(v.key, v.message)) from None
        return self

    def _validate(self):
        if len(self.stages) != NUM_STAGES:
            raise _Violation('model.channels', 'exactly {} stages required, '
                             'got {}'.format(NUM_STAGES, len(self.stages)))
        if self.in_channels < 1:
            raise _Violation('model.in_channels', 'in_channels must be >= 1')
        for stage in self.stages:
            stage.validate()
        for part in (self.decoder, self.classifier, self.loss, self.optim,
                     self.data):
            part.validate()


class _Violation(Exception):
    def __init__(self, key, message):
        super().__init__(key, message)
        self.key = key
        self.message = message


# key tables ----------------------------------------------------------------

KeySpec = namedtuple('KeySpec', ['key', 'kind', 'default', 'description'])

KEYS = OrderedDict((spec.key, spec) for spec in [
    KeySpec('model.channels', 'int-list', (32, 64, 160, 256),
            'token width per stage'),
    KeySpec('model.heads', 'int-list', (1, 2, 5, 8),
            'attention heads per stage'),
    KeySpec('model.reduction', 'int-list', (8, 4, 2, 1),
            'efficient attention reduction ratio per stage'),
    KeySpec('model.pattern', 'string-list', ('EL', 'EL', 'EL', 'EL'),
            'attention pattern per stage (one entry applies to all)'),
    KeySpec('model.window', 'int-pair', (5, 5),
            'locally grouped attention window (w1 x w2)'),
    KeySpec('model.mlp_expansion', 'int', 4, 'feed-forward expansion'),
    KeySpec('model.ffn', 'string', 'mix', 'feed-forward type: mix | plain'),
    KeySpec('model.dropout', 'real', 0., 'encoder dropout rate'),
    KeySpec('model.norm_eps', 'real', 1e-6, 'layer norm epsilon'),
    KeySpec('model.in_channels', 'int', 3, 'image channels'),
    KeySpec('decoder.channels', 'int', 128, 'decoder internal channels'),
    KeySpec('decoder.branches', 'string-list', BRANCHES,
            'fused shallow branches, or none'),
    KeySpec('decoder.num_classes', 'int', 2, 'segmentation classes'),
    KeySpec('classifier.source_stage', 'int', 4, 'pooled encoder stage'),
    KeySpec('classifier.hidden', 'int', 256, 'hidden width'),
    KeySpec('classifier.dropout', 'real', 0.1, 'dropout rate'),
    KeySpec('classifier.num_classes', 'int', 3, 'diet classes'),
    KeySpec('loss.seg', 'string', 'gaussian_plume',
            'cross_entropy | dice | focal | gaussian_plume'),
    KeySpec('loss.focal_gamma', 'real', 2., 'focal loss gamma'),
    KeySpec('loss.focal_alpha', 'real', 0.25, 'focal loss alpha'),
    KeySpec('loss.dice_eps', 'real', 1e-6, 'dice smoothing epsilon'),
    KeySpec('loss.seg_weight', 'real', 1., 'segmentation task weight'),
    KeySpec('loss.cls_weight', 'real', 1., 'classification task weight'),
    KeySpec('optim.lr', 'real', 6e-5, 'base learning rate'),
    KeySpec('optim.betas', 'real-pair', (0.9, 0.999), 'AdamW betas'),
    KeySpec('optim.eps', 'real', 1e-8, 'AdamW epsilon'),
    KeySpec('optim.weight_decay', 'real', 0.01, 'decoupled weight decay'),
    KeySpec('optim.warmup_start_lr', 'real', 1e-6, 'initial warmup lr'),
    KeySpec('optim.warmup_iters', 'int', 150, 'warmup iterations'),
    KeySpec('optim.total_iters', 'int', 2000, 'training iterations'),
    KeySpec('optim.poly_power', 'real', 1., 'polynomial decay power'),
    KeySpec('optim.head_lr_mult', 'real', 10., 'head lr multiplier'),
    KeySpec('optim.norm_weight_decay', 'real', 0.,
            'weight decay of normalization parameters'),
    KeySpec('optim.batch_size', 'int', 8, 'batch size'),
    KeySpec('optim.val_every', 'int', 200, 'validation interval'),
    KeySpec('optim.keep_top_k', 'int', 3, 'retained checkpoints'),
    KeySpec('data.input', 'int-pair', (512, 512), 'network input size HxW'),
    KeySpec('data.seed', 'int', 0, 'run seed'),
    KeySpec('data.augment', 'string', 'on', 'training augmentation: on | off'),
    KeySpec('data.flip_prob', 'real', 0.5, 'horizontal flip probability'),
    KeySpec('data.brightness', 'real', 0.125, 'max brightness shift'),
    KeySpec('data.contrast', 'real-pair', (0.5, 1.5), 'contrast range'),
])


def _parse_int(text):
    try:
        return int(text)
    except ValueError:
        raise ValueError("expected int, got '{}'".format(text)) from None


def _parse_real(text):
    try:
        return float(text)
    except ValueError:
        raise ValueError("expected real, got '{}'".format(text)) from None


def _split_list(text):
    items = [t.strip() for t in text.split(',')]
    if any(not t for t in items):
        raise ValueError("empty list entry in '{}'".format(text))
    return items


def _parse_int_pair(text):
    parts = [t.strip() for t in text.lower().replace('x', ',').split(',')]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ValueError("expected int pair like 5x5, got '{}'".format(text))
    return tuple(_parse_int(p) for p in parts)


def _parse_real_pair(text):
    parts = _split_list(text)
    if len(parts) != 2:
        raise ValueError("expected real pair like 0.9,0.999, got '{}'"
                         .format(text))
    return tuple(_parse_real(p) for p in parts)


PARSERS = {
    'int': _parse_int,
    'real': _parse_real,
    'string': str,
    'int-pair': _parse_int_pair,
    'real-pair': _parse_real_pair,
    'int-list': lambda t: tuple(_parse_int(p) for p in _split_list(t)),
    'real-list': lambda t: tuple(_parse_real(p) for p in _split_list(t)),
    'string-list': lambda t: tuple(_split_list(t)),
}


def format_value(kind, value):
    """Format `value` of type `kind` in config syntax."""
    if kind == 'real':
        return repr(float(value))
    if kind == 'int-pair':
        return '{}x{}'.format(*value)
    if kind in ('real-pair', 'real-list'):
        return ','.join(repr(float(v)) for v in value)
    if kind in ('int-list', 'string-list'):
        return ','.join(str(v) for v in value)
    return str(value)


def read_assignments(text, keys, sections):
    """
    Parse config text into typed values.

    Parameters
    ----------
    text : str
        Config text.
    keys : dict
        Mapping of key to :class:`KeySpec`.
    sections : sequence of str
        Allowed sections.

    Returns
    -------
    values : OrderedDict
        Key -> parsed value, for the assigned keys.
    lines : dict
        Key -> line number of the assignment.
    """
    values, lines = OrderedDict(), {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError("line {}: expected 'section.key = value', got "
                              "'{}'".format(lineno, raw.strip()))
        key, value = (s.strip() for s in line.split('=', 1))
        section = key.split('.', 1)[0]
        if section not in sections:
            raise ConfigError("line {}: unknown section '{}' (expected one of "
                              "{})".format(lineno, section,
                                           ', '.join(sections)))
        if key not in keys:
            raise ConfigError("line {}: unknown key '{}'".format(lineno, key))
        if key in values:
            raise ConfigError("line {}: key '{}' already assigned in line {}"
                              .format(lineno, key, lines[key]))
        if not value:
            raise ConfigError("line {}: missing value for '{}'".format(
                lineno, key))
        try:
            values[key] = PARSERS[keys[key].kind](value)
        except ValueError as e:
            raise ConfigError('line {}: {}: {} ({})'.format(
                lineno, key, e, keys[key].kind)) from None
        lines[key] = lineno
    return values, lines


def _per_stage(values, key):
    value = tuple(values[key])
    if len(value) == 1:
        value = value * NUM_STAGES
    if len(value) != NUM_STAGES:
        raise _Violation(key, 'exactly {} stage entries required, got {}'
                         .format(NUM_STAGES, len(value)))
    return value


def build_config(values):
    """
    Build a :class:`ModelConfig` from a (partial) key -> value mapping.
    Missing keys take their defaults. Invariants are not checked here,
    see :meth:`ModelConfig.validate`.
    """
    v = OrderedDict((k, spec.default) for k, spec in KEYS.items())
    v.update(values)
    channels = _per_stage(v, 'model.channels')
    heads = _per_stage(v, 'model.heads')
    reduction = _per_stage(v, 'model.reduction')
    patterns = _per_stage(v, 'model.pattern')
    stages = [
        StageConfig(out_channels=c, pattern=pat.upper(), heads=h,
                    reduction_ratio=r, window=tuple(v['model.window']),
                    mlp_expansion=v['model.mlp_expansion'],
                    patch_kernel=k, patch_stride=s, patch_pad=p,
                    ffn=v['model.ffn'], dropout=v['model.dropout'],
                    norm_eps=v['model.norm_eps'])
        for c, h, r, pat, (k, s, p) in zip(channels, heads, reduction,
                                           patterns, PATCH_GEOMETRY)]
    branches = tuple(v['decoder.branches'])
    if tuple(b.lower() for b in branches) == ('none',):
        branches = ()
    branches = tuple(sorted((b.upper() for b in branches)))
    augment = str(v['data.augment']).lower()
    if augment not in ('on', 'off'):
        raise _Violation('data.augment', 'augment must be on or off')
    return ModelConfig(
        stages=stages,
        decoder=DecoderConfig(internal_channels=v['decoder.channels'],
                              branch_set=branches,
                              num_seg_classes=v['decoder.num_classes']),
        classifier=ClassifierConfig(
            source_stage=v['classifier.source_stage'],
            hidden=v['classifier.hidden'],
            dropout_rate=v['classifier.dropout'],
            num_classes=v['classifier.num_classes']),
        loss=LossConfig(seg_loss=v['loss.seg'],
                        focal_gamma=v['loss.focal_gamma'],
                        focal_alpha=v['loss.focal_alpha'],
                        dice_eps=v['loss.dice_eps'],
                        task_weights=(v['loss.seg_weight'],
                                      v['loss.cls_weight'])),
        optim=OptimConfig(base_lr=v['optim.lr'], betas=tuple(v['optim.betas']),
                          eps=v['optim.eps'],
                          weight_decay=v['optim.weight_decay'],
                          warmup_start_lr=v['optim.warmup_start_lr'],
                          warmup_iters=v['optim.warmup_iters'],
                          total_iters=v['optim.total_iters'],
                          poly_power=v['optim.poly_power'],
                          head_lr_multiplier=v['optim.head_lr_mult'],
                          norm_weight_decay=v['optim.norm_weight_decay'],
                          batch_size=v['optim.batch_size'],
                          val_every=v['optim.val_every'],
                          keep_top_k=v['optim.keep_top_k']),
        data=DataConfig(input_size=tuple(v['data.input']),
                        seed=v['data.seed'], augment=augment == 'on',
                        flip_prob=v['data.flip_prob'],
                        brightness=v['data.brightness'],
                        contrast=tuple(v['data.contrast'])),
        in_channels=v['model.in_channels'])


def config_values(cfg):
    """Return the key -> value mapping of `cfg` (inverse of
    :func:`build_config`)."""
    first = cfg.stages[0]
    for stage in cfg.stages[1:]:
        for attr in ('window', 'mlp_expansion', 'ffn', 'dropout',
                     'norm_eps'):
            if getattr(stage, attr) != getattr(first, attr):
                raise ConfigError('{} differs between stages and cannot be '
                                  'serialized'.format(attr))
    return OrderedDict([
        ('model.channels', tuple(s.out_channels for s in cfg.stages)),
        ('model.heads', tuple(s.heads for s in cfg.stages)),
        ('model.reduction', tuple(s.reduction_ratio for s in cfg.stages)),
        ('model.pattern', tuple(s.pattern for s in cfg.stages)),
        ('model.window', tuple(first.window)),
        ('model.mlp_expansion', first.mlp_expansion),
        ('model.ffn', first.ffn),
        ('model.dropout', first.dropout),
        ('model.norm_eps', first.norm_eps),
        ('model.in_channels', cfg.in_channels),
        ('decoder.channels', cfg.decoder.internal_channels),
        ('decoder.branches', tuple(cfg.decoder.branch_set) or ('none',)),
        ('decoder.num_classes', cfg.decoder.num_seg_classes),
        ('classifier.source_stage', cfg.classifier.source_stage),
        ('classifier.hidden', cfg.classifier.hidden),
        ('classifier.dropout', cfg.classifier.dropout_rate),
        ('classifier.num_classes', cfg.classifier.num_classes),
        ('loss.seg', cfg.loss.seg_loss),
        ('loss.focal_gamma', cfg.loss.focal_gamma),
        ('loss.focal_alpha', cfg.loss.focal_alpha),
        ('loss.dice_eps', cfg.loss.dice_eps),
        ('loss.seg_weight', cfg.loss.task_weights[0]),
        ('loss.cls_weight', cfg.loss.task_weights[1]),
        ('optim.lr', cfg.optim.base_lr),
        ('optim.betas', tuple(cfg.optim.betas)),
        ('optim.eps', cfg.optim.eps),
        ('optim.weight_decay', cfg.optim.weight_decay),
        ('optim.warmup_start_lr', cfg.optim.warmup_start_lr),
        ('optim.warmup_iters', cfg.optim.warmup_iters),
        ('optim.total_iters', cfg.optim.total_iters),
        ('optim.poly_power', cfg.optim.poly_power),
        ('optim.head_lr_mult', cfg.optim.head_lr_multiplier),
        ('optim.norm_weight_decay', cfg.optim.norm_weight_decay),
        ('optim.batch_size', cfg.optim.batch_size),
        ('optim.val_every', cfg.optim.val_every),
        ('optim.keep_top_k', cfg.optim.keep_top_k),
        ('data.input', tuple(cfg.data.input_size)),
        ('data.seed', cfg.data.seed),
        ('data.augment', 'on' if cfg.data.augment else 'off'),
        ('data.flip_prob', cfg.data.flip_prob),
        ('data.brightness', cfg.data.brightness),
        ('data.contrast', tuple(cfg.data.contrast)),
    ])


def _build_validated(values, lines):
    try:
        cfg = build_config(values)
        cfg._validate()
    except _Violation as v:
        where = ('line {}: '.format(lines[v.key]) if v.key in lines
                 else '')
        raise ConfigError('{}{}: {}'.format(where, v.key, v.message)) \
            from None
    return cfg


def parse_config(text):
    """
    Parse and validate config text.

    Parameters
    ----------
    text : str
        Config text, see the module docstring for the grammar.

    Returns
    -------
    cfg : :class:`ModelConfig`
        Validated configuration.

    Raises
    ------
    gastwin.errors.ConfigError
        On unknown keys, type mismatches and invariant violations; the
        message names the line, the key and the violated constraint.
    """
    values, lines = read_assignments(text, KEYS, SECTIONS)
    return _build_validated(values, lines)


def apply_overrides(cfg, text):
    """Return a copy of `cfg` with the assignments in `text` applied."""
    values = config_values(cfg)
    overrides, lines = read_assignments(text, KEYS, SECTIONS)
    values.update(overrides)
    return _build_validated(values, lines)


def serialize_config(cfg):
    """Return config text that :func:`parse_config` maps back to `cfg`."""
    values = config_values(cfg)
    out, section = [], None
    for key, value in values.items():
        if key.split('.', 1)[0] != section:
            if section is not None:
                out.append('')
            section = key.split('.', 1)[0]
        out.append('{} = {}'.format(key, format_value(KEYS[key].kind,
                                                      value)))
    return '\n'.join(out) + '\n'


def load_config(path):
    """Parse the config file at `path`."""
    with open(path, 'r') as f:
        text = f.read()
    try:
        return parse_config(text)
    except ConfigError as e:
        raise ConfigError('{}: {}'.format(os.path.basename(path), e)) \
            from None

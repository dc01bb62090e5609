# -*- coding: utf-8 -*-
"""
Synthetic gas plume scenes.

Each frame is a smooth light background (a linear gradient in a random
direction) with additive noise and a number of dark axis-aligned Gaussian
blobs (black-hot rendering: gas appears dark). The ground-truth mask marks
the pixels where any blob exceeds :data:`MASK_LEVEL` of its amplitude,
i.e. the super-level set ``exp(-q / 2) > MASK_LEVEL`` with
``q = ((x - c_x) / s_x)**2 + ((y - c_y) / s_y)**2``.

The number, spread and amplitude of the blobs depend on the diet class, so
the diet is recoverable from the imagery. Diet labels are assigned in exact
proportion to the configured class mix per split, frames are split in
index order (temporal split) into train/val/test.

Every frame is a function of the seed and its basename only:
``RngState(seed).spawn(basename)`` drives its rendering.

Config files use the grammar of :mod:`gastwin.modelconfig` with the section
``synth``::

    synth.size = 64x64
    synth.frames = 1000
    synth.hg_plumes = 1
    synth.hg_sigma = 0.04,0.06
"""
from collections import OrderedDict
from dataclasses import dataclass
import os
from warnings import warn
import numpy as np
import pandas as pd
from skimage.io import imsave
from tqdm import tqdm

from gastwin.data import DIET_CLASSES, Sample
from gastwin.datasets.dataset import InMemoryDataset, PARTS
from gastwin.datasets.folder import LABELS_FILENAME
from gastwin.errors import ConfigError
from gastwin.modelconfig import KeySpec, read_assignments
from gastwin.tensor import RngState

MASK_LEVEL = 0.2
"""Fraction of a blob's amplitude above which its pixels are foreground."""

FRAME_NAME = 'frame_{:05d}'


@dataclass
class PlumeStats:
    """
    Blob statistics of one diet class.

    Attributes
    ----------
    plumes : (int, int)
        Inclusive range of the number of blobs per frame.
    sigma : (float, float)
        Range of the blob spread per axis, as fraction of the smaller image
        extent.
    amplitude : (float, float)
        Range of the blob darkness, in ``(0, 1]``.
    """
    plumes: tuple
    sigma: tuple
    amplitude: tuple


def default_class_stats():
    # HF: more and larger plumes, HG: fewer and smaller
    return OrderedDict([
        ('HF', PlumeStats((2, 3), (0.08, 0.12), (0.55, 0.7))),
        ('MD', PlumeStats((1, 2), (0.06, 0.09), (0.4, 0.55))),
        ('HG', PlumeStats((1, 1), (0.04, 0.06), (0.25, 0.4))),
    ])


@dataclass
class SynthConfig:
    """
    Attributes
    ----------
    size : (int, int)
        Frame ``(height, width)``.
    frames : int
        Number of frames over all splits.
    seed : int
    class_mix : (float, float, float)
        Proportions of HF, MD, HG frames (normalized).
    class_stats : OrderedDict
        Diet token -> :class:`PlumeStats`.
    background : float
        Mean background intensity.
    gradient : float
        Peak-to-peak intensity change of the background gradient.
    noise : float
        Standard deviation of the additive Gaussian noise.
    empty_prob : float
        Probability of a frame without plumes (intermittent emission).
    split : (float, float, float)
        Train/val/test fractions of the frames, in index order.
    """
    size: tuple = (64, 64)
    frames: int = 1000
    seed: int = 0
    class_mix: tuple = (1., 1., 1.)
    class_stats: OrderedDict = None
    background: float = 0.75
    gradient: float = 0.15
    noise: float = 0.02
    empty_prob: float = 0.
    split: tuple = (0.7, 0.15, 0.15)

    def __post_init__(self):
        if self.class_stats is None:
            self.class_stats = default_class_stats()

    def validate(self):
        """Raise :class:`gastwin.errors.ConfigError` on invalid values."""
        if min(self.size) < 1:
            raise ConfigError('synth.size: extents must be >= 1')
        if self.frames < 0:
            raise ConfigError('synth.frames: must be >= 0')
        if not 0 <= self.seed < 2**64:
            raise ConfigError('synth.seed: must be an unsigned 64 bit '
                              'integer')
        if len(self.class_mix) != len(DIET_CLASSES) or \
                min(self.class_mix) < 0. or sum(self.class_mix) <= 0.:
            raise ConfigError('synth.class_mix: expected {} non-negative '
                              'proportions with positive sum'.format(
                                  len(DIET_CLASSES)))
        for token, stats in self.class_stats.items():
            key = 'synth.{}_'.format(token.lower())
            lo, hi = stats.plumes
            if not 0 <= lo <= hi:
                raise ConfigError(key + 'plumes: 0 <= low <= high must hold')
            lo, hi = stats.sigma
            if not 0. < lo <= hi:
                raise ConfigError(key + 'sigma: 0 < low <= high must hold')
            lo, hi = stats.amplitude
            if not 0. < lo <= hi <= 1.:
                raise ConfigError(key + 'amplitude: range must lie in (0, 1]')
        if self.noise < 0. or self.gradient < 0.:
            raise ConfigError('synth.noise and synth.gradient must be >= 0')
        if not 0. <= self.background <= 1.:
            raise ConfigError('synth.background: must be in [0, 1]')
        if not 0. <= self.empty_prob <= 1.:
            raise ConfigError('synth.empty_prob: must be in [0, 1]')
        if len(self.split) != 3 or min(self.split) < 0. or \
                abs(sum(self.split) - 1.) > 1e-6:
            raise ConfigError('synth.split: expected 3 non-negative fractions '
                              'summing to 1')
        return self


SYNTH_KEYS = OrderedDict((spec.key, spec) for spec in [
    KeySpec('synth.size', 'int-pair', (64, 64), 'frame size HxW'),
    KeySpec('synth.frames', 'int', 1000, 'number of frames'),
    KeySpec('synth.seed', 'int', 0, 'generator seed'),
    KeySpec('synth.class_mix', 'real-list', (1., 1., 1.),
            'HF,MD,HG proportions'),
    KeySpec('synth.background', 'real', 0.75, 'background intensity'),
    KeySpec('synth.gradient', 'real', 0.15, 'background gradient'),
    KeySpec('synth.noise', 'real', 0.02, 'noise standard deviation'),
    KeySpec('synth.empty_prob', 'real', 0., 'probability of no plume'),
    KeySpec('synth.split', 'real-list', (0.7, 0.15, 0.15),
            'train,val,test fractions'),
] + [
    KeySpec('synth.{}_{}'.format(token.lower(), attr), kind,
            getattr(stats, attr), '{} blob {}'.format(token, attr))
    for token, stats in default_class_stats().items()
    for attr, kind in (('plumes', 'int-pair'), ('sigma', 'real-pair'),
                       ('amplitude', 'real-pair'))
])


def parse_synth_config(text):
    """Parse and validate synthetic dataset config text (section
    ``synth``)."""
    values, _ = read_assignments(text, SYNTH_KEYS, ('synth',))
    v = OrderedDict((k, spec.default) for k, spec in SYNTH_KEYS.items())
    v.update(values)
    stats = OrderedDict(
        (token, PlumeStats(tuple(v['synth.{}_plumes'.format(token.lower())]),
                           tuple(v['synth.{}_sigma'.format(token.lower())]),
                           tuple(v['synth.{}_amplitude'.format(
                               token.lower())])))
        for token in DIET_CLASSES)
    return SynthConfig(size=tuple(v['synth.size']),
                       frames=v['synth.frames'], seed=v['synth.seed'],
                       class_mix=tuple(v['synth.class_mix']),
                       class_stats=stats, background=v['synth.background'],
                       gradient=v['synth.gradient'], noise=v['synth.noise'],
                       empty_prob=v['synth.empty_prob'],
                       split=tuple(v['synth.split'])).validate()


def load_synth_config(path):
    with open(path, 'r') as f:
        text = f.read()
    try:
        return parse_synth_config(text)
    except ConfigError as e:
        raise ConfigError('{}: {}'.format(os.path.basename(path), e)) \
            from None


def largest_remainder(total, proportions):
    """Integer counts summing to `total` in the given proportions."""
    p = np.asarray(proportions, dtype=np.float64)
    quota = total * p / p.sum()
    counts = np.floor(quota).astype(np.int64)
    remainder = quota - counts
    # ties go to the earlier entry
    for i in np.argsort(-remainder, kind='stable')[:total - counts.sum()]:
        counts[i] += 1
    return counts


def split_ranges(cfg):
    """Frame index range ``(start, stop)`` of each part."""
    counts = largest_remainder(cfg.frames, cfg.split)
    stops = np.cumsum(counts)
    return OrderedDict((part, (int(stop - n), int(stop)))
                       for part, n, stop in zip(PARTS, counts, stops))


def assign_diets(cfg):
    """
    Diet index of every frame: exact class proportions per split, shuffled
    within the split.
    """
    diets = np.empty(cfg.frames, dtype=np.int64)
    root = RngState(cfg.seed)
    for part, (start, stop) in split_ranges(cfg).items():
        counts = largest_remainder(stop - start, cfg.class_mix)
        labels = np.repeat(np.arange(len(DIET_CLASSES)), counts)
        diets[start:stop] = labels[
            root.spawn('diets/' + part).permutation(stop - start)]
    return diets


class Frame:
    """
    A rendered frame.

    Attributes
    ----------
    image : :class:`numpy.ndarray`
        ``(H, W)`` float64 intensities in ``[0, 1]``.
    mask : :class:`numpy.ndarray`
        ``(H, W)`` uint8 mask in ``{0, 1}``.
    diet : int
    blobs : list of tuple
        ``(c_x, c_y, s_x, s_y, amplitude)`` per blob, pixel units.
    name : str
    """
    def __init__(self, image, mask, diet, blobs, name):
        self.image = image
        self.mask = mask
        self.diet = diet
        self.blobs = blobs
        self.name = name

    def quantized(self):
        """8-bit image as stored in PNG files."""
        return np.round(self.image * 255.).astype(np.uint8)

    def to_sample(self, quantize=True):
        gray = (self.quantized() / 255. if quantize else self.image).astype(
            np.float32)
        return Sample(np.repeat(gray[None], 3, axis=0), self.mask, self.diet,
                      id=self.name)


def blob_field(shape, blob):
    """Relative blob contribution ``exp(-q / 2)`` on a ``(H, W)`` grid."""
    h, w = shape
    cx, cy, sx, sy, _ = blob
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    q = ((xs - cx) / sx) ** 2 + ((ys - cy) / sy) ** 2
    return np.exp(-q / 2.)


def render_frame(cfg, index, diet):
    """
    Render frame `index` with diet class `diet`.

    Returns
    -------
    frame : :class:`Frame`
    """
    name = FRAME_NAME.format(index)
    rng = RngState(cfg.seed).spawn(name)
    h, w = cfg.size
    stats = cfg.class_stats[DIET_CLASSES[diet]]
    angle = rng.uniform(0., 2. * np.pi)
    n = int(rng.integers(stats.plumes[0], stats.plumes[1] + 1))
    if rng.random() < cfg.empty_prob:
        n = 0
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    u = (xs / max(w - 1, 1) - 0.5) * np.cos(angle) + \
        (ys / max(h - 1, 1) - 0.5) * np.sin(angle)
    image = cfg.background + cfg.gradient * u
    mask = np.zeros((h, w), dtype=bool)
    extent = min(h, w)
    blobs = []
    for _ in range(n):
        blob = (rng.uniform(0.15 * w, 0.85 * w),
                rng.uniform(0.15 * h, 0.85 * h),
                rng.uniform(*stats.sigma) * extent,
                rng.uniform(*stats.sigma) * extent,
                rng.uniform(*stats.amplitude))
        field = blob_field((h, w), blob)
        image -= blob[4] * field
        mask |= field > MASK_LEVEL
        blobs.append(blob)
    image += rng.normal(0., cfg.noise, (h, w)) if cfg.noise > 0. else 0.
    return Frame(np.clip(image, 0., 1.), mask.astype(np.uint8), diet, blobs,
                 name)


def iter_frames(cfg, part=None):
    """Yield ``(part, frame)`` in index order, of all parts or of `part`."""
    diets = assign_diets(cfg)
    for p, (start, stop) in split_ranges(cfg).items():
        if part is not None and p != part:
            continue
        for i in range(start, stop):
            yield p, render_frame(cfg, i, int(diets[i]))


def synth_generate(cfg, out_dir, show_pbar=True):
    """
    Write a synthetic dataset in the layout read by
    :func:`gastwin.datasets.folder.load_dataset`.

    Parameters
    ----------
    cfg : :class:`SynthConfig`
    out_dir : str
        Dataset root, created if needed.
    show_pbar : bool, optional
        Whether to show a ``tqdm`` progress bar.

    Returns
    -------
    counts : OrderedDict
        Part -> number of frames written.
    """
    cfg.validate()
    labels = OrderedDict((p, []) for p in PARTS)
    for part in PARTS:
        for sub in ('images', 'masks'):
            path = os.path.join(out_dir, part, sub)
            os.makedirs(path, exist_ok=True)
            if os.listdir(path):
                warn('{} is not empty, existing frames may be overwritten or '
                     'left over'.format(path))
    for part, frame in tqdm(iter_frames(cfg), total=cfg.frames,
                            desc='synth', disable=not show_pbar):
        filename = frame.name + '.png'
        imsave(os.path.join(out_dir, part, 'images', filename),
               frame.quantized(), check_contrast=False)
        imsave(os.path.join(out_dir, part, 'masks', filename), frame.mask,
               check_contrast=False)
        labels[part].append((frame.name, DIET_CLASSES[frame.diet]))
    for part, rows in labels.items():
        pd.DataFrame(rows, columns=['basename', 'diet']).to_csv(
            os.path.join(out_dir, part, LABELS_FILENAME), header=False,
            index=False, lineterminator='\n')
    return OrderedDict((p, len(rows)) for p, rows in labels.items())


class SyntheticDataset(InMemoryDataset):
    """
    Synthetic dataset rendered in memory, identical to the files written by
    :func:`synth_generate` (8-bit quantized unless ``quantize=False``).

    Parameters
    ----------
    cfg : :class:`SynthConfig`
    quantize : bool, optional
    show_pbar : bool, optional
    """
    def __init__(self, cfg, quantize=True, show_pbar=False):
        self.cfg = cfg.validate()
        parts = OrderedDict((p, []) for p in PARTS)
        for part, frame in tqdm(iter_frames(cfg), total=cfg.frames,
                                desc='synth', disable=not show_pbar):
            parts[part].append(frame.to_sample(quantize=quantize))
        super().__init__(parts)

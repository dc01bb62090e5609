# -*- coding: utf-8 -*-
"""
Sample transforms: resizing to the network input and training augmentation.
"""
import numpy as np

from gastwin.data import Sample
from gastwin.errors import ConfigError
from gastwin.modelconfig import DataConfig
from gastwin.nn.encoder import INPUT_MULTIPLE
from gastwin.tensor import Tensor, no_grad
from gastwin.tensor.functional import bilinear_resize


def nearest_indices(n_in, n_out):
    """Source index of each output position for nearest-neighbor resizing,
    ``floor((i + 0.5) * n_in / n_out)``."""
    idx = np.floor((np.arange(n_out) + 0.5) * (n_in / n_out)).astype(np.int64)
    return np.minimum(idx, n_in - 1)


def resize_pair(sample, out):
    """
    Resize a sample to the network input size.

    The image is resized bilinearly, the mask by nearest neighbor so it keeps
    its label set.

    Parameters
    ----------
    sample : :class:`gastwin.data.Sample`
    out : (int, int)
        Target ``(height, width)``, multiples of 32.

    Returns
    -------
    resized : :class:`gastwin.data.Sample`

    Raises
    ------
    gastwin.errors.ConfigError
        If a target extent is not a positive multiple of 32.
    """
    out_h, out_w = (int(n) for n in out)
    if min(out_h, out_w) < INPUT_MULTIPLE or out_h % INPUT_MULTIPLE or \
            out_w % INPUT_MULTIPLE:
        raise ConfigError('resize target {}x{} must be positive multiples of '
                          '{}'.format(out_h, out_w, INPUT_MULTIPLE))
    h, w = sample.shape
    if (h, w) == (out_h, out_w):
        return sample
    with no_grad():
        image = bilinear_resize(Tensor(sample.image[None],
                                       dtype=sample.image.dtype),
                                out_h, out_w).data[0]
    mask = sample.mask[nearest_indices(h, out_h)][:, nearest_indices(w,
                                                                     out_w)]
    return sample.replace(image=np.clip(image, 0., 1.), mask=mask)


def hflip(sample):
    """Mirror image and mask horizontally."""
    return sample.replace(image=sample.image[:, :, ::-1].copy(),
                          mask=sample.mask[:, ::-1].copy())


def photometric(sample, brightness_shift, contrast_factor):
    """
    Scale the image contrast around its mean by `contrast_factor`, add
    `brightness_shift` and clip to ``[0, 1]``. The mask is unchanged.
    """
    image = sample.image
    mean = image.mean()
    jittered = (image - mean) * contrast_factor + mean + brightness_shift
    return sample.replace(image=np.clip(jittered, 0., 1.).astype(
        image.dtype))


def augment(sample, rng, cfg=None, flip=None, jitter=True):
    """
    Random horizontal flip of image and mask, brightness/contrast jitter of
    the image.

    Three values are drawn from `rng` per call in a fixed order (flip,
    brightness, contrast), whatever the options, so the draw sequence only
    depends on the number of calls.

    Parameters
    ----------
    sample : :class:`gastwin.data.Sample`
    rng : :class:`gastwin.tensor.RngState`
    cfg : :class:`gastwin.modelconfig.DataConfig`, optional
        Flip probability and jitter ranges. Default: ``DataConfig()``.
    flip : bool, optional
        Force (``True``) or suppress (``False``) the flip.
    jitter : bool, optional
        Whether to apply the photometric jitter.

    Returns
    -------
    augmented : :class:`gastwin.data.Sample`
        Same diet label and id.
    """
    cfg = cfg or DataConfig()
    u = rng.random()
    shift = rng.uniform(-cfg.brightness, cfg.brightness)
    factor = rng.uniform(*cfg.contrast)
    if flip is None:
        flip = u < cfg.flip_prob
    if flip:
        sample = hflip(sample)
    if jitter:
        sample = photometric(sample, shift, factor)
    return sample

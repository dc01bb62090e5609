# -*- coding: utf-8 -*-
"""
Provides the sample and batch containers flowing through training and
evaluation.
"""
import numpy as np

from gastwin.errors import DataError

DIET_CLASSES = ('HF', 'MD', 'HG')
"""Diet tokens by class index: high forage, mixed diet, high grain."""


def diet_index(token, filename=None):
    """Class index of a diet token (``'HF'``, ``'MD'`` or ``'HG'``)."""
    try:
        return DIET_CLASSES.index(str(token).strip().upper())
    except ValueError:
        where = '{}: '.format(filename) if filename else ''
        raise DataError("{}unknown diet token '{}' (expected one of {})"
                        .format(where, token, ', '.join(DIET_CLASSES))) \
            from None


class Sample:
    """
    One annotated frame.

    Attributes
    ----------
    image : :class:`numpy.ndarray`
        ``(3, H, W)`` float image in ``[0, 1]``, grayscale replicated to three
        identical channels.
    mask : :class:`numpy.ndarray`
        ``(H, W)`` uint8 segmentation mask with values in ``{0, 1}``.
    diet : int
        Diet class index, see :data:`DIET_CLASSES`.
    id : str
        Basename of the frame.
    """
    def __init__(self, image, mask, diet, id=''):
        self.image = np.asarray(image)
        self.mask = np.asarray(mask)
        self.diet = int(diet)
        self.id = id
        if self.image.ndim != 3 or self.image.shape[1:] != self.mask.shape:
            raise DataError('{}image shape {} does not match mask shape {}'
                            .format('{}: '.format(id) if id else '',
                                    self.image.shape, self.mask.shape))

    def __repr__(self):
        return ("Sample(id='{}', shape={}, diet={}, foreground={})".format(
            self.id, self.mask.shape, DIET_CLASSES[self.diet]
            if 0 <= self.diet < len(DIET_CLASSES) else self.diet,
            int(np.count_nonzero(self.mask))))

    @property
    def shape(self):
        return self.mask.shape

    def replace(self, image=None, mask=None):
        """Return a sample with `image` and/or `mask` exchanged."""
        return Sample(self.image if image is None else image,
                      self.mask if mask is None else mask, self.diet,
                      id=self.id)


class Batch:
    """
    Bundles stacked :class:`Sample` fields.
    Implements :meth:`__getitem__` and :meth:`__len__`.

    Attributes
    ----------
    images : :class:`numpy.ndarray`
        ``(N, 3, H, W)``.
    masks : :class:`numpy.ndarray`
        ``(N, H, W)``.
    diets : :class:`numpy.ndarray`
        ``(N,)`` diet indices.
    ids : list of str
    """
    def __init__(self, images, masks, diets, ids=None):
        self.images = images
        self.masks = masks
        self.diets = np.asarray(diets, dtype=np.int64)
        self.ids = list(ids) if ids is not None else [''] * len(self.diets)

    @classmethod
    def from_samples(cls, samples, dtype=None):
        """Stack `samples` (equal extents) into a batch."""
        samples = list(samples)
        if not samples:
            raise DataError('cannot build an empty batch')
        shapes = {s.image.shape for s in samples}
        if len(shapes) > 1:
            raise DataError('samples of a batch must have equal extents, got '
                            '{}'.format(sorted(shapes)))
        images = np.stack([s.image for s in samples])
        if dtype is not None:
            images = images.astype(dtype)
        return cls(images, np.stack([s.mask for s in samples]),
                   [s.diet for s in samples], [s.id for s in samples])

    def __repr__(self):
        return 'Batch(size={}, shape={})'.format(len(self),
                                                 self.images.shape[2:])

    def __getitem__(self, idx):
        """Return the sample at integer `idx`."""
        return Sample(self.images[idx], self.masks[idx], self.diets[idx],
                      id=self.ids[idx])

    def __len__(self):
        return len(self.diets)

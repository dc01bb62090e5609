# -*- coding: utf-8 -*-
"""Provides the dataset base classes.
"""
from math import ceil
import numpy as np

from gastwin.data import Batch

PARTS = ('train', 'val', 'test')


def check_part(part):
    if part not in PARTS:
        raise ValueError("dataset part must be 'train', 'val' or 'test', not "
                         "'{}'".format(part))
    return part


class Dataset():
    """Dataset base class.

    Subclasses provide random access by implementing :meth:`get_sample` and
    set the lengths of the three parts.

    Attributes
    ----------
    train_len : int
        Number of training samples.
    val_len : int
        Number of validation samples.
    test_len : int
        Number of test samples.
    shape : (int, int)
        Extents of the images, if equal for all samples.
    """
    def get_sample(self, index, part='train'):
        """Return the :class:`gastwin.data.Sample` at `index` of `part`."""
        raise NotImplementedError

    def get_len(self, part='train'):
        """Return the number of samples of a part.

        Parameters
        ----------
        part : {``'train'``, ``'val'``, ``'test'``}, optional
            Whether to return the number of train, validation or test
            samples. Default is ``'train'``.
        """
        try:
            return getattr(self, '{}_len'.format(check_part(part)))
        except AttributeError:
            raise NotImplementedError from None

    def get_shape(self):
        try:
            return self.shape
        except AttributeError:
            raise NotImplementedError from None

    def generator(self, part='train'):
        """Yield the samples of `part` in index order."""
        for i in range(self.get_len(part)):
            yield self.get_sample(i, part=part)

    def get_samples(self, part='train', indices=None):
        """Return a list of samples, all of `part` by default."""
        if indices is None:
            indices = range(self.get_len(part))
        return [self.get_sample(int(i), part=part) for i in indices]

    def num_batches(self, part='train', batch_size=1):
        return ceil(self.get_len(part) / batch_size)

    def get_batches(self, part='train', batch_size=1, order=None,
                    transform=None, dtype=None):
        """
        Yield :class:`gastwin.data.Batch` objects of a part.

        Batches have `batch_size` samples, the last one may be smaller.

        Parameters
        ----------
        part : {``'train'``, ``'val'``, ``'test'``}, optional
        batch_size : int, optional
        order : sequence of int, optional
            Sample order, e.g. a permutation. Default: index order.
        transform : callable, optional
            Applied to each :class:`gastwin.data.Sample` before stacking.
        dtype : dtype-like, optional
            Image dtype of the batches.
        """
        if order is None:
            order = np.arange(self.get_len(part))
        for start in range(0, len(order), batch_size):
            samples = self.get_samples(part, order[start:start + batch_size])
            if transform is not None:
                samples = [transform(s) for s in samples]
            yield Batch.from_samples(samples, dtype=dtype)


class InMemoryDataset(Dataset):
    """
    Dataset holding lists of samples per part.

    Parameters
    ----------
    parts : dict
        Part name -> list of :class:`gastwin.data.Sample`. Missing parts are
        empty.
    """
    def __init__(self, parts):
        unknown = set(parts) - set(PARTS)
        if unknown:
            check_part(sorted(unknown)[0])
        self.parts = {p: list(parts.get(p, [])) for p in PARTS}
        for p in PARTS:
            setattr(self, '{}_len'.format(p), len(self.parts[p]))
        shapes = {s.shape for samples in self.parts.values()
                  for s in samples}
        if len(shapes) == 1:
            self.shape = shapes.pop()

    def __repr__(self):
        return 'InMemoryDataset(train={}, val={}, test={})'.format(
            self.train_len, self.val_len, self.test_len)

    def get_sample(self, index, part='train'):
        return self.parts[check_part(part)][index]

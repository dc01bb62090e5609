# -*- coding: utf-8 -*-
"""
Datasets stored as directories of PNG files.

Layout per split (``train``, ``val``, ``test``)::

    root/<split>/images/<basename>.png   8-bit grayscale frames
    root/<split>/masks/<basename>.png    8-bit masks holding only 0 and 1
    root/<split>/labels.csv              rows 'basename,diet'

``diet`` is one of ``HF``, ``MD``, ``HG``. A header row ``basename,diet`` is
accepted.
"""
import os
from warnings import warn
import numpy as np
import pandas as pd
from skimage.io import imread
from skimage.color import rgb2gray
from skimage.util import img_as_float32

from gastwin.data import Sample, diet_index
from gastwin.datasets.dataset import InMemoryDataset, PARTS, check_part
from gastwin.datasets.transforms import resize_pair
from gastwin.errors import DataError

LABELS_FILENAME = 'labels.csv'


def read_labels(path):
    """
    Read a ``basename,diet`` table.

    Returns
    -------
    labels : dict
        Basename -> diet class index.
    """
    try:
        table = pd.read_csv(path, header=None, dtype=str,
                            skipinitialspace=True, comment='#')
    except pd.errors.EmptyDataError:
        return {}
    if table.shape[1] < 2:
        raise DataError("{}: expected rows 'basename,diet'".format(path))
    if table.shape[1] > 2:
        warn('{}: ignoring {} extra column(s)'.format(path,
                                                      table.shape[1] - 2))
    table = table.iloc[:, :2]
    table.columns = ['basename', 'diet']
    if len(table) and table.iloc[0]['basename'].strip().lower() == \
            'basename' and table.iloc[0]['diet'].strip().lower() == 'diet':
        table = table.iloc[1:]
    labels = {}
    for basename, diet in zip(table['basename'], table['diet']):
        basename = os.path.splitext(str(basename).strip())[0]
        if basename in labels:
            raise DataError("{}: duplicate basename '{}'".format(path,
                                                                 basename))
        labels[basename] = diet_index(diet, filename=path)
    return labels


def read_image(path):
    """Read a frame as float32 ``(H, W)`` gray values in ``[0, 1]``."""
    image = imread(path)
    if image.ndim == 3:
        image = rgb2gray(image[..., :3])
    return img_as_float32(image)


def read_mask(path):
    """Read a mask, raising :class:`gastwin.errors.DataError` if a value is
    not 0 or 1."""
    mask = imread(path)
    if mask.ndim == 3:
        mask = mask[..., 0]
    values = np.unique(mask)
    if np.any((values != 0) & (values != 1)):
        bad = values[(values != 0) & (values != 1)]
        raise DataError('{}: mask value {} outside {{0, 1}}'.format(
            path, bad[0]))
    return mask.astype(np.uint8)


def load_dataset(root, split):
    """
    Load one split of a PNG dataset.

    Parameters
    ----------
    root : str
        Dataset root directory.
    split : {``'train'``, ``'val'``, ``'test'``}

    Returns
    -------
    samples : list of :class:`gastwin.data.Sample`
        Sorted by basename; images replicated to three channels in
        ``[0, 1]``.

    Raises
    ------
    gastwin.errors.DataError
        For a missing mask or label, an unknown diet token, a mask value
        outside ``{0, 1}`` or mismatching extents; the message names the
        file.
    FileNotFoundError
        If the split directory or its ``labels.csv`` (with images present)
        does not exist.
    """
    split_dir = os.path.join(root, check_part(split))
    image_dir = os.path.join(split_dir, 'images')
    mask_dir = os.path.join(split_dir, 'masks')
    if not os.path.isdir(image_dir):
        raise FileNotFoundError('image directory {} not found'.format(
            image_dir))
    names = sorted(f for f in os.listdir(image_dir)
                   if f.lower().endswith('.png'))
    if not names:
        return []
    labels = read_labels(os.path.join(split_dir, LABELS_FILENAME))
    samples = []
    for name in names:
        basename = os.path.splitext(name)[0]
        image_path = os.path.join(image_dir, name)
        mask_path = os.path.join(mask_dir, name)
        if not os.path.isfile(mask_path):
            raise DataError('{}: no mask {}'.format(image_path, mask_path))
        if basename not in labels:
            raise DataError("{}: no diet label for '{}' in {}".format(
                image_path, basename, LABELS_FILENAME))
        gray = read_image(image_path)
        mask = read_mask(mask_path)
        if gray.shape != mask.shape:
            raise DataError('{}: image extents {} differ from mask extents {}'
                            .format(image_path, gray.shape, mask.shape))
        samples.append(Sample(np.repeat(gray[None], 3, axis=0), mask,
                              labels[basename], id=basename))
    return samples


class FolderDataset(InMemoryDataset):
    """
    All splits of a PNG dataset, resized to the network input.

    Parameters
    ----------
    root : str
        Dataset root directory.
    input_size : (int, int), optional
        Resize target. Default: keep the stored extents.
    parts : sequence of str, optional
        Splits to load; missing split directories are loaded as empty.
    """
    def __init__(self, root, input_size=None, parts=PARTS):
        self.root = root
        loaded = {}
        for part in parts:
            if not os.path.isdir(os.path.join(root, part)):
                continue
            samples = load_dataset(root, part)
            if input_size is not None:
                samples = [resize_pair(s, input_size) for s in samples]
            loaded[part] = samples
        super().__init__(loaded)

    def __repr__(self):
        return "FolderDataset('{}', train={}, val={}, test={})".format(
            self.root, self.train_len, self.val_len, self.test_len)

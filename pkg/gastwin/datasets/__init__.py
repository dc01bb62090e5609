# -*- coding: utf-8 -*-
"""Implements datasets for training and evaluating the segmentation model.

.. autosummary::
    Dataset
    InMemoryDataset
    FolderDataset
    SyntheticDataset
    load_dataset
    synth_generate

Datasets are stored as directories of PNG files (see
:mod:`gastwin.datasets.folder`). :func:`.synth_generate` writes synthetic
gas plume scenes in that layout; :class:`.SyntheticDataset` renders the same
scenes in memory.
"""

__all__ = ['Dataset', 'InMemoryDataset', 'FolderDataset', 'SyntheticDataset',
           'SynthConfig', 'load_dataset', 'synth_generate',
           'parse_synth_config', 'load_synth_config', 'resize_pair',
           'augment']

from .dataset import Dataset, InMemoryDataset
from .folder import FolderDataset, load_dataset
from .synthetic import (SyntheticDataset, SynthConfig, synth_generate,
                        parse_synth_config, load_synth_config)
from .transforms import resize_pair, augment

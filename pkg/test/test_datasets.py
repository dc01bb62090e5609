# -*- coding: utf-8 -*-
import unittest
import os
import warnings
from tempfile import TemporaryDirectory
import numpy as np
import pandas as pd
from skimage.io import imsave
from gastwin.data import Sample
from gastwin.datasets import (
    InMemoryDataset, FolderDataset, SyntheticDataset, SynthConfig,
    load_dataset, synth_generate, parse_synth_config, resize_pair, augment)
from gastwin.datasets.folder import read_labels
from gastwin.datasets.synthetic import (
    MASK_LEVEL, assign_diets, blob_field, largest_remainder, render_frame,
    split_ranges)
from gastwin.datasets.transforms import hflip, nearest_indices
from gastwin.errors import ConfigError, DataError
from gastwin.modelconfig import DataConfig
from gastwin.tensor import RngState


def make_sample(h=8, w=8, diet=0, id='', seed=0):
    rng = RngState(seed)
    image = np.repeat(rng.random((1, h, w)).astype(np.float32), 3, axis=0)
    mask = (rng.random((h, w)) > 0.5).astype(np.uint8)
    return Sample(image, mask, diet, id=id)


def write_split(root, split, frames, labels=None, header=False):
    """Write ``frames`` (name -> (image uint8, mask uint8)) and the labels
    table (rows of strings)."""
    for sub in ('images', 'masks'):
        os.makedirs(os.path.join(root, split, sub), exist_ok=True)
    for name, (image, mask) in frames.items():
        imsave(os.path.join(root, split, 'images', name + '.png'), image,
               check_contrast=False)
        if mask is not None:
            imsave(os.path.join(root, split, 'masks', name + '.png'), mask,
                   check_contrast=False)
    rows = labels if labels is not None else [[n, 'HF'] for n in frames]
    pd.DataFrame(rows).to_csv(os.path.join(root, split, 'labels.csv'),
                              header=['basename', 'diet'] if header else False,
                              index=False)


def frame(value=100, fg=True, shape=(6, 10)):
    image = np.full(shape, value, dtype=np.uint8)
    mask = np.zeros(shape, dtype=np.uint8)
    if fg:
        mask[1:3, 2:5] = 1
    return image, mask


class TestFolderDataset(unittest.TestCase):
    def test_load(self):
        with TemporaryDirectory() as root:
            write_split(root, 'train', {'b': frame(51), 'a': frame(255)},
                        labels=[['a.png', 'hg'], ['b', ' MD']], header=True)
            samples = load_dataset(root, 'train')
        self.assertEqual([s.id for s in samples], ['a', 'b'])
        self.assertEqual([s.diet for s in samples], [2, 1])
        self.assertEqual(samples[0].image.shape, (3, 6, 10))
        self.assertTrue(np.allclose(samples[1].image, 0.2))
        self.assertEqual(samples[0].mask.sum(), 6)
        self.assertEqual(samples[0].mask.dtype, np.uint8)

    def test_dataset_resizes(self):
        with TemporaryDirectory() as root:
            write_split(root, 'train', {'a': frame(shape=(16, 16))})
            write_split(root, 'val', {'b': frame(shape=(16, 16))})
            dataset = FolderDataset(root, input_size=(32, 64))
        self.assertEqual(dataset.get_len('train'), 1)
        self.assertEqual(dataset.get_len('val'), 1)
        self.assertEqual(dataset.get_len('test'), 0)
        self.assertEqual(dataset.get_shape(), (32, 64))
        self.assertTrue(set(np.unique(dataset.get_sample(0).mask)) <= {0, 1})

    def test_errors(self):
        with TemporaryDirectory() as root:
            write_split(root, 'train', {'a': frame()},
                        labels=[['a', 'XX']])
            with self.assertRaises(DataError) as cm:
                load_dataset(root, 'train')
            self.assertIn("unknown diet token 'XX'", str(cm.exception))
        with TemporaryDirectory() as root:
            write_split(root, 'train', {'a': frame()}, labels=[['b', 'HF']])
            with self.assertRaises(DataError) as cm:
                load_dataset(root, 'train')
            self.assertIn('no diet label', str(cm.exception))
        with TemporaryDirectory() as root:
            write_split(root, 'train', {'a': (frame()[0], None)})
            with self.assertRaises(DataError) as cm:
                load_dataset(root, 'train')
            self.assertIn('no mask', str(cm.exception))
        with TemporaryDirectory() as root:
            image, mask = frame()
            write_split(root, 'train', {'a': (image, mask * 255)})
            with self.assertRaises(DataError) as cm:
                load_dataset(root, 'train')
            self.assertIn('outside {0, 1}', str(cm.exception))
        with TemporaryDirectory() as root:
            write_split(root, 'train', {'a': (frame()[0],
                                              frame(shape=(6, 8))[1])})
            with self.assertRaises(DataError):
                load_dataset(root, 'train')
        with TemporaryDirectory() as root:
            with self.assertRaises(FileNotFoundError):
                load_dataset(root, 'train')
            with self.assertRaises(ValueError):
                load_dataset(root, 'validation')

    def test_labels(self):
        with TemporaryDirectory() as root:
            path = os.path.join(root, 'labels.csv')
            with open(path, 'w') as f:
                f.write('a,HF,cow 1\nb,HG,cow 2\n')
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter('always')
                self.assertEqual(read_labels(path), {'a': 0, 'b': 2})
            self.assertEqual(len(caught), 1)
            with open(path, 'w') as f:
                f.write('a,HF\na.png,MD\n')
            with self.assertRaises(DataError) as cm:
                read_labels(path)
            self.assertIn("duplicate basename 'a'", str(cm.exception))
            with open(path, 'w') as f:
                f.write('')
            self.assertEqual(read_labels(path), {})


class TestSynthetic(unittest.TestCase):
    def test_largest_remainder(self):
        self.assertEqual(list(largest_remainder(30, (0.7, 0.15, 0.15))),
                         [21, 5, 4])
        self.assertEqual(list(largest_remainder(10, (1, 1, 1))), [4, 3, 3])
        self.assertEqual(largest_remainder(7, (2., 5.)).sum(), 7)

    def test_split_and_class_mix(self):
        cfg = SynthConfig(size=(16, 16), frames=30, seed=4).validate()
        ranges = split_ranges(cfg)
        self.assertEqual(list(ranges.values()), [(0, 21), (21, 26),
                                                 (26, 30)])
        diets = assign_diets(cfg)
        self.assertEqual(list(np.bincount(diets[:21], minlength=3)),
                         [7, 7, 7])
        self.assertEqual(list(np.bincount(diets[21:26], minlength=3)),
                         [2, 2, 1])

    def test_frame_depends_on_seed_and_name(self):
        a = SynthConfig(size=(24, 32), frames=10, seed=5).validate()
        b = SynthConfig(size=(24, 32), frames=100, seed=5).validate()
        c = SynthConfig(size=(24, 32), frames=10, seed=6).validate()
        fa, fb, fc = (render_frame(cfg, 3, 1) for cfg in (a, b, c))
        self.assertEqual(fa.name, 'frame_00003')
        self.assertTrue(np.array_equal(fa.image, fb.image))
        self.assertTrue(np.array_equal(fa.mask, fb.mask))
        self.assertFalse(np.array_equal(fa.image, fc.image))

    def test_mask_is_level_set(self):
        cfg = SynthConfig(size=(32, 48), frames=12, seed=3,
                          noise=0.).validate()
        for index in range(cfg.frames):
            f = render_frame(cfg, index, index % 3)
            level = np.zeros(cfg.size, dtype=bool)
            for blob in f.blobs:
                level |= blob_field(cfg.size, blob) > MASK_LEVEL
            self.assertTrue(np.array_equal(f.mask.astype(bool), level))
            self.assertTrue(0. <= f.image.min() and f.image.max() <= 1.)

    def test_empty_frames(self):
        cfg = SynthConfig(size=(16, 16), frames=9, empty_prob=1.).validate()
        dataset = SyntheticDataset(cfg)
        self.assertEqual(sum(s.mask.sum() for s in dataset.get_samples()), 0)

    def test_config(self):
        cfg = parse_synth_config('synth.size = 32x48\nsynth.frames = 20\n'
                                 'synth.hg_plumes = 2x3\n'
                                 'synth.class_mix = 2,1,1\n')
        self.assertEqual(cfg.size, (32, 48))
        self.assertEqual(cfg.class_stats['HG'].plumes, (2, 3))
        self.assertEqual(cfg.class_mix, (2., 1., 1.))
        for text in ('synth.split = 0.5,0.2,0.2\n', 'synth.md_sigma = 0,1\n',
                     'synth.class_mix = 1,1\n', 'model.window = 3\n',
                     'synth.hf_amplitude = 0.5,1.5\n'):
            with self.assertRaises(ConfigError):
                parse_synth_config(text)

    def test_generate_matches_in_memory(self):
        cfg = SynthConfig(size=(32, 32), frames=10, seed=2).validate()
        dataset = SyntheticDataset(cfg)
        self.assertEqual(dataset.get_shape(), (32, 32))
        with TemporaryDirectory() as root:
            counts = synth_generate(cfg, root, show_pbar=False)
            self.assertEqual(list(counts.values()), [7, 2, 1])
            stored = FolderDataset(root)
            for part in ('train', 'val', 'test'):
                self.assertEqual(stored.get_len(part), counts[part])
                for a, b in zip(dataset.get_samples(part),
                                stored.get_samples(part)):
                    self.assertEqual(a.id, b.id)
                    self.assertEqual(a.diet, b.diet)
                    self.assertTrue(np.array_equal(a.mask, b.mask))
                    self.assertTrue(np.allclose(a.image, b.image, atol=1e-6))

    def test_deterministic(self):
        cfg = SynthConfig(size=(16, 16), frames=6, seed=8).validate()
        a, b = SyntheticDataset(cfg), SyntheticDataset(cfg)
        for x, y in zip(a.get_samples('train'), b.get_samples('train')):
            self.assertTrue(np.array_equal(x.image, y.image))


class TestTransforms(unittest.TestCase):
    def test_nearest_indices(self):
        self.assertEqual(list(nearest_indices(4, 8)),
                         [0, 0, 1, 1, 2, 2, 3, 3])
        self.assertEqual(list(nearest_indices(8, 4)), [1, 3, 5, 7])

    def test_resize_pair(self):
        sample = make_sample(20, 30, diet=2, id='x')
        resized = resize_pair(sample, (64, 32))
        self.assertEqual(resized.image.shape, (3, 64, 32))
        self.assertEqual(resized.shape, (64, 32))
        self.assertTrue(set(np.unique(resized.mask)) <= {0, 1})
        self.assertEqual((resized.diet, resized.id), (2, 'x'))
        self.assertTrue(0. <= resized.image.min() and
                        resized.image.max() <= 1.)
        same = make_sample(32, 32)
        self.assertIs(resize_pair(same, (32, 32)), same)
        with self.assertRaises(ConfigError):
            resize_pair(sample, (30, 32))

    def test_hflip(self):
        sample = make_sample(4, 6)
        flipped = hflip(sample)
        self.assertTrue(np.array_equal(flipped.mask, sample.mask[:, ::-1]))
        self.assertTrue(np.array_equal(hflip(flipped).image, sample.image))

    def test_augment(self):
        sample = make_sample(8, 8, diet=1, id='y')
        out = augment(sample, RngState(0), flip=True, jitter=False)
        self.assertTrue(np.array_equal(out.mask, sample.mask[:, ::-1]))
        self.assertTrue(np.array_equal(out.image, sample.image[:, :, ::-1]))
        out = augment(sample, RngState(0), flip=False)
        self.assertTrue(np.array_equal(out.mask, sample.mask))
        self.assertTrue(0. <= out.image.min() and out.image.max() <= 1.)
        self.assertEqual(out.image.dtype, sample.image.dtype)
        self.assertEqual((out.diet, out.id), (1, 'y'))
        cfg = DataConfig(brightness=0., contrast=(1., 1.))
        out = augment(sample, RngState(0), cfg=cfg, flip=False)
        self.assertTrue(np.allclose(out.image, sample.image, atol=1e-6))

    def test_augment_draws(self):
        # three draws per call, whatever the options
        a, b = RngState(3), RngState(3)
        augment(make_sample(), a, flip=False, jitter=False)
        b.random()
        b.uniform()
        b.uniform()
        self.assertEqual(a.random(), b.random())


class TestDataset(unittest.TestCase):
    def setUp(self):
        self.samples = [make_sample(seed=i, id=str(i)) for i in range(5)]
        self.dataset = InMemoryDataset({'train': self.samples})

    def test_lengths(self):
        self.assertEqual(self.dataset.get_len(), 5)
        self.assertEqual(self.dataset.get_len('val'), 0)
        self.assertEqual(self.dataset.num_batches('train', 2), 3)
        with self.assertRaises(ValueError):
            self.dataset.get_len('validation')
        with self.assertRaises(ValueError):
            InMemoryDataset({'validation': self.samples})

    def test_get_batches(self):
        batches = list(self.dataset.get_batches('train', 2,
                                                dtype=np.float64))
        self.assertEqual([len(b) for b in batches], [2, 2, 1])
        self.assertEqual(batches[0].images.shape, (2, 3, 8, 8))
        self.assertEqual(batches[0].images.dtype, np.float64)
        self.assertEqual(batches[2].ids, ['4'])
        batches = list(self.dataset.get_batches(
            'train', 3, order=[4, 0, 2, 1, 3], transform=hflip))
        self.assertEqual(batches[0].ids, ['4', '0', '2'])
        self.assertTrue(np.array_equal(batches[0].masks[1],
                                       self.samples[0].mask[:, ::-1]))

    def test_generator(self):
        ids = [s.id for s in self.dataset.generator('train')]
        self.assertEqual(ids, ['0', '1', '2', '3', '4'])


if __name__ == '__main__':
    unittest.main()

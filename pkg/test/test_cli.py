# -*- coding: utf-8 -*-
import unittest
import os
import json
from io import StringIO
from tempfile import TemporaryDirectory
from unittest.mock import patch
import numpy as np
from skimage.io import imread, imsave
from gastwin.cli import (
    EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_DATA, SEED_ENV, run,
    build_parser)
from gastwin.data import DIET_CLASSES
from gastwin.modelconfig import load_config
from gastwin.selftest import TINY_CONFIG

TRAIN_CONFIG = TINY_CONFIG + """\
optim.total_iters = 2
optim.warmup_iters = 1
optim.val_every = 1
optim.batch_size = 4
optim.keep_top_k = 1
"""

SYNTH_CONFIG = """\
synth.size = 32x32
synth.frames = 10
synth.seed = 3
"""


def call(*argv):
    """Run the command line interface, return ``(code, stdout, stderr)``."""
    with patch('sys.stdout', new_callable=StringIO) as out, \
            patch('sys.stderr', new_callable=StringIO) as err:
        code = run(list(argv))
    return code, out.getvalue(), err.getvalue()


def write(path, text):
    with open(path, 'w') as f:
        f.write(text)
    return path


class TestProfile(unittest.TestCase):
    def test_json(self):
        code, out, _ = call('profile', '--json')
        self.assertEqual(code, EXIT_OK)
        report = json.loads(out)
        self.assertEqual(report['input'], '512x512')
        self.assertAlmostEqual(report['params_m'], 3.348, delta=0.335)
        code, out, _ = call('profile', '--input', '256x512', '--json')
        self.assertEqual(json.loads(out)['input'], '256x512')

    def test_table_and_ablations(self):
        code, out, _ = call('profile')
        self.assertEqual(code, EXIT_OK)
        self.assertIn('stage1', out)
        code, out, _ = call('profile', '--ablations', '--json')
        self.assertEqual(code, EXIT_OK)
        rows = json.loads(out)
        self.assertIn({'table': 'window', 'row': '3x3'},
                      [{k: r[k] for k in ('table', 'row')} for r in rows])

    def test_geometry_error(self):
        code, _, err = call('profile', '--input', '500x512')
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn('gastwin profile: configuration error', err)
        with self.assertRaises(SystemExit):
            with patch('sys.stderr', new_callable=StringIO):
                build_parser().parse_args(['profile', '--input', '5x5x5'])


class TestSelftest(unittest.TestCase):
    def test_selected(self):
        code, out, _ = call('-q', 'selftest', '--only', 'op/')
        self.assertEqual(code, EXIT_OK)
        self.assertIn('op/conv2d', out)
        self.assertNotIn('grad/', out)

    def test_failure(self):
        from gastwin import selftest

        def failing():
            selftest.expect(False, 'always fails')
        with patch.dict(selftest.CHECKS, {'test/failing': failing}):
            code, out, _ = call('-q', 'selftest', '--only', 'test/failing')
        self.assertEqual(code, EXIT_SELFTEST)
        self.assertIn('always fails', out)

    def test_unknown(self):
        code, _, err = call('-q', 'selftest', '--only', 'nothing')
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn('no checks match', err)


class TestPipeline(unittest.TestCase):
    def test_train_eval_infer(self):
        with TemporaryDirectory() as tmp:
            cfg = write(os.path.join(tmp, 'tiny.cfg'), TRAIN_CONFIG)
            synth = write(os.path.join(tmp, 'synth.cfg'), SYNTH_CONFIG)
            out = os.path.join(tmp, 'run')
            code, stdout, _ = call('-q', 'train', '--config', cfg, '--data',
                                   synth, '--out', out)
            self.assertEqual(code, EXIT_OK)
            self.assertIn('best checkpoint', stdout)
            checkpoints = [f for f in os.listdir(out) if f.endswith('.gtwf')]
            self.assertEqual(len(checkpoints), 1)
            ckpt = os.path.join(out, checkpoints[0])

            code, stdout, _ = call('-q', 'eval', '--checkpoint', ckpt,
                                   '--data', synth, '--json')
            self.assertEqual(code, EXIT_OK)
            report = json.loads(stdout)
            self.assertEqual(report['samples'], 1)
            self.assertTrue(0. <= report['miou'] <= 100.)

            image = os.path.join(tmp, 'frame.png')
            imsave(image, np.full((40, 56), 180, dtype=np.uint8),
                   check_contrast=False)
            mask_path = os.path.join(tmp, 'pred', 'frame_mask.png')
            figure = os.path.join(tmp, 'pred', 'frame_figure.png')
            code, _, _ = call('-q', 'infer', '--checkpoint', ckpt, '--image',
                              image, '--out', mask_path, '--figure', figure)
            self.assertEqual(code, EXIT_OK)
            mask = imread(mask_path)
            self.assertEqual(mask.shape, (40, 56))
            self.assertTrue(set(np.unique(mask)) <= {0, 1})
            with open(os.path.join(tmp, 'pred', 'frame_mask.json')) as f:
                sidecar = json.load(f)
            self.assertIn(sidecar['diet_class'], DIET_CLASSES)
            self.assertAlmostEqual(sum(sidecar['diet_probs']), 1., places=5)
            self.assertTrue(os.path.isfile(figure))

    def test_seed(self):
        with TemporaryDirectory() as tmp:
            cfg = write(os.path.join(tmp, 'tiny.cfg'), TRAIN_CONFIG)
            synth = write(os.path.join(tmp, 'synth.cfg'), SYNTH_CONFIG)
            with patch.dict(os.environ, {SEED_ENV: '5'}):
                call('-q', 'train', '--config', cfg, '--data', synth, '--out',
                     os.path.join(tmp, 'env'))
                call('-q', 'train', '--config', cfg, '--data', synth, '--out',
                     os.path.join(tmp, 'arg'), '--seed', '7')
            with patch.dict(os.environ, {SEED_ENV: 'five'}):
                code, _, _ = call('-q', 'train', '--config', cfg, '--data',
                                  synth, '--out', os.path.join(tmp, 'bad'))
            self.assertEqual(load_config(os.path.join(tmp, 'env',
                                                      'config.cfg')).seed, 5)
            self.assertEqual(load_config(os.path.join(tmp, 'arg',
                                                      'config.cfg')).seed, 7)
            self.assertEqual(code, EXIT_CONFIG)

    def test_synth(self):
        with TemporaryDirectory() as tmp:
            synth = write(os.path.join(tmp, 'synth.cfg'), SYNTH_CONFIG)
            root = os.path.join(tmp, 'data')
            code, out, _ = call('-q', 'synth', '--config', synth, '--out',
                                root)
            self.assertEqual(code, EXIT_OK)
            self.assertIn('7 train', out)
            self.assertEqual(len(os.listdir(os.path.join(root, 'val',
                                                         'images'))), 2)

    def test_exit_codes(self):
        with TemporaryDirectory() as tmp:
            bad = write(os.path.join(tmp, 'bad.cfg'), 'model.window = 0\n')
            synth = write(os.path.join(tmp, 'synth.cfg'), SYNTH_CONFIG)
            code, _, err = call('-q', 'train', '--config', bad, '--data',
                                synth, '--out', tmp)
            self.assertEqual(code, EXIT_CONFIG)
            self.assertIn('bad.cfg: line 1: model.window', err)
            cfg = write(os.path.join(tmp, 'tiny.cfg'), TRAIN_CONFIG)
            code, _, err = call('-q', 'train', '--config', cfg, '--data',
                                os.path.join(tmp, 'missing'), '--out', tmp)
            self.assertEqual(code, EXIT_DATA)
            code, _, _ = call('-q', 'eval', '--checkpoint', cfg, '--data',
                              synth)
            self.assertEqual(code, EXIT_DATA)


if __name__ == '__main__':
    unittest.main()

# -*- coding: utf-8 -*-
"""
Learning runs.

:class:`TestTrainingSmoke` overfits a tiny network to two synthetic frames
and always runs. :class:`TestDeskTraining` is the desk-scale run (synthetic
64x64 scenes, shrunken channels, 2000 iterations). It takes tens of minutes
on a laptop CPU and only runs if the environment variable ``GASTWIN_DESK``
is set::

    GASTWIN_DESK=1 python -m unittest discover -s test -p test_desk.py
"""
from dataclasses import replace
import unittest
import os
import numpy as np
from gastwin.cli import infer_image
from gastwin.datasets import SyntheticDataset, SynthConfig, load_synth_config
from gastwin.datasets.synthetic import render_frame
from gastwin.evaluation import evaluate
from gastwin.modelconfig import ModelConfig, apply_overrides, load_config
from gastwin.nn import GasTwinFormer
from gastwin.selftest import TINY_CONFIG
from gastwin.trainer import train

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, 'configs')

SMOKE_CONFIG = TINY_CONFIG + """\
loss.seg = cross_entropy
optim.total_iters = 12
optim.val_every = 1
optim.batch_size = 2
optim.keep_top_k = 1
data.augment = off
"""


class TestTrainingSmoke(unittest.TestCase):
    def test_loss_decreases(self):
        cfg = apply_overrides(ModelConfig().validate(), SMOKE_CONFIG)
        dataset = SyntheticDataset(SynthConfig(
            size=(32, 32), frames=4, seed=2,
            split=(0.5, 0.25, 0.25)).validate())
        self.assertEqual(dataset.get_len('train'), 2)
        result = train(GasTwinFormer(cfg), dataset, cfg, show_pbar=False,
                       lr_fn=lambda it: 5e-4)
        losses = [line['loss_total'] for line in result.log[1:]]
        self.assertEqual(len(losses), 12)
        self.assertTrue(all(np.isfinite(losses)))
        self.assertLess(np.mean(losses[-3:]), losses[0])


@unittest.skipUnless(os.environ.get('GASTWIN_DESK'),
                     'set GASTWIN_DESK to run the desk-scale training')
class TestDeskTraining(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.cfg = load_config(os.path.join(CONFIGS, 'desk.cfg'))
        cls.synth = load_synth_config(os.path.join(CONFIGS, 'synth_desk.cfg'))
        cls.dataset = SyntheticDataset(cls.synth)
        cls.model = GasTwinFormer(cls.cfg)
        cls.result = train(cls.model, cls.dataset, cls.cfg, show_pbar=False)

    def test_learns(self):
        log = self.result.log
        self.assertGreaterEqual(self.result.best_miou - log[0]['val_miou'],
                                20.)
        report = evaluate(self.model, self.dataset.get_samples('val'))
        self.assertGreaterEqual(report.fg_iou, 80.)
        self.assertGreaterEqual(report.diet_accuracy, 90.)

    def test_background_frame(self):
        frame = render_frame(replace(self.synth, empty_prob=1.), 0, 0)
        mask, _ = infer_image(self.model, frame.quantized() / 255.)
        self.assertGreaterEqual(np.mean(mask == 0), 0.99)


if __name__ == '__main__':
    unittest.main()

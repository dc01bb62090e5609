# -*- coding: utf-8 -*-
import unittest
import os
import json
from tempfile import TemporaryDirectory
from unittest.mock import patch
import numpy as np
from gastwin.checkpoint import load_checkpoint
from gastwin.datasets import InMemoryDataset, SyntheticDataset, SynthConfig
from gastwin.errors import DataError, NumericalError
from gastwin.modelconfig import ModelConfig, OptimConfig, apply_overrides
from gastwin.nn import GasTwinFormer
from gastwin.selftest import TINY_CONFIG
from gastwin.trainer import (
    METRICS_FILENAME, METRIC_KEYS, AdamW, OptimizerState, adamw_step, lr_at,
    train)

RUN_CONFIG = TINY_CONFIG + """\
optim.total_iters = 4
optim.warmup_iters = 1
optim.val_every = 2
optim.batch_size = 2
optim.keep_top_k = 1
optim.lr = 1e-3
"""


def run_config(extra=''):
    return apply_overrides(ModelConfig().validate(), RUN_CONFIG + extra)


def tiny_dataset():
    return SyntheticDataset(SynthConfig(size=(32, 32), frames=10,
                                        seed=1).validate())


class TestSchedule(unittest.TestCase):
    def setUp(self):
        self.cfg = OptimConfig(base_lr=1e-3, warmup_start_lr=1e-5,
                               warmup_iters=10, total_iters=110)

    def test_warmup_and_decay(self):
        self.assertAlmostEqual(lr_at(0, self.cfg), 1e-5)
        self.assertAlmostEqual(lr_at(5, self.cfg), 1e-5 + 0.5 * (1e-3 - 1e-5))
        self.assertAlmostEqual(lr_at(10, self.cfg), 1e-3)
        self.assertAlmostEqual(lr_at(60, self.cfg), 5e-4)
        self.assertEqual(lr_at(110, self.cfg), 0.)
        lrs = [lr_at(it, self.cfg) for it in range(10, 111)]
        self.assertTrue(all(a >= b for a, b in zip(lrs, lrs[1:])))

    def test_poly_power(self):
        self.cfg.poly_power = 2.
        self.assertAlmostEqual(lr_at(60, self.cfg), 2.5e-4)

    def test_bounds(self):
        with self.assertRaises(ValueError):
            lr_at(-1, self.cfg)
        with self.assertRaises(ValueError):
            lr_at(111, self.cfg)


class TestAdamW(unittest.TestCase):
    def test_first_step(self):
        cfg = OptimConfig(weight_decay=0.01)
        p = np.array([1.])
        state = OptimizerState()
        adamw_step([p], [np.array([0.5])], state, 0.1, cfg)
        # decoupled decay, then a bias corrected step of size lr
        self.assertAlmostEqual(p[0], 0.999 - 0.1 * 0.5 / (0.5 + 1e-8))
        self.assertEqual(state.step, 1)
        self.assertAlmostEqual(state.m[0][0], 0.05)
        self.assertAlmostEqual(state.v[0][0], 0.00025)

    def test_weight_decay_override(self):
        cfg = OptimConfig(weight_decay=0.5)
        p = np.array([2.])
        adamw_step([p], [np.zeros(1)], OptimizerState(), 0.1, cfg,
                   weight_decay=0.)
        self.assertEqual(p[0], 2.)
        adamw_step([p], [np.zeros(1)], OptimizerState(), 0.1, cfg)
        self.assertAlmostEqual(p[0], 2. * 0.95)

    def test_errors(self):
        cfg = OptimConfig()
        with self.assertRaises(ValueError):
            adamw_step([np.zeros(2)], [np.zeros(3)], OptimizerState(), 0.1,
                       cfg)
        with self.assertRaises(NumericalError):
            adamw_step([np.zeros(1)], [np.array([np.nan])], OptimizerState(),
                       0.1, cfg)

    def test_groups(self):
        cfg = run_config()
        model = GasTwinFormer(cfg)
        optimizer = AdamW(model, cfg.optim)
        by_name = {g.name: g for g in optimizer.groups}
        self.assertEqual(by_name['head'].lr_scale,
                         cfg.optim.head_lr_multiplier)
        self.assertEqual(by_name['norm'].weight_decay,
                         cfg.optim.norm_weight_decay)
        self.assertEqual(sum(len(g.params) for g in optimizer.groups),
                         len(model.parameters()))


class TestTrain(unittest.TestCase):
    def test_run_directory(self):
        cfg = run_config()
        model = GasTwinFormer(cfg)
        with TemporaryDirectory() as out:
            result = train(model, tiny_dataset(), cfg, out_dir=out,
                           show_pbar=False)
            with open(os.path.join(out, METRICS_FILENAME)) as f:
                lines = [json.loads(line) for line in f]
            checkpoints = sorted(f for f in os.listdir(out)
                                 if f.endswith('.gtwf'))
            self.assertTrue(os.path.isfile(os.path.join(out, 'config.cfg')))
            self.assertEqual(len(checkpoints), 1)
            ckpt = load_checkpoint(os.path.join(out, checkpoints[0]))
        self.assertEqual([line['iter'] for line in lines], [0, 2, 4])
        self.assertTrue(all(list(line) == list(METRIC_KEYS)
                            for line in lines))
        self.assertIsNone(lines[0]['loss_total'])
        self.assertIsNotNone(lines[1]['loss_total'])
        self.assertEqual(len(result.checkpoints), 1)
        self.assertEqual(ckpt.iteration, result.best_iter)
        self.assertEqual(result.best_miou,
                         max(line['val_miou'] for line in lines[1:]))
        self.assertIsNotNone(ckpt.optimizer_state)
        for name, p in model.named_parameters():
            self.assertTrue(np.array_equal(p.data, ckpt.params[name]), name)

    def test_deterministic(self):
        cfg = run_config()
        results = [train(GasTwinFormer(cfg), tiny_dataset(), cfg,
                         show_pbar=False) for _ in range(2)]
        self.assertEqual(results[0].log, results[1].log)

    def test_zero_lr_keeps_parameters(self):
        cfg = run_config()
        model = GasTwinFormer(cfg)
        before = model.state_dict()
        train(model, tiny_dataset(), cfg, show_pbar=False,
              lr_fn=lambda it: 0.)
        for name, value in model.state_dict().items():
            self.assertTrue(np.array_equal(value, before[name]), name)

    def test_numerical_failure(self):
        cfg = run_config()
        with self.assertRaises(NumericalError) as cm:
            with np.errstate(all='ignore'):
                train(GasTwinFormer(cfg), tiny_dataset(), cfg,
                      show_pbar=False, lr_fn=lambda it: 1e300)
        self.assertIn('iteration 1', str(cm.exception))
        self.assertIn('loss_total=', str(cm.exception))

    def test_numerical_failure_reports_computed_terms(self):
        cfg = run_config('loss.seg = dice\n')
        with patch('gastwin.losses.cross_entropy_loss',
                   side_effect=NumericalError('overflow')):
            with self.assertRaises(NumericalError) as cm:
                train(GasTwinFormer(cfg), tiny_dataset(), cfg,
                      show_pbar=False)
        message = str(cm.exception)
        self.assertIn('iteration 1', message)
        self.assertRegex(message, r'loss_seg=[0-9.e+-]+,')
        self.assertIn('loss_cls=n/a', message)
        self.assertIn('loss_total=n/a', message)

    def test_missing_parts(self):
        cfg = run_config()
        samples = tiny_dataset().get_samples('train')
        with self.assertRaises(DataError):
            train(GasTwinFormer(cfg), InMemoryDataset({'train': samples}),
                  cfg, show_pbar=False)
        with self.assertRaises(DataError):
            train(GasTwinFormer(cfg), InMemoryDataset({'val': samples}), cfg,
                  show_pbar=False)


if __name__ == '__main__':
    unittest.main()

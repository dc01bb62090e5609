# -*- coding: utf-8 -*-
import os
import unittest
from tempfile import TemporaryDirectory
from gastwin.errors import ConfigError
from gastwin.modelconfig import (
    ModelConfig, KEYS, PARSERS, parse_config, serialize_config,
    apply_overrides, load_config)
from gastwin.selftest import TINY_CONFIG


class TestParse(unittest.TestCase):
    def test_defaults(self):
        cfg = parse_config('# nothing but a comment\n\n')
        self.assertEqual(cfg, ModelConfig().validate())
        self.assertEqual([s.out_channels for s in cfg.stages],
                         [32, 64, 160, 256])
        self.assertEqual([s.heads for s in cfg.stages], [1, 2, 5, 8])
        self.assertEqual([s.reduction_ratio for s in cfg.stages],
                         [8, 4, 2, 1])
        self.assertTrue(all(s.pattern == 'EL' for s in cfg.stages))
        self.assertTrue(all(s.window == (5, 5) for s in cfg.stages))
        self.assertEqual((cfg.stages[0].patch_kernel,
                          cfg.stages[0].patch_stride,
                          cfg.stages[0].patch_pad), (7, 4, 3))
        self.assertEqual(cfg.decoder.branch_set, ('F1', 'F2', 'F3'))
        self.assertEqual(cfg.loss.seg_loss, 'gaussian_plume')
        self.assertEqual(cfg.input_size, (512, 512))

    def test_values(self):
        cfg = parse_config('model.pattern = ll  # lower case is accepted\n'
                           'model.window = 3x7\n'
                           'decoder.branches = F3, F1\n'
                           'loss.seg_weight = 0.5\n'
                           'optim.betas = 0.8, 0.99\n')
        self.assertTrue(all(s.pattern == 'LL' for s in cfg.stages))
        self.assertEqual(cfg.stages[2].window, (3, 7))
        self.assertEqual(cfg.decoder.branch_set, ('F1', 'F3'))
        self.assertEqual(cfg.loss.task_weights, (0.5, 1.))
        self.assertEqual(cfg.optim.betas, (0.8, 0.99))
        self.assertEqual(parse_config('decoder.branches = none\n')
                         .decoder.branch_set, ())

    def test_parsers(self):
        self.assertEqual(PARSERS['int-pair']('512x1024'), (512, 1024))
        self.assertEqual(PARSERS['int-pair']('7'), (7, 7))
        self.assertEqual(PARSERS['int-list']('1, 2,3'), (1, 2, 3))
        with self.assertRaises(ValueError):
            PARSERS['int-pair']('1x2x3')
        with self.assertRaises(ValueError):
            PARSERS['int-list']('1,,2')

    def test_syntax_errors(self):
        cases = [
            ('model.channels 3\n', 'line 1'),
            ('\nmodel.colour = red\n', "line 2: unknown key 'model.colour'"),
            ('training.lr = 1\n', "unknown section 'training'"),
            ('loss.seg = dice\nloss.seg = focal\n',
             "line 2: key 'loss.seg' already assigned in line 1"),
            ('optim.lr =\n', 'missing value'),
            ('optim.total_iters = many\n', 'line 1: optim.total_iters'),
        ]
        for text, message in cases:
            with self.assertRaises(ConfigError) as cm:
                parse_config(text)
            self.assertIn(message, str(cm.exception), text)

    def test_invariant_errors(self):
        cases = [
            ('model.window = 9\ndecoder.channels = -4\n',
             'line 2: decoder.channels'),
            ('model.heads = 1,2,5,7\n', 'line 1: model.heads'),
            ('model.pattern = EX\n', 'model.pattern'),
            ('model.channels = 8,16,32\n', 'model.channels'),
            ('optim.warmup_iters = 3000\n', 'optim.warmup_iters'),
            ('data.input = 500x512\n', 'data.input'),
            ('classifier.source_stage = 1\n', 'classifier.source_stage'),
            ('loss.seg = hinge\n', 'loss.seg'),
            ('decoder.branches = F1,F4\n', 'decoder.branches'),
            ('data.augment = maybe\n', 'data.augment'),
        ]
        for text, message in cases:
            with self.assertRaises(ConfigError) as cm:
                parse_config(text)
            self.assertIn(message, str(cm.exception), text)

    def test_every_key_has_default(self):
        for key, spec in KEYS.items():
            self.assertIn(key.split('.', 1)[0], ('model', 'decoder',
                                                 'classifier', 'loss',
                                                 'optim', 'data'))
            self.assertIsNotNone(spec.default, key)


class TestSerialize(unittest.TestCase):
    def test_round_trip(self):
        for text in ['', TINY_CONFIG,
                     'model.pattern = LL,EE,EL,E\nmodel.window = 3x7\n'
                     'decoder.branches = none\nloss.seg = focal\n'
                     'loss.focal_gamma = 1.5\ndata.augment = off\n']:
            cfg = parse_config(text)
            self.assertEqual(parse_config(serialize_config(cfg)), cfg)

    def test_apply_overrides(self):
        base = parse_config(TINY_CONFIG)
        cfg = apply_overrides(base, 'data.seed = 42\nmodel.ffn = plain\n')
        self.assertEqual(cfg.seed, 42)
        self.assertTrue(all(s.ffn == 'plain' for s in cfg.stages))
        self.assertEqual(base.seed, 0)
        self.assertEqual(cfg.stages[0].out_channels, 4)
        with self.assertRaises(ConfigError):
            apply_overrides(base, 'data.seed = -1\n')

    def test_load_config(self):
        with TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bad.cfg')
            with open(path, 'w') as f:
                f.write('model.window = 0\n')
            with self.assertRaises(ConfigError) as cm:
                load_config(path)
            self.assertIn('bad.cfg: line 1: model.window',
                          str(cm.exception))
            with self.assertRaises(FileNotFoundError):
                load_config(os.path.join(tmp, 'missing.cfg'))

    def test_shipped_configs(self):
        root = os.path.join(os.path.dirname(__file__), os.pardir, 'configs')
        self.assertEqual(load_config(os.path.join(root, 'default.cfg')),
                         ModelConfig().validate())
        load_config(os.path.join(root, 'desk.cfg'))


if __name__ == '__main__':
    unittest.main()

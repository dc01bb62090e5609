# -*- coding: utf-8 -*-
import os
import struct
import unittest
import warnings
from tempfile import TemporaryDirectory
import numpy as np
from gastwin.checkpoint import (
    MAGIC, VERSION, Checkpoint, encode_checkpoint, decode_checkpoint,
    make_checkpoint, save_checkpoint, load_checkpoint, load_model)
from gastwin.errors import DataError
from gastwin.modelconfig import ModelConfig, apply_overrides
from gastwin.nn import GasTwinFormer
from gastwin.selftest import TINY_CONFIG
from gastwin.tensor import Tensor, RngState, default_dtype, no_grad
from gastwin.trainer import AdamW


def tiny_model(seed=0):
    cfg = apply_overrides(ModelConfig().validate(),
                          TINY_CONFIG + 'data.seed = {}\n'.format(seed))
    return GasTwinFormer(cfg)


class TestCheckpoint(unittest.TestCase):
    def test_file_round_trip(self):
        model = tiny_model(3)
        with TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'run', 'model.gtwf')
            save_checkpoint(path, model, iteration=42)
            with open(path, 'rb') as f:
                self.assertEqual(f.read(4), MAGIC)
            restored, ckpt = load_model(path)
        self.assertEqual(ckpt.iteration, 42)
        self.assertEqual(ckpt.version, VERSION)
        self.assertIsNone(ckpt.optimizer_state)
        self.assertEqual(restored.cfg, model.cfg)
        for (name, a), (_, b) in zip(model.named_parameters(),
                                     restored.named_parameters()):
            self.assertEqual(a.dtype, b.dtype, name)
            self.assertTrue(np.array_equal(a.data, b.data), name)
        images = Tensor(RngState(0).normal(size=(1, 3, 32, 32)))
        model.eval()
        restored.eval()
        with no_grad():
            for x, y in zip(model(images), restored(images)):
                self.assertTrue(np.array_equal(x.data, y.data))

    def test_float64(self):
        with default_dtype(np.float64):
            model = tiny_model()
        restored = decode_checkpoint(encode_checkpoint(
            make_checkpoint(model))).build_model()
        self.assertTrue(all(p.dtype == np.float64
                            for p in restored.parameters()))

    def test_optimizer_state(self):
        model = tiny_model()
        optimizer = AdamW(model, model.cfg.optim)
        for p in model.parameters():
            p.grad = np.ones_like(p.data)
        optimizer.step(1e-3)
        ckpt = decode_checkpoint(encode_checkpoint(
            make_checkpoint(model, iteration=1, optimizer=optimizer)))
        state = ckpt.optimizer_state
        self.assertEqual(state['step'], 1)
        self.assertEqual(set(state['m']), set(dict(model.named_parameters())))
        other = AdamW(tiny_model(), model.cfg.optim)
        other.load_state_dict(state)
        self.assertEqual(other.step_count, 1)
        for a, b in zip(optimizer.groups, other.groups):
            for m1, m2 in zip(a.state.m, b.state.m):
                self.assertTrue(np.array_equal(m1, m2))

    def test_invalid_files(self):
        data = encode_checkpoint(make_checkpoint(tiny_model()))
        with self.assertRaises(DataError) as cm:
            decode_checkpoint(b'NOPE' + data[4:])
        self.assertIn('not a checkpoint', str(cm.exception))
        with self.assertRaises(DataError) as cm:
            decode_checkpoint(data[:len(data) // 2])
        self.assertIn('truncated', str(cm.exception))
        newer = MAGIC + struct.pack('<I', VERSION + 1) + data[8:]
        with self.assertRaises(DataError) as cm:
            decode_checkpoint(newer)
        self.assertIn('newer', str(cm.exception))
        with self.assertRaises(DataError):
            decode_checkpoint(encode_checkpoint(Checkpoint('', {}))[:8] +
                              struct.pack('<4sQ', b'END ', 0))

    def test_unknown_record(self):
        data = encode_checkpoint(make_checkpoint(tiny_model(), iteration=5))
        extra = struct.pack('<4sQ', b'XTRA', 3) + b'abc'
        data = data[:8] + extra + data[8:]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            ckpt = decode_checkpoint(data)
        self.assertEqual(ckpt.iteration, 5)
        self.assertEqual(len(caught), 1)
        self.assertIn('XTRA', str(caught[0].message))

    def test_load_missing(self):
        with TemporaryDirectory() as tmp:
            with self.assertRaises(FileNotFoundError):
                load_checkpoint(os.path.join(tmp, 'missing.gtwf'))


if __name__ == '__main__':
    unittest.main()

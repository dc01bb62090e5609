# -*- coding: utf-8 -*-
import unittest
from unittest.mock import patch, mock_open
import json
from copy import deepcopy
from io import StringIO
from gastwin.config import CONFIG_FILENAME, get_config, set_config


class FileStringIO(StringIO):
    """In-memory file whose content survives closing in `store`."""
    def __init__(self, store, *args, **kwargs):
        self.store = store
        super().__init__(*args, **kwargs)

    def close(self):
        self.store['str'] = self.getvalue()
        super().close()


def fake_open(store):
    def open_(path, mode='r', *args, **kwargs):
        return FileStringIO(store, store['str'] if 'r' in mode else '')
    return open_


class TestConfig(unittest.TestCase):
    STORED = {
        'synthetic_dataset': {
            'data_path': '/data/synthetic'
        },
        'runs': {
            'out_path': '/data/runs'
        }
    }

    def test_get_config(self):
        config_str = json.dumps(self.STORED)
        with patch('gastwin.config.open', mock_open(read_data=config_str)) \
                as m:
            self.assertDictEqual(get_config(), self.STORED)
            m.assert_called_once_with(CONFIG_FILENAME, 'r')
            self.assertEqual(get_config('runs'), self.STORED['runs'])
            self.assertEqual(get_config('/runs/'), self.STORED['runs'])
            self.assertEqual(get_config('synthetic_dataset/data_path'),
                             '/data/synthetic')
            with self.assertRaises(KeyError):
                get_config('runs/unknown')

    def test_set_config_value(self):
        store = {'str': json.dumps(self.STORED)}
        with patch('gastwin.config.open', fake_open(store)):
            with patch('gastwin.config.CONFIG', deepcopy(self.STORED)) as mc:
                set_config('runs/out_path', '/tmp/runs', verbose=False)
                expected = deepcopy(self.STORED)
                expected['runs']['out_path'] = '/tmp/runs'
                self.assertDictEqual(mc, expected)
                self.assertDictEqual(json.loads(store['str']), expected)

    def test_set_config_dict_is_copied(self):
        store = {'str': json.dumps(self.STORED)}
        value = {'data_path': '/elsewhere'}
        with patch('gastwin.config.open', fake_open(store)):
            with patch('gastwin.config.CONFIG', deepcopy(self.STORED)) as mc:
                set_config('synthetic_dataset', value, verbose=False)
                value['data_path'] = 'changed'
                self.assertEqual(mc['synthetic_dataset']['data_path'],
                                 '/elsewhere')
                self.assertEqual(json.loads(store['str'])[
                    'synthetic_dataset']['data_path'], '/elsewhere')

    def test_set_config_creates_sections(self):
        store = {'str': json.dumps({})}
        with patch('gastwin.config.open', fake_open(store)):
            with patch('gastwin.config.CONFIG', {}) as mc, \
                    patch('builtins.print') as mprint:
                set_config('runs/out_path', '/tmp/runs')
                self.assertDictEqual(mc, {'runs': {'out_path': '/tmp/runs'}})
                self.assertDictEqual(json.loads(store['str']),
                                     {'runs': {'out_path': '/tmp/runs'}})
                self.assertTrue(mprint.called)


if __name__ == '__main__':
    unittest.main()

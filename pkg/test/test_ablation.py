# -*- coding: utf-8 -*-
import unittest
import numpy as np
from gastwin.ablation import ABLATIONS, TABLES, AblationTable, \
    ablation_config
from gastwin.modelconfig import ModelConfig


class TestAblations(unittest.TestCase):
    def test_rows(self):
        self.assertEqual(TABLES, ('decoder fusion', 'ffn', 'decoder channels',
                                  'classifier source', 'attention pattern',
                                  'loss', 'window'))
        keys = [(r.table, r.row) for r in ABLATIONS]
        self.assertEqual(len(keys), len(set(keys)))
        for row in ABLATIONS:
            self.assertIsInstance(ablation_config(row), ModelConfig)

    def test_fragments(self):
        rows = {(r.table, r.row): r for r in ABLATIONS}
        cfg = ablation_config(rows[('decoder fusion', 'F1+F3')])
        self.assertEqual(cfg.decoder.branch_set, ('F1', 'F3'))
        self.assertEqual(cfg.stages[0].window, (7, 7))
        cfg = ablation_config(rows[('attention pattern', 'LL-LL-EE-EE')])
        self.assertEqual([s.pattern for s in cfg.stages],
                         ['LL', 'LL', 'EE', 'EE'])
        cfg = ablation_config(rows[('window', '3x3')])
        self.assertEqual(cfg.stages[3].window, (3, 3))
        self.assertEqual(ablation_config(rows[('loss', 'Focal')])
                         .loss.seg_loss, 'focal')

    def test_select(self):
        table = AblationTable().select('window')
        self.assertEqual([r.row for r in table.rows], ['7x7', '5x5', '3x3'])
        self.assertEqual(len(AblationTable().select('nothing').rows), 0)

    def test_run(self):
        table = AblationTable(input_size=(512, 512))
        results = table.run()
        self.assertEqual(len(results), len(ABLATIONS))

        def rows(name):
            return results[results['table'] == name].set_index('row')

        channels = rows('decoder channels')['params_m'].tolist()
        self.assertEqual(channels, sorted(channels))
        ffn = rows('ffn')
        self.assertLess(ffn.loc['regular', 'params_m'],
                        ffn.loc['mix', 'params_m'])
        source = rows('classifier source')['params_m']
        self.assertGreater(source['stage 4'], source['stage 3'])
        self.assertGreater(source['stage 3'], source['stage 2'])
        self.assertTrue(np.isnan(results[results['row'] == 'stage 2']
                                 ['macs_dev'].iloc[0]))
        pattern = rows('attention pattern')
        self.assertEqual(pattern.loc['LE', 'gmacs'], pattern.loc['EL',
                                                                 'gmacs'])
        self.assertEqual(len(set(rows('loss')['gmacs'])), 1)
        window = rows('window')
        self.assertEqual(len(set(window['params_m'])), 1)
        self.assertGreater(window.loc['7x7', 'gmacs'],
                           window.loc['3x3', 'gmacs'])
        text = table.to_string()
        self.assertIn('decoder fusion', text)
        self.assertIn('macs_dev compares gmacs with ref_gflops', text)


if __name__ == '__main__':
    unittest.main()

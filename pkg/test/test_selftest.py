# -*- coding: utf-8 -*-
import unittest
from gastwin.selftest import CHECKS, run_selftest, all_passed, \
    format_results


class TestSelftest(unittest.TestCase):
    def test_all_checks_pass(self):
        results = run_selftest()
        self.assertEqual(list(results['name']), list(CHECKS))
        failed = results[results['status'] != 'ok']
        self.assertTrue(all_passed(results), format_results(failed))

    def test_selection(self):
        results = run_selftest(['loss/', 'op/gelu'])
        self.assertTrue(all(n.startswith('loss/') or n == 'op/gelu'
                            for n in results['name']))
        self.assertIn('op/gelu', list(results['name']))
        with self.assertRaises(ValueError):
            run_selftest(['op/no_such_check'])


if __name__ == '__main__':
    unittest.main()

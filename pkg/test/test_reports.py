"""
Copyright (C) 2026 ccopf developers

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program.  If not, see <https://www.gnu.org/licenses/>.
"""
from test import *
import os
import csv
import unittest

import numpy as np

from ccopf.reports import REPORT_SCHEMA, dispatch_report, infeasible_report, read_dispatch_report, \
    validation_report, write_report, read_report, write_csv


class TestReports(unittest.TestCase):
    def setUp(self):
        self.path = setup_test()
        os.makedirs(self.path)
        self.case = desk_case()
        self.dispatch = make_dispatch(self.case, None, AffineControl([70.], [1.]))

    def tearDown(self):
        clean(self.path)

    def test_dispatch_report(self):
        report = dispatch_report(self.dispatch)
        self.assertEqual(report['schema'], REPORT_SCHEMA)
        self.assertEqual(report['status'], 'optimal')
        self.assertAlmostEqual(report['objective'], 648.1)
        np.testing.assert_allclose(report['lines']['mean_mw'], [70, 100])
        self.assertIsNone(report['trace'])
        self.assertLess(report['probability_excess'], 0)

    def test_read_back(self):
        path = os.path.join(self.path, 'dispatch.json')
        write_report(path, dispatch_report(self.dispatch))
        dispatch = read_dispatch_report(read_report(path), self.case)
        np.testing.assert_array_equal(dispatch.control.p_bar, [70])
        self.assertEqual(dispatch.objective, self.dispatch.objective)

    def test_read_errors(self):
        report = dispatch_report(self.dispatch)
        with self.assertRaises(ConfigError) as e:
            read_dispatch_report(dict(report, schema=2), self.case)
        self.assertEqual(e.exception.error, ConfigError.Type.BAD_VALUE)
        with self.assertRaises(ConfigError) as e:
            read_dispatch_report(infeasible_report(self.case, 'ccopf', 'line'), self.case)
        self.assertEqual(e.exception.error, ConfigError.Type.MISSING_KEY)
        with self.assertRaises(ConfigError) as e:
            read_dispatch_report(report, load_fixture('case9w.m'))
        self.assertEqual(e.exception.error, ConfigError.Type.BAD_VALUE)

    def test_validation_report(self):
        factors = factorize_case(self.case)
        mc = monte_carlo(self.dispatch.control, self.case, n=1000, factors=factors)
        report = validation_report(mc, self.dispatch.control, factors)
        self.assertEqual(report['samples'], 1000)
        self.assertEqual(report['risky_lines'], [])
        self.assertEqual(report['risky_generators'], [])
        self.assertEqual(len(report['overload_table']), 2)

    def test_csv(self):
        path = os.path.join(self.path, 'rows.csv')
        write_csv(path, [{'value': 0.1, 'feasible': 1}, {'value': 2., 'feasible': 0}], ['value', 'feasible'])
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows, [['value', 'feasible'], ['0.10000000000000001', '1'], ['2', '0']])


if __name__ == '__main__':
    unittest.main()

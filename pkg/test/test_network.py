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
import unittest

import numpy as np

from ccopf.network import Laplacian, clear_cache, line_sensitivities, flows_from_angles


class TestLaplacian(unittest.TestCase):
    def test_structure(self):
        case = load_case(fixture('case9w.m'))
        matrix = build_laplacian(case).toarray()
        np.testing.assert_allclose(matrix, matrix.T)
        np.testing.assert_allclose(matrix.sum(axis=1), 0, atol=1e-9)
        line = case.lines[0]
        self.assertAlmostEqual(matrix[line.from_bus, line.to_bus], -line.susceptance)

    def test_parallel_lines_accumulate(self):
        buses = (Bus(0, 1), Bus(1, 2, 10.))
        case = GridCase(buses, (Line(0, 1, 2.), Line(1, 0, 3.)), (Generator(0, 0, 100),), slack_bus=1)
        np.testing.assert_allclose(build_laplacian(case).toarray(), [[5, -5], [-5, 5]])

    def test_bad_shape(self):
        with self.assertRaises(ValueError):
            Laplacian(3, np.eye(2))


class TestFactors(unittest.TestCase):
    def setUp(self):
        clear_cache()
        self.case = load_case(fixture('case3_triangle.m'))
        self.factors = factorize_case(self.case)

    def test_triangle_flows(self):
        theta = solve_mean_angles(self.factors, np.array([150., 0, -150]))
        np.testing.assert_allclose(theta, [100, 50, 0])
        np.testing.assert_allclose(flows_from_angles(self.case, theta), [50, 50, 100])

    def test_reduced_solve(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            case = random_grid(rng, int(rng.integers(3, 10)), 2)
            factors = factorize_case(case)
            dense = factors.reduced.toarray()
            rhs = rng.normal(size=case.n - 1)
            x = factors.solve_reduced(rhs)
            np.testing.assert_allclose(dense @ x, rhs, atol=1e-10)
            np.testing.assert_allclose(x, np.linalg.solve(dense, rhs), rtol=1e-8, atol=1e-10)

    def test_multiple_rhs(self):
        rhs = np.eye(3)
        out = self.factors.solve(rhs)
        np.testing.assert_allclose(out[-1], 0)
        np.testing.assert_allclose(out[:2, :2], np.linalg.inv(self.factors.reduced.toarray()))

    def test_wind_columns(self):
        case = load_fixture('case9w.m')
        factors = factorize_case(case)
        self.assertEqual(factors.wind_columns.shape, (case.n, 2))
        np.testing.assert_allclose(factors.wind_columns[case.slack_bus], 0)
        unit = np.zeros(case.n)
        unit[case.wind_buses[1]] = 1
        np.testing.assert_allclose(factors.wind_columns[:, 1], factors.solve(unit))
        self.assertFalse(factors.wind_columns.flags.writeable)

    def test_equilibrate(self):
        case = load_fixture('case9w.m')
        plain = factorize_case(case)
        scaled = factorize_case(case, equilibrate=True)
        self.assertTrue(scaled.equilibrated)
        rhs = np.linspace(-1, 1, case.n - 1)
        np.testing.assert_allclose(scaled.solve_reduced(rhs), plain.solve_reduced(rhs), rtol=1e-9, atol=1e-12)

    def test_cache_by_topology(self):
        again = factorize_case(scale_loads(self.case, 2))
        self.assertIs(again.wind_columns, self.factors.wind_columns)
        self.assertIsNot(again.case, self.factors.case)
        other = factorize_case(load_case(fixture('case3_path.m')))
        self.assertIsNot(other.wind_columns, self.factors.wind_columns)

    def test_singular(self):
        laplacian = Laplacian(3, np.array([[1., -1, 0], [-1, 1, 0], [0, 0, 0]]))
        with self.assertRaises(NetworkError) as e:
            factor(laplacian, 2)
        self.assertEqual(e.exception.error, NetworkError.Type.SINGULAR)

    def test_unbalanced(self):
        with self.assertRaises(NetworkError) as e:
            solve_mean_angles(self.factors, np.array([150., 0, -140]))
        self.assertEqual(e.exception.error, NetworkError.Type.UNBALANCED)


class TestDelta(unittest.TestCase):
    def setUp(self):
        self.case = load_fixture('case9w.m')
        self.factors = factorize_case(self.case)

    def test_delta(self):
        alpha = np.zeros(self.case.n)
        alpha[:3] = 1 / 3
        delta = delta_from_alpha(self.factors, alpha)
        self.assertEqual(delta[self.case.slack_bus], 0)
        np.testing.assert_allclose(self.factors.reduced @ delta[self.factors.keep], alpha[self.factors.keep])

    def test_bad_alpha(self):
        alpha = np.zeros(self.case.n)
        alpha[self.case.slack_bus] = 1
        with self.assertRaises(NetworkError) as e:
            delta_from_alpha(self.factors, alpha)
        self.assertEqual(e.exception.error, NetworkError.Type.SLACK_ALPHA)

        alpha = np.zeros(self.case.n)
        alpha[:2] = 0.6
        with self.assertRaises(NetworkError) as e:
            delta_from_alpha(self.factors, alpha)
        self.assertEqual(e.exception.error, NetworkError.Type.BAD_ALPHA)

    def test_sensitivities(self):
        alpha = np.zeros(self.case.n)
        alpha[0] = 1
        sens = line_sensitivities(self.factors, delta_from_alpha(self.factors, alpha))
        self.assertEqual(sens.shape, (len(self.case.lines), 2))
        # Wind at bus 9 leaves through its only line, whatever the response
        leaf = [l for l, line in enumerate(self.case.lines) if self.case.line_label(l) == '8-9'][0]
        beta = self.case.susceptances[leaf]
        np.testing.assert_allclose(beta * sens[leaf], [0, -1], atol=1e-12)


if __name__ == '__main__':
    unittest.main()

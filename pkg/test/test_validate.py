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
from scipy.stats import norm

from ccopf.validate import DISTRIBUTIONS, standard_distribution, affine_flow_map, mean_error_sweep, \
    std_error_sweep, overload_table
from ccopf.opf import flows_at_realization, side_probabilities
from ccopf.robust import mean_coefficients, mean_margin

STAR_CONTROL = AffineControl([55., 55.], [0.3, 0.7])


class TestDistributions(unittest.TestCase):
    def test_unit_spread(self):
        for name in DISTRIBUTIONS:
            if name == 'cauchy':
                continue
            dist = standard_distribution(name)
            self.assertAlmostEqual(dist.mean(), 0, places=9, msg=name)
            self.assertAlmostEqual(dist.std(), 1, places=9, msg=name)

    def test_cauchy_quantile(self):
        self.assertAlmostEqual(standard_distribution('cauchy').ppf(0.95), norm.ppf(0.95))

    def test_unknown(self):
        with self.assertRaises(ValueError):
            standard_distribution('uniform')
        with self.assertRaises(ValueError):
            standard_distribution('weibull-3')
        with self.assertRaises(ValueError):
            WindDistribution('uniform', [1.])

    def test_sample(self):
        dist = WindDistribution('laplace', [1., 10.])
        first = dist.sample(np.random.default_rng(1), 1000)
        second = dist.sample(np.random.default_rng(1), 1000)
        self.assertEqual(first.shape, (1000, 2))
        np.testing.assert_array_equal(first, second)
        np.testing.assert_allclose(dist.deviation(), [1, 10])
        np.testing.assert_allclose(dist.mean(), 0, atol=1e-12)

    def test_no_wind(self):
        self.assertEqual(WindDistribution('gaussian', []).sample(np.random.default_rng(), 5).shape, (5, 0))


class TestFlowMap(unittest.TestCase):
    def test_matches_network_solve(self):
        rng = np.random.default_rng(21)
        case = random_grid(rng, 9, 3)
        factors = factorize_case(case)
        control = control_for(case, rng)
        flow_map = affine_flow_map(control, factors)
        for _ in range(100):
            omega = rng.normal(size=len(case.wind_farms)) * case.wind_std
            np.testing.assert_allclose(flow_map.flows(omega), flows_at_realization(control, factors, omega),
                                       rtol=1e-8, atol=1e-8)

    def test_outputs(self):
        flow_map = affine_flow_map(STAR_CONTROL, factorize_case(star_case()))
        np.testing.assert_allclose(flow_map.outputs(np.array([[10.], [-20.]])), [[52, 48], [61, 69]])


class TestMonteCarlo(unittest.TestCase):
    def setUp(self):
        self.case = star_case()
        self.factors = factorize_case(self.case)

    def test_thread_independent(self):
        one = monte_carlo(STAR_CONTROL, self.case, n=20000, seed=3, threads=1, chunk_size=1000)
        many = monte_carlo(STAR_CONTROL, self.case, n=20000, seed=3, threads=4, chunk_size=1000)
        for name in ('line_up', 'line_down', 'line_joint', 'gen_over', 'gen_under', 'flow_mean', 'flow_std'):
            np.testing.assert_array_equal(getattr(one, name), getattr(many, name), err_msg=name)

    def test_seed_changes_samples(self):
        first = monte_carlo(STAR_CONTROL, self.case, n=5000, seed=1)
        second = monte_carlo(STAR_CONTROL, self.case, n=5000, seed=2)
        self.assertNotEqual(first.flow_mean[0], second.flow_mean[0])

    def test_gaussian_matches_analytic(self):
        n = 50000
        report = monte_carlo(STAR_CONTROL, self.case, n=n, seed=5)
        analytic = analytic_overload(STAR_CONTROL, self.case, self.factors)
        self.assertAlmostEqual(analytic.p_up[0], norm.sf(5 / 3))
        se = np.sqrt(analytic.p_up[0] * (1 - analytic.p_up[0]) / n)
        self.assertLessEqual(abs(report.line_up[0] - analytic.p_up[0]), 4 * se)
        self.assertAlmostEqual(report.flow_mean[0], 55, delta=4 * 3 / np.sqrt(n))
        self.assertAlmostEqual(report.flow_std[0], 3, delta=0.06)
        self.assertEqual(report.line_up[2], 0)

    def test_deterministic_flows(self):
        case = desk_case()
        control = AffineControl([70.], [1.])
        report = monte_carlo(control, case, n=1000)
        self.assertEqual(report.line_up[1], 0)
        self.assertEqual(report.line_down[1], 0)

        tight = scale_line_limits(case, 0.8)
        report = monte_carlo(control, tight, n=1000)
        self.assertEqual(report.line_up[1], 1)
        self.assertEqual(report.line_joint[1], 1)
        self.assertIn(1, report.risky_lines(tight.line_epsilons))
        self.assertEqual(len(report.risky_generators(tight.gen_epsilons)), 0)

    def test_standard_errors(self):
        report = monte_carlo(STAR_CONTROL, self.case, n=10000)
        np.testing.assert_allclose(report.line_up_se, np.sqrt(report.line_up * (1 - report.line_up) / 10000))
        self.assertEqual(report.samples, 10000)
        self.assertEqual(report.distribution, 'gaussian')

    def test_heavy_tails(self):
        dist = WindDistribution.for_case(self.case, 'cauchy')
        report = monte_carlo(STAR_CONTROL, self.case, dist, n=20000, seed=1)
        self.assertEqual(report.distribution, 'cauchy')
        self.assertGreater(report.gen_under.max() + report.gen_over.max(), 0)

    def test_bad_sample_count(self):
        with self.assertRaises(ValueError):
            monte_carlo(STAR_CONTROL, self.case, n=0)

    def test_overload_table(self):
        report = monte_carlo(STAR_CONTROL, self.case, n=10000)
        rows = overload_table(STAR_CONTROL, self.factors, report)
        self.assertEqual([row['line'] for row in rows], ['1-4', '2-4'])
        self.assertEqual(set(rows[0]), {'line', 'epsilon', 'analytic', 'empirical', 'se'})
        self.assertAlmostEqual(rows[0]['analytic'], norm.sf(5 / 3))
        self.assertEqual(rows[0]['epsilon'], 0.05)


class TestOutOfSample(unittest.TestCase):
    def setUp(self):
        self.case = star_case()
        self.factors = factorize_case(self.case)

    def test_no_error(self):
        up, down = realized_epsilon(STAR_CONTROL, self.case, self.case.wind_mean, self.case.wind_variance)
        analytic = analytic_overload(STAR_CONTROL, self.case)
        np.testing.assert_allclose(up, analytic.p_up)
        np.testing.assert_allclose(down, analytic.p_down)

    def test_mean_shift(self):
        # Wind at bus 2 of the path 1-2-3: a mean error reaches the slack without crossing line 1-2
        case = scale_line_limits(desk_case(), 0.9)
        control = AffineControl([70.], [1.])
        up, down = realized_epsilon(control, case, case.wind_mean + 10, case.wind_variance)
        self.assertAlmostEqual(up[0], norm.sf(20 / 9))
        self.assertEqual(up[1], 1)
        self.assertEqual(down[1], 0)

        up, _ = realized_epsilon(control, case, case.wind_mean, case.wind_variance)
        self.assertEqual(up[1], 0)

    def test_mean_shift_keeps_base_points(self):
        up, down = realized_epsilon(STAR_CONTROL, self.case, self.case.wind_mean + 10, self.case.wind_variance)
        analytic = analytic_overload(STAR_CONTROL, self.case)
        self.assertAlmostEqual(up[0], norm.sf(5 / 3))
        np.testing.assert_allclose(up, analytic.p_up)
        np.testing.assert_allclose(down, analytic.p_down)

    def test_mean_shift_matches_robust_margin(self):
        # The worst mean in a budget set moves each line by exactly its robust mean margin
        case = load_fixture('case9w.m')
        factors = factorize_case(case)
        control = AffineControl([80., 100., 56.25], [0.3, 0.3, 0.4])
        stats = affine_flow_map(control, factors).statistics(case.wind_variance)
        uset = BudgetSet([2., 2.], 1.)
        for l in case.chance_lines:
            value, r = uset.maximize(mean_coefficients(factors, l))
            self.assertAlmostEqual(value, mean_margin(l, 1, uset, factors))
            up, _ = realized_epsilon(control, case, case.wind_mean + r, case.wind_variance, factors)
            moved = stats.mean_mw[l] + case.susceptances[l] * value
            expected, _ = side_probabilities(np.array([moved]), stats.std_mw[l:l + 1], case.flow_limits[l:l + 1],
                                             -case.flow_limits[l:l + 1])
            self.assertAlmostEqual(up[l], expected[0], places=12)

    def test_sweeps(self):
        errors = [0, 0.1, 0.2, 0.4]
        means = mean_error_sweep(STAR_CONTROL, self.factors, errors)
        stds = std_error_sweep(STAR_CONTROL, self.factors, errors)
        self.assertAlmostEqual(means[0], stds[0])
        self.assertAlmostEqual(means[0], norm.sf(5 / 3))
        self.assertTrue(np.all(np.diff(means) >= 0))
        self.assertTrue(np.all(np.diff(stds) >= 0))
        self.assertGreater(stds[-1], stds[0])
        # A larger std error gives sigma * sqrt(1 + V^2)
        self.assertAlmostEqual(stds[-1], norm.sf(5 / (3 * np.sqrt(1.16))))


class TestDistributionShape(unittest.TestCase):
    """ A dispatch sized for Gaussian wind, re-simulated under other fluctuation shapes """
    TARGET = 0.0227

    @classmethod
    def setUpClass(cls):
        cls.case = load_fixture('case4_mesh.m')
        cls.factors = factorize_case(cls.case)
        cls.dispatch = run_cutting_plane(cls.case, factors=cls.factors)

    def worst(self, name: str) -> float:
        dist = WindDistribution.for_case(self.case, name)
        report = monte_carlo(self.dispatch.control, self.case, dist, n=10000, seed=3, factors=self.factors)
        return float(report.line_joint.max())

    def test_gaussian_target(self):
        self.assertTrue(self.dispatch.report.converged)
        np.testing.assert_allclose(self.case.line_epsilons, self.TARGET)
        analytic = analytic_overload(self.dispatch.control, self.case, self.factors)
        self.assertAlmostEqual(analytic.p_up[0], self.TARGET, delta=5e-4)
        se = np.sqrt(self.TARGET * (1 - self.TARGET) / 10000)
        self.assertLessEqual(self.worst('gaussian'), self.TARGET + 4 * se)

    def test_out_of_sample_direction(self):
        # Line 2-1 overloads when the wind is high: the long right tail of Weibull k=1.2 hurts it
        self.assertGreater(self.worst('weibull-1.2'), self.TARGET)
        self.assertLessEqual(self.worst('logistic'), 1.5 * self.TARGET)
        self.assertLessEqual(self.worst('t-2.5'), 1.5 * self.TARGET)


if __name__ == '__main__':
    unittest.main()

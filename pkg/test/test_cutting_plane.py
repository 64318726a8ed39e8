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
from scipy.optimize import minimize_scalar

from ccopf.cutting_plane import TerminationReason, MasterProblem, c_values, c_value, c_gradient, make_cut, \
    relative_errors
from ccopf.qp_backends import get_qp_backend

ETA_05 = 1.6448536269514722
NET_LOAD = 110.
SIGMA = 10.


def star_cost(a: float) -> float:
    """ Best cost for a fixed participation a of the first generator (the mean dispatch is 1-D) """
    spread_a, spread_b = ETA_05 * SIGMA * a, ETA_05 * SIGMA * (1 - a)
    lo = max(spread_a, NET_LOAD - 200 + spread_b, -60 + spread_a)
    hi = min(60 - spread_a, 200 - spread_a, NET_LOAD - spread_b)
    p_a = float(np.clip(320 / 3, lo, hi))
    p_b = NET_LOAD - p_a
    return (.01 * (p_a ** 2 + SIGMA ** 2 * a ** 2) + 10 * p_a
            + .02 * (p_b ** 2 + SIGMA ** 2 * (1 - a) ** 2) + 12 * p_b)


class TestConicFunction(unittest.TestCase):
    def setUp(self):
        self.case = desk_case()
        self.factors = factorize_case(self.case)
        alpha = np.array([1., 0, 0])
        self.delta = delta_from_alpha(self.factors, alpha)

    def test_values(self):
        np.testing.assert_allclose(c_values(self.factors, self.delta), [9, 0], atol=1e-12)
        self.assertAlmostEqual(c_value(self.factors, 0, self.delta), 9)
        np.testing.assert_allclose(c_values(self.factors, self.delta, lines=[1]), [0], atol=1e-12)

    def test_gradient(self):
        g_i, g_j = c_gradient(self.factors, 0, self.delta)
        self.assertAlmostEqual(g_i, -g_j)
        h = 1e-6
        shifted = self.delta.copy()
        shifted[0] += h
        numeric = (c_value(self.factors, 0, shifted) - c_value(self.factors, 0, self.delta)) / h
        self.assertAlmostEqual(g_i, numeric, places=4)

    def test_degenerate_gradient(self):
        with self.assertRaises(SolveError) as e:
            c_gradient(self.factors, 1, self.delta)
        self.assertEqual(e.exception.error, SolveError.Type.DEGENERATE_GRADIENT)

    def test_cut_underestimates(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            case = random_grid(rng, int(rng.integers(4, 10)), 3)
            factors = factorize_case(case)
            count = len(case.generators)
            deltas = []
            for _ in range(5):
                alpha = case.gen_incidence @ rng.dirichlet(np.ones(count))
                deltas.append(delta_from_alpha(factors, alpha))
            for line in range(len(case.lines)):
                try:
                    cut = make_cut(factors, line, deltas[0])
                except SolveError:
                    continue
                self.assertAlmostEqual(cut.evaluate(deltas[0]), cut.value)
                for delta in deltas[1:]:
                    self.assertLessEqual(cut.evaluate(delta), c_value(factors, line, delta) + 1e-9)

    def test_relative_errors(self):
        np.testing.assert_allclose(relative_errors(np.array([2., 0.]), np.array([1., 0.5])), [0.5, -0.5])


class TestMasterProblem(unittest.TestCase):
    def test_layout(self):
        case = desk_case()
        master = MasterProblem(case, factorize_case(case))
        self.assertEqual(master.n_variables, 8)
        problem = master.problem()
        self.assertEqual(problem.n, 8)
        self.assertEqual(len(problem.A), 2 * (case.n - 1) + 2)

    def test_add_cut(self):
        case = load_case(fixture('case9w.m'))
        case = attach_wind(case, load_config(fixture('case9w.json')))
        factors = factorize_case(case)
        master = MasterProblem(case, factors)
        rows = len(master.problem().G)
        delta = delta_from_alpha(factors, case.gen_incidence @ np.full(3, 1 / 3))
        line = int(case.chance_lines[np.argmax(c_values(factors, delta, lines=case.chance_lines))])
        master.add_cut(make_cut(factors, line, delta))
        self.assertEqual(len(master.problem().G), rows + 1)
        self.assertEqual(len(master.problem(include_lines=False).G), rows - 2 * len(case.chance_lines))
        self.assertEqual(len(master.cuts), 1)

    def test_cut_on_unrated_line(self):
        case = star_case()
        factors = factorize_case(case)
        master = MasterProblem(case, factors)
        cut = make_cut(factors, 2, delta_from_alpha(factors, np.array([1., 0, 0, 0])))
        with self.assertRaises(ValueError):
            master.add_cut(cut)


class TestCuttingPlane(unittest.TestCase):
    def test_desk_case(self):
        dispatch = run_cutting_plane(desk_case())
        self.assertAlmostEqual(dispatch.objective, 648.1, places=6)
        np.testing.assert_allclose(dispatch.control.p_bar, [70])
        np.testing.assert_allclose(dispatch.control.alpha, [1])
        self.assertTrue(dispatch.report.converged)
        self.assertEqual(dispatch.mode, 'ccopf')

    def test_star_matches_brute_force(self):
        best = minimize_scalar(star_cost, bounds=(0, 1), method='bounded', options={'xatol': 1e-10})
        dispatch = run_cutting_plane(star_case())
        self.assertTrue(dispatch.report.converged)
        self.assertAlmostEqual(dispatch.objective, best.fun, delta=1e-5 * best.fun)
        self.assertAlmostEqual(dispatch.control.alpha[0], best.x, delta=2e-2)
        margins = chance_margins(dispatch.control, factorize_case(star_case()))
        self.assertGreaterEqual(margins.worst, -1e-4)

    def test_termination(self):
        dispatch = run_cutting_plane(load_fixture('case9w.m'))
        report = dispatch.report
        self.assertTrue(report.converged)
        if report.termination == TerminationReason.CONIC_FEASIBLE:
            self.assertLessEqual(report.conic_violations[-1], 1e-6)
        else:
            self.assertLessEqual(report.chance_violations[-1], 1e-6)
        self.assertEqual(report.iterations, len(report.lower_bounds))
        self.assertGreaterEqual(report.cuts, report.iterations - 1)

    def test_monotone_lower_bounds(self):
        dispatch = run_cutting_plane(load_fixture('case9w.m'))
        report = dispatch.report
        bounds = np.array(report.lower_bounds)
        self.assertTrue(np.all(np.diff(bounds) >= -1e-7 * np.abs(bounds[1:])))
        self.assertLessEqual(bounds[-1], dispatch.objective * (1 + 1e-6))

    def test_iteration_cap(self):
        options = CuttingPlaneOptions(max_iter=1)
        dispatch = run_cutting_plane(load_fixture('case9w.m'), options=options)
        self.assertEqual(dispatch.report.termination, TerminationReason.ITERATION_CAP)
        self.assertFalse(dispatch.report.converged)
        self.assertEqual(dispatch.report.iterations, 1)

    def test_batch(self):
        case = load_fixture('case9w.m')
        single = run_cutting_plane(case)
        batched = run_cutting_plane(case, options=CuttingPlaneOptions(batch=3))
        self.assertTrue(batched.report.converged)
        self.assertLessEqual(batched.report.cuts, 3 * batched.report.iterations)
        self.assertAlmostEqual(batched.objective, single.objective, delta=1e-4 * single.objective)

    def test_infeasible_line(self):
        with self.assertRaises(SolveError) as e:
            run_cutting_plane(scale_line_limits(desk_case(), 0.5))
        self.assertEqual(e.exception.error, SolveError.Type.INFEASIBLE)
        self.assertEqual(e.exception.binding, 'line')

    def test_infeasible_generator(self):
        with self.assertRaises(SolveError) as e:
            run_cutting_plane(scale_loads(desk_case(), 2))
        self.assertEqual(e.exception.binding, 'generator')

    def test_omega_bound(self):
        case = desk_case()
        options = CuttingPlaneOptions(bound=ChanceBoundKind.OMEGA, omega=3.)
        dispatch = run_cutting_plane(case, options=options)
        margins = chance_margins(dispatch.control, factorize_case(case), ChanceBoundKind.OMEGA, 3.)
        self.assertGreaterEqual(margins.worst, -1e-6)

    def test_from_config(self):
        options = CuttingPlaneOptions.from_config(load_config(fixture('case9w.json')).solver)
        self.assertEqual(options.max_iter, 200)
        self.assertEqual(options.bound, ChanceBoundKind.SPLIT)

    def test_custom_backend(self):
        calls = []
        backend = get_qp_backend('interior-point')

        def counting(problem, **options):
            calls.append(problem.name)
            return backend(problem, **options)

        dispatch = run_cutting_plane(desk_case(), qp=counting)
        self.assertEqual(len(calls), dispatch.report.iterations)
        self.assertTrue(all(name.startswith('ccopf') for name in calls))


if __name__ == '__main__':
    unittest.main()

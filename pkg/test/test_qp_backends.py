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
import importlib.util

import numpy as np

from ccopf.qp_backends import QpProblem, QpSolution, QpStatus, BACKENDS, DEFAULT_QP_BACKEND, get_qp_backend, \
    backend_capabilities, phase_one

HAS_CVXPY = importlib.util.find_spec('cvxpy') is not None


def simple_problem(lower=None):
    """ min (x - 1)^2 + (y - 2)^2 subject to x + y = 1 (and x >= lower) """
    G = h = None
    if lower is not None:
        G, h = [[-1., 0.]], [-lower]
    return QpProblem(2 * np.eye(2), [-2., -4.], [[1., 1.]], [1.], G, h, 5., name='simple')


def random_box_qp(rng, n):
    m = rng.normal(size=(n, n))
    P = m @ m.T + 0.1 * np.eye(n)
    q = rng.normal(size=n)
    G = np.vstack([np.eye(n), -np.eye(n)])
    h = np.ones(2 * n)
    return QpProblem(P, q, np.ones((1, n)), [0.5], G, h)


class TestQpProblem(unittest.TestCase):
    def test_shapes(self):
        problem = QpProblem(np.eye(3), np.zeros(3))
        self.assertEqual(problem.A.shape, (0, 3))
        self.assertEqual(problem.h.shape, (0,))
        self.assertEqual(problem.residual(np.ones(3)), 0)

    def test_inconsistent(self):
        with self.assertRaises(ValueError):
            QpProblem(np.eye(2), np.zeros(2), [[1., 1.]], [1., 2.])

    def test_objective(self):
        problem = simple_problem()
        self.assertAlmostEqual(problem.objective(np.array([1., 2.])), 0)
        self.assertAlmostEqual(problem.residual(np.array([1., 2.])), 2)

    def test_phase_one(self):
        self.assertTrue(phase_one(simple_problem(0.5)))
        self.assertFalse(phase_one(QpProblem(np.eye(1), [0.], G=[[1.], [-1.]], h=[0., -1.])))
        self.assertTrue(phase_one(QpProblem(np.eye(1), [0.])))


class TestRegistry(unittest.TestCase):
    def test_backends(self):
        self.assertIn(DEFAULT_QP_BACKEND, BACKENDS)
        self.assertIn('cvxpy', BACKENDS)
        self.assertTrue(callable(get_qp_backend()))

    def test_callable(self):
        def my_solve(problem, **options):
            return QpSolution(QpStatus.OPTIMAL, np.zeros(problem.n), problem.constant)

        self.assertIs(get_qp_backend(my_solve), my_solve)
        self.assertEqual(backend_capabilities(my_solve), {})

    def test_errors(self):
        with self.assertRaises(ValueError):
            get_qp_backend('simplex')
        with self.assertRaises(TypeError):
            get_qp_backend(3)
        with self.assertRaises(ValueError):
            backend_capabilities('simplex')

    def test_capabilities(self):
        self.assertFalse(backend_capabilities('interior-point')['sparse'])


class TestInteriorPoint(unittest.TestCase):
    def setUp(self):
        self.solve = get_qp_backend('interior-point')

    def test_equality_only(self):
        solution = self.solve(simple_problem())
        self.assertEqual(solution.status, QpStatus.OPTIMAL)
        np.testing.assert_allclose(solution.x, [0, 1], atol=1e-8)
        self.assertAlmostEqual(solution.objective, 2)

    def test_active_inequality(self):
        solution = self.solve(simple_problem(0.5))
        self.assertEqual(solution.status, QpStatus.OPTIMAL)
        np.testing.assert_allclose(solution.x, [0.5, 0.5], atol=1e-7)
        self.assertAlmostEqual(solution.objective, 2.5, places=6)

    def test_inactive_inequality(self):
        solution = self.solve(simple_problem(-3))
        np.testing.assert_allclose(solution.x, [0, 1], atol=1e-7)

    def test_linear_program(self):
        problem = QpProblem(np.zeros((2, 2)), [1., 1.], G=[[-1., 0.], [0., -1.], [-1., -1.]], h=[0., 0., -2.])
        solution = self.solve(problem)
        self.assertEqual(solution.status, QpStatus.OPTIMAL)
        self.assertAlmostEqual(solution.objective, 2, places=6)

    def test_infeasible(self):
        problem = QpProblem(np.eye(1), [0.], G=[[1.], [-1.]], h=[0., -1.])
        self.assertEqual(self.solve(problem).status, QpStatus.INFEASIBLE)

    def test_random_kkt(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            problem = random_box_qp(rng, int(rng.integers(2, 8)))
            solution = self.solve(problem)
            self.assertEqual(solution.status, QpStatus.OPTIMAL)
            x, y, z = solution.x, solution.y, solution.z
            self.assertLess(problem.residual(x), 1e-6)
            self.assertTrue(np.all(z >= -1e-9))
            stationarity = problem.P @ x + problem.q + problem.A.T @ y + problem.G.T @ z
            np.testing.assert_allclose(stationarity, 0, atol=1e-5)
            slack = problem.h - problem.G @ x
            self.assertLess(float(np.max(np.abs(z * slack))), 1e-5)


@unittest.skipUnless(HAS_CVXPY, "cvxpy is not installed")
class TestCvxpy(unittest.TestCase):
    def test_agrees_with_interior_point(self):
        rng = np.random.default_rng(5)
        ipm, cvx = get_qp_backend('interior-point'), get_qp_backend('cvxpy')
        for _ in range(5):
            problem = random_box_qp(rng, 4)
            self.assertAlmostEqual(ipm(problem).objective, cvx(problem).objective, places=4)

    def test_infeasible(self):
        problem = QpProblem(np.eye(1), [0.], G=[[1.], [-1.]], h=[0., -1.])
        self.assertEqual(get_qp_backend('cvxpy')(problem).status, QpStatus.INFEASIBLE)


if __name__ == '__main__':
    unittest.main()

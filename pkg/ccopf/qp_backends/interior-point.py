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
import logging
import warnings

import numpy as np
from scipy.linalg import lu_factor, lu_solve, LinAlgWarning

from ccopf.qp_backends import QpProblem, QpSolution, QpStatus, phase_one

logger = logging.getLogger(__name__)

CAPABILITIES = {'warm_start': False, 'sparse': False, 'infeasibility_detection': True}

DEFAULT_TOL = 1e-9
RELAXED_TOL = 1e-6
DEFAULT_MAX_ITER = 100
REGULARIZATION = 1e-9
STEP_FRACTION = 0.99
REFINEMENT_STEPS = 2


class _Kkt:
    """ Regularized reduced KKT matrix [[P + G'WG, A'], [A, 0]] with iterative refinement """

    def __init__(self, problem: QpProblem, w: np.ndarray):
        n, p = problem.n, len(problem.A)
        h = problem.P + problem.G.T @ (w[:, None] * problem.G)
        self.exact = np.block([[h, problem.A.T], [problem.A, np.zeros((p, p))]])
        scale = max(1., float(np.abs(np.diag(h)).max(initial=0.)))
        regularized = self.exact.copy()
        regularized[:n, :n] += REGULARIZATION * scale * np.eye(n)
        regularized[n:, n:] -= REGULARIZATION * scale * np.eye(p)
        with warnings.catch_warnings():
            warnings.simplefilter('error', category=LinAlgWarning)
            self.lu = lu_factor(regularized)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        sol = lu_solve(self.lu, rhs)
        for _ in range(REFINEMENT_STEPS):
            sol = sol + lu_solve(self.lu, rhs - self.exact @ sol)
        return sol


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _norm(v: np.ndarray) -> float:
    return float(np.abs(v).max(initial=0.))


def _equality_qp(problem: QpProblem) -> QpSolution:
    kkt = _Kkt(problem, np.zeros(0))
    sol = kkt.solve(np.concatenate([-problem.q, problem.b]))
    x = sol[:problem.n]
    if not np.all(np.isfinite(x)) or problem.residual(x) > RELAXED_TOL * (1 + _norm(problem.b)):
        return QpSolution(QpStatus.NUMERICAL, x, message="singular equality-constrained system")
    return QpSolution(QpStatus.OPTIMAL, x, problem.objective(x), 1, y=sol[problem.n:], z=np.zeros(0))


def solve(problem: QpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
          check_feasibility: bool = True) -> QpSolution:
    """
    Dense primal-dual interior point method (Mehrotra predictor-corrector).
    Infeasibility is established beforehand by a phase-one LP.
    """
    if check_feasibility and phase_one(problem) is False:
        return QpSolution(QpStatus.INFEASIBLE, message="phase one LP is infeasible")

    P, q, A, b, G, h = problem.P, problem.q, problem.A, problem.b, problem.G, problem.h
    n, m = problem.n, len(h)
    try:
        if m == 0:
            return _equality_qp(problem)

        init = _Kkt(problem, np.ones(m))
        sol = init.solve(np.concatenate([-q + G.T @ h, b]))
        x, y = sol[:n], sol[n:]
        s = np.maximum(h - G @ x, 1.)
        z = np.ones(m)

        scale_b, scale_h, scale_q = 1 + _norm(b), 1 + _norm(h), 1 + _norm(q)
        best = None
        for it in range(1, max_iter + 1):
            r_d = P @ x + q + A.T @ y + G.T @ z
            r_p = A @ x - b
            r_i = G @ x + s - h
            mu = float(s @ z) / m
            objective = problem.objective(x)
            primal = max(_norm(r_p) / scale_b, _norm(r_i) / scale_h)
            dual = _norm(r_d) / scale_q
            gap = m * mu / (1 + abs(objective))
            error = max(primal, dual, gap)
            if best is None or error < best[0]:
                best = (error, x.copy(), y.copy(), z.copy(), it)
            if error <= tol:
                return QpSolution(QpStatus.OPTIMAL, x, objective, it, y=y, z=z)

            w = z / s
            kkt = _Kkt(problem, w)

            def newton(r_c):
                rhs = np.concatenate([-r_d - G.T @ ((z * r_i - r_c) / s), -r_p])
                step = kkt.solve(rhs)
                dx, dy = step[:n], step[n:]
                dz = (z * r_i - r_c) / s + w * (G @ dx)
                ds = -r_i - G @ dx
                return dx, dy, dz, ds

            # Predictor
            dx, dy, dz, ds = newton(s * z)
            a_aff = min(1., _max_step(s, ds), _max_step(z, dz))
            mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / m
            sigma = (mu_aff / mu) ** 3

            # Corrector
            dx, dy, dz, ds = newton(s * z + ds * dz - sigma * mu)
            a = min(1., STEP_FRACTION * min(_max_step(s, ds), _max_step(z, dz)))
            x, y, z, s = x + a * dx, y + a * dy, z + a * dz, s + a * ds
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
                break
            logger.debug("IPM %s iteration %d: primal %.3g dual %.3g gap %.3g step %.3g",
                         problem.name, it, primal, dual, gap, a)
    except (np.linalg.LinAlgError, LinAlgWarning, ValueError) as e:
        return QpSolution(QpStatus.NUMERICAL, message=str(e))

    error, x, y, z, it = best
    if error <= RELAXED_TOL:
        logger.warning("IPM %s stopped at reduced accuracy %.3g", problem.name, error)
        return QpSolution(QpStatus.OPTIMAL, x, problem.objective(x), it, y=y, z=z,
                          message="reduced accuracy", info={'error': error})
    return QpSolution(QpStatus.NUMERICAL, x, problem.objective(x), it,
                      message=f"no convergence after {max_iter} iterations (error {error:.3g})")

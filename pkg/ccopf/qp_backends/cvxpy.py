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

import numpy as np
import cvxpy as cp

from ccopf.qp_backends import QpProblem, QpSolution, QpStatus

logger = logging.getLogger(__name__)

CAPABILITIES = {'warm_start': True, 'sparse': True, 'infeasibility_detection': True}


def solve(problem: QpProblem, solver: str = None, **options) -> QpSolution:
    x = cp.Variable(problem.n)
    objective = 0.5 * cp.quad_form(x, cp.psd_wrap(problem.P)) + problem.q @ x + problem.constant
    constraints = []
    if len(problem.A):
        constraints.append(problem.A @ x == problem.b)
    if len(problem.G):
        constraints.append(problem.G @ x <= problem.h)
    prob = cp.Problem(cp.Minimize(objective), constraints)
    try:
        prob.solve(solver=solver, **options)
    except cp.error.SolverError as e:
        return QpSolution(QpStatus.NUMERICAL, message=str(e))

    logger.debug("cvxpy %s finished with status %s", problem.name, prob.status)
    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return QpSolution(QpStatus.INFEASIBLE, message=prob.status)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or x.value is None:
        return QpSolution(QpStatus.NUMERICAL, message=str(prob.status))
    value = np.asarray(x.value, dtype=float)
    iterations = prob.solver_stats.num_iters if prob.solver_stats and prob.solver_stats.num_iters else 0
    return QpSolution(QpStatus.OPTIMAL, value, problem.objective(value), iterations, message=prob.status)

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
import math
import logging
import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.optimize import linprog

from ccopf.case import GridCase
from ccopf.network import NetworkFactors, factorize_case, line_sensitivities, mean_sensitivities, flows_from_angles
from ccopf.opf import AffineControl, Dispatch, ChanceBoundKind, multipliers, generator_half_width_weights, \
    network_state
from ccopf.cutting_plane import CuttingPlaneOptions, MasterProblem, cutting_plane_loop, infeasibility_error
from ccopf.qp_backends import phase_one, BACKEND_TYPING
from ccopf.errors import UncertaintySetError, SolveError

from typing import Optional, Tuple, Union

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BudgetSet:
    """
    { r : |r_k| <= gamma_k, sum_k |r_k| / gamma_k <= Gamma }.
    A zero gamma_k pins r_k to zero; Gamma = 0 gives the set {0}.
    """
    gamma: np.ndarray
    Gamma: float

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float).ravel()
        if np.any(gamma < 0) or not np.all(np.isfinite(gamma)) or not self.Gamma >= 0:
            raise UncertaintySetError(self, UncertaintySetError.Type.BAD_BUDGET,
                                      f"gamma={gamma.tolist()}, Gamma={self.Gamma}")
        gamma.flags.writeable = False
        object.__setattr__(self, 'gamma', gamma)
        object.__setattr__(self, 'Gamma', float(self.Gamma))

    @property
    def dimension(self) -> int:
        return len(self.gamma)

    def maximize(self, c: np.ndarray) -> Tuple[float, np.ndarray]:
        """ max c'r over the set, by fractional knapsack on |c_k| gamma_k """
        c = np.asarray(c, dtype=float)
        worth = np.abs(c) * self.gamma
        order = np.argsort(-worth, kind='stable')
        share = np.zeros(len(c))
        full = min(int(math.floor(self.Gamma)), len(c))
        share[order[:full]] = 1.
        if full < len(c):
            share[order[full]] = self.Gamma - full
        r = np.sign(c) * self.gamma * share
        return float(worth @ share), r

    def min_component(self) -> np.ndarray:
        """ Largest decrease the set allows in each coordinate """
        return self.gamma * min(1., self.Gamma)

    def with_budget(self, Gamma: float) -> 'BudgetSet':
        return dataclasses.replace(self, Gamma=Gamma)


@dataclass(frozen=True, eq=False)
class EllipsoidSet:
    """ { r : r'A r <= b } with A symmetric positive-definite """
    A: np.ndarray
    b: float

    def __post_init__(self):
        a = np.array(self.A, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.allclose(a, a.T, atol=SYMMETRY_TOL):
            raise UncertaintySetError(self, UncertaintySetError.Type.NOT_POSITIVE_DEFINITE)
        if not self.b >= 0:
            raise UncertaintySetError(self, UncertaintySetError.Type.BAD_RADIUS, self.b)
        try:
            factor = cho_factor(a) if a.size else None
        except LinAlgError:
            raise UncertaintySetError(self, UncertaintySetError.Type.NOT_POSITIVE_DEFINITE) from None
        a.flags.writeable = False
        object.__setattr__(self, 'A', a)
        object.__setattr__(self, 'b', float(self.b))
        object.__setattr__(self, '_factor', factor)

    @property
    def dimension(self) -> int:
        return len(self.A)

    def maximize(self, c: np.ndarray) -> Tuple[float, np.ndarray]:
        """ sqrt(b c'A^-1 c), attained on the boundary where the normal is parallel to c """
        c = np.asarray(c, dtype=float)
        if c.size == 0:
            return 0., np.zeros(0)
        direction = cho_solve(self._factor, c)
        norm2 = float(c @ direction)
        if norm2 <= 0 or self.b == 0:
            return 0., np.zeros(len(c))
        value = math.sqrt(self.b * norm2)
        return value, direction * math.sqrt(self.b / norm2)

    def min_component(self) -> np.ndarray:
        if self.A.size == 0:
            return np.zeros(0)
        inverse_diagonal = np.diag(cho_solve(self._factor, np.eye(len(self.A))))
        return np.sqrt(self.b * inverse_diagonal)


UncertaintySet = Union[BudgetSet, EllipsoidSet]


def zero_set(dimension: int) -> BudgetSet:
    return BudgetSet(np.zeros(dimension), 0.)


def uncertainty_set(params: Optional[dict], dimension: int) -> UncertaintySet:
    """ From a configuration entry ({"kind": "budget", ...} or {"kind": "ellipsoid", ...}); None is {0} """
    if params is None:
        return zero_set(dimension)
    if params['kind'] == 'budget':
        result = BudgetSet(params['gamma'], params['Gamma'])
    elif params['kind'] == 'ellipsoid':
        result = EllipsoidSet(params['A'], params['b'])
    else:
        raise ValueError(f"Unknown uncertainty set kind: {params['kind']}")
    check_dimension(result, dimension)
    return result


def sets_from_config(robust, dimension: int) -> Tuple[UncertaintySet, UncertaintySet]:
    """ Mean and variance sets from a `ccopf.config.RobustConfig` """
    if robust is None:
        return zero_set(dimension), zero_set(dimension)
    return uncertainty_set(robust.mean, dimension), uncertainty_set(robust.variance, dimension)


def check_dimension(uset: UncertaintySet, dimension: int):
    if uset.dimension != dimension:
        raise UncertaintySetError(uset, UncertaintySetError.Type.DIMENSION, uset.dimension)


def check_variance_set(uset: UncertaintySet, variance: np.ndarray):
    """ Reject variance windows that reach below zero for some farm """
    check_dimension(uset, len(variance))
    low = np.asarray(variance) - uset.min_component()
    bad = np.flatnonzero(low < -1e-12 * np.maximum(1., variance))
    if len(bad):
        raise UncertaintySetError(uset, UncertaintySetError.Type.NEGATIVE_VARIANCE, int(bad[0]))


######################################################################################################
# Oracles
######################################################################################################

def mean_coefficients(factors: NetworkFactors, line: int, direction: int = 1) -> np.ndarray:
    """ Angle-difference sensitivity of a line to each farm's mean """
    return direction * mean_sensitivities(factors)[line]


def mean_margin(line: int, direction: int, uset: UncertaintySet, factors: NetworkFactors) -> float:
    """ Largest angle difference shift (direction +1: from->to) a mean error in the set can cause """
    return uset.maximize(mean_coefficients(factors, line, direction))[0]


def mean_margins(factors: NetworkFactors, uset: UncertaintySet, lines) -> Tuple[np.ndarray, np.ndarray]:
    up = np.array([mean_margin(l, 1, uset, factors) for l in lines])
    down = np.array([mean_margin(l, -1, uset, factors) for l in lines])
    return up, down


def worst_case_variance(line: int, delta: np.ndarray, uset: UncertaintySet,
                        factors: NetworkFactors) -> Tuple[np.ndarray, float]:
    """
    Variance error v in the set maximizing sum_k v_k w_k, w_k = (pi_ik - pi_jk - delta_i + delta_j)^2.
    :return: The maximizer and the maximum.
    """
    weights = line_sensitivities(factors, delta)[line] ** 2
    value, v = uset.maximize(weights)
    return v, value


def budget_dual_value(weights: np.ndarray, uset: BudgetSet) -> float:
    """
    Dual LP of the budget maximization:
    min Gamma a + sum_k gamma_k b_k  s.t.  a + gamma_k b_k >= gamma_k w_k,  a, b >= 0.
    """
    weights = np.asarray(weights, dtype=float)
    k = len(weights)
    cost = np.concatenate([[uset.Gamma], uset.gamma])
    a_ub = -np.hstack([np.ones((k, 1)), np.diag(uset.gamma)])
    result = linprog(cost, A_ub=a_ub, b_ub=-uset.gamma * weights, bounds=(0, None), method='highs')
    if result.status != 0:
        raise SolveError('budget-dual', SolveError.Type.NUMERICAL, result.message)
    return float(result.fun)


def generator_variance(case: GridCase, variance_set: UncertaintySet) -> float:
    """ Worst total variance over the set (all-ones weights) """
    return case.total_wind_variance + variance_set.maximize(np.ones(len(case.wind_farms)))[0]


def robust_line_margins(control: AffineControl, factors: NetworkFactors, mean_set: UncertaintySet,
                        variance_set: UncertaintySet, kind: ChanceBoundKind = ChanceBoundKind.SPLIT,
                        omega: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per line, the slack of the robust chance constraint in the from->to and to->from directions:
    f_max - [+-mean + beta r + eta beta (sum sigma^2 w + max_v v.w)^1/2]. Unrated lines get infinity.
    """
    case = factors.case
    theta, delta = network_state(control, factors)
    mean = flows_from_angles(case, theta)
    sens = line_sensitivities(factors, delta)
    beta = case.susceptances
    up, down = np.full(len(case.lines), np.inf), np.full(len(case.lines), np.inf)
    lines = case.chance_lines
    line_eta = multipliers(case.line_epsilons[lines], kind, omega)
    for k, l in enumerate(lines):
        weights = sens[l] ** 2
        std = math.sqrt(max(float(case.wind_variance @ weights) + variance_set.maximize(weights)[0], 0.))
        spread = line_eta[k] * beta[l] * std
        limit = case.flow_limits[l]
        up[l] = limit - (mean[l] + beta[l] * mean_margin(l, 1, mean_set, factors) + spread)
        down[l] = limit - (-mean[l] + beta[l] * mean_margin(l, -1, mean_set, factors) + spread)
    return up, down


def robust_line_margin(line: int, control: AffineControl, factors: NetworkFactors, mean_set: UncertaintySet,
                       variance_set: UncertaintySet, kind: ChanceBoundKind = ChanceBoundKind.SPLIT,
                       omega: Optional[float] = None) -> Tuple[float, float]:
    """ The (from->to, to->from) slack of one line, see `robust_line_margins` """
    up, down = robust_line_margins(control, factors, mean_set, variance_set, kind, omega)
    return float(up[line]), float(down[line])


######################################################################################################
# Robust cutting plane
######################################################################################################

def robust_chance_violation(dispatch: Dispatch, factors: NetworkFactors, mean_set: UncertaintySet,
                            variance_set: UncertaintySet, options: CuttingPlaneOptions,
                            total_variance: float) -> float:
    """ Largest robust shortfall relative to the limit, over lines (both directions) and generators """
    case, control = dispatch.case, dispatch.control
    up, down = robust_line_margins(control, factors, mean_set, variance_set, options.bound, options.omega)
    scale = np.where(np.isfinite(case.flow_limits), np.maximum(case.flow_limits, 1.), 1.)
    line = -np.minimum(up, down) / scale

    _, scaled = generator_half_width_weights(case, options.alpha_convention)
    half = multipliers(case.gen_epsilons, options.bound, options.omega) * math.sqrt(total_variance)
    if scaled:
        half = half * control.alpha
    gen_margin = np.minimum(case.p_max - control.p_bar, control.p_bar - case.p_min) - half
    gen = -gen_margin / np.maximum(case.p_max, 1.)
    return float(max(line.max(initial=0.), gen.max(initial=0.), 0.))


def run_robust_cutting_plane(case: GridCase, mean_set: UncertaintySet, variance_set: UncertaintySet,
                             qp: BACKEND_TYPING = None, options: CuttingPlaneOptions = CuttingPlaneOptions(),
                             factors: Optional[NetworkFactors] = None) -> Dispatch:
    """
    Chance constraints required for every wind mean in `mean_set` and variance in `variance_set`
    (errors around the case's mu and sigma^2). The objective keeps the nominal variances.
    """
    if factors is None:
        factors = factorize_case(case)
    check_dimension(mean_set, len(case.wind_farms))
    check_variance_set(variance_set, case.wind_variance)

    lines = case.chance_lines
    margins = mean_margins(factors, mean_set, lines)
    total_variance = generator_variance(case, variance_set)
    logger.info("Robust margins on %s: largest %.6g, generator variance %.6g (nominal %.6g)", case.name,
                float(np.max(np.concatenate(margins), initial=0.)), total_variance, case.total_wind_variance)

    master = MasterProblem(case, factors, options, margins, total_variance, name=f'robust[{case.name}]')

    def oracle(factors: NetworkFactors, lines: np.ndarray, delta: np.ndarray):
        sens = line_sensitivities(factors, delta)[lines]
        variances = np.empty(sens.shape)
        for k in range(len(lines)):
            v, _ = variance_set.maximize(sens[k] ** 2)
            variances[k] = np.maximum(case.wind_variance + v, 0.)
        return np.sqrt(np.sum(variances * sens ** 2, axis=1)), variances

    def infeasible(master: MasterProblem) -> SolveError:
        nominal = MasterProblem(case, factors, options, name=f'ccopf[{case.name}]')
        if phase_one(nominal.problem()) is not False:
            return SolveError(master.name, SolveError.Type.ROBUST_INFEASIBLE)
        return infeasibility_error(nominal)

    return cutting_plane_loop(master, qp, oracle,
                              lambda dispatch: robust_chance_violation(dispatch, factors, mean_set, variance_set,
                                                                       options, total_variance),
                              'robust', infeasible)

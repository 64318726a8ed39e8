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
from enum import Enum
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from ccopf.case import GridCase
from ccopf.network import NetworkFactors, factorize_case, solve_mean_angles, delta_from_alpha, \
    line_sensitivities, flows_from_angles
from ccopf.qp_backends import QpProblem, QpStatus, get_qp_backend, BACKEND_TYPING
from ccopf.errors import NetworkError, SolveError

from typing import Optional, Tuple, Any

logger = logging.getLogger(__name__)

VIABILITY_TOL = 1e-8
ALPHA_TOL = 1e-8
HEADROOM_TOL = 1e-6

ALPHA_CONVENTIONS = ('appendix', 'main-text')


def eta(r) -> np.ndarray:
    """ Standard-normal quantile of 1 - r: the number of standard deviations allowed by tolerance r """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r >= 1):
        raise ValueError(f"probability must lie strictly inside (0, 1), got {r}")
    value = norm.isf(r)
    return float(value) if value.ndim == 0 else value


def deterministic_tol(limit) -> np.ndarray:
    """ Standard deviations at or below this value (MW) are treated as zero, as are flow excesses below it """
    return 1e-6 * np.maximum(1., np.where(np.isfinite(limit), limit, 1.))


######################################################################################################
# Types
######################################################################################################

@dataclass(frozen=True, eq=False)
class AffineControl:
    """
    Generator outputs p = p_bar - alpha * sum(omega).
    Both vectors are indexed by generator; `on_buses` spreads them over buses.
    """
    p_bar: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        p_bar = np.array(self.p_bar, dtype=float)
        alpha = np.array(self.alpha, dtype=float)
        if p_bar.shape != alpha.shape or p_bar.ndim != 1:
            raise ValueError(f"p_bar {p_bar.shape} and alpha {alpha.shape} must be vectors of the same length")
        if np.any(p_bar < 0):
            raise ValueError(f"p_bar must be non-negative, got {p_bar.min()}")
        total = float(np.sum(alpha))
        if np.any(alpha < 0) or abs(total - 1.) > ALPHA_TOL:
            raise NetworkError(self, NetworkError.Type.BAD_ALPHA, f"min {alpha.min(initial=0.):.3g}, sum {total:.12g}")
        p_bar.flags.writeable = False
        alpha.flags.writeable = False
        object.__setattr__(self, 'p_bar', p_bar)
        object.__setattr__(self, 'alpha', alpha)

    @classmethod
    def from_solver(cls, p_bar: np.ndarray, alpha: np.ndarray) -> 'AffineControl':
        """ Clip solver round-off below zero and renormalize alpha """
        p_bar = np.maximum(np.asarray(p_bar, dtype=float), 0.)
        alpha = np.maximum(np.asarray(alpha, dtype=float), 0.)
        return cls(p_bar, alpha / alpha.sum())

    def on_buses(self, case: GridCase) -> Tuple[np.ndarray, np.ndarray]:
        return case.gen_incidence @ self.p_bar, case.gen_incidence @ self.alpha

    def __str__(self):
        return f"{self.__class__.__name__}(p_bar={np.round(self.p_bar, 6).tolist()}, " \
               f"alpha={np.round(self.alpha, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class FlowStat:
    """ Per-line flow mean and standard deviation (MW) """
    mean_mw: np.ndarray
    std_mw: np.ndarray


@dataclass(frozen=True, eq=False)
class GeneratorStat:
    mean_mw: np.ndarray
    std_mw: np.ndarray


class ChanceBoundKind(Enum):
    SPLIT = 'split'
    OMEGA = 'omega'


@dataclass(frozen=True, eq=False)
class ChanceMargins:
    """ Slack of every chance constraint; non-negative means satisfied """
    line: np.ndarray
    generator: np.ndarray

    @property
    def worst(self) -> float:
        return float(min(self.line.min(initial=np.inf), self.generator.min(initial=np.inf)))


@dataclass(eq=False)
class Dispatch:
    control: AffineControl
    theta_bar: np.ndarray
    delta: np.ndarray
    flow_stats: FlowStat
    gen_stats: GeneratorStat
    objective: float
    mode: str = 'ccopf'
    report: Any = None
    case: Optional[GridCase] = field(default=None, repr=False)


######################################################################################################
# Closed-form statistics
######################################################################################################

def check_viability(control: AffineControl, case: GridCase) -> float:
    """ Balance residual sum(p_bar + mu - d) """
    return float(np.sum(control.p_bar) + np.sum(case.wind_mean) - case.total_load)


def _require_viable(control: AffineControl, case: GridCase):
    residual = check_viability(control, case)
    if abs(residual) > VIABILITY_TOL * max(1., case.total_load):
        raise NetworkError(control, NetworkError.Type.NOT_VIABLE, residual)


def mean_injection(control: AffineControl, case: GridCase) -> np.ndarray:
    p_bus, _ = control.on_buses(case)
    return p_bus + case.wind_injection() - case.loads


def network_state(control: AffineControl, factors: NetworkFactors) -> Tuple[np.ndarray, np.ndarray]:
    """ Mean angles and delta of a viable control """
    case = factors.case
    _require_viable(control, case)
    _, alpha_bus = control.on_buses(case)
    theta = solve_mean_angles(factors, mean_injection(control, case))
    return theta, delta_from_alpha(factors, alpha_bus)


def flow_statistics(control: AffineControl, factors: NetworkFactors) -> FlowStat:
    theta, delta = network_state(control, factors)
    return _flow_stat(factors, theta, delta)


def _flow_stat(factors: NetworkFactors, theta: np.ndarray, delta: np.ndarray) -> FlowStat:
    case = factors.case
    sens = line_sensitivities(factors, delta)
    variance = case.susceptances ** 2 * (sens ** 2 @ case.wind_variance)
    return FlowStat(flows_from_angles(case, theta), np.sqrt(variance))


def generator_statistics(control: AffineControl, case: GridCase) -> GeneratorStat:
    return GeneratorStat(control.p_bar.copy(), control.alpha * np.sqrt(case.total_wind_variance))


def expected_cost(control: AffineControl, case: GridCase) -> float:
    c = case.cost_coefficients
    second_moment = control.p_bar ** 2 + case.total_wind_variance * control.alpha ** 2
    return float(np.sum(c[:, 0] * second_moment + c[:, 1] * control.p_bar + c[:, 2]))


def flows_at_realization(control: AffineControl, factors: NetworkFactors, omega: np.ndarray) -> np.ndarray:
    """ Flows under the wind deviation vector omega, by a direct network solve """
    case = factors.case
    _require_viable(control, case)
    omega = np.asarray(omega, dtype=float)
    p_bus, alpha_bus = control.on_buses(case)
    injection = p_bus - alpha_bus * np.sum(omega) + case.wind_injection(case.wind_mean + omega) - case.loads
    return flows_from_angles(case, solve_mean_angles(factors, injection))


######################################################################################################
# Chance constraints
######################################################################################################

def multipliers(epsilon: np.ndarray, kind: ChanceBoundKind = ChanceBoundKind.SPLIT,
                omega: Optional[float] = None) -> np.ndarray:
    """ eta(epsilon) per constraint, or the conservative coefficient omega for non-Gaussian wind """
    epsilon = np.asarray(epsilon, dtype=float)
    if epsilon.size == 0:
        return np.zeros(epsilon.shape)
    base = np.atleast_1d(eta(epsilon))
    if kind == ChanceBoundKind.SPLIT:
        return base
    if omega is None or omega < base.max():
        raise ValueError(f"omega must be supplied and at least {base.max():.6g}, got {omega}")
    return np.full(epsilon.shape, float(omega))


def generator_half_width_weights(case: GridCase, alpha_convention: str = 'appendix') -> Tuple[float, bool]:
    """
    :return: sqrt(total wind variance) and whether the half-width scales with alpha.
    """
    if alpha_convention not in ALPHA_CONVENTIONS:
        raise ValueError(f"alpha convention must be one of {ALPHA_CONVENTIONS}, got {alpha_convention!r}")
    return float(np.sqrt(case.total_wind_variance)), alpha_convention == 'appendix'


def chance_margins(control: AffineControl, factors: NetworkFactors,
                   kind: ChanceBoundKind = ChanceBoundKind.SPLIT, omega: Optional[float] = None,
                   alpha_convention: str = 'appendix', flow_stats: Optional[FlowStat] = None) -> ChanceMargins:
    """
    Line slack f_max - |mean| - eta * std and generator slack
    min(p_max - p_bar, p_bar - p_min) - eta * alpha * sqrt(sum sigma^2).
    Lines without a rating get an infinite slack.
    """
    case = factors.case
    if flow_stats is None:
        flow_stats = flow_statistics(control, factors)
    line_eta = multipliers(case.line_epsilons, kind, omega)
    with np.errstate(invalid='ignore'):
        line = case.flow_limits - np.abs(flow_stats.mean_mw) - line_eta * flow_stats.std_mw
    line = np.where(np.isfinite(case.flow_limits), line, np.inf)

    root, scaled = generator_half_width_weights(case, alpha_convention)
    half_width = multipliers(case.gen_epsilons, kind, omega) * root
    if scaled:
        half_width = half_width * control.alpha
    gen = np.minimum(case.p_max - control.p_bar, control.p_bar - case.p_min) - half_width
    return ChanceMargins(line, gen)


def side_probabilities(mean: np.ndarray, std: np.ndarray, upper: np.ndarray,
                       lower: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gaussian P(X > upper) and P(X < lower); a zero std gives indicator values.
    Infinite bounds give zero probability.
    """
    mean, std = np.asarray(mean, dtype=float), np.asarray(std, dtype=float)
    upper, lower = np.broadcast_to(upper, mean.shape), np.broadcast_to(lower, mean.shape)
    tol = deterministic_tol(np.abs(upper))
    random = std > tol
    safe = np.where(random, std, 1.)
    with np.errstate(invalid='ignore'):
        p_up = np.where(random, norm.sf((upper - mean) / safe), (mean > upper + tol).astype(float))
        p_down = np.where(random, norm.cdf((lower - mean) / safe), (mean < lower - tol).astype(float))
    return np.nan_to_num(p_up), np.nan_to_num(p_down)


def line_probabilities(case: GridCase, flow_stats: FlowStat) -> Tuple[np.ndarray, np.ndarray]:
    return side_probabilities(flow_stats.mean_mw, flow_stats.std_mw, case.flow_limits, -case.flow_limits)


def generator_probabilities(case: GridCase, gen_stats: GeneratorStat) -> Tuple[np.ndarray, np.ndarray]:
    return side_probabilities(gen_stats.mean_mw, gen_stats.std_mw, case.p_max, case.p_min)


def probability_excess(dispatch: 'Dispatch') -> float:
    """ Largest per-side overload probability above its tolerance, over lines and generators """
    case = dispatch.case
    line_up, line_down = line_probabilities(case, dispatch.flow_stats)
    gen_up, gen_down = generator_probabilities(case, dispatch.gen_stats)
    excess = [np.maximum(line_up, line_down) - case.line_epsilons,
              np.maximum(gen_up, gen_down) - case.gen_epsilons]
    return float(max(e.max(initial=-np.inf) for e in excess))


######################################################################################################
# Dispatch assembly and standard OPF
######################################################################################################

def make_dispatch(case: GridCase, factors: Optional[NetworkFactors], control: AffineControl,
                  report: Any = None, mode: str = 'ccopf') -> Dispatch:
    if factors is None:
        factors = factorize_case(case)
    elif factors.case is not case:
        factors = factors.with_case(case)
    theta, delta = network_state(control, factors)
    return Dispatch(control, theta, delta, _flow_stat(factors, theta, delta), generator_statistics(control, case),
                    expected_cost(control, case), mode, report, case)


def generator_flow_matrix(factors: NetworkFactors) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flows as an affine function of generator outputs (wind at its mean):
    f = M p + f0, valid whenever sum(p) balances the net load.
    """
    case = factors.case
    beta = case.susceptances[:, None]
    theta_gen = factors.solve(case.gen_incidence)
    m = beta * (theta_gen[case.line_from] - theta_gen[case.line_to])
    f0 = flows_from_angles(case, factors.solve(case.wind_injection() - case.loads))
    return m, f0


def rebalance(case: GridCase, p: np.ndarray) -> np.ndarray:
    """ Clip solver output to the generator bounds and put the balance round-off on the roomiest unit """
    p = np.clip(np.asarray(p, dtype=float), case.p_min, case.p_max)
    mismatch = case.total_load - float(np.sum(case.wind_mean)) - float(np.sum(p))
    k = int(np.argmax(np.minimum(case.p_max - p, p - case.p_min)))
    p[k] += mismatch
    return p


def diagnose_infeasibility(case: GridCase, net_load: float) -> str:
    """ Constraint class responsible for an infeasible deterministic core """
    if not np.sum(case.p_min) - 1e-9 <= net_load <= np.sum(case.p_max) + 1e-9:
        return 'generator'
    return 'line'


def standard_alpha(case: GridCase, p: np.ndarray, ramping: str = 'headroom') -> np.ndarray:
    """ Equal ramping rates: uniform over generators with room in both directions, or over all """
    count = len(case.generators)
    if ramping == 'all':
        return np.full(count, 1. / count)
    elif ramping != 'headroom':
        raise ValueError(f"ramping rule must be 'headroom' or 'all', got {ramping!r}")
    free = (p > case.p_min + HEADROOM_TOL) & (p < case.p_max - HEADROOM_TOL)
    if not np.any(free):
        logger.warning("No generator has headroom at the standard OPF point; ramping spread over all")
        free[:] = True
    return free / free.sum()


def solve_standard_opf(case: GridCase, qp: BACKEND_TYPING = None, ramping: str = 'headroom',
                       factors: Optional[NetworkFactors] = None) -> Dispatch:
    """
    Deterministic OPF with wind fixed at its mean.
    :param qp: QP backend name or solve callable.
    :param ramping: How alpha is chosen afterwards ('headroom' or 'all').
    """
    if factors is None:
        factors = factorize_case(case)
    solve = get_qp_backend(qp)
    c = case.cost_coefficients
    count = len(case.generators)
    net_load = case.total_load - float(np.sum(case.wind_mean))

    m, f0 = generator_flow_matrix(factors)
    limited = case.chance_lines
    eye = np.eye(count)
    g = np.vstack([m[limited], -m[limited], eye, -eye])
    h = np.concatenate([case.flow_limits[limited] - f0[limited], case.flow_limits[limited] + f0[limited],
                        case.p_max, -case.p_min])
    problem = QpProblem(np.diag(2 * c[:, 0]), c[:, 1], np.ones((1, count)), np.array([net_load]), g, h,
                        float(np.sum(c[:, 2])), name=f'standard-opf[{case.name}]')
    solution = solve(problem)
    if solution.status == QpStatus.INFEASIBLE:
        raise SolveError(problem.name, SolveError.Type.INFEASIBLE, binding=diagnose_infeasibility(case, net_load))
    elif solution.status != QpStatus.OPTIMAL:
        raise SolveError(problem.name, SolveError.Type.NUMERICAL, solution.message)

    p = rebalance(case, solution.x)
    control = AffineControl(p, standard_alpha(case, p, ramping))
    logger.info("Standard OPF on %s: cost %.6g", case.name, solution.objective)
    return make_dispatch(case, factors, control, mode='standard')

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
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import stats
from scipy.special import gamma as gamma_function

from ccopf.case import GridCase
from ccopf.config import thread_count
from ccopf.network import NetworkFactors, factorize_case, line_sensitivities, mean_sensitivities, flows_from_angles
from ccopf.opf import AffineControl, FlowStat, network_state, side_probabilities, line_probabilities

from typing import Optional, Sequence, List, Tuple

logger = logging.getLogger(__name__)

DISTRIBUTIONS = ('gaussian', 'laplace', 'logistic', 'weibull-1.2', 'weibull-2', 'weibull-4', 't-2.5', 'cauchy')
CHUNK_SIZE = 8192
T_DEGREES = 2.5
CAUCHY_QUANTILE = 0.95


def _weibull_standard(shape: float):
    """ Weibull with unit variance, shifted to zero mean """
    scale = 1. / math.sqrt(gamma_function(1 + 2 / shape) - gamma_function(1 + 1 / shape) ** 2)
    return stats.weibull_min(shape, loc=-scale * gamma_function(1 + 1 / shape), scale=scale)


def standard_distribution(name: str):
    """
    Zero-centred fluctuation of unit standard deviation (Cauchy: 95th percentile equal to the
    standard normal's), as a frozen scipy distribution.
    """
    if name == 'gaussian':
        return stats.norm()
    elif name == 'laplace':
        return stats.laplace(scale=1 / math.sqrt(2))
    elif name == 'logistic':
        return stats.logistic(scale=math.sqrt(3) / math.pi)
    elif name.startswith('weibull-') and name in DISTRIBUTIONS:
        return _weibull_standard(float(name.split('-', 1)[1]))
    elif name == 't-2.5':
        return stats.t(T_DEGREES, scale=math.sqrt((T_DEGREES - 2) / T_DEGREES))
    elif name == 'cauchy':
        return stats.cauchy(scale=stats.norm.ppf(CAUCHY_QUANTILE) / math.tan(math.pi * (CAUCHY_QUANTILE - 0.5)))
    raise ValueError(f"No such distribution: {name}. Choose one of the followings: {DISTRIBUTIONS}.")


@dataclass(frozen=True, eq=False)
class WindDistribution:
    """ Independent per-farm wind deviations from the forecast mean, scaled by each farm's sigma """
    name: str
    std: np.ndarray

    def __post_init__(self):
        standard_distribution(self.name)
        std = np.array(self.std, dtype=float)
        std.flags.writeable = False
        object.__setattr__(self, 'std', std)

    @classmethod
    def for_case(cls, case: GridCase, name: str = 'gaussian') -> 'WindDistribution':
        return cls(name, case.wind_std)

    @property
    def standard(self):
        return standard_distribution(self.name)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """ Deviations of shape (size, |wind|) """
        if len(self.std) == 0:
            return np.zeros((size, 0))
        z = self.standard.rvs(size=(size, len(self.std)), random_state=rng)
        return z * self.std

    def mean(self) -> np.ndarray:
        return self.standard.mean() * self.std

    def deviation(self) -> np.ndarray:
        return self.standard.std() * self.std


######################################################################################################
# Affine flow map
######################################################################################################

@dataclass(frozen=True, eq=False)
class FlowMap:
    """ f(omega) = intercept + slopes @ omega, p(omega) = p_bar - alpha * sum(omega) """
    intercept: np.ndarray
    slopes: np.ndarray
    p_bar: np.ndarray
    alpha: np.ndarray

    def flows(self, omega: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(omega) @ self.slopes.T

    def outputs(self, omega: np.ndarray) -> np.ndarray:
        total = np.sum(np.asarray(omega), axis=-1)
        return self.p_bar - np.multiply.outer(total, self.alpha)

    def statistics(self, variance: np.ndarray) -> FlowStat:
        return FlowStat(self.intercept.copy(), np.sqrt(self.slopes ** 2 @ variance))


def affine_flow_map(control: AffineControl, factors: NetworkFactors) -> FlowMap:
    case = factors.case
    theta, delta = network_state(control, factors)
    slopes = case.susceptances[:, None] * line_sensitivities(factors, delta)
    return FlowMap(flows_from_angles(case, theta), slopes, control.p_bar.copy(), control.alpha.copy())


######################################################################################################
# Monte Carlo
######################################################################################################

@dataclass(eq=False)
class ValidationReport:
    """
    Empirical overload frequencies. Line arrays follow the case line order; unrated lines stay at zero.
    """
    samples: int
    seed: int
    distribution: str
    line_up: np.ndarray
    line_down: np.ndarray
    line_joint: np.ndarray
    gen_over: np.ndarray
    gen_under: np.ndarray
    flow_mean: np.ndarray
    flow_std: np.ndarray

    @staticmethod
    def standard_error(p: np.ndarray, samples: int) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.sqrt(p * (1 - p) / samples)

    @property
    def line_up_se(self) -> np.ndarray:
        return self.standard_error(self.line_up, self.samples)

    @property
    def line_down_se(self) -> np.ndarray:
        return self.standard_error(self.line_down, self.samples)

    @property
    def line_joint_se(self) -> np.ndarray:
        return self.standard_error(self.line_joint, self.samples)

    def risky_lines(self, epsilons: np.ndarray, sigmas: float = 3.) -> np.ndarray:
        """ Lines where a one-sided frequency exceeds its tolerance by more than `sigmas` standard errors """
        up = self.line_up - epsilons > sigmas * self.line_up_se
        down = self.line_down - epsilons > sigmas * self.line_down_se
        return np.flatnonzero(up | down)

    def risky_generators(self, epsilons: np.ndarray, sigmas: float = 3.) -> np.ndarray:
        over = self.gen_over - epsilons > sigmas * self.standard_error(self.gen_over, self.samples)
        under = self.gen_under - epsilons > sigmas * self.standard_error(self.gen_under, self.samples)
        return np.flatnonzero(over | under)


def _chunk_counts(flow_map: FlowMap, dist: WindDistribution, case: GridCase, seed: int, chunk: int, size: int):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))
    omega = dist.sample(rng, size)
    flows = flow_map.flows(omega)
    limits = case.flow_limits
    up, down = flows > limits, flows < -limits
    outputs = flow_map.outputs(omega)
    return (up.sum(axis=0), down.sum(axis=0), (up | down).sum(axis=0),
            (outputs > case.p_max).sum(axis=0), (outputs < case.p_min).sum(axis=0),
            flows.sum(axis=0), (flows ** 2).sum(axis=0))


def monte_carlo(control: AffineControl, case: GridCase, dist: Optional[WindDistribution] = None, n: int = 10000,
                seed: int = 0, factors: Optional[NetworkFactors] = None, threads: Optional[int] = None,
                chunk_size: int = CHUNK_SIZE) -> ValidationReport:
    """
    Sample wind deviations and count limit violations of the affinely controlled system.
    Chunk c draws from a Philox stream keyed by (seed, c), so the report depends only on
    (seed, n, dist, chunk_size), never on the number of threads.
    """
    if n < 1:
        raise ValueError(f"sample count must be positive, got {n}")
    if factors is None:
        factors = factorize_case(case)
    if dist is None:
        dist = WindDistribution.for_case(case)
    flow_map = affine_flow_map(control, factors)
    sizes = [min(chunk_size, n - start) for start in range(0, n, chunk_size)]
    workers = min(threads or thread_count(), len(sizes))
    logger.info("Monte Carlo: %d %s samples in %d chunks on %d threads", n, dist.name, len(sizes), workers)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        parts = list(executor.map(lambda c: _chunk_counts(flow_map, dist, case, seed, c, sizes[c]),
                                  range(len(sizes))))
    up, down, joint, over, under = (sum(p[k] for p in parts) for k in range(5))
    total = sum(p[5] for p in parts)
    squares = sum(p[6] for p in parts)
    mean = total / n
    variance = np.maximum(squares / n - mean ** 2, 0.) * (n / max(n - 1, 1))
    return ValidationReport(n, seed, dist.name, up / n, down / n, joint / n, over / n, under / n,
                            mean, np.sqrt(variance))


######################################################################################################
# Analytic probabilities and out-of-sample sensitivity
######################################################################################################

@dataclass(frozen=True, eq=False)
class AnalyticOverload:
    p_up: np.ndarray
    p_down: np.ndarray

    @property
    def p_joint(self) -> np.ndarray:
        return self.p_up + self.p_down


def analytic_overload(control: AffineControl, case: GridCase,
                      factors: Optional[NetworkFactors] = None) -> AnalyticOverload:
    """ Gaussian per-side overload probabilities of every line """
    if factors is None:
        factors = factorize_case(case)
    flow_map = affine_flow_map(control, factors)
    return AnalyticOverload(*line_probabilities(case, flow_map.statistics(case.wind_variance)))


def realized_epsilon(control: AffineControl, case: GridCase, true_mu: np.ndarray, true_sigma2: np.ndarray,
                     factors: Optional[NetworkFactors] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-side overload probabilities of a fixed control when the wind actually has means `true_mu`
    and variances `true_sigma2`. The base points were set for the forecast means, so a mean error moves
    flows through the network alone (see `mean_sensitivities`); only the deviations around the true
    means are shared out by alpha.
    """
    if factors is None:
        factors = factorize_case(case)
    flow_map = affine_flow_map(control, factors)
    shift = np.asarray(true_mu, dtype=float) - case.wind_mean
    mean = flow_map.intercept + case.susceptances * (mean_sensitivities(factors) @ shift)
    std = np.sqrt(flow_map.slopes ** 2 @ np.asarray(true_sigma2, dtype=float))
    return side_probabilities(mean, std, case.flow_limits, -case.flow_limits)


def _worst(sides: Tuple[np.ndarray, np.ndarray]) -> float:
    return float(max(sides[0].max(initial=0.), sides[1].max(initial=0.)))


def mean_error_sweep(control: AffineControl, factors: NetworkFactors, errors: Sequence[float]) -> List[float]:
    """ Largest realized tolerance when every mean is off by a relative error e (worst of +e and -e) """
    case = factors.case
    return [max(_worst(realized_epsilon(control, case, (1 + e) * case.wind_mean, case.wind_variance, factors)),
                _worst(realized_epsilon(control, case, (1 - e) * case.wind_mean, case.wind_variance, factors)))
            for e in errors]


def std_error_sweep(control: AffineControl, factors: NetworkFactors, errors: Sequence[float]) -> List[float]:
    """ Largest realized tolerance when the true variances are (1 + V^2) times the forecast """
    case = factors.case
    return [_worst(realized_epsilon(control, case, case.wind_mean, (1 + v ** 2) * case.wind_variance, factors))
            for v in errors]


def overload_table(control: AffineControl, factors: NetworkFactors, report: ValidationReport) -> List[dict]:
    """ One row per rated line: target, analytic and empirical probability of the worse side, and its SE """
    case = factors.case
    analytic = analytic_overload(control, case, factors)
    rows = []
    for l in case.chance_lines:
        upper = analytic.p_up[l] >= analytic.p_down[l]
        empirical = report.line_up[l] if upper else report.line_down[l]
        rows.append({
            'line': case.line_label(l),
            'epsilon': float(case.line_epsilons[l]),
            'analytic': float(analytic.p_up[l] if upper else analytic.p_down[l]),
            'empirical': float(empirical),
            'se': float(ValidationReport.standard_error(empirical, report.samples)),
        })
    return rows

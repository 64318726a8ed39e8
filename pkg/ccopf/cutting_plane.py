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

from ccopf.case import GridCase
from ccopf.network import NetworkFactors, factorize_case, line_sensitivities
from ccopf.opf import AffineControl, Dispatch, ChanceBoundKind, multipliers, generator_half_width_weights, \
    make_dispatch, probability_excess, chance_margins, rebalance
from ccopf.qp_backends import QpProblem, QpStatus, get_qp_backend, phase_one, BACKEND_TYPING, DEFAULT_QP_BACKEND
from ccopf.errors import SolveError

from typing import Optional, Callable, List, Tuple

logger = logging.getLogger(__name__)

DEGENERATE_C = 1e-12


class TerminationReason(Enum):
    CONIC_FEASIBLE = 'conic-feasible'
    CHANCE_FEASIBLE = 'chance-feasible'
    ITERATION_CAP = 'iteration-cap'
    MASTER_INFEASIBLE = 'master-infeasible'


@dataclass(frozen=True)
class CuttingPlaneOptions:
    """
    :param viol_tol: Stop when the largest relative conic error, or the largest chance violation, is below it.
    :param max_iter: Master problem solves before giving up.
    :param batch: Cuts added per iteration (most violated lines first).
    :param backend: QP backend name or solve callable.
    :param alpha_convention: 'appendix' scales the generator half-width by alpha, 'main-text' does not.
    :param bound: Split per-side bounds with eta(epsilon), or a conservative coefficient omega.
    """
    viol_tol: float = 1e-6
    max_iter: int = 200
    batch: int = 1
    backend: BACKEND_TYPING = DEFAULT_QP_BACKEND
    alpha_convention: str = 'appendix'
    bound: ChanceBoundKind = ChanceBoundKind.SPLIT
    omega: Optional[float] = None

    @classmethod
    def from_config(cls, solver) -> 'CuttingPlaneOptions':
        """ From a `ccopf.config.SolverConfig` """
        return cls(solver.viol_tol, solver.max_iter, solver.batch, solver.backend, solver.alpha_convention,
                   ChanceBoundKind(solver.bound), solver.omega)


@dataclass
class SolveReport:
    iterations: int = 0
    lower_bounds: List[float] = field(default_factory=list)
    conic_violations: List[float] = field(default_factory=list)
    chance_violations: List[float] = field(default_factory=list)
    cuts: int = 0
    termination: Optional[TerminationReason] = None

    @property
    def max_conic_violation(self) -> float:
        return self.conic_violations[-1] if self.conic_violations else 0.

    @property
    def converged(self) -> bool:
        return self.termination in (TerminationReason.CONIC_FEASIBLE, TerminationReason.CHANCE_FEASIBLE)

    def record(self, lower_bound: float, conic: float, chance: float):
        self.iterations += 1
        self.lower_bounds.append(lower_bound)
        self.conic_violations.append(conic)
        self.chance_violations.append(chance)


######################################################################################################
# The convex function C and its cuts
######################################################################################################

def c_values(factors: NetworkFactors, delta: np.ndarray, variance: Optional[np.ndarray] = None,
             lines=None) -> np.ndarray:
    """
    sqrt(sum_k variance_k (pi_ik - pi_jk - delta_i + delta_j)^2) for the given lines (default all).
    `variance` is per farm, or per line and farm.
    """
    case = factors.case
    if variance is None:
        variance = case.wind_variance
    sens = line_sensitivities(factors, delta)
    if lines is not None:
        sens = sens[lines]
    return np.sqrt(np.sum(np.asarray(variance) * sens ** 2, axis=1))


def c_value(factors: NetworkFactors, line: int, delta: np.ndarray, variance: Optional[np.ndarray] = None) -> float:
    return float(c_values(factors, delta, variance, [line])[0])


def c_gradient(factors: NetworkFactors, line: int, delta: np.ndarray,
               variance: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """ Partial derivatives of C with respect to delta_i and delta_j of line (i, j) """
    case = factors.case
    if variance is None:
        variance = case.wind_variance
    sens = line_sensitivities(factors, delta)[line]
    value = float(np.sqrt(np.sum(variance * sens ** 2)))
    if value <= DEGENERATE_C:
        raise SolveError(case.name, SolveError.Type.DEGENERATE_GRADIENT, line)
    weighted = float(np.sum(variance * sens)) / value
    return -weighted, weighted


@dataclass(frozen=True, eq=False)
class Cut:
    """ C(delta_hat) + g_i (delta_i - delta_hat_i) + g_j (delta_j - delta_hat_j) <= s """
    line: int
    from_bus: int
    to_bus: int
    point: Tuple[float, float]
    gradient: Tuple[float, float]
    value: float
    variance: np.ndarray

    @property
    def rhs(self) -> float:
        """ Right-hand side once the delta terms move to the left: g.delta - s <= rhs """
        return self.gradient[0] * self.point[0] + self.gradient[1] * self.point[1] - self.value

    def evaluate(self, delta: np.ndarray) -> float:
        delta = np.asarray(delta, dtype=float)
        return (self.value + self.gradient[0] * (delta[self.from_bus] - self.point[0])
                + self.gradient[1] * (delta[self.to_bus] - self.point[1]))


def make_cut(factors: NetworkFactors, line: int, delta_hat: np.ndarray,
             variance: Optional[np.ndarray] = None) -> Cut:
    """ Tangent underestimator of C for one line at delta_hat """
    case = factors.case
    if variance is None:
        variance = case.wind_variance
    variance = np.array(variance, dtype=float)
    gradient = c_gradient(factors, line, delta_hat, variance)
    i, j = case.lines[line].from_bus, case.lines[line].to_bus
    return Cut(line, i, j, (float(delta_hat[i]), float(delta_hat[j])), gradient,
               c_value(factors, line, delta_hat, variance), variance)


######################################################################################################
# Master problem
######################################################################################################

class MasterProblem:
    """
    Variables [p_bar, alpha, theta (non-slack), delta (non-slack), s (one per rated line)].
    The conic constraints C(delta) <= s are left out and approximated by accumulated cuts.
    """
    __slots__ = ('case', 'factors', 'options', 'chance_lines', 'cuts',
                 '_sizes', '_pos', '_P', '_q', '_constant', '_A', '_b', '_rows', '_rhs', '_tags', 'name')

    def __init__(self, case: GridCase, factors: NetworkFactors, options: CuttingPlaneOptions = CuttingPlaneOptions(),
                 mean_margins: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                 generator_variance: Optional[float] = None, name: str = 'master'):
        """
        :param mean_margins: Per rated line, the flow-angle margins reserved in the from->to and to->from
            directions (zero for the nominal problem).
        :param generator_variance: Total wind variance used in the generator bounds (default: nominal).
        """
        self.case = case
        self.factors = factors
        self.options = options
        self.chance_lines = case.chance_lines
        self.cuts: List[Cut] = []
        self.name = name

        g, r, lc = len(case.generators), case.n - 1, len(self.chance_lines)
        self._sizes = (g, r, lc)
        # Position of every bus in the reduced vectors (-1 for the slack bus)
        self._pos = np.full(case.n, -1)
        self._pos[factors.keep] = np.arange(r)

        nominal_variance = case.total_wind_variance
        c = case.cost_coefficients
        self._P = np.diag(np.concatenate([2 * c[:, 0], 2 * c[:, 0] * nominal_variance, np.zeros(2 * r + lc)]))
        self._q = np.concatenate([c[:, 1], np.zeros(g + 2 * r + lc)])
        self._constant = float(np.sum(c[:, 2]))

        reduced = factors.reduced.toarray()
        incidence = case.gen_incidence[factors.keep]
        zg, zr = np.zeros((r, g)), np.zeros((r, r))
        zs = np.zeros((r, lc))
        self._A = np.vstack([
            np.hstack([zg, -incidence, zr, reduced, zs]),
            np.hstack([-incidence, zg, reduced, zr, zs]),
            np.concatenate([np.zeros(g), np.ones(g), np.zeros(2 * r + lc)])[None, :],
            np.concatenate([np.ones(g), np.zeros(g + 2 * r + lc)])[None, :],
        ])
        self._b = np.concatenate([np.zeros(r), (case.wind_injection() - case.loads)[factors.keep],
                                  [1., case.total_load - float(np.sum(case.wind_mean))]])

        self._rows, self._rhs, self._tags = [], [], []
        for k in range(g):
            self._add_row({self._p(k): -1.}, 0., 'basic')
            self._add_row({self._a(k): -1.}, 0., 'basic')
        for k in range(lc):
            self._add_row({self._s(k): -1.}, 0., 'basic')

        root, scaled = generator_half_width_weights(case, options.alpha_convention)
        if generator_variance is not None:
            root = float(np.sqrt(generator_variance))
        half = multipliers(case.gen_epsilons, options.bound, options.omega) * root
        for k in range(g):
            if scaled:
                self._add_row({self._p(k): 1., self._a(k): half[k]}, case.p_max[k], 'generator')
                self._add_row({self._p(k): -1., self._a(k): half[k]}, -case.p_min[k], 'generator')
            else:
                self._add_row({self._p(k): 1.}, case.p_max[k] - half[k], 'generator')
                self._add_row({self._p(k): -1.}, -case.p_min[k] - half[k], 'generator')

        line_eta = multipliers(case.line_epsilons[self.chance_lines], options.bound, options.omega)
        if mean_margins is None:
            mean_margins = (np.zeros(lc), np.zeros(lc))
        for k, l in enumerate(self.chance_lines):
            line = case.lines[l]
            beta, limit = line.susceptance, line.flow_limit_mw
            for sign, margin in ((1., mean_margins[0][k]), (-1., mean_margins[1][k])):
                row = {self._s(k): beta * line_eta[k]}
                self._accumulate(row, self._theta(line.from_bus), sign * beta)
                self._accumulate(row, self._theta(line.to_bus), -sign * beta)
                self._add_row(row, limit - beta * margin, 'line')

    def __str__(self):
        return f"{self.__class__.__name__}({self.name}, variables={self.n_variables}, cuts={len(self.cuts)})"

    ######################################################################################################
    # Variable layout
    ######################################################################################################

    @property
    def n_variables(self) -> int:
        g, r, lc = self._sizes
        return 2 * g + 2 * r + lc

    def _p(self, k: int) -> int:
        return k

    def _a(self, k: int) -> int:
        return self._sizes[0] + k

    def _theta(self, bus: int) -> Optional[int]:
        pos = self._pos[bus]
        return None if pos < 0 else 2 * self._sizes[0] + pos

    def _delta(self, bus: int) -> Optional[int]:
        pos = self._pos[bus]
        return None if pos < 0 else 2 * self._sizes[0] + self._sizes[1] + pos

    def _s(self, k: int) -> int:
        g, r, _ = self._sizes
        return 2 * g + 2 * r + k

    @staticmethod
    def _accumulate(row: dict, index: Optional[int], value: float):
        if index is not None:
            row[index] = row.get(index, 0.) + value

    def _add_row(self, entries: dict, rhs: float, tag: str):
        row = np.zeros(self.n_variables)
        for index, value in entries.items():
            row[index] += value
        self._rows.append(row)
        self._rhs.append(float(rhs))
        self._tags.append(tag)

    def unpack(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """ p_bar, alpha, theta and delta as full bus vectors (zero at the slack), s """
        g, r, lc = self._sizes
        keep = self.factors.keep
        theta, delta = np.zeros(self.case.n), np.zeros(self.case.n)
        theta[keep] = x[2 * g:2 * g + r]
        delta[keep] = x[2 * g + r:2 * g + 2 * r]
        return x[:g], x[g:2 * g], theta, delta, x[2 * g + 2 * r:]

    ######################################################################################################
    # Cuts and problem assembly
    ######################################################################################################

    def add_cut(self, cut: Cut):
        k = int(np.searchsorted(self.chance_lines, cut.line))
        if k >= len(self.chance_lines) or self.chance_lines[k] != cut.line:
            raise ValueError(f"line {cut.line} carries no chance constraint")
        row = {self._s(k): -1.}
        self._accumulate(row, self._delta(cut.from_bus), cut.gradient[0])
        self._accumulate(row, self._delta(cut.to_bus), cut.gradient[1])
        self._add_row(row, cut.rhs, 'cut')
        self.cuts.append(cut)

    def problem(self, include_lines: bool = True) -> QpProblem:
        tags = np.array(self._tags)
        keep = np.ones(len(tags), dtype=bool) if include_lines else ~np.isin(tags, ('line', 'cut'))
        rows = np.array(self._rows)[keep] if self._rows else np.zeros((0, self.n_variables))
        return QpProblem(self._P, self._q, self._A, self._b, rows, np.array(self._rhs)[keep],
                         self._constant, name=self.name)


######################################################################################################
# The algorithm
######################################################################################################

def nominal_oracle(factors: NetworkFactors, lines: np.ndarray, delta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """ C per rated line and the per-farm variances its cut is built with """
    variance = factors.case.wind_variance
    values = c_values(factors, delta, variance, lines)
    return values, np.broadcast_to(variance, (len(lines), len(variance)))


def nominal_chance_violation(dispatch: Dispatch, factors: NetworkFactors, options: CuttingPlaneOptions) -> float:
    """ Probability excess for split bounds; shortfall in flow-limit units for omega bounds """
    if options.bound == ChanceBoundKind.SPLIT:
        return max(probability_excess(dispatch), 0.)
    case = dispatch.case
    margins = chance_margins(dispatch.control, factors, options.bound, options.omega,
                             options.alpha_convention, dispatch.flow_stats)
    line = -margins.line / np.maximum(1., np.where(np.isfinite(case.flow_limits), case.flow_limits, 1.))
    gen = -margins.generator / np.maximum(1., case.p_max)
    return float(max(line.max(initial=0.), gen.max(initial=0.), 0.))


def relative_errors(values: np.ndarray, s: np.ndarray) -> np.ndarray:
    """ (C - s) / C, or the absolute error where C vanishes """
    excess = values - s
    return np.where(values > DEGENERATE_C, excess / np.where(values > DEGENERATE_C, values, 1.), excess)


def cutting_plane_loop(master: MasterProblem, qp: BACKEND_TYPING,
                       oracle: Callable[[NetworkFactors, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]],
                       chance_violation: Callable[[Dispatch], float], mode: str,
                       infeasible: Callable[[MasterProblem], SolveError]) -> Dispatch:
    """
    Solve the master, stop on conic feasibility (relative error of C - s) or on chance feasibility of
    the control alone, otherwise add cuts at the most violated lines and repeat.
    """
    case, factors, options = master.case, master.factors, master.options
    solve = get_qp_backend(qp if qp is not None else options.backend)
    report = SolveReport()
    lines = master.chance_lines
    dispatch = None

    for it in range(1, options.max_iter + 1):
        solution = solve(master.problem())
        if solution.status == QpStatus.INFEASIBLE:
            report.termination = TerminationReason.MASTER_INFEASIBLE
            raise infeasible(master)
        elif solution.status != QpStatus.OPTIMAL:
            raise SolveError(master.name, SolveError.Type.NUMERICAL, solution.message)

        p_bar, alpha, _, delta, s = master.unpack(solution.x)
        values, variances = oracle(factors, lines, delta)
        errors = relative_errors(values, s)
        conic = float(errors.max(initial=0.))

        control = AffineControl.from_solver(rebalance(case, p_bar), alpha)
        dispatch = make_dispatch(case, factors, control, report, mode)
        chance = chance_violation(dispatch)
        report.record(solution.objective, max(conic, 0.), chance)
        logger.info("Iteration %d: lower bound %.10g, max conic error %.3g, chance violation %.3g",
                    it, solution.objective, conic, chance)

        if conic <= options.viol_tol:
            report.termination = TerminationReason.CONIC_FEASIBLE
            break
        elif chance <= options.viol_tol:
            report.termination = TerminationReason.CHANCE_FEASIBLE
            break

        # Most violated first (absolute C - s), ties by lowest line id
        violation = values - s
        order = sorted(np.flatnonzero(errors > options.viol_tol), key=lambda k: (-violation[k], lines[k]))
        added = 0
        for k in order[:options.batch]:
            try:
                cut = make_cut(factors, int(lines[k]), delta, variances[k])
            except SolveError as e:
                logger.warning("Skipping cut: %s", e)
                continue
            master.add_cut(cut)
            added += 1
            logger.debug("Cut on line %s: C = %.6g, s = %.6g", case.line_label(lines[k]), values[k], s[k])
        report.cuts += added
        if added == 0:
            logger.warning("No valid cut could be generated at iteration %d", it)
            report.termination = TerminationReason.ITERATION_CAP
            break
    else:
        report.termination = TerminationReason.ITERATION_CAP

    if report.termination == TerminationReason.ITERATION_CAP:
        logger.warning("Stopped after %d iterations with conic error %.3g", report.iterations,
                       report.max_conic_violation)
    else:
        logger.info("Terminated (%s) after %d iterations, objective %.10g", report.termination.value,
                    report.iterations, dispatch.objective)
    return dispatch


def infeasibility_error(master: MasterProblem) -> SolveError:
    """ Phase one again without line rows: still infeasible means the generator side binds """
    binding = 'generator' if phase_one(master.problem(include_lines=False)) is False else 'line'
    return SolveError(master.name, SolveError.Type.INFEASIBLE, binding=binding)


def run_cutting_plane(case: GridCase, qp: BACKEND_TYPING = None,
                      options: CuttingPlaneOptions = CuttingPlaneOptions(),
                      factors: Optional[NetworkFactors] = None) -> Dispatch:
    """
    Nominal chance-constrained OPF. Tolerances are taken from the case (see `attach_wind`).
    :return: The dispatch; `dispatch.report` is the `SolveReport`. An iteration cap is reported through
        `report.termination`, not raised.
    """
    if factors is None:
        factors = factorize_case(case)
    master = MasterProblem(case, factors, options, name=f'ccopf[{case.name}]')
    return cutting_plane_loop(master, qp, nominal_oracle,
                              lambda dispatch: nominal_chance_violation(dispatch, factors, options),
                              'ccopf', infeasibility_error)

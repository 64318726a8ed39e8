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
import sys
import logging
import argparse
import dataclasses

import numpy as np

from ccopf import report_engines
from ccopf.case import GridCase, load_case, with_penetration, penetration
from ccopf.config import RunConfig, ChanceConfig, MODES, SWEEP_AXES, load_config, parse_options, apply_config
from ccopf.network import NetworkFactors, factorize_case
from ccopf.opf import Dispatch, solve_standard_opf
from ccopf.cutting_plane import CuttingPlaneOptions, run_cutting_plane
from ccopf.robust import BudgetSet, sets_from_config, run_robust_cutting_plane
from ccopf.validate import DISTRIBUTIONS, WindDistribution, monte_carlo, mean_error_sweep, std_error_sweep
from ccopf.reports import dispatch_report, infeasible_report, read_dispatch_report, validation_report, \
    write_report, read_report, write_csv
from ccopf.archive import ReportArchive
from ccopf.errors import CCOPFException, SolveError, ConfigError

from typing import Optional, Sequence, List

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_ITERATION_CAP = 3
EXIT_VALIDATION = 4

GATE_SIGMAS = 3.


######################################################################################################
# Shared steps
######################################################################################################

def load_run_case(run: RunConfig) -> GridCase:
    case = load_case(run.case_path, parse_options(run.chance))
    return apply_config(case, run.chance)


def solve_mode(case: GridCase, chance: ChanceConfig, mode: str,
               factors: Optional[NetworkFactors] = None) -> Dispatch:
    """ One solve in 'standard', 'ccopf' or 'robust' mode with the document's solver settings """
    if factors is None:
        factors = factorize_case(case, equilibrate=chance.network.equilibrate)
    solver = chance.solver
    if mode == 'standard':
        return solve_standard_opf(case, solver.backend, solver.standard_ramping, factors)
    options = CuttingPlaneOptions.from_config(solver)
    if mode == 'ccopf':
        return run_cutting_plane(case, solver.backend, options, factors)
    elif mode == 'robust':
        mean_set, variance_set = sets_from_config(chance.robust, len(case.wind_farms))
        return run_robust_cutting_plane(case, mean_set, variance_set, solver.backend, options, factors)
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _solve_exit(dispatch: Dispatch) -> int:
    if dispatch.report is not None and not dispatch.report.converged:
        logger.warning("Iteration cap reached on %s after %d iterations (max conic violation %.3g)",
                       dispatch.case.name, dispatch.report.iterations, dispatch.report.max_conic_violation)
        return EXIT_ITERATION_CAP
    return EXIT_OK


def _error_exit(e: SolveError) -> int:
    if e.error in (SolveError.Type.INFEASIBLE, SolveError.Type.ROBUST_INFEASIBLE):
        return EXIT_INFEASIBLE
    return EXIT_ITERATION_CAP


######################################################################################################
# Commands
######################################################################################################

def cmd_solve(run: RunConfig) -> int:
    case = load_run_case(run)
    try:
        dispatch = solve_mode(case, run.chance, run.mode)
    except SolveError as e:
        print(f"ccopf: {e}", file=sys.stderr)
        if _error_exit(e) == EXIT_INFEASIBLE:
            write_report(run.output_path, infeasible_report(case, run.mode, e.binding), run.report_engine)
        return _error_exit(e)

    write_report(run.output_path, dispatch_report(dispatch), run.report_engine)
    logger.info("Solved %s in %s mode: expected cost %.10g", case.name, run.mode, dispatch.objective)
    return _solve_exit(dispatch)


def cmd_validate(run: RunConfig) -> int:
    """ Monte Carlo check of a stored dispatch (--dispatch) or of a fresh solve in the configured mode """
    case = load_run_case(run)
    factors = factorize_case(case, equilibrate=run.chance.network.equilibrate)
    if run.dispatch_path is not None:
        dispatch = read_dispatch_report(read_report(run.dispatch_path, run.report_engine), case, factors)
    else:
        try:
            dispatch = solve_mode(case, run.chance, run.mode, factors)
        except SolveError as e:
            print(f"ccopf: {e}", file=sys.stderr)
            return _error_exit(e)

    settings = run.chance.validation
    report = monte_carlo(dispatch.control, case, WindDistribution.for_case(case, settings.dist),
                         settings.samples, settings.seed, factors)
    write_report(run.output_path, validation_report(report, dispatch.control, factors), run.report_engine)

    risky_lines = report.risky_lines(case.line_epsilons, GATE_SIGMAS)
    risky_generators = report.risky_generators(case.gen_epsilons, GATE_SIGMAS)
    if len(risky_lines) or len(risky_generators):
        for l in risky_lines:
            print(f"ccopf: line {case.line_label(l)} overloads up {report.line_up[l]:.4f} / "
                  f"down {report.line_down[l]:.4f} against {case.line_epsilons[l]:.4f}", file=sys.stderr)
        for g in risky_generators:
            print(f"ccopf: generator {g + 1} leaves its range over {report.gen_over[g]:.4f} / "
                  f"under {report.gen_under[g]:.4f} against {case.gen_epsilons[g]:.4f}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def _with_budget(uset, Gamma: float):
    return uset.with_budget(Gamma) if isinstance(uset, BudgetSet) else uset


def _sweep_penetration(run: RunConfig, case: GridCase, archive: Optional[ReportArchive]) -> List[dict]:
    rows = []
    for value in run.values:
        point = with_penetration(case, value)
        try:
            dispatch = solve_mode(point, run.chance, run.mode)
        except SolveError as e:
            if e.error not in (SolveError.Type.INFEASIBLE, SolveError.Type.ROBUST_INFEASIBLE):
                raise
            logger.info("Penetration %.4g infeasible (%s)", value, e.binding)
            rows.append({'value': value, 'feasible': 0, 'objective': np.nan, 'iterations': 0})
            if archive is not None:
                archive[run.axis, value] = infeasible_report(point, run.mode, e.binding)
            continue
        iterations = dispatch.report.iterations if dispatch.report is not None else 0
        rows.append({'value': value, 'feasible': 1, 'objective': dispatch.objective, 'iterations': iterations})
        if archive is not None:
            archive[run.axis, value] = dispatch_report(dispatch)
    return rows


def _sweep_gamma(run: RunConfig, case: GridCase, archive: Optional[ReportArchive]) -> List[dict]:
    mean_set, variance_set = sets_from_config(run.chance.robust, len(case.wind_farms))
    factors = factorize_case(case, equilibrate=run.chance.network.equilibrate)
    options = CuttingPlaneOptions.from_config(run.chance.solver)
    rows = []
    for value in run.values:
        try:
            dispatch = run_robust_cutting_plane(case, _with_budget(mean_set, value), _with_budget(variance_set, value),
                                                run.chance.solver.backend, options, factors)
        except SolveError as e:
            if e.error not in (SolveError.Type.INFEASIBLE, SolveError.Type.ROBUST_INFEASIBLE):
                raise
            rows.append({'value': value, 'feasible': 0, 'objective': np.nan, 'iterations': 0})
            if archive is not None:
                archive[run.axis, value] = infeasible_report(case, 'robust', e.binding)
            continue
        rows.append({'value': value, 'feasible': 1, 'objective': dispatch.objective,
                     'iterations': dispatch.report.iterations})
        if archive is not None:
            archive[run.axis, value] = dispatch_report(dispatch)
    return rows


def _sweep_errors(run: RunConfig, case: GridCase, archive: Optional[ReportArchive]) -> List[dict]:
    factors = factorize_case(case, equilibrate=run.chance.network.equilibrate)
    dispatch = solve_mode(case, run.chance, run.mode, factors)
    sweep = mean_error_sweep if run.axis == 'mean_error' else std_error_sweep
    worst = sweep(dispatch.control, factors, run.values)
    rows = [{'value': value, 'max_epsilon': eps} for value, eps in zip(run.values, worst)]
    if archive is not None:
        archive[run.axis, 'dispatch'] = dispatch_report(dispatch)
        for row in rows:
            archive[run.axis, row['value']] = row
    return rows


def cmd_sweep(run: RunConfig) -> int:
    """ CSV of one row per sweep value; --archive keeps the full report of every point """
    if not run.values:
        raise ConfigError('sweep', ConfigError.Type.MISSING_KEY, 'values')
    case = load_run_case(run)
    archive = None
    if run.archive_path is not None:
        archive = ReportArchive(run.archive_path, mode='c', engine=run.report_engine)

    if run.axis == 'penetration':
        if any(v <= 0 for v in run.values):
            raise ConfigError('sweep', ConfigError.Type.BAD_VALUE, "penetration values must be positive")
        logger.info("Penetration sweep on %s from base %.4g", case.name, penetration(case))
        rows, columns = _sweep_penetration(run, case, archive), ['value', 'feasible', 'objective', 'iterations']
    elif run.axis == 'Gamma':
        rows, columns = _sweep_gamma(run, case, archive), ['value', 'feasible', 'objective', 'iterations']
    else:
        try:
            rows, columns = _sweep_errors(run, case, archive), ['value', 'max_epsilon']
        except SolveError as e:
            print(f"ccopf: {e}", file=sys.stderr)
            return _error_exit(e)

    write_csv(run.output_path, rows, columns)
    return EXIT_OK


COMMANDS = {'solve': cmd_solve, 'validate': cmd_validate, 'sweep': cmd_sweep}


######################################################################################################
# Argument parsing
######################################################################################################

def _values(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """ Usage errors are input errors """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='ccopf', description="Chance-constrained DC optimal power flow")
    sub = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--case', required=True, help="MATPOWER case file")
    common.add_argument('--config', help="JSON wind/chance configuration")
    common.add_argument('--out', help="Output file (standard output if omitted)")
    common.add_argument('--mode', choices=MODES, default='ccopf', help="Solver mode")
    common.add_argument('--engine', choices=sorted(report_engines.ENGINES),
                        default=report_engines.DEFAULT_REPORT_ENGINE, help="Report engine")
    common.add_argument('-v', '--verbose', action='count', default=0, help="-v for INFO, -vv for DEBUG")

    sub.add_parser('solve', parents=[common], help="Solve and write a dispatch report")

    validate = sub.add_parser('validate', parents=[common], help="Monte Carlo validation of a dispatch")
    validate.add_argument('--dispatch', help="Dispatch report written by 'solve' (solves first if omitted)")
    validate.add_argument('--samples', type=int, help="Sample count (overrides the configuration)")
    validate.add_argument('--seed', type=int, help="Random seed (overrides the configuration)")
    validate.add_argument('--dist', choices=DISTRIBUTIONS, help="Wind distribution (overrides the configuration)")

    sweep = sub.add_parser('sweep', parents=[common], help="Parameter sweep written as CSV")
    sweep.add_argument('--axis', required=True, choices=SWEEP_AXES)
    sweep.add_argument('--values', required=True, type=_values, help="Comma separated sweep values")
    sweep.add_argument('--archive', help="Folder that keeps the full report of every sweep point")
    return parser


def run_config(args: argparse.Namespace) -> RunConfig:
    chance = load_config(args.config)
    overrides = {k: getattr(args, k, None) for k in ('samples', 'seed', 'dist')}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        chance = dataclasses.replace(chance, validation=dataclasses.replace(chance.validation, **overrides))
    return RunConfig(args.case, args.config, args.mode, args.out, chance,
                     dispatch_path=getattr(args, 'dispatch', None), axis=getattr(args, 'axis', None),
                     values=getattr(args, 'values', None) or (), archive_path=getattr(args, 'archive', None),
                     report_engine=args.engine)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')

    try:
        run = run_config(args)
        return COMMANDS[args.command](run)
    except SolveError as e:
        print(f"ccopf: {e}", file=sys.stderr)
        return _error_exit(e)
    except (CCOPFException, ValueError, OSError) as e:
        print(f"ccopf: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == '__main__':
    sys.exit(main())

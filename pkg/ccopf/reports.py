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
import csv
import logging

import numpy as np

from ccopf import report_engines
from ccopf.case import GridCase
from ccopf.network import NetworkFactors
from ccopf.opf import AffineControl, Dispatch, make_dispatch, line_probabilities, generator_probabilities, \
    probability_excess
from ccopf.cutting_plane import SolveReport
from ccopf.validate import ValidationReport, overload_table
from ccopf.errors import ConfigError

from typing import Optional, Sequence, List, Any

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1


def _trace(report: Optional[SolveReport]) -> Optional[dict]:
    if report is None:
        return None
    return {
        'iterations': report.iterations,
        'lower_bounds': np.array(report.lower_bounds, dtype=float),
        'conic_violations': np.array(report.conic_violations, dtype=float),
        'chance_violations': np.array(report.chance_violations, dtype=float),
        'cuts': report.cuts,
        'termination': report.termination.value if report.termination is not None else None,
    }


def dispatch_status(dispatch: Dispatch) -> str:
    report = dispatch.report
    if report is None or report.converged:
        return 'optimal'
    return report.termination.value


def dispatch_report(dispatch: Dispatch) -> dict:
    """ Control, per-line and per-generator statistics, analytic probabilities and the solver trace """
    case = dispatch.case
    line_up, line_down = line_probabilities(case, dispatch.flow_stats)
    gen_up, gen_down = generator_probabilities(case, dispatch.gen_stats)
    return {
        'schema': REPORT_SCHEMA,
        'case': case.name,
        'mode': dispatch.mode,
        'status': dispatch_status(dispatch),
        'objective': float(dispatch.objective),
        'probability_excess': probability_excess(dispatch),
        'control': {
            'bus': [case.external_ids[b] for b in case.gen_buses],
            'p_bar': dispatch.control.p_bar,
            'alpha': dispatch.control.alpha,
        },
        'lines': {
            'label': [case.line_label(l) for l in range(len(case.lines))],
            'limit_mw': case.flow_limits,
            'epsilon': case.line_epsilons,
            'mean_mw': dispatch.flow_stats.mean_mw,
            'std_mw': dispatch.flow_stats.std_mw,
            'p_up': line_up,
            'p_down': line_down,
        },
        'generators': {
            'epsilon': case.gen_epsilons,
            'mean_mw': dispatch.gen_stats.mean_mw,
            'std_mw': dispatch.gen_stats.std_mw,
            'p_over': gen_up,
            'p_under': gen_down,
        },
        'trace': _trace(dispatch.report),
    }


def infeasible_report(case: GridCase, mode: str, binding: Optional[str]) -> dict:
    return {'schema': REPORT_SCHEMA, 'case': case.name, 'mode': mode, 'status': 'infeasible', 'binding': binding}


def read_dispatch_report(obj: dict, case: GridCase, factors: Optional[NetworkFactors] = None) -> Dispatch:
    """
    Rebuild a dispatch from a stored report. Statistics are recomputed on `case`, so a report
    can be re-evaluated against a modified case with the same generators.
    """
    if not isinstance(obj, dict) or obj.get('schema') != REPORT_SCHEMA:
        raise ConfigError('dispatch report', ConfigError.Type.BAD_VALUE, f"schema must be {REPORT_SCHEMA}")
    if obj.get('status') == 'infeasible' or 'control' not in obj:
        raise ConfigError('dispatch report', ConfigError.Type.MISSING_KEY, 'control')
    control = obj['control']
    p_bar = np.asarray(control['p_bar'], dtype=float)
    alpha = np.asarray(control['alpha'], dtype=float)
    if len(p_bar) != len(case.generators):
        raise ConfigError('dispatch report', ConfigError.Type.BAD_VALUE,
                          f"{len(p_bar)} generators in the report, {len(case.generators)} in {case.name}")
    return make_dispatch(case, factors, AffineControl(p_bar, alpha), mode=str(obj.get('mode', 'ccopf')))


def validation_report(report: ValidationReport, control: AffineControl, factors: NetworkFactors) -> dict:
    case = factors.case
    risky = report.risky_lines(case.line_epsilons)
    return {
        'schema': REPORT_SCHEMA,
        'case': case.name,
        'distribution': report.distribution,
        'samples': report.samples,
        'seed': report.seed,
        'control': {'p_bar': control.p_bar, 'alpha': control.alpha},
        'lines': {
            'label': [case.line_label(l) for l in range(len(case.lines))],
            'epsilon': case.line_epsilons,
            'p_up': report.line_up,
            'p_down': report.line_down,
            'p_joint': report.line_joint,
            'se_up': report.line_up_se,
            'se_down': report.line_down_se,
            'flow_mean_mw': report.flow_mean,
            'flow_std_mw': report.flow_std,
        },
        'generators': {
            'epsilon': case.gen_epsilons,
            'p_over': report.gen_over,
            'p_under': report.gen_under,
        },
        'risky_lines': [case.line_label(l) for l in risky],
        'risky_generators': report.risky_generators(case.gen_epsilons).tolist(),
        'overload_table': overload_table(control, factors, report),
    }


######################################################################################################
# Files
######################################################################################################

def write_report(path: Optional[str], obj: Any, engine: report_engines.ENGINE_TYPING = None):
    """ Write with a report engine; no path writes to standard output """
    write, _ = report_engines.get_report_engine(engine)
    if path is None:
        write(sys.stdout.buffer, obj)
        sys.stdout.flush()
        return
    with open(path, 'wb') as f:
        write(f, obj)
    logger.info("Report written to %s", path)


def read_report(path: str, engine: report_engines.ENGINE_TYPING = None) -> Any:
    _, read = report_engines.get_report_engine(engine)
    with open(path, 'rb') as f:
        return read(f)


def write_csv(path: Optional[str], rows: Sequence[dict], columns: List[str]):
    """ Rows as CSV with a header; floats at full precision """
    out = open(path, 'w', newline='') if path is not None else sys.stdout
    try:
        writer = csv.writer(out, delimiter=',', quotechar='"', quoting=csv.QUOTE_MINIMAL)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(['%.17g' % row[c] if isinstance(row[c], float) else row[c] for c in columns])
    finally:
        if path is not None:
            out.close()

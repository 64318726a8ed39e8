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
from ccopf.errors import CCOPFException, CaseError, ConfigError, NetworkError, SolveError, UncertaintySetError, \
    ArchiveError
from ccopf.case import GridCase, Bus, Line, Generator, WindFarm, ParseOptions, parse_matpower, load_case, \
    attach_wind, penetration, scale_loads, scale_wind, with_penetration, scale_line_limits
from ccopf.config import ChanceConfig, RunConfig, parse_config, load_config, apply_config
from ccopf.network import NetworkFactors, build_laplacian, factor, factorize_case, solve_mean_angles, \
    delta_from_alpha
from ccopf.opf import AffineControl, Dispatch, FlowStat, GeneratorStat, ChanceBoundKind, eta, check_viability, \
    flow_statistics, generator_statistics, expected_cost, chance_margins, solve_standard_opf, make_dispatch
from ccopf.cutting_plane import CuttingPlaneOptions, SolveReport, TerminationReason, run_cutting_plane
from ccopf.robust import BudgetSet, EllipsoidSet, run_robust_cutting_plane
from ccopf.validate import WindDistribution, ValidationReport, monte_carlo, analytic_overload, realized_epsilon
from ccopf.archive import ReportArchive

import os

CASES_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'cases')


def bundled_case(name: str) -> str:
    """ Path of a bundled fixture, e.g. bundled_case('case9w.m') """
    path = os.path.join(CASES_PATH, name)
    if not os.path.isfile(path):
        raise ValueError(f"No bundled case {name}. Choose one of the followings: {sorted(os.listdir(CASES_PATH))}.")
    return path

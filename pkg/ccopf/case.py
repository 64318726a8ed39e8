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
import re
import math
import logging
import dataclasses
from functools import cached_property
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ccopf.errors import CaseError

from typing import Optional, Sequence, Tuple, Dict

logger = logging.getLogger(__name__)

DEFAULT_LINE_EPSILON = 0.05
DEFAULT_GEN_EPSILON = 0.05
DEFAULT_BASE_MVA = 100.

# MATPOWER column indices (0-based)
BUS_I, BUS_TYPE, PD = 0, 1, 2
REF_BUS_TYPE = 3
GEN_BUS, GEN_STATUS, PMAX, PMIN = 0, 7, 8, 9
F_BUS, T_BUS, BR_X, RATE_A, BR_STATUS = 0, 1, 3, 5, 10
COST_MODEL, COST_N, COST_START = 0, 3, 4
POLYNOMIAL_MODEL = 2


def _check_epsilon(obj, eps: float):
    if not (0. < eps < 0.5):
        raise CaseError(obj, CaseError.Type.BAD_EPSILON, eps)


def _readonly(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Bus:
    index: int
    external_id: int
    load_mw: float = 0.


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance: float
    flow_limit_mw: float = math.inf
    epsilon: float = DEFAULT_LINE_EPSILON

    @property
    def has_chance_constraint(self) -> bool:
        """ Lines without a rating (rateA = 0) carry no chance constraint """
        return math.isfinite(self.flow_limit_mw)


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min_mw: float
    p_max_mw: float
    cost_quadratic: float = 0.
    cost_linear: float = 0.
    cost_constant: float = 0.
    epsilon: float = DEFAULT_GEN_EPSILON


@dataclass(frozen=True)
class WindFarm:
    bus: int
    mean_mw: float
    std_mw: float


@dataclass(frozen=True)
class GridCase:
    """
    Immutable DC network description.
    Buses are numbered 0..n-1 internally with the slack bus last.
    Angles are expressed in MW per unit of susceptance, so flows are in MW.
    """
    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...]
    generators: Tuple[Generator, ...]
    wind_farms: Tuple[WindFarm, ...] = ()
    slack_bus: int = -1
    base_mva: float = DEFAULT_BASE_MVA
    name: str = 'case'

    def __post_init__(self):
        n = len(self.buses)
        if n < 2:
            raise CaseError(self, CaseError.Type.BAD_VALUE, f"a case needs at least two buses, got {n}")
        if [b.index for b in self.buses] != list(range(n)):
            raise CaseError(self, CaseError.Type.BAD_VALUE, "bus indices must be contiguous and ordered")
        if len(set(b.external_id for b in self.buses)) != n:
            raise CaseError(self, CaseError.Type.BAD_VALUE, "external bus ids must be unique")
        if self.slack_bus != n - 1:
            raise CaseError(self, CaseError.Type.BAD_VALUE, f"slack bus must be the last bus, got {self.slack_bus}")
        for b in self.buses:
            if not (b.load_mw >= 0 and math.isfinite(b.load_mw)):
                raise CaseError(self, CaseError.Type.BAD_VALUE, f"bus {b.external_id} load {b.load_mw}")

        for line in self.lines:
            for k in (line.from_bus, line.to_bus):
                if not 0 <= k < n:
                    raise CaseError(self, CaseError.Type.UNKNOWN_BUS, k)
            if line.from_bus == line.to_bus:
                raise CaseError(self, CaseError.Type.BAD_VALUE, f"line {line} is a self loop")
            if not (line.susceptance > 0 and math.isfinite(line.susceptance)):
                raise CaseError(self, CaseError.Type.BAD_REACTANCE, line)
            if not line.flow_limit_mw > 0:
                raise CaseError(self, CaseError.Type.BAD_VALUE, f"line {line} flow limit")
            _check_epsilon(self, line.epsilon)

        gen_buses = set()
        for g in self.generators:
            if not 0 <= g.bus < n:
                raise CaseError(self, CaseError.Type.UNKNOWN_BUS, g.bus)
            if not 0 <= g.p_min_mw <= g.p_max_mw:
                raise CaseError(self, CaseError.Type.BAD_VALUE, f"generator at bus {g.bus} bounds")
            if g.cost_quadratic < 0:
                raise CaseError(self, CaseError.Type.BAD_VALUE, f"generator at bus {g.bus} has a concave cost")
            _check_epsilon(self, g.epsilon)
            gen_buses.add(g.bus)
        if self.slack_bus in gen_buses:
            raise CaseError(self, CaseError.Type.BAD_VALUE, "slack bus carries a generator")

        wind_buses = set()
        for w in self.wind_farms:
            if not 0 <= w.bus < n:
                raise CaseError(self, CaseError.Type.UNKNOWN_WIND_BUS, w.bus)
            if w.bus in wind_buses:
                raise CaseError(self, CaseError.Type.DUPLICATE_WIND, self.buses[w.bus].external_id)
            if w.bus in gen_buses:
                raise CaseError(self, CaseError.Type.WIND_ON_GENERATOR, self.buses[w.bus].external_id)
            if w.bus == self.slack_bus:
                raise CaseError(self, CaseError.Type.WIND_ON_SLACK, self.buses[w.bus].external_id)
            if not (w.mean_mw >= 0 and w.std_mw >= 0):
                raise CaseError(self, CaseError.Type.BAD_VALUE, f"wind farm {w}")
            wind_buses.add(w.bus)

        components = count_components(n, self.line_from, self.line_to)
        if components > 1:
            raise CaseError(self, CaseError.Type.DISCONNECTED, components)

    def __str__(self):
        return (f"{self.__class__.__name__}({self.name}, n={self.n}, lines={len(self.lines)}, "
                f"generators={len(self.generators)}, wind={len(self.wind_farms)})")

    def __repr__(self):
        return str(self)

    ######################################################################################################
    # Index mapping
    ######################################################################################################

    @property
    def n(self) -> int:
        return len(self.buses)

    @cached_property
    def external_ids(self) -> Tuple[int, ...]:
        return tuple(b.external_id for b in self.buses)

    @cached_property
    def _internal_of(self) -> Dict[int, int]:
        return {b.external_id: b.index for b in self.buses}

    def internal_index(self, external_id: int) -> int:
        try:
            return self._internal_of[int(external_id)]
        except KeyError:
            raise CaseError(self, CaseError.Type.UNKNOWN_BUS, external_id) from None

    def line_label(self, l: int) -> str:
        line = self.lines[l]
        return f"{self.external_ids[line.from_bus]}-{self.external_ids[line.to_bus]}"

    ######################################################################################################
    # Vector views (read-only)
    ######################################################################################################

    @cached_property
    def loads(self) -> np.ndarray:
        return _readonly([b.load_mw for b in self.buses])

    @cached_property
    def total_load(self) -> float:
        return float(np.sum(self.loads))

    @cached_property
    def line_from(self) -> np.ndarray:
        return np.array([line.from_bus for line in self.lines], dtype=int)

    @cached_property
    def line_to(self) -> np.ndarray:
        return np.array([line.to_bus for line in self.lines], dtype=int)

    @cached_property
    def susceptances(self) -> np.ndarray:
        return _readonly([line.susceptance for line in self.lines])

    @cached_property
    def flow_limits(self) -> np.ndarray:
        return _readonly([line.flow_limit_mw for line in self.lines])

    @cached_property
    def line_epsilons(self) -> np.ndarray:
        return _readonly([line.epsilon for line in self.lines])

    @cached_property
    def chance_lines(self) -> np.ndarray:
        """ Indices of the lines carrying a chance constraint """
        return np.flatnonzero(np.isfinite(self.flow_limits))

    @cached_property
    def gen_buses(self) -> np.ndarray:
        return np.array([g.bus for g in self.generators], dtype=int)

    @cached_property
    def p_min(self) -> np.ndarray:
        return _readonly([g.p_min_mw for g in self.generators])

    @cached_property
    def p_max(self) -> np.ndarray:
        return _readonly([g.p_max_mw for g in self.generators])

    @cached_property
    def cost_coefficients(self) -> np.ndarray:
        """ Array of shape (|G|, 3): quadratic, linear and constant cost terms """
        return _readonly([[g.cost_quadratic, g.cost_linear, g.cost_constant]
                          for g in self.generators]).reshape(-1, 3)

    @cached_property
    def gen_epsilons(self) -> np.ndarray:
        return _readonly([g.epsilon for g in self.generators])

    @cached_property
    def gen_incidence(self) -> np.ndarray:
        """ Bus-by-generator 0/1 matrix mapping per-generator vectors to per-bus vectors """
        m = np.zeros((self.n, len(self.generators)))
        m[self.gen_buses, np.arange(len(self.generators))] = 1.
        m.flags.writeable = False
        return m

    @cached_property
    def wind_buses(self) -> np.ndarray:
        return np.array([w.bus for w in self.wind_farms], dtype=int)

    @cached_property
    def wind_mean(self) -> np.ndarray:
        return _readonly([w.mean_mw for w in self.wind_farms])

    @cached_property
    def wind_std(self) -> np.ndarray:
        return _readonly([w.std_mw for w in self.wind_farms])

    @cached_property
    def wind_variance(self) -> np.ndarray:
        return _readonly(np.square(self.wind_std))

    @cached_property
    def total_wind_variance(self) -> float:
        return float(np.sum(self.wind_variance))

    def wind_injection(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        """ Spread a per-farm vector (defaults to the means) over buses """
        if values is None:
            values = self.wind_mean
        out = np.zeros(self.n)
        np.add.at(out, self.wind_buses, np.asarray(values, dtype=float))
        return out

    @cached_property
    def topology_key(self) -> tuple:
        """ Everything the network factorization depends on """
        return (tuple((line.from_bus, line.to_bus, line.susceptance) for line in self.lines),
                self.n, self.slack_bus, tuple(self.wind_buses.tolist()))


def count_components(n: int, line_from: Sequence[int], line_to: Sequence[int]) -> int:
    adjacency = sparse.coo_matrix((np.ones(len(line_from)), (line_from, line_to)), shape=(n, n))
    count, _ = csgraph.connected_components(adjacency, directed=False)
    return count


######################################################################################################
# MATPOWER parsing
######################################################################################################

@dataclass(frozen=True)
class ParseOptions:
    """
    :param merge_parallel: Merge parallel branches by summing susceptances and limits.
        When False, every branch keeps its own chance constraint.
    :param base_mva: Overrides the case base MVA.
    """
    merge_parallel: bool = True
    base_mva: Optional[float] = None
    line_epsilon: float = DEFAULT_LINE_EPSILON
    gen_epsilon: float = DEFAULT_GEN_EPSILON
    name: Optional[str] = None


_ASSIGN_RE = re.compile(r'mpc\.(\w+)\s*=\s*')
_TOKEN_RE = re.compile(r'[^\s;,\]]+|;|\n')
_NAME_RE = re.compile(r'function\s+\w+\s*=\s*(\w+)')


class _MatpowerScanner:
    """ Finds `mpc.<name> = ...` statements, keeping offsets so errors carry a line and a column """

    def __init__(self, text: str):
        self.text = text
        # Comments are blanked out (not removed) to keep offsets stable
        self.code = re.sub(r'%[^\n]*', lambda m: ' ' * len(m.group(0)), text)
        self.line_starts = [0] + [m.end() for m in re.finditer('\n', text)]

    def position(self, offset: int) -> Tuple[int, int]:
        line = int(np.searchsorted(self.line_starts, offset, side='right'))
        return line, offset - self.line_starts[line - 1] + 1

    def error(self, offset: int, item: str):
        line, column = self.position(offset)
        return CaseError('matpower', CaseError.Type.SYNTAX, item, line=line, column=column)

    def statements(self):
        tables, scalars = {}, {}
        pos = 0
        while True:
            m = _ASSIGN_RE.search(self.code, pos)
            if m is None:
                break
            name, start = m.group(1), m.end()
            opener = self.code[start:start + 1]
            if opener == '[':
                tables[name], pos = self._matrix(start)
            elif opener == '{':
                end = self.code.find('}', start)
                if end < 0:
                    raise self.error(start, "unterminated cell array")
                pos = end + 1
            elif opener in ("'", '"'):
                end = self.code.find(opener, start + 1)
                if end < 0:
                    raise self.error(start, "unterminated string")
                pos = end + 1
            else:
                end = len(self.code)
                for stop in (';', '\n'):
                    k = self.code.find(stop, start)
                    if 0 <= k < end:
                        end = k
                token = self.code[start:end].strip()
                scalars[name] = self._number(token, start)
                pos = end
        return tables, scalars

    def _number(self, token: str, offset: int) -> float:
        try:
            return float(token)
        except ValueError:
            raise self.error(offset, f"invalid number {token!r}") from None

    def _matrix(self, start: int):
        end = self.code.find(']', start)
        if end < 0:
            raise self.error(start, "unterminated matrix")
        rows, row = [], []
        for m in _TOKEN_RE.finditer(self.code, start + 1, end):
            token = m.group(0)
            if token in (';', '\n'):
                if row:
                    rows.append(row)
                row = []
            else:
                row.append(self._number(token, m.start()))
        if row:
            rows.append(row)
        widths = set(len(r) for r in rows)
        if len(widths) > 1:
            raise self.error(start, "rows of unequal length")
        return rows, end + 1


def _cost_terms(row: Sequence[float], gen_number: int) -> Tuple[float, float, float]:
    if len(row) <= COST_N or int(row[COST_MODEL]) != POLYNOMIAL_MODEL:
        raise CaseError('matpower', CaseError.Type.BAD_COST_MODEL, gen_number)
    ncost = int(row[COST_N])
    coefficients = list(row[COST_START:COST_START + ncost])
    if len(coefficients) != ncost:
        raise CaseError('matpower', CaseError.Type.BAD_COST_MODEL, gen_number)
    if ncost == 3:
        return coefficients[0], coefficients[1], coefficients[2]
    elif ncost == 2:
        return 0., coefficients[0], coefficients[1]
    raise CaseError('matpower', CaseError.Type.BAD_COST_MODEL, gen_number)


def parse_matpower(text: str, options: ParseOptions = ParseOptions()) -> GridCase:
    """
    Parse the DC subset of a MATPOWER case file (bus, branch, gen, gencost).
    :param text: The case file content.
    :param options: See `ParseOptions`.
    :return: A `GridCase` with internal 0-based bus numbering, slack bus last.
    """
    scanner = _MatpowerScanner(text)
    tables, scalars = scanner.statements()
    for name in ('bus', 'branch', 'gen', 'gencost'):
        if name not in tables:
            raise CaseError('matpower', CaseError.Type.MISSING_TABLE, name)

    name = options.name
    if name is None:
        m = _NAME_RE.search(scanner.code)
        name = m.group(1) if m else 'case'
    base_mva = options.base_mva or scalars.get('baseMVA', DEFAULT_BASE_MVA)

    bus_rows = tables['bus']
    ext_ids = [int(r[BUS_I]) for r in bus_rows]
    if len(set(ext_ids)) != len(ext_ids):
        raise CaseError(name, CaseError.Type.BAD_VALUE, "duplicate bus ids")
    loads = {int(r[BUS_I]): float(r[PD]) for r in bus_rows}

    gens, gen_ext_buses = [], set()
    gen_rows, cost_rows = tables['gen'], tables['gencost']
    if len(cost_rows) < len(gen_rows):
        raise CaseError(name, CaseError.Type.BAD_COST_MODEL,
                        f"{len(cost_rows)} cost rows for {len(gen_rows)} generators")
    for number, (row, cost) in enumerate(zip(gen_rows, cost_rows), start=1):
        bus = int(row[GEN_BUS])
        if bus not in loads:
            raise CaseError(name, CaseError.Type.UNKNOWN_BUS, bus)
        quadratic, linear, constant = _cost_terms(cost, number)
        if len(row) > GEN_STATUS and row[GEN_STATUS] <= 0:
            continue
        gens.append((bus, float(row[PMIN]), float(row[PMAX]), quadratic, linear, constant))
        gen_ext_buses.add(bus)

    ref_ids = [int(r[BUS_I]) for r in bus_rows if int(r[BUS_TYPE]) == REF_BUS_TYPE]
    ref = ref_ids[0] if ref_ids else ext_ids[0]
    ordered = [b for b in ext_ids if b != ref]
    extra_lines = []
    if ref in gen_ext_buses:
        # Dummy slack: zero generation, demand and wind, tied to the reference bus
        dummy = max(ext_ids) + 1
        ordered.append(ref)
        ordered.append(dummy)
        loads[dummy] = 0.
        extra_lines.append((ref, dummy, 1., math.inf))
        logger.info("Reference bus %d carries a generator: appended dummy slack bus %d", ref, dummy)
    else:
        ordered.append(ref)
    internal = {b: i for i, b in enumerate(ordered)}

    branches = []
    for row in tables['branch']:
        f, t = int(row[F_BUS]), int(row[T_BUS])
        for b in (f, t):
            if b not in internal:
                raise CaseError(name, CaseError.Type.UNKNOWN_BUS, b)
        if len(row) > BR_STATUS and row[BR_STATUS] <= 0:
            continue
        x = float(row[BR_X])
        if not x > 0:
            raise CaseError(name, CaseError.Type.BAD_REACTANCE, f"{f}-{t}")
        rate = float(row[RATE_A]) if len(row) > RATE_A else 0.
        branches.append((f, t, 1. / x, rate if rate > 0 else math.inf))
    branches.extend(extra_lines)

    if options.merge_parallel:
        merged: Dict[tuple, list] = {}
        for f, t, b, rate in branches:
            key = (min(f, t), max(f, t))
            if key in merged:
                merged[key][2] += b
                merged[key][3] += rate
            else:
                merged[key] = [f, t, b, rate]
        branches = [tuple(v) for v in merged.values()]

    buses = tuple(Bus(i, b, loads[b]) for i, b in enumerate(ordered))
    lines = tuple(Line(internal[f], internal[t], b, rate, options.line_epsilon) for f, t, b, rate in branches)
    generators = tuple(Generator(internal[bus], p_min, p_max, c1, c2, c3, options.gen_epsilon)
                       for bus, p_min, p_max, c1, c2, c3 in gens)
    case = GridCase(buses, lines, generators, (), len(buses) - 1, float(base_mva), name)
    logger.info("Parsed %s", case)
    return case


def load_case(path: str, options: ParseOptions = ParseOptions()) -> GridCase:
    with open(path, 'r') as f:
        return parse_matpower(f.read(), options)


######################################################################################################
# Case transformations (value semantics: inputs are never modified)
######################################################################################################

def attach_wind(case: GridCase, config) -> GridCase:
    """
    Attach wind farms and set chance-constraint tolerances.
    :param case: The source case (unchanged).
    :param config: Any object with `wind` (items with bus/mean_mw/std_mw, external bus ids),
        `line_epsilon`, `gen_epsilon` and optional `line_epsilon_overrides` ({"f-t": eps})
        and `gen_epsilon_overrides` ({1-based generator number: eps}), e.g. `ChanceConfig`.
    """
    line_eps = getattr(config, 'line_epsilon', DEFAULT_LINE_EPSILON)
    gen_eps = getattr(config, 'gen_epsilon', DEFAULT_GEN_EPSILON)
    _check_epsilon(case, line_eps)
    _check_epsilon(case, gen_eps)

    gen_buses = set(case.gen_buses.tolist())
    farms, seen = [], set()
    for farm in getattr(config, 'wind', ()):
        ext = int(farm.bus)
        if ext not in case._internal_of:
            raise CaseError(case, CaseError.Type.UNKNOWN_WIND_BUS, ext)
        bus = case._internal_of[ext]
        if bus in seen:
            raise CaseError(case, CaseError.Type.DUPLICATE_WIND, ext)
        if bus in gen_buses:
            raise CaseError(case, CaseError.Type.WIND_ON_GENERATOR, ext)
        if bus == case.slack_bus:
            raise CaseError(case, CaseError.Type.WIND_ON_SLACK, ext)
        seen.add(bus)
        farms.append(WindFarm(bus, float(farm.mean_mw), float(farm.std_mw)))

    line_overrides = {}
    for label, eps in (getattr(config, 'line_epsilon_overrides', None) or {}).items():
        f, _, t = str(label).partition('-')
        key = frozenset((case.internal_index(int(f)), case.internal_index(int(t))))
        _check_epsilon(case, eps)
        line_overrides[key] = eps
    lines = tuple(dataclasses.replace(line, epsilon=line_overrides.get(frozenset((line.from_bus, line.to_bus)),
                                                                       line_eps))
                  for line in case.lines)

    gen_overrides = {int(k): v for k, v in (getattr(config, 'gen_epsilon_overrides', None) or {}).items()}
    for number, eps in gen_overrides.items():
        if not 1 <= number <= len(case.generators):
            raise CaseError(case, CaseError.Type.BAD_VALUE, f"generator number {number}")
        _check_epsilon(case, eps)
    generators = tuple(dataclasses.replace(g, epsilon=gen_overrides.get(number, gen_eps))
                       for number, g in enumerate(case.generators, start=1))

    return dataclasses.replace(case, lines=lines, generators=generators, wind_farms=tuple(farms))


def penetration(case: GridCase) -> float:
    """ Mean wind output over total demand """
    if not case.total_load > 0:
        raise CaseError(case, CaseError.Type.ZERO_DEMAND)
    return float(np.sum(case.wind_mean)) / case.total_load


def scale_loads(case: GridCase, factor: float) -> GridCase:
    if not factor > 0:
        raise CaseError(case, CaseError.Type.BAD_FACTOR, factor)
    buses = tuple(dataclasses.replace(b, load_mw=b.load_mw * factor) for b in case.buses)
    return dataclasses.replace(case, buses=buses)


def scale_wind(case: GridCase, factor: float) -> GridCase:
    """ Scale every farm's mean and standard deviation (fixed proportions) """
    if not factor > 0:
        raise CaseError(case, CaseError.Type.BAD_FACTOR, factor)
    farms = tuple(dataclasses.replace(w, mean_mw=w.mean_mw * factor, std_mw=w.std_mw * factor)
                  for w in case.wind_farms)
    return dataclasses.replace(case, wind_farms=farms)


def with_penetration(case: GridCase, target: float) -> GridCase:
    current = penetration(case)
    if not current > 0:
        raise CaseError(case, CaseError.Type.BAD_VALUE, "cannot rescale a case without wind")
    return scale_wind(case, target / current)


def scale_line_limits(case: GridCase, factor: float) -> GridCase:
    if not factor > 0:
        raise CaseError(case, CaseError.Type.BAD_FACTOR, factor)
    lines = tuple(dataclasses.replace(line, flow_limit_mw=line.flow_limit_mw * factor) for line in case.lines)
    return dataclasses.replace(case, lines=lines)

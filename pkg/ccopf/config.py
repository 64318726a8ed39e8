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
import os
import json
import logging
import dataclasses
from dataclasses import dataclass, field

from ccopf.case import GridCase, ParseOptions, attach_wind, scale_loads, scale_line_limits, \
    DEFAULT_LINE_EPSILON, DEFAULT_GEN_EPSILON
from ccopf.errors import ConfigError

from typing import Optional, Tuple, Dict, Any

logger = logging.getLogger(__name__)

THREADS_ENV = 'CCOPF_THREADS'

MODES = ('standard', 'ccopf', 'robust')
SWEEP_AXES = ('penetration', 'mean_error', 'std_error', 'Gamma')
ALPHA_CONVENTIONS = ('appendix', 'main-text')
BOUND_KINDS = ('split', 'omega')
RAMPING_RULES = ('headroom', 'all')
SET_KINDS = ('budget', 'ellipsoid')


@dataclass(frozen=True)
class WindSpec:
    bus: int
    mean_mw: float
    std_mw: float


@dataclass(frozen=True)
class SolverConfig:
    viol_tol: float = 1e-6
    max_iter: int = 200
    batch: int = 1
    backend: str = 'interior-point'
    alpha_convention: str = 'appendix'
    bound: str = 'split'
    omega: Optional[float] = None
    standard_ramping: str = 'headroom'


@dataclass(frozen=True)
class NetworkConfig:
    merge_parallel: bool = True
    equilibrate: bool = False
    base_mva: Optional[float] = None


@dataclass(frozen=True)
class ValidationConfig:
    dist: str = 'gaussian'
    samples: int = 10000
    seed: int = 0


@dataclass(frozen=True)
class RobustConfig:
    """ Raw set descriptions; `ccopf.robust.uncertainty_set` builds the sets """
    mean: Optional[Dict[str, Any]] = None
    variance: Optional[Dict[str, Any]] = None


@dataclass(frozen=True)
class ChanceConfig:
    wind: Tuple[WindSpec, ...] = ()
    line_epsilon: float = DEFAULT_LINE_EPSILON
    gen_epsilon: float = DEFAULT_GEN_EPSILON
    line_epsilon_overrides: Dict[str, float] = field(default_factory=dict)
    gen_epsilon_overrides: Dict[int, float] = field(default_factory=dict)
    load_scale: float = 1.
    line_limit_scale: float = 1.
    robust: Optional[RobustConfig] = None
    solver: SolverConfig = SolverConfig()
    network: NetworkConfig = NetworkConfig()
    validation: ValidationConfig = ValidationConfig()


@dataclass(frozen=True)
class RunConfig:
    """ One CLI invocation: files, mode and the parsed wind/chance document """
    case_path: str
    config_path: Optional[str]
    mode: str
    output_path: Optional[str]
    chance: ChanceConfig = ChanceConfig()
    dispatch_path: Optional[str] = None
    axis: Optional[str] = None
    values: Tuple[float, ...] = ()
    archive_path: Optional[str] = None
    report_engine: str = 'json'

    def __post_init__(self):
        if not os.path.isfile(self.case_path):
            raise ConfigError('run', ConfigError.Type.MISSING_FILE, self.case_path)
        if self.config_path is not None and not os.path.isfile(self.config_path):
            raise ConfigError('run', ConfigError.Type.MISSING_FILE, self.config_path)
        if self.dispatch_path is not None and not os.path.isfile(self.dispatch_path):
            raise ConfigError('run', ConfigError.Type.MISSING_FILE, self.dispatch_path)
        if self.mode not in MODES:
            raise ConfigError('run', ConfigError.Type.BAD_VALUE, f"mode {self.mode!r}")
        if self.mode == 'robust' and self.chance.robust is None:
            raise ConfigError('run', ConfigError.Type.MISSING_KEY, 'robust')
        if self.axis is not None and self.axis not in SWEEP_AXES:
            raise ConfigError('run', ConfigError.Type.BAD_VALUE, f"sweep axis {self.axis!r}")
        if self.axis == 'Gamma' and self.chance.robust is None:
            raise ConfigError('run', ConfigError.Type.MISSING_KEY, 'robust')


######################################################################################################
# Parsing helpers
######################################################################################################

def _check_keys(obj, where: str, allowed, required=()):
    if not isinstance(obj, dict):
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in allowed:
            raise ConfigError(where, ConfigError.Type.UNKNOWN_KEY, key)
    for key in required:
        if key not in obj:
            raise ConfigError(where, ConfigError.Type.MISSING_KEY, key)


def _real(value, where: str, item: str, low: float = None, high: float = None, open_low=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, f"{item} must be a number")
    value = float(value)
    if low is not None and (value < low or (open_low and value == low)):
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, f"{item} = {value}")
    if high is not None and value > high:
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, f"{item} = {value}")
    return value


def _integer(value, where: str, item: str, low: int = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, f"{item} must be an integer")
    if low is not None and value < low:
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, f"{item} = {value}")
    return value


def _choice(value, where: str, item: str, choices) -> str:
    if value not in choices:
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, f"{item} must be one of {choices}, got {value!r}")
    return value


def _epsilon(value, where: str, item: str) -> float:
    value = _real(value, where, item)
    if not 0 < value < 0.5:
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, f"{item} = {value} outside (0, 0.5)")
    return value


def _section(cls, obj, where: str, converters: dict):
    if obj is None:
        return cls()
    _check_keys(obj, where, [f.name for f in dataclasses.fields(cls)])
    return cls(**{k: converters[k](v) for k, v in obj.items()})


def _parse_set(obj, where: str) -> Optional[Dict[str, Any]]:
    if obj is None:
        return None
    _check_keys(obj, where, ('kind', 'gamma', 'Gamma', 'A', 'b'), required=('kind',))
    kind = _choice(obj['kind'], where, 'kind', SET_KINDS)
    if kind == 'budget':
        _check_keys(obj, where, ('kind', 'gamma', 'Gamma'), required=('gamma', 'Gamma'))
        gamma = [_real(g, where, 'gamma', low=0) for g in obj['gamma']]
        return {'kind': kind, 'gamma': gamma, 'Gamma': _real(obj['Gamma'], where, 'Gamma', low=0)}
    _check_keys(obj, where, ('kind', 'A', 'b'), required=('A', 'b'))
    rows = obj['A']
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ConfigError(where, ConfigError.Type.BAD_VALUE, "A must be a list of rows")
    a = [[_real(x, where, 'A') for x in r] for r in rows]
    return {'kind': kind, 'A': a, 'b': _real(obj['b'], where, 'b', low=0)}


def _parse_robust(obj) -> Optional[RobustConfig]:
    if obj is None:
        return None
    if isinstance(obj, dict) and 'kind' in obj:
        single = _parse_set(obj, 'robust')
        return RobustConfig(single, single)
    _check_keys(obj, 'robust', ('mean', 'variance'))
    return RobustConfig(_parse_set(obj.get('mean'), 'robust.mean'),
                        _parse_set(obj.get('variance'), 'robust.variance'))


def _parse_wind(items) -> Tuple[WindSpec, ...]:
    if not isinstance(items, list):
        raise ConfigError('wind', ConfigError.Type.BAD_VALUE, "wind must be a list")
    out = []
    for i, item in enumerate(items):
        where = f'wind[{i}]'
        _check_keys(item, where, ('bus', 'mean_mw', 'std_mw'), required=('bus', 'mean_mw', 'std_mw'))
        out.append(WindSpec(_integer(item['bus'], where, 'bus'),
                            _real(item['mean_mw'], where, 'mean_mw', low=0),
                            _real(item['std_mw'], where, 'std_mw', low=0)))
    return tuple(out)


def parse_config(obj: dict) -> ChanceConfig:
    """
    Validate a wind/chance document (already decoded from JSON).
    Unknown keys are rejected at every level.
    """
    _check_keys(obj, 'config', ('wind', 'line_epsilon', 'gen_epsilon', 'overrides', 'robust',
                                'solver', 'network', 'validation'))
    overrides = obj.get('overrides') or {}
    _check_keys(overrides, 'overrides', ('line_epsilon', 'gen_epsilon', 'load_scale', 'line_limit_scale'))

    line_overrides = overrides.get('line_epsilon') or {}
    _check_keys(line_overrides, 'overrides.line_epsilon', line_overrides.keys())
    for label in line_overrides:
        f, sep, t = label.partition('-')
        if not (sep and f.strip().isdigit() and t.strip().isdigit()):
            raise ConfigError('overrides.line_epsilon', ConfigError.Type.BAD_VALUE, f"line label {label!r}")
    gen_overrides = overrides.get('gen_epsilon') or {}
    _check_keys(gen_overrides, 'overrides.gen_epsilon', gen_overrides.keys())
    for label in gen_overrides:
        if not str(label).isdigit():
            raise ConfigError('overrides.gen_epsilon', ConfigError.Type.BAD_VALUE, f"generator number {label!r}")

    solver = _section(SolverConfig, obj.get('solver'), 'solver', {
        'viol_tol': lambda v: _real(v, 'solver', 'viol_tol', low=0, open_low=True),
        'max_iter': lambda v: _integer(v, 'solver', 'max_iter', low=1),
        'batch': lambda v: _integer(v, 'solver', 'batch', low=1),
        'backend': lambda v: _choice(v, 'solver', 'backend', _backend_names()),
        'alpha_convention': lambda v: _choice(v, 'solver', 'alpha_convention', ALPHA_CONVENTIONS),
        'bound': lambda v: _choice(v, 'solver', 'bound', BOUND_KINDS),
        'omega': lambda v: None if v is None else _real(v, 'solver', 'omega', low=0, open_low=True),
        'standard_ramping': lambda v: _choice(v, 'solver', 'standard_ramping', RAMPING_RULES),
    })
    if solver.bound == 'omega' and solver.omega is None:
        raise ConfigError('solver', ConfigError.Type.MISSING_KEY, 'omega')

    return ChanceConfig(
        wind=_parse_wind(obj.get('wind', [])),
        line_epsilon=_epsilon(obj.get('line_epsilon', DEFAULT_LINE_EPSILON), 'config', 'line_epsilon'),
        gen_epsilon=_epsilon(obj.get('gen_epsilon', DEFAULT_GEN_EPSILON), 'config', 'gen_epsilon'),
        line_epsilon_overrides={k: _epsilon(v, 'overrides.line_epsilon', k) for k, v in line_overrides.items()},
        gen_epsilon_overrides={int(k): _epsilon(v, 'overrides.gen_epsilon', k) for k, v in gen_overrides.items()},
        load_scale=_real(overrides.get('load_scale', 1.), 'overrides', 'load_scale', low=0, open_low=True),
        line_limit_scale=_real(overrides.get('line_limit_scale', 1.), 'overrides', 'line_limit_scale',
                               low=0, open_low=True),
        robust=_parse_robust(obj.get('robust')),
        solver=solver,
        network=_section(NetworkConfig, obj.get('network'), 'network', {
            'merge_parallel': lambda v: bool(v),
            'equilibrate': lambda v: bool(v),
            'base_mva': lambda v: None if v is None else _real(v, 'network', 'base_mva', low=0, open_low=True),
        }),
        validation=_section(ValidationConfig, obj.get('validation'), 'validation', {
            'dist': lambda v: _choice(v, 'validation', 'dist', _distribution_names()),
            'samples': lambda v: _integer(v, 'validation', 'samples', low=1),
            'seed': lambda v: _integer(v, 'validation', 'seed', low=0),
        }),
    )


def _backend_names():
    from ccopf.qp_backends import BACKENDS
    return tuple(sorted(BACKENDS))


def _distribution_names():
    from ccopf.validate import DISTRIBUTIONS
    return tuple(DISTRIBUTIONS)


def load_config(path: Optional[str]) -> ChanceConfig:
    if path is None:
        return ChanceConfig()
    if not os.path.isfile(path):
        raise ConfigError('config', ConfigError.Type.MISSING_FILE, path)
    with open(path, 'r') as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(path, ConfigError.Type.BAD_VALUE, str(e)) from None
    return parse_config(obj)


def parse_options(config: ChanceConfig) -> ParseOptions:
    return ParseOptions(merge_parallel=config.network.merge_parallel, base_mva=config.network.base_mva,
                        line_epsilon=config.line_epsilon, gen_epsilon=config.gen_epsilon)


def apply_config(case: GridCase, config: ChanceConfig) -> GridCase:
    """ Wind, tolerances and scaling overrides applied to a parsed case """
    case = attach_wind(case, config)
    if config.load_scale != 1:
        case = scale_loads(case, config.load_scale)
    if config.line_limit_scale != 1:
        case = scale_line_limits(case, config.line_limit_scale)
    return case


def thread_count() -> int:
    """ Worker threads for sampling: CCOPF_THREADS if set, else the CPU count """
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            threads = int(value)
        except ValueError:
            raise ConfigError(THREADS_ENV, ConfigError.Type.BAD_VALUE, value) from None
        if threads < 1:
            raise ConfigError(THREADS_ENV, ConfigError.Type.BAD_VALUE, value)
        return threads
    return os.cpu_count() or 1

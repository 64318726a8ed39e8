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
import threading

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu
from lru import LRU

from ccopf.case import GridCase
from ccopf.errors import NetworkError

from typing import Optional, Sequence

logger = logging.getLogger(__name__)

DEFAULT_CACHE_SIZE = 16
REFINEMENT_TOL = 1e-12
MAX_REFINEMENT_STEPS = 3
PIVOT_RATIO_TOL = 1e-14
BALANCE_TOL = 1e-8
ALPHA_SUM_TOL = 1e-10


class Laplacian:
    """ Weighted graph Laplacian of the line susceptances """
    __slots__ = ('n', 'matrix')

    def __init__(self, n: int, matrix):
        self.n = n
        self.matrix = sparse.csc_matrix(matrix)
        if self.matrix.shape != (n, n):
            raise ValueError(f"Laplacian of dimension {n} got a matrix of shape {self.matrix.shape}")

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def build_laplacian(case: GridCase) -> Laplacian:
    n = case.n
    f, t, b = case.line_from, case.line_to, np.asarray(case.susceptances)
    off = sparse.coo_matrix((np.concatenate([-b, -b]), (np.concatenate([f, t]), np.concatenate([t, f]))),
                            shape=(n, n)).tocsr()
    # Diagonal from the assembled off-diagonals so every row sums to zero
    diagonal = -np.asarray(off.sum(axis=1)).ravel()
    return Laplacian(n, off + sparse.diags(diagonal))


class NetworkFactors:
    """
    Factorization of the reduced Laplacian (slack row and column removed) plus the wind-influence
    columns pi_k = Bhat^-1 e_k, stored as dense length-n vectors with a zero slack entry.
    Immutable after construction; concurrent solves are safe.
    """
    __slots__ = ('case', 'laplacian', 'slack', 'wind_buses', 'wind_columns', 'equilibrated',
                 '_keep', '_reduced', '_lu', '_scale')

    def __init__(self, laplacian: Laplacian, slack: int, wind_buses: Sequence[int] = (),
                 equilibrate: bool = False, case: Optional[GridCase] = None):
        """
        :param laplacian: The full weighted Laplacian.
        :param slack: Index of the slack bus (removed row and column).
        :param wind_buses: Buses for which influence columns are precomputed.
        :param equilibrate: Apply a symmetric diagonal scaling before factoring.
        :param case: The source case, if any.
        """
        n = laplacian.n
        if not 0 <= slack < n:
            raise ValueError(f"slack bus {slack} outside 0..{n - 1}")
        self.case = case
        self.laplacian = laplacian
        self.slack = slack
        self.wind_buses = np.asarray(wind_buses, dtype=int)
        self.equilibrated = equilibrate

        self._keep = np.flatnonzero(np.arange(n) != slack)
        self._reduced = laplacian.matrix[self._keep][:, self._keep].tocsc()

        components, _ = csgraph.connected_components(laplacian.matrix, directed=False)
        if components > 1:
            raise NetworkError(self, NetworkError.Type.SINGULAR, f"{components} components")

        diagonal = self._reduced.diagonal()
        if equilibrate:
            self._scale = 1. / np.sqrt(diagonal)
            scaled = sparse.diags(self._scale) @ self._reduced @ sparse.diags(self._scale)
            logger.warning("Equilibrating the reduced Laplacian (diagonal range %.3g..%.3g)",
                           diagonal.min(), diagonal.max())
        else:
            self._scale = None
            scaled = self._reduced
        try:
            self._lu = splu(sparse.csc_matrix(scaled), permc_spec='MMD_AT_PLUS_A')
        except RuntimeError as e:
            raise NetworkError(self, NetworkError.Type.SINGULAR, str(e)) from None
        pivots = np.abs(self._lu.U.diagonal())
        if pivots.min() <= PIVOT_RATIO_TOL * pivots.max():
            raise NetworkError(self, NetworkError.Type.SINGULAR, f"pivot ratio {pivots.min() / pivots.max():.3g}")

        unit = np.zeros((n, len(self.wind_buses)))
        unit[self.wind_buses, np.arange(len(self.wind_buses))] = 1.
        self.wind_columns = self.solve(unit)
        self.wind_columns.flags.writeable = False

    def __str__(self):
        return f"{self.__class__.__name__}(n={self.n}, slack={self.slack}, wind={len(self.wind_buses)})"

    def __repr__(self):
        return str(self)

    @property
    def n(self) -> int:
        return self.laplacian.n

    @property
    def reduced(self) -> sparse.csc_matrix:
        """ The reduced Laplacian B-hat (sparse) """
        return self._reduced

    @property
    def keep(self) -> np.ndarray:
        """ Bus indices kept in the reduced system, in order """
        return self._keep

    def with_case(self, case: GridCase) -> 'NetworkFactors':
        """ Shallow copy bound to another case of identical topology """
        other = object.__new__(NetworkFactors)
        for name in NetworkFactors.__slots__:
            object.__setattr__(other, name, getattr(self, name))
        other.case = case
        return other

    ######################################################################################################
    # Solves
    ######################################################################################################

    def _raw_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._scale is None:
            return self._lu.solve(rhs)
        scale = self._scale if rhs.ndim == 1 else self._scale[:, None]
        return scale * self._lu.solve(scale * rhs)

    def solve_reduced(self, rhs: np.ndarray) -> np.ndarray:
        """ Solve Bhat x = rhs for one or several right-hand sides, with iterative refinement """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.size == 0:
            return np.zeros(rhs.shape)
        x = self._raw_solve(rhs)
        norm = np.max(np.abs(rhs))
        for _ in range(MAX_REFINEMENT_STEPS):
            residual = rhs - self._reduced @ x
            if np.max(np.abs(residual)) <= REFINEMENT_TOL * norm:
                break
            x = x + self._raw_solve(residual)
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """ Solve on full-length bus vectors; the slack row of rhs is ignored and the result is zero there """
        rhs = np.asarray(rhs, dtype=float)
        out = np.zeros(rhs.shape)
        out[self._keep] = self.solve_reduced(rhs[self._keep])
        return out


def factor(laplacian: Laplacian, slack: int, wind_buses: Sequence[int] = (), equilibrate: bool = False,
           case: Optional[GridCase] = None) -> NetworkFactors:
    return NetworkFactors(laplacian, slack, wind_buses, equilibrate, case)


_cache = LRU(DEFAULT_CACHE_SIZE)
_cache_lock = threading.Lock()


def factorize_case(case: GridCase, equilibrate: bool = False) -> NetworkFactors:
    """
    Build and factor the Laplacian of a case.
    Factorizations are cached by topology so cases differing only in loads, limits or wind
    parameters share one factorization.
    """
    key = (case.topology_key, equilibrate)
    with _cache_lock:
        cached = _cache.get(key)
    if cached is None:
        cached = factor(build_laplacian(case), case.slack_bus, case.wind_buses, equilibrate)
        with _cache_lock:
            _cache[key] = cached
        logger.debug("Factored %s", case)
    return cached.with_case(case)


def clear_cache():
    with _cache_lock:
        _cache.clear()


######################################################################################################
# Network quantities
######################################################################################################

def _balance_scale(factors: NetworkFactors, injection: np.ndarray) -> float:
    if factors.case is not None:
        return max(1., float(np.sum(np.abs(factors.case.loads))))
    return max(1., float(np.sum(np.abs(injection))))


def solve_mean_angles(factors: NetworkFactors, injection: np.ndarray) -> np.ndarray:
    """
    :param injection: Per-bus net injection (MW), balanced.
    :return: Angles with a zero slack entry satisfying B theta = injection.
    """
    injection = np.asarray(injection, dtype=float)
    residual = float(np.sum(injection))
    if abs(residual) > BALANCE_TOL * _balance_scale(factors, injection):
        raise NetworkError(factors, NetworkError.Type.UNBALANCED, residual)
    return factors.solve(injection)


def delta_from_alpha(factors: NetworkFactors, alpha: np.ndarray) -> np.ndarray:
    """ delta = Bhat^-1 alpha for a per-bus participation vector """
    alpha = np.asarray(alpha, dtype=float)
    if alpha[factors.slack] != 0:
        raise NetworkError(factors, NetworkError.Type.SLACK_ALPHA, alpha[factors.slack])
    total = float(np.sum(alpha))
    if np.any(alpha < 0) or abs(total - 1.) > ALPHA_SUM_TOL:
        raise NetworkError(factors, NetworkError.Type.BAD_ALPHA, f"min {alpha.min():.3g}, sum {total:.12g}")
    return factors.solve(alpha)


def line_sensitivities(factors: NetworkFactors, delta: np.ndarray) -> np.ndarray:
    """
    Matrix of shape (|lines|, |wind|) with entries pi_ik - pi_jk - delta_i + delta_j for line (i, j).
    Multiplied by the susceptance it is the flow response to each farm's deviation.
    """
    case = factors.case
    f, t = case.line_from, case.line_to
    pi = factors.wind_columns
    delta = np.asarray(delta, dtype=float)
    return (pi[f] - pi[t]) - (delta[f] - delta[t])[:, None]


def mean_sensitivities(factors: NetworkFactors) -> np.ndarray:
    """
    Matrix of shape (|lines|, |wind|) with entries pi_ik - pi_jk: the angle difference response to a
    change in each farm's mean output, with the generator base points held fixed.
    """
    case = factors.case
    pi = factors.wind_columns
    return pi[case.line_from] - pi[case.line_to]


def flows_from_angles(case: GridCase, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return case.susceptances * (theta[case.line_from] - theta[case.line_to])

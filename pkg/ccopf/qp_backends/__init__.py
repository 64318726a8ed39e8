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
import pkgutil
import importlib
import warnings
from enum import Enum, auto
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from typing import Union, Callable, Optional

DEFAULT_QP_BACKEND = 'interior-point'
BACKENDS = set([modname for _, modname, _ in pkgutil.iter_modules(sys.modules[__name__].__path__)])

BACKEND_TYPING = Union[str, Callable, None]


class QpStatus(Enum):
    OPTIMAL = auto()
    INFEASIBLE = auto()
    NUMERICAL = auto()


@dataclass(eq=False)
class QpProblem:
    """
    minimize    1/2 x'Px + q'x + constant
    subject to  A x = b,  G x <= h
    All matrices are dense numpy arrays; an absent block has zero rows.
    """
    P: np.ndarray
    q: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    G: np.ndarray = None
    h: np.ndarray = None
    constant: float = 0.
    name: str = 'qp'

    def __post_init__(self):
        n = len(self.q)
        self.P = np.asarray(self.P, dtype=float).reshape(n, n)
        self.q = np.asarray(self.q, dtype=float)
        self.A = np.zeros((0, n)) if self.A is None else np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float)
        self.G = np.zeros((0, n)) if self.G is None else np.asarray(self.G, dtype=float).reshape(-1, n)
        self.h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float)
        if len(self.b) != len(self.A) or len(self.h) != len(self.G):
            raise ValueError(f"Inconsistent constraint dimensions in {self.name}")

    @property
    def n(self) -> int:
        return len(self.q)

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x + self.constant)

    def residual(self, x: np.ndarray) -> float:
        """ Largest equality or inequality violation at x """
        eq = np.abs(self.A @ x - self.b).max(initial=0.)
        ineq = np.maximum(self.G @ x - self.h, 0.).max(initial=0.)
        return float(max(eq, ineq))


@dataclass(eq=False)
class QpSolution:
    status: QpStatus
    x: Optional[np.ndarray] = None
    objective: float = np.nan
    iterations: int = 0
    message: str = ''
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)


def phase_one(problem: QpProblem) -> Optional[bool]:
    """
    Feasibility LP with a zero objective, solved by HiGHS.
    :return: True if feasible, False if proven infeasible, None when undecided.
    """
    if len(problem.A) == 0 and len(problem.G) == 0:
        return True
    result = linprog(np.zeros(problem.n),
                     A_ub=problem.G if len(problem.G) else None, b_ub=problem.h if len(problem.h) else None,
                     A_eq=problem.A if len(problem.A) else None, b_eq=problem.b if len(problem.b) else None,
                     bounds=(None, None), method='highs')
    if result.status == 0:
        return True
    elif result.status == 2:
        return False
    return None


def get_qp_backend(method: BACKEND_TYPING = None) -> Callable:
    """
    :param method: Backend name, or any callable `solve(problem, **options) -> QpSolution`.
    :return: The backend's solve function.
    """
    if method is None:
        method = DEFAULT_QP_BACKEND
    if callable(method):
        return method
    elif not isinstance(method, str):
        raise TypeError(f"QP backend must be a string or a solve callable. Not {method}. "
                        f"Choose one of the followings: {BACKENDS}.")

    if method not in BACKENDS:
        raise ValueError(f"No such QP backend: {method}. Choose one of the followings: {BACKENDS}.")

    with warnings.catch_warnings():
        warnings.simplefilter('ignore', category=ImportWarning)
        backend_module = importlib.import_module(f'.{method}', __name__)
    return backend_module.solve


def backend_capabilities(method: BACKEND_TYPING = None) -> dict:
    if callable(method):
        return getattr(method, 'capabilities', {})
    if method is None:
        method = DEFAULT_QP_BACKEND
    if method not in BACKENDS:
        raise ValueError(f"No such QP backend: {method}. Choose one of the followings: {BACKENDS}.")
    return importlib.import_module(f'.{method}', __name__).CAPABILITIES

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
from enum import Enum, auto


class CCOPFException(Exception):
    def __init__(self, obj, item, msg):
        self.obj = obj
        self.item = item
        super().__init__(msg)


class CaseError(CCOPFException):
    class Type(Enum):
        SYNTAX = auto()
        MISSING_TABLE = auto()
        UNKNOWN_BUS = auto()
        BAD_REACTANCE = auto()
        BAD_COST_MODEL = auto()
        BAD_VALUE = auto()
        DISCONNECTED = auto()
        UNKNOWN_WIND_BUS = auto()
        WIND_ON_GENERATOR = auto()
        WIND_ON_SLACK = auto()
        DUPLICATE_WIND = auto()
        BAD_EPSILON = auto()
        ZERO_DEMAND = auto()
        BAD_FACTOR = auto()

    def __init__(self, obj, error: Type, item=None, line: int = None, column: int = None):
        msg = f"Case error in {obj} with item {item}."
        if error == self.Type.SYNTAX:
            msg = f"Syntax error at line {line}, column {column}: {item}."
        elif error == self.Type.MISSING_TABLE:
            msg = f"Case {obj} has no '{item}' table."
        elif error == self.Type.UNKNOWN_BUS:
            msg = f"Unknown bus {item} referenced in {obj}."
        elif error == self.Type.BAD_REACTANCE:
            msg = f"Branch {item} has a zero or negative reactance."
        elif error == self.Type.BAD_COST_MODEL:
            msg = f"Unsupported generator cost row {item}: only polynomial rows with 2 or 3 coefficients are accepted."
        elif error == self.Type.BAD_VALUE:
            msg = f"Invalid value in {obj}: {item}."
        elif error == self.Type.DISCONNECTED:
            msg = f"Network of {obj} is disconnected ({item} components)."
        elif error == self.Type.UNKNOWN_WIND_BUS:
            msg = f"Wind farm bus {item} does not exist."
        elif error == self.Type.WIND_ON_GENERATOR:
            msg = f"Wind farm bus {item} carries a generator."
        elif error == self.Type.WIND_ON_SLACK:
            msg = f"Wind farm bus {item} is the slack bus."
        elif error == self.Type.DUPLICATE_WIND:
            msg = f"More than one wind farm on bus {item}."
        elif error == self.Type.BAD_EPSILON:
            msg = f"Tolerance {item} must lie strictly inside (0, 0.5)."
        elif error == self.Type.ZERO_DEMAND:
            msg = f"Case {obj} has zero total demand."
        elif error == self.Type.BAD_FACTOR:
            msg = f"Scaling factor {item} must be positive."

        super().__init__(obj, item, msg)
        self.error = error
        self.line = line
        self.column = column


class ConfigError(CCOPFException):
    class Type(Enum):
        UNKNOWN_KEY = auto()
        MISSING_KEY = auto()
        BAD_VALUE = auto()
        MISSING_FILE = auto()

    def __init__(self, obj, error: Type, item=None):
        msg = f"Configuration error in {obj} with item {item}."
        if error == self.Type.UNKNOWN_KEY:
            msg = f"Unknown key {item!r} in {obj}."
        elif error == self.Type.MISSING_KEY:
            msg = f"Missing required key {item!r} in {obj}."
        elif error == self.Type.BAD_VALUE:
            msg = f"Invalid value in {obj}: {item}."
        elif error == self.Type.MISSING_FILE:
            msg = f"File {item} does not exist."

        super().__init__(obj, item, msg)
        self.error = error


class NetworkError(CCOPFException):
    class Type(Enum):
        SINGULAR = auto()
        UNBALANCED = auto()
        SLACK_ALPHA = auto()
        BAD_ALPHA = auto()
        NOT_VIABLE = auto()

    def __init__(self, obj, error: Type, item=None):
        msg = f"Network error in {obj} with item {item}."
        if error == self.Type.SINGULAR:
            msg = f"Reduced Laplacian is singular: the grid is disconnected ({item})."
        elif error == self.Type.UNBALANCED:
            msg = f"Injection is not balanced: residual {item}."
        elif error == self.Type.SLACK_ALPHA:
            msg = f"Participation factor on the slack bus must be zero, got {item}."
        elif error == self.Type.BAD_ALPHA:
            msg = f"Participation factors must be non-negative and sum to one ({item})."
        elif error == self.Type.NOT_VIABLE:
            msg = f"Control is not viable: balance residual {item}."

        super().__init__(obj, item, msg)
        self.error = error


class SolveError(CCOPFException):
    class Type(Enum):
        INFEASIBLE = auto()
        ROBUST_INFEASIBLE = auto()
        NUMERICAL = auto()
        DEGENERATE_GRADIENT = auto()

    def __init__(self, obj, error: Type, item=None, binding: str = None):
        msg = f"Solve error in {obj} with item {item}."
        if error == self.Type.INFEASIBLE:
            msg = f"Problem {obj} is infeasible (binding constraint class: {binding})."
        elif error == self.Type.ROBUST_INFEASIBLE:
            msg = f"Robust problem {obj} is infeasible although the nominal problem is feasible."
        elif error == self.Type.NUMERICAL:
            msg = f"Numerical failure while solving {obj}: {item}."
        elif error == self.Type.DEGENERATE_GRADIENT:
            msg = f"C is not differentiable at the linearization point of line {item}."

        super().__init__(obj, item, msg)
        self.error = error
        self.binding = binding


class UncertaintySetError(CCOPFException):
    class Type(Enum):
        BAD_BUDGET = auto()
        NOT_POSITIVE_DEFINITE = auto()
        BAD_RADIUS = auto()
        DIMENSION = auto()
        NEGATIVE_VARIANCE = auto()

    def __init__(self, obj, error: Type, item=None):
        msg = f"Uncertainty set error in {obj} with item {item}."
        if error == self.Type.BAD_BUDGET:
            msg = f"Budget parameters must be non-negative: {item}."
        elif error == self.Type.NOT_POSITIVE_DEFINITE:
            msg = "Ellipsoid shape matrix must be symmetric positive-definite."
        elif error == self.Type.BAD_RADIUS:
            msg = f"Ellipsoid radius must be non-negative, got {item}."
        elif error == self.Type.DIMENSION:
            msg = f"Set dimension {item} does not match the number of wind farms."
        elif error == self.Type.NEGATIVE_VARIANCE:
            msg = f"Variance window allows a negative variance for wind farm {item}."

        super().__init__(obj, item, msg)
        self.error = error


class ArchiveError(CCOPFException):
    class Type(Enum):
        NO_SUCH_KEY = auto()
        INVALID_KEY = auto()
        READ_ONLY = auto()
        DATA_SUB_ITEM = auto()

    def __init__(self, obj, error: Type, item, sub_item=None):
        msg = f"Archive error in {obj} with item {item}."
        if error == self.Type.NO_SUCH_KEY:
            msg = f"Item {item} does not exist in {obj}."
        elif error == self.Type.INVALID_KEY:
            msg = f"Invalid key: {item}."
        elif error == self.Type.READ_ONLY:
            msg = f"{obj} was opened in read-only mode when trying to modify {item}."
        elif error == self.Type.DATA_SUB_ITEM:
            msg = f"Sub item {sub_item} is a report but requested its child {item}."

        super().__init__(obj, item, msg)
        self.error = error
        self.sub_item = sub_item

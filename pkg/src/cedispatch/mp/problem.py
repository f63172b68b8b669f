"""Problem container shared by every solver backend."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

INF = float("inf")

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)


class ProblemError(ValueError):
    """Raised for malformed problems (unknown variables, bad bounds)."""


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    binary: bool = False


@dataclass
class Constraint:
    name: str
    index: np.ndarray
    value: np.ndarray
    sense: str
    rhs: float


@dataclass
class ProblemDef:
    """Linear program / 0-1 MILP in row form.

    Variables and constraints are addressed by integer position; names are
    kept for diagnostics, LP dumps and lookups.
    """

    name: str = "problem"
    maximize: bool = False
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    obj_constant: float = 0.0
    _var_index: dict[str, int] = field(default_factory=dict, repr=False)
    _con_index: dict[str, int] = field(default_factory=dict, repr=False)

    # -- building -------------------------------------------------------
    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                binary: bool = False, obj: float = 0.0) -> int:
        if name in self._var_index:
            raise ProblemError(f"duplicate variable {name!r}")
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if np.isnan(lb) or np.isnan(ub) or lb > ub:
            raise ProblemError(f"variable {name!r}: invalid bounds [{lb}, {ub}]")
        if lb == INF or ub == -INF:
            raise ProblemError(f"variable {name!r}: bound at wrong infinity")
        idx = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), binary))
        self._var_index[name] = idx
        if obj:
            self.objective[idx] = float(obj)
        return idx

    def add_constraint(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                       sense: str, rhs: float, name: str | None = None) -> int:
        if sense not in SENSES:
            raise ProblemError(f"unknown sense {sense!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict[int, float] = {}
        for j, a in items:
            j = int(j)
            if not 0 <= j < len(self.variables):
                raise ProblemError(f"constraint {name!r} references undeclared variable {j}")
            merged[j] = merged.get(j, 0.0) + float(a)
        idx = len(self.constraints)
        name = name if name is not None else f"c{idx}"
        if name in self._con_index:
            raise ProblemError(f"duplicate constraint {name!r}")
        keys = sorted(j for j, a in merged.items() if a != 0.0)
        self.constraints.append(Constraint(
            name, np.array(keys, dtype=np.int64),
            np.array([merged[j] for j in keys], dtype=float), sense, float(rhs)))
        self._con_index[name] = idx
        return idx

    def add_objective(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]]) -> None:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, a in items:
            self.objective[int(j)] = self.objective.get(int(j), 0.0) + float(a)

    def var(self, name: str) -> int:
        return self._var_index[name]

    def con(self, name: str) -> int:
        return self._con_index[name]

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def copy(self) -> "ProblemDef":
        return copy.deepcopy(self)

    # -- views ------------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def binaries(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.binary]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def cost(self) -> np.ndarray:
        c = np.zeros(self.n)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            rows.extend([i] * len(con.index))
            cols.extend(con.index.tolist())
            vals.extend(con.value.tolist())
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.m, self.n))

    def rhs(self) -> np.ndarray:
        return np.array([c.rhs for c in self.constraints], dtype=float)

    def senses(self) -> list[str]:
        return [c.sense for c in self.constraints]

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.cost() @ x) + self.obj_constant

    def validate(self) -> None:
        for v in self.variables:
            if v.binary and (v.lb < 0 or v.ub > 1):
                raise ProblemError(f"binary {v.name!r} has bounds outside [0, 1]")
        for j in self.objective:
            if not 0 <= j < self.n:
                raise ProblemError(f"objective references undeclared variable {j}")

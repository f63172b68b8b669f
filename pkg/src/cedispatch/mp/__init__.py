"""Mathematical-programming kernel: LP with duals, 0-1 branch and bound."""

from .dual import DualProblem, dualize
from .lp import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LpSolution,
    NumericalBreakdown,
    fix_and_resolve,
    record_lps,
    solve_lp,
)
from .lpformat import to_lp_string, write_lp
from .milp import MilpSolution, NodeLimitExceeded, solve_milp
from .problem import EQ, GE, INF, LE, Constraint, ProblemDef, ProblemError, Variable
from .verify import Certificate, certify, verify_solution

__all__ = [
    "ProblemDef", "Variable", "Constraint", "ProblemError", "INF", "LE", "GE", "EQ",
    "LpSolution", "MilpSolution", "solve_lp", "solve_milp", "fix_and_resolve",
    "record_lps", "NumericalBreakdown", "NodeLimitExceeded",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED",
    "Certificate", "certify", "verify_solution", "dualize", "DualProblem",
    "write_lp", "to_lp_string",
]

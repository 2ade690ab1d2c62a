from .model import (Assignment, Commodity, EvaluationError, MilpInstance, MilpLimits,
                    ModelError, assignment_from_paths, build_instance, build_model,
                    check_constraints, evaluate_objective)
from .oracle import OracleScopeError, oracle_solve
from .solver import (INCUMBENT, INFEASIBLE, OPTIMAL, MilpSolution, SolverBudgetError,
                     extract_paths, solve)
from .lpformat import read_solution, write_lp

__all__ = [
    "Assignment", "Commodity", "EvaluationError", "MilpInstance", "MilpLimits", "ModelError",
    "assignment_from_paths", "build_instance", "build_model", "check_constraints",
    "evaluate_objective", "OracleScopeError", "oracle_solve", "INCUMBENT", "INFEASIBLE",
    "OPTIMAL", "MilpSolution", "SolverBudgetError", "extract_paths", "solve",
    "read_solution", "write_lp",
]

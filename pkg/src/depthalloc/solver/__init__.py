from .baselines import equidistant_baseline, equidistant_indices, equidistant_targets, greedy_select
from .lp import LpModel, LpSolution, ReducedProgram, dual_bound, solve_lp, solve_reduced
from .mbp import AllocationProblem, Selection, make_selection, solve_mbp
from .simplex import bounded_simplex
from .sweep import selection_record, sweep, write_json, write_sweep_csv

__all__ = [
    "AllocationProblem", "LpModel", "LpSolution", "ReducedProgram", "Selection", "bounded_simplex",
    "dual_bound", "equidistant_baseline", "equidistant_indices", "equidistant_targets",
    "greedy_select", "make_selection", "selection_record", "solve_lp", "solve_mbp",
    "solve_reduced", "sweep", "write_json", "write_sweep_csv",
]

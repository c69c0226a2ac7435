"""Solution methods: DFS baseline, tabu heuristic, exact enumeration, LP export."""

from .baseline import solve_baseline
from .common import RouteCache, SolveResult, SlotOutcome, allocate_mode, hop_chain
from .exact import solve_exact
from .heuristic import (TabuList, build_initial_solution, precache_qkp,
                        solve_minmaxnar, tabu_step)
from .lp_export import export_lp

__all__ = [
    "RouteCache", "SolveResult", "SlotOutcome", "TabuList",
    "allocate_mode", "build_initial_solution", "export_lp", "hop_chain",
    "precache_qkp", "solve_baseline", "solve_exact", "solve_minmaxnar",
    "tabu_step",
]

"""qkdnar: attack-radius-aware planning for quantum-key-distribution networks."""

from .errors import AllocationRefused, InstanceTooLarge, PlanInfeasible, ValidationError
from .keyrate import DEFAULT_TABLE, KeyRateTable, ob_route_rate, rate_for_distance, tr_chain_rate
from .model import (Architecture, Link, Request, Scenario, Topology, build_nsf,
                    build_poliqi, generate_demand_count, generate_demands,
                    load_scenario, load_topology, poliqi_requests, poliqi_scenario)
from .nar import (NarReport, SlotNar, affected_by_link, affected_by_route,
                  avg_nar, evaluate_slot, max_nar, nar_scores, used_routes)
from .routing import Route, dfs_first_route, enumerate_phi, k_shortest_routes
from .state import (NetworkState, Realization, advance_slot, deposit_qkp, draw_qkp,
                    plan_from_json, plan_to_json, release, replay_plan,
                    try_allocate_ob, try_allocate_tr)
from .solvers import (SolveResult, export_lp, solve_baseline, solve_exact,
                      solve_minmaxnar)

__version__ = "0.1.0"

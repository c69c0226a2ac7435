"""Command-line experiment runner.

Subcommands: ``gen`` (scenario files), ``solve`` (run a solver, write plan +
result + summary + manifest), ``eval`` (replay and re-score a plan),
``sweep`` (alpha/seed/request-count grids to tidy CSV), ``export-lp``.

Exit codes: 0 success, 2 validation or infeasibility, 3 exact-solver size
guard, 4 I/O failure.  Set QKDNAR_THREADS to parallelize sweep cells.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import InstanceTooLarge, PlanInfeasible, ValidationError
from .model import (Architecture, Scenario, build_nsf, build_poliqi,
                    canonical_json, generate_demand_count, generate_demands,
                    load_scenario, load_topology, poliqi_requests, scenario_hash)
from .nar import LINK, NarReport, ONE_LEVEL, ROUTE, TRANSITIVE, evaluate_slot
from .solvers import export_lp, solve_baseline, solve_exact, solve_minmaxnar
from .state import plan_from_json, plan_to_json, replay_plan

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SIZE_GUARD = 3
EXIT_IO = 4

PROPAGATION_FLAGS = {"one": ONE_LEVEL, "transitive": TRANSITIVE}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def _manifest(scenario: Scenario, argv: list[str], outputs: list[Path],
              wallclock: float) -> dict:
    return {
        "scenario_sha256": scenario_hash(scenario),
        "seed": scenario.seed,
        "command": argv,
        "version": __version__,
        "outputs": sorted(str(p) for p in outputs),
        "wallclock": wallclock,
    }


def cmd_gen(args, argv) -> int:
    horizon = args.horizon
    if args.topology == "poliqi":
        topology = build_poliqi()
        requests = poliqi_requests(horizon=horizon)
    else:
        if args.topology == "nsf":
            topology = build_nsf(args.seed, modules_per_node=args.modules_per_node,
                                 channels=args.channels)
        elif args.topology.startswith("file:"):
            topology = load_topology(args.topology[5:])
        else:
            raise ValidationError(
                f"unknown topology {args.topology!r} (poliqi|nsf|file:PATH)")
        if args.count is not None:
            requests = generate_demand_count(topology, args.count, args.seed,
                                             horizon=horizon)
        else:
            requests = generate_demands(topology, args.coverage, args.seed,
                                        horizon=horizon)
    scenario = Scenario(
        topology=topology, requests=tuple(requests),
        architecture=Architecture.parse(args.arch), horizon=horizon,
        qkp_capacity_kbslot=args.qkp_capacity, seed=args.seed,
        theta=args.theta, k_neighborhood=args.k_neighborhood,
        tabu_tenure=args.tabu_tenure)
    out = Path(args.out)
    _write_json(out, scenario.to_json())
    print(f"wrote {out} ({len(requests)} requests, arch "
          f"{scenario.architecture.label()}, horizon {horizon})")
    return EXIT_OK


SOLVERS = {"baseline": solve_baseline, "heuristic": solve_minmaxnar,
           "exact": solve_exact}

SUMMARY_COLUMNS = ["t", "maxNAR", "avgNAR", "served", "unserved",
                   "modules_avg", "qkp_total_kbslot"]


def _print_slot_table(result) -> None:
    print(f"{'t':>3} {'maxNAR':>7} {'avgNAR':>8} {'served':>7} {'unserved':>9}")
    for row in result.summary_rows():
        print(f"{row['t']:>3} {row['maxNAR']:>7} {row['avgNAR']:>8.3f} "
              f"{row['served']:>7} {row['unserved']:>9}")


def cmd_solve(args, argv) -> int:
    t0 = time.perf_counter()
    scenario = load_scenario(args.scenario)
    result = SOLVERS[args.solver](scenario, semantics=args.semantics)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan_path = out_dir / "plan.json"
    result_path = out_dir / "result.json"
    nar_path = out_dir / "nar.json"
    csv_path = out_dir / "summary.csv"
    manifest_path = out_dir / "manifest.json"
    _write_json(plan_path, plan_to_json(result.plan))
    _write_json(result_path, result.to_json())
    _write_json(nar_path, result.nar_report.to_json())
    _write_csv(csv_path, result.summary_rows(), SUMMARY_COLUMNS)
    _write_json(manifest_path, _manifest(
        scenario, argv, [plan_path, result_path, nar_path, csv_path],
        time.perf_counter() - t0))
    _print_slot_table(result)
    print(f"objective (sum of per-slot maxNAR): {result.objective}")
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    scenario = load_scenario(args.scenario)
    plan_path = Path(args.plan)
    try:
        records = json.loads(plan_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read plan {plan_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"plan {plan_path} is not valid JSON: {exc}") from exc
    plan = plan_from_json(records, scenario.topology)
    state = replay_plan(scenario, plan)          # raises PlanInfeasible
    propagation = PROPAGATION_FLAGS[args.propagation]
    slots = [evaluate_slot(plan, state, t, args.semantics, propagation)
             for t in range(scenario.horizon)]
    report = NarReport(slots=slots, semantics=args.semantics,
                       propagation=propagation)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "nar.json", report.to_json())
        _write_csv(out_dir / "nar.csv", report.csv_rows(),
                   ["slot", "max_nar", "avg_nar"])
    for sn in slots:
        print(f"slot {sn.slot}: maxNAR={sn.max_nar} avgNAR={sn.avg_nar:.3f}")
    print(f"objective: {report.objective}")
    return EXIT_OK


def _sweep_cell(payload: dict) -> list[dict]:
    scenario = Scenario.from_json(payload["scenario"])
    if payload["alpha"] is not None:
        scenario = scenario.with_architecture(Architecture.obtr(payload["alpha"]))
    if payload["seed"] is not None:
        scenario = replace(scenario, seed=payload["seed"])
    if payload["count"] is not None:
        requests = generate_demand_count(scenario.topology, payload["count"],
                                         scenario.seed, horizon=scenario.horizon)
        scenario = replace(scenario, requests=tuple(requests))
    result = solve_minmaxnar(scenario, semantics=payload["semantics"])
    rows = []
    for row in result.summary_rows():
        rows.append({
            "alpha": "" if payload["alpha"] is None else payload["alpha"],
            "seed": scenario.seed,
            "n_requests": len(scenario.requests),
            "slot": row["t"],
            "maxNAR": row["maxNAR"],
            "avgNAR": row["avgNAR"],
            "modules_avg": row["modules_avg"],
            "served": row["served"],
        })
    return rows


def _int_list(text: str, flag: str) -> list[int]:
    if not text.strip():
        raise ValidationError(f"{flag}: empty grid")
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"{flag}: {exc}") from exc


def cmd_sweep(args, argv) -> int:
    t0 = time.perf_counter()
    scenario = load_scenario(args.scenario)
    alphas = _int_list(args.alphas, "--alphas") if args.alphas is not None else [None]
    seeds = (list(range(args.seeds)) if args.seeds is not None
             else [scenario.seed])
    counts = (_int_list(args.request_counts, "--request-counts")
              if args.request_counts is not None else [None])
    if not alphas or not seeds or not counts:
        raise ValidationError("empty sweep grid")
    scenario_json = scenario.to_json()
    cells = [{"scenario": scenario_json, "alpha": a, "seed": s, "count": c,
              "semantics": args.semantics}
             for a in alphas for s in seeds for c in counts]
    threads = int(os.environ.get("QKDNAR_THREADS", "1"))
    rows: list[dict] = []
    if threads > 1 and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for cell_rows in pool.map(_sweep_cell, cells):
                rows.extend(cell_rows)
    else:
        for cell in cells:
            rows.extend(_sweep_cell(cell))
    rows.sort(key=lambda r: (str(r["alpha"]), r["seed"], r["n_requests"], r["slot"]))
    out = Path(args.out)
    _write_csv(out, rows, ["alpha", "seed", "n_requests", "slot", "maxNAR",
                           "avgNAR", "modules_avg", "served"])
    print(f"wrote {out} ({len(rows)} rows, {len(cells)} cells, "
          f"{time.perf_counter() - t0:.1f}s)")
    return EXIT_OK


def cmd_export_lp(args, argv) -> int:
    scenario = load_scenario(args.scenario)
    meta = export_lp(scenario, args.out, max_routes=args.max_routes)
    sets = meta["sets"]
    print("index sets: " + " ".join(f"{k}={v}" for k, v in sets.items()))
    print(f"variables: {meta['total_vars']}  rows: {meta['total_rows']}  "
          f"big-M: {meta['big_m']:g}")
    print(f"wrote {meta['path']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdnar",
        description="Plan and evaluate QKD key provisioning with minimal "
                    "worst-case attack radius.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a scenario file")
    gen.add_argument("--topology", default="poliqi",
                     help="poliqi | nsf | file:PATH")
    gen.add_argument("--coverage", type=float, default=0.8,
                     help="fraction of node pairs with a request")
    gen.add_argument("--count", type=int, default=None,
                     help="exact request count (overrides --coverage)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--horizon", type=int, default=1)
    gen.add_argument("--arch", default="ob", help="ob | tr | obtr:ALPHA")
    gen.add_argument("--channels", type=int, default=16,
                     help="wavelengths per link (nsf builder)")
    gen.add_argument("--modules-per-node", type=int, default=5,
                     help="module budget per node (nsf builder)")
    gen.add_argument("--qkp-capacity", type=float, default=50.0)
    gen.add_argument("--theta", type=int, default=200)
    gen.add_argument("--k-neighborhood", type=int, default=4)
    gen.add_argument("--tabu-tenure", type=int, default=7)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="run a solver on a scenario")
    solve.add_argument("--scenario", required=True)
    solve.add_argument("--solver", choices=sorted(SOLVERS), default="heuristic")
    solve.add_argument("--semantics", choices=[LINK, ROUTE], default=LINK)
    solve.add_argument("--out", required=True, help="output directory")
    solve.set_defaults(func=cmd_solve)

    ev = sub.add_parser("eval", help="replay a plan and recompute its metrics")
    ev.add_argument("--scenario", required=True)
    ev.add_argument("--plan", required=True)
    ev.add_argument("--semantics", choices=[LINK, ROUTE], default=LINK)
    ev.add_argument("--propagation", choices=sorted(PROPAGATION_FLAGS),
                    default="one")
    ev.add_argument("--out", default=None, help="optional output directory")
    ev.set_defaults(func=cmd_eval)

    sweep = sub.add_parser("sweep", help="heuristic grid runs to tidy CSV")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--alphas", default=None,
                       help="comma-separated OBTR alpha values")
    sweep.add_argument("--seeds", type=int, default=None,
                       help="run seeds 0..N-1")
    sweep.add_argument("--request-counts", default=None,
                       help="comma-separated request counts")
    sweep.add_argument("--semantics", choices=[LINK, ROUTE], default=LINK)
    sweep.add_argument("--out", required=True, help="output CSV path")
    sweep.set_defaults(func=cmd_sweep)

    lp = sub.add_parser("export-lp", help="write the integer model as an LP file")
    lp.add_argument("--scenario", required=True)
    lp.add_argument("--out", required=True)
    lp.add_argument("--max-routes", type=int, default=8)
    lp.set_defaults(func=cmd_export_lp)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE_GUARD
    except (ValidationError, PlanInfeasible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

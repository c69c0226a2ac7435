"""CPLEX-LP text export of the full routing/wavelength/key-pool integer model.

The emitted model follows the RWA-MAR formulation: binary flow variables over
a fully connected auxiliary graph, per-route selection variables, module and
channel exclusivity, big-M key-rate coupling, key-pool ledger rows, and the
per-target worst-case affected-request count that the objective minimizes.
Route selection is gated by the pool-indicator variable exactly as in the
formulation's equation (4), so any active auxiliary link selects one physical
route and shows up in the attack-radius rows.

Closure choices documented in the file header: every request is forced served
on its active slots (the objective alone would provision nothing), pools
start empty, and demands sharing a node pair are aggregated in the ledger
rows.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

from ..errors import ValidationError
from ..model import Scenario, scenario_hash
from ..routing import DEFAULT_MAX_KM, enumerate_phi
from .common import hop_chain

EQUATION_MAP = {
    "flow": "(2) flow conservation of auxiliary-link channels per (pair,node,w,t)",
    "or": "(f=q|p) auxiliary link is realized by a channel or by pooled keys",
    "modules": "(3) module budget per node and slot",
    "routesel": "(4) one physical route per active auxiliary link",
    "chanexcl": "(5) a (route,wavelength) serves at most one pair",
    "fiberexcl": "(6) a (fiber,wavelength) carries at most one route",
    "keyrate": "(7) generated keys bounded by route rate plus pooled keys (big-M)",
    "active": "(8) keys only on active paths (big-M)",
    "gbounds": "(9) pool balance stays within [0, capacity] (bounds section)",
    "ledger": "(10) pool balance carry-over minus consumption",
    "gammaq": "(11) pooled-key supply only where the pool indicator is set",
    "xxlink": "(12) pair-uses-fiber indicator dominates route selection",
    "used": "(13) route-used indicator dominates route selection",
    "affect": "(14) pair affected when its fiber lies on a used route",
    "nar": "(15) per-slot worst case over all (aux link, route) attack targets",
}


def export_lp(scenario: Scenario, path: Union[str, Path],
              max_routes: int = 8) -> dict:
    """Write the LP file; returns the index-set and count metadata."""
    if max_routes < 1:
        raise ValidationError(f"max_routes must be >= 1, got {max_routes}")
    topo = scenario.topology
    table = scenario.key_rate_table
    nodes = sorted(topo.nodes)
    e_a = [(u, v) for u in nodes for v in nodes if u != v]
    e_p = sorted(topo.link_map)
    pairs = sorted({(r.src, r.dst) for r in scenario.requests})
    requests = sorted(scenario.requests, key=lambda r: r.id)
    W = range(topo.channels)
    T = range(scenario.horizon)
    phi = {}
    for ei, (u, v) in enumerate(e_a):
        phi[ei] = enumerate_phi(topo, u, v, max_routes, DEFAULT_MAX_KM)
    rate = {}
    for ei, routes in phi.items():
        for ri, route in enumerate(routes):
            rate[(ei, ri)] = table.ob_route_rate(route)
    max_rate = max((a[1] for a in table.anchors), default=0.0)
    max_demand = max((r.rate_kbps for r in requests), default=0.0)
    big_m = max_rate * max(1, topo.channels) + max_demand

    ei_of = {pair: i for i, pair in enumerate(e_a)}
    li_of = {lk: i for i, lk in enumerate(e_p)}
    pi_of = {pair: i for i, pair in enumerate(pairs)}
    out_aux = {n: [i for i, (u, _) in enumerate(e_a) if u == n] for n in nodes}
    in_aux = {n: [i for i, (_, v) in enumerate(e_a) if v == n] for n in nodes}
    links_of = {(ei, ri): route.link_keys()
                for ei, routes in phi.items() for ri, route in enumerate(routes)}
    sum_phi = sum(len(r) for r in phi.values())

    def f(p, e, w, t):
        return f"f_p{p}_e{e}_w{w}_t{t}"

    def x(p, e, w, t, r):
        return f"x_p{p}_e{e}_w{w}_t{t}_r{r}"

    def xx(p, l, t):
        return f"xx_p{p}_l{l}_t{t}"

    def pch(p, e, w, t):
        return f"p_p{p}_e{e}_w{w}_t{t}"

    def q(p, e, w, t):
        return f"q_p{p}_e{e}_w{w}_t{t}"

    def u(p, w, t):
        return f"u_p{p}_w{w}_t{t}"

    def z(p, w, t):
        return f"z_p{p}_w{w}_t{t}"

    def B(e, r, t):
        return f"B_e{e}r{r}_t{t}"

    def C(d, e, r, t):
        return f"C_d{d}_e{e}r{r}_t{t}"

    def g(p, t):
        return f"g_p{p}_t{t}"

    def y(d, t):
        return f"y_d{d}_t{t}"

    def gamma(p, e, w, t):
        return f"gamma_p{p}_e{e}_w{w}_t{t}"

    nP, nEa, nEp, nD = len(pairs), len(e_a), len(e_p), len(requests)
    nW, nT = topo.channels, scenario.horizon
    var_counts = {
        "f": nP * nEa * nW * nT,
        "x": nP * nW * nT * sum_phi,
        "xx": nP * nEp * nT,
        "p": nP * nEa * nW * nT,
        "q": nP * nEa * nW * nT,
        "u": nP * nW * nT,
        "z": nP * nW * nT,
        "B": sum_phi * nT,
        "C": nD * sum_phi * nT,
        "g": nP * nT,
        "y": nD * nT,
        "gamma": nP * nEa * nW * nT,
        "maxNAR": nT,
    }

    rows: dict[str, list[str]] = {k: [] for k in (
        "flow", "or", "modules", "routesel", "chanexcl", "fiberexcl",
        "keyrate", "active", "ledger", "gammaq", "xxlink", "used",
        "affect", "nar")}

    # (2) flow conservation on the auxiliary graph
    for pi, (a, b) in enumerate(pairs):
        for ni, n in enumerate(nodes):
            for t in T:
                for w in W:
                    terms = [f"+ {f(pi, e, w, t)}" for e in out_aux[n]]
                    terms += [f"- {f(pi, e, w, t)}" for e in in_aux[n]]
                    if n == a:
                        terms.append(f"- {z(pi, w, t)}")
                    elif n == b:
                        terms.append(f"+ {z(pi, w, t)}")
                    rows["flow"].append(
                        f"flow_p{pi}_n{ni}_w{w}_t{t}: {' '.join(terms)} = 0")

    # (f = q | p) standard 0-1 linearization of the OR
    for pi in range(nP):
        for ei in range(nEa):
            for t in T:
                for w in W:
                    fv, qv, pv = f(pi, ei, w, t), q(pi, ei, w, t), pch(pi, ei, w, t)
                    rows["or"].append(f"or1_p{pi}_e{ei}_w{w}_t{t}: {fv} - {qv} >= 0")
                    rows["or"].append(f"or2_p{pi}_e{ei}_w{w}_t{t}: {fv} - {pv} >= 0")
                    rows["or"].append(
                        f"or3_p{pi}_e{ei}_w{w}_t{t}: {fv} - {qv} - {pv} <= 0")

    # (3) module budget
    budget = topo.module_budget
    for ni, n in enumerate(nodes):
        for t in T:
            terms = []
            for pi in range(nP):
                for e in out_aux[n] + in_aux[n]:
                    for w in W:
                        terms.append(f"+ {pch(pi, e, w, t)}")
            if terms:
                rows["modules"].append(
                    f"modules_n{ni}_t{t}: {' '.join(terms)} <= {budget[n]}")

    # (4) route selection gated by the pool indicator
    for pi in range(nP):
        for ei in range(nEa):
            for w in W:
                for t in T:
                    terms = [f"+ {x(pi, ei, w, t, ri)}" for ri in range(len(phi[ei]))]
                    terms.append(f"- {q(pi, ei, w, t)}")
                    rows["routesel"].append(
                        f"routesel_p{pi}_e{ei}_w{w}_t{t}: {' '.join(terms)} = 0")

    # (5) a (route, wavelength) serves one pair
    for ei in range(nEa):
        for ri in range(len(phi[ei])):
            for t in T:
                for w in W:
                    terms = [f"+ {x(pi, ei, w, t, ri)}" for pi in range(nP)]
                    rows["chanexcl"].append(
                        f"chanexcl_e{ei}r{ri}_w{w}_t{t}: {' '.join(terms)} <= 1")

    # (6) a (fiber, wavelength) carries one route
    for lk, li in li_of.items():
        for w in W:
            for t in T:
                terms = []
                for ei in range(nEa):
                    for ri in range(len(phi[ei])):
                        if lk in links_of[(ei, ri)]:
                            for pi in range(nP):
                                terms.append(f"+ {x(pi, ei, w, t, ri)}")
                if terms:
                    rows["fiberexcl"].append(
                        f"fiberexcl_l{li}_w{w}_t{t}: {' '.join(terms)} <= 1")

    # (7) key rate bounded by the selected route's rate plus pooled keys
    for ei in range(nEa):
        for pi in range(nP):
            for w in W:
                for t in T:
                    terms = [f"+ {u(pi, w, t)}"]
                    for ri in range(len(phi[ei])):
                        terms.append(f"- {rate[(ei, ri)]:.17g} {x(pi, ei, w, t, ri)}")
                    terms.append(f"- {gamma(pi, ei, w, t)}")
                    terms.append(f"+ {big_m:.17g} {f(pi, ei, w, t)}")
                    rows["keyrate"].append(
                        f"keyrate_e{ei}_p{pi}_w{w}_t{t}: {' '.join(terms)} <= {big_m:.17g}")

    # (8) keys only on active paths
    for pi in range(nP):
        for w in W:
            for t in T:
                rows["active"].append(
                    f"active_p{pi}_w{w}_t{t}: {u(pi, w, t)} - {big_m:.17g} {z(pi, w, t)} <= 0")

    # (10) pool ledger; pools start empty before the first slot
    k_of_pair: dict[int, list] = {pi: [] for pi in range(nP)}
    for d, req in enumerate(requests):
        k_of_pair[pi_of[(req.src, req.dst)]].append((d, req))
    for pi, (a, b) in enumerate(pairs):
        e_fwd, e_rev = ei_of[(a, b)], ei_of[(b, a)]
        for t in T:
            terms = [f"+ {g(pi, t)}"]
            if t > 0:
                terms.append(f"- {g(pi, t - 1)}")
            for w in W:
                terms.append(f"- {u(pi, w, t)}")
            for pj in range(nP):
                for w in W:
                    terms.append(f"+ {gamma(pj, e_fwd, w, t)}")
                    terms.append(f"+ {gamma(pj, e_rev, w, t)}")
            for d, req in k_of_pair[pi]:
                terms.append(f"+ {req.rate_kbps:.17g} {y(d, t)}")
            rows["ledger"].append(f"ledger_p{pi}_t{t}: {' '.join(terms)} <= 0")

    # (11) pooled-key supply needs the pool indicator
    for pi in range(nP):
        for ei in range(nEa):
            for w in W:
                for t in T:
                    rows["gammaq"].append(
                        f"gammaq_p{pi}_e{ei}_w{w}_t{t}: "
                        f"{gamma(pi, ei, w, t)} - {big_m:.17g} {q(pi, ei, w, t)} <= 0")

    # (12) fiber-usage indicator dominates route selection
    for pi in range(nP):
        for t in T:
            for ei in range(nEa):
                for ri in range(len(phi[ei])):
                    for lk in links_of[(ei, ri)]:
                        li = li_of[lk]
                        for w in W:
                            rows["xxlink"].append(
                                f"xxlink_p{pi}_e{ei}r{ri}_l{li}_w{w}_t{t}: "
                                f"{xx(pi, li, t)} - {x(pi, ei, w, t, ri)} >= 0")

    # (13) route-used indicator
    for t in T:
        for ei in range(nEa):
            for ri in range(len(phi[ei])):
                for pi in range(nP):
                    for w in W:
                        rows["used"].append(
                            f"used_e{ei}r{ri}_p{pi}_w{w}_t{t}: "
                            f"{B(ei, ri, t)} - {x(pi, ei, w, t, ri)} >= 0")

    # (14) affected when the pair's fiber lies on a used route (AND linearized)
    for t in T:
        for d, req in enumerate(requests):
            pi = pi_of[(req.src, req.dst)]
            for ei in range(nEa):
                for ri in range(len(phi[ei])):
                    for lk in links_of[(ei, ri)]:
                        li = li_of[lk]
                        rows["affect"].append(
                            f"affect_d{d}_e{ei}r{ri}_l{li}_t{t}: "
                            f"{C(d, ei, ri, t)} - {xx(pi, li, t)} - {B(ei, ri, t)} >= -1")

    # (15) the per-slot worst case over all attack targets
    for t in T:
        for ei in range(nEa):
            for ri in range(len(phi[ei])):
                terms = [f"maxNAR_t{t}"]
                terms += [f"- {C(d, ei, ri, t)}" for d in range(nD)]
                rows["nar"].append(
                    f"nar_e{ei}r{ri}_t{t}: {' '.join(terms)} >= 0")

    row_counts = {k: len(v) for k, v in rows.items()}

    lines = []
    lines.append("\\ RWA-MAR integer model export (CPLEX LP format)")
    lines.append(f"\\ instance sha256: {scenario_hash(scenario)}")
    lines.append(
        f"\\ sets: |N|={len(nodes)} |Ep|={nEp} |Ea|={nEa} |P|={nP} |D|={nD} "
        f"|W|={nW} |T|={nT} sumPhi={sum_phi}")
    lines.append(f"\\ big-M: {big_m:.17g} (max anchor rate x |W| + max demand)")
    lines.append("\\ vars: " + " ".join(f"{k}={v}" for k, v in var_counts.items())
                 + f" total={sum(var_counts.values())}")
    lines.append("\\ rows: " + " ".join(f"{k}={v}" for k, v in row_counts.items())
                 + f" total={sum(row_counts.values())}")
    lines.append("\\ equation map:")
    for name, desc in EQUATION_MAP.items():
        lines.append(f"\\   {name}: {desc}")
    lines.append("\\ closure: y fixed to 1 on active slots; g(-1)=0; "
                 "demands aggregated per pair in ledger rows")
    if nW == 0:
        lines.append("\\ WARNING: |W|=0, the model is infeasible "
                     "(no channel can ever be allocated)")
    lines.append("\\ pair map: " + " ".join(
        f"p{i}=({a},{b})" for i, (a, b) in enumerate(pairs)))
    lines.append("\\ aux link map: " + " ".join(
        f"e{i}=({u},{v})" for i, (u, v) in enumerate(e_a)))
    lines.append("\\ fiber map: " + " ".join(
        f"l{i}={u}>{v}" for (u, v), i in sorted(li_of.items(), key=lambda kv: kv[1])))
    for ei in range(nEa):
        if phi[ei]:
            lines.append(f"\\ routes e{ei}: " + " ".join(
                f"r{ri}={'-'.join(rt.nodes)}" for ri, rt in enumerate(phi[ei])))

    lines.append("Minimize")
    obj_terms = " + ".join(f"maxNAR_t{t}" for t in T)
    lines.append(f" obj: {obj_terms}")
    lines.append("Subject To")
    for family in ("flow", "or", "modules", "routesel", "chanexcl", "fiberexcl",
                   "keyrate", "active", "ledger", "gammaq", "xxlink", "used",
                   "affect", "nar"):
        for row in rows[family]:
            lines.append(f" {row}")

    lines.append("Bounds")
    cap = scenario.qkp_capacity_kbslot
    for pi in range(nP):
        for t in T:
            lines.append(f" 0 <= {g(pi, t)} <= {cap:.17g}")
    for d, req in enumerate(requests):
        for t in T:
            val = 1 if t in req.slots else 0
            lines.append(f" {y(d, t)} = {val}")
    for pi in range(nP):
        for w in W:
            for t in T:
                lines.append(f" 0 <= {u(pi, w, t)} <= {big_m:.17g}")
    for pi in range(nP):
        for ei in range(nEa):
            for w in W:
                for t in T:
                    lines.append(f" 0 <= {gamma(pi, ei, w, t)} <= {big_m:.17g}")
    for t in T:
        lines.append(f" 0 <= maxNAR_t{t} <= {nD}")

    lines.append("Binaries")
    binaries = []
    for pi in range(nP):
        for ei in range(nEa):
            for w in W:
                for t in T:
                    binaries += [f(pi, ei, w, t), pch(pi, ei, w, t), q(pi, ei, w, t)]
                    binaries += [x(pi, ei, w, t, ri) for ri in range(len(phi[ei]))]
    for pi in range(nP):
        for li in range(nEp):
            for t in T:
                binaries.append(xx(pi, li, t))
    for pi in range(nP):
        for w in W:
            for t in T:
                binaries.append(z(pi, w, t))
    for ei in range(nEa):
        for ri in range(len(phi[ei])):
            for t in T:
                binaries.append(B(ei, ri, t))
                binaries += [C(d, ei, ri, t) for d in range(nD)]
    for d in range(nD):
        for t in T:
            binaries.append(y(d, t))
    for chunk_start in range(0, len(binaries), 8):
        lines.append(" " + " ".join(binaries[chunk_start:chunk_start + 8]))

    lines.append("Generals")
    generals = []
    for pi in range(nP):
        for w in W:
            for t in T:
                generals.append(u(pi, w, t))
    for pi in range(nP):
        for t in T:
            generals.append(g(pi, t))
    for pi in range(nP):
        for ei in range(nEa):
            for w in W:
                for t in T:
                    generals.append(gamma(pi, ei, w, t))
    for t in T:
        generals.append(f"maxNAR_t{t}")
    for chunk_start in range(0, len(generals), 8):
        lines.append(" " + " ".join(generals[chunk_start:chunk_start + 8]))
    lines.append("End")

    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot write LP file {path}: {exc}") from exc
    return {
        "path": str(path),
        "sets": {"N": len(nodes), "Ep": nEp, "Ea": nEa, "P": nP, "D": nD,
                 "W": nW, "T": nT, "sumPhi": sum_phi},
        "big_m": big_m,
        "var_counts": var_counts,
        "row_counts": row_counts,
        "total_vars": sum(var_counts.values()),
        "total_rows": sum(row_counts.values()),
    }

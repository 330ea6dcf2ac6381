"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N PASS|FAIL: ...`` line (also repeated
in the pytest terminal summary) and then asserts the same condition.
"""

from __future__ import annotations

import math
import time

import numpy as np

from helpers import SCENARIOS, WHEATSTONE_EDGES, network_file, scenario, small_instances
from oracles import exhaustive_min_cut, grid_equilibrium
from routelearn.cli import dispatch
from routelearn.corpus import random_costs, random_dag_network, random_learning_scenario, random_sp_network
from routelearn.costs import Belief
from routelearn.counterexample import ConverseParams, build_converse_instance, verify_converse
from routelearn.equilibrium import WardropSolver, equilibrium_load_map, wardrop_gap
from routelearn.errors import WitnessNotFound
from routelearn.learning import (
    Achieved,
    FailsAt,
    HoldsOnGrid,
    NotByHorizon,
    check_strong_learning,
    check_weak_learning,
    run_dynamics,
)
from routelearn.network import (
    RoutingNetwork,
    check_paradox,
    find_od_paradox,
    is_series_parallel,
    min_cut_capacity,
    validate_network,
)
from routelearn.scenario_file import load_scenario, serialize_scenario

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str, elapsed: float, limit: float | None = None) -> bool:
    if limit is not None:
        ok = ok and elapsed < limit
        detail += f"; {elapsed:.2f}s (limit {limit:g}s)"
    else:
        detail += f"; {elapsed:.2f}s"
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def test_criterion_1_bounded_costs():
    t0 = time.perf_counter()
    sc = scenario("pigou_bounded")
    worst_e2, moved, periods = 0.0, 0, 0
    for seed in (0, 1, 2):
        tr = run_dynamics(sc, seed=seed, horizon=200)
        periods += len(tr.periods)
        worst_e2 = max([worst_e2] + [p.obs.loads["e2"] for p in tr.periods])
        moved += sum(p.posterior != sc.prior for p in tr.periods)
    ok = periods == 600 and worst_e2 <= 1e-10 and moved == 0
    detail = f"3 seeds x 200 periods, max e2 load {worst_e2:.3g}, periods with posterior != prior: {moved}"
    assert report(1, ok, detail, time.perf_counter() - t0, 5.0)


def test_criterion_2_bounded_demand():
    t0 = time.perf_counter()
    sc = scenario("bounded_demand")
    tr = run_dynamics(sc)
    e2 = max(p.obs.loads["e2"] for p in tr.periods)
    constant = all(p.posterior == sc.prior for p in tr.periods)
    weak = check_weak_learning(sc, tr.final_belief, [3.0])
    ok_i = (
        e2 <= 1e-10
        and constant
        and isinstance(weak, FailsAt)
        and weak.demand == 3.0
        and weak.edge == "e2"
        and abs(weak.deviation - 1.5) <= 1e-4
    )
    sec6 = scenario("sec6_exponential")
    solver = sec6.solver_for()
    achieved = 0
    for seed in range(100):
        v = check_strong_learning(run_dynamics(sec6, seed=seed, horizon=10_000, solver=solver))
        achieved += isinstance(v, Achieved)
    ok_ii = achieved >= 95
    detail = (
        f"(i) max e2 load {e2:.3g}, posterior constant {constant}, weak-check {weak}; "
        f"(ii) strong learning in {achieved}/100 seeds"
    )
    assert report(2, ok_i and ok_ii, detail, time.perf_counter() - t0, 60.0)


def test_criterion_3_weak_vs_strong():
    t0 = time.perf_counter()
    sc = scenario("wheatstone")
    tr = run_dynamics(sc)
    bridge = ("e1", "e3", "e5")
    worst_bridge = worst_split = 0.0
    for p in tr.periods:
        d = p.obs.demand
        x = p.obs.loads
        # y1 = flow on e1-e4 = x_e4, y2 = flow on e2-e5 = x_e2, y3 = bridge path flow = x_e3
        worst_bridge = max(worst_bridge, x["e3"])
        worst_split = max(worst_split, abs(x["e4"] - d / 2), abs(x["e2"] - d / 2))
    constant = all(p.posterior == sc.prior for p in tr.periods)
    strong = check_strong_learning(tr)
    grid = [20.0 + 0.1 * k for k in range(100)]
    weak = check_weak_learning(sc, tr.final_belief, grid)
    ok = (
        len(tr.periods) == sc.horizon
        and worst_bridge <= 1e-6
        and worst_split <= 1e-6
        and constant
        and isinstance(strong, NotByHorizon)
        and isinstance(weak, HoldsOnGrid)
        and weak.max_deviation < 1e-5
    )
    assert bridge in sc.net.paths
    detail = (
        f"max y3 {worst_bridge:.3g}, max |y-d/2| {worst_split:.3g}, posterior constant {constant}, "
        f"strong {strong}, weak {weak}"
    )
    assert report(3, ok, detail, time.perf_counter() - t0, 10.0)


def test_criterion_4_solver_oracle():
    t0 = time.perf_counter()
    cases = small_instances()
    names = {c[0] for c in cases}
    worst_load = worst_gap = 0.0
    for _, net, fam, b, d in cases:
        res = WardropSolver(net, fam).solve(b, d)
        ref = grid_equilibrium(net, fam, b, d)
        worst_load = max([worst_load] + [abs(res.loads[e] - ref[e]) for e in net.edge_ids])
        worst_gap = max(worst_gap, res.gap, wardrop_gap(net, fam, b, res.flow_witness))
    examples = {"pigou_bounded", "bounded_demand", "wheatstone", "no_sp"}
    ok = len(cases) == 25 and examples <= names and worst_load <= 1e-4 and worst_gap <= 1e-9
    detail = f"{len(cases)} instances, max load error {worst_load:.3g}, max gap {worst_gap:.3g}"
    assert report(4, ok, detail, time.perf_counter() - t0, 120.0)


def test_criterion_5_increasing_loads():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, bad = 0.0, 0
    for _ in range(50):
        net = random_sp_network(rng, int(rng.integers(4, 13)))
        net, fam = random_costs(rng, net, ("s0",), require_finite_capacity=bool(rng.random() < 0.5))
        gamma = net.capacity_value
        top = 0.999 * gamma if gamma < math.inf else 20.0
        maps = equilibrium_load_map(net, fam, Belief.uniform(fam.states), np.linspace(0.0, top, 20))
        for (_, x1), (_, x2) in zip(maps, maps[1:]):
            drop = max(x1[e] - x2[e] for e in net.edge_ids)
            worst = max(worst, drop)
            bad += drop > 1e-6
    detail = f"50 SP networks x 20 demands, largest load decrease {worst:.3g}, violations {bad}"
    assert report(5, bad == 0, detail, time.perf_counter() - t0, 120.0)


def test_criterion_6_strong_learning_on_sp():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    achieved = runs = lost_truth = 0
    for _ in range(20):
        sc = random_learning_scenario(rng, horizon=5000)
        solver = sc.solver_for()
        for seed in range(5):
            tr = run_dynamics(sc, seed=seed, solver=solver)
            runs += 1
            achieved += check_strong_learning(tr).ok
            lost_truth += any(p.posterior[sc.truth] <= 0 for p in tr.periods)
    ok = runs == 100 and achieved >= 95 and lost_truth == 0
    detail = f"strong learning in {achieved}/{runs} runs, runs eliminating the truth: {lost_truth}"
    assert report(6, ok, detail, time.perf_counter() - t0, 600.0)


def test_criterion_7_converse():
    t0 = time.perf_counter()
    net = validate_network(RoutingNetwork.from_edges(WHEATSTONE_EDGES))
    sc = build_converse_instance(net, ConverseParams(A=4.0, eps=0.3, kappa=0.4), horizon=1000)
    bundled = load_scenario(SCENARIOS / "converse_wheatstone.scn")
    same_file = serialize_scenario(bundled) == serialize_scenario(sc)
    try:
        rep = verify_converse(sc, kappa=0.4)
    except WitnessNotFound as exc:
        rep = exc.report
    first33 = rep.rows[:33]
    ok_i = all(r.r1_flow <= 0.4 + 1e-6 for r in first33)
    ok_ii = all(r.e1_load <= 1 + 1e-6 for r in first33)
    ok_iii = rep.witness is not None
    tr = run_dynamics(sc)
    kept = sum(p.posterior == sc.prior for p in tr.periods)
    ok_dyn = len(tr.periods) == 1000 and kept == 1000
    biggest = max(r.max_dev for r in rep.rows)
    witness = (
        f"demand {rep.witness.demand:.6g} dev {rep.witness.max_dev:.3g}"
        if ok_iii
        else f"none (largest deviation {biggest:.3g} over {len(rep.rows)} demands)"
    )
    detail = (
        f"(i) {'pass' if ok_i else 'FAIL'} max r1 flow {max(r.r1_flow for r in first33):.6g}; "
        f"(ii) {'pass' if ok_ii else 'FAIL'} max e1 load {max(r.e1_load for r in first33):.6g}; "
        f"(iii) {'pass' if ok_iii else 'FAIL'} witness {witness}; "
        f"dynamics {'pass' if ok_dyn else 'FAIL'} posterior at prior {kept}/{len(tr.periods)}; "
        f"bundled file matches {same_file}"
    )
    ok = ok_i and ok_ii and ok_iii and ok_dyn and same_file
    assert report(7, ok, detail, time.perf_counter() - t0, 60.0)


def test_criterion_8_structure():
    t0 = time.perf_counter()
    a_sp = is_series_parallel(network_file("fig_sp_a")) is not None
    witnesses = {}
    for name, net in [("fig_sp_b", network_file("fig_sp_b")), ("wheatstone", network_file("wheatstone"))]:
        p = find_od_paradox(net)
        witnesses[name] = is_series_parallel(net) is None and p is not None and check_paradox(net.net, p) == []
    rng = np.random.default_rng(88)
    mismatches = 0
    for _ in range(20):
        net = random_dag_network(rng, int(rng.integers(3, 8)), int(rng.integers(3, 13)))
        caps = {e: (math.inf if rng.random() < 0.2 else float(rng.integers(1, 9)) / 2) for e in net.edge_ids}
        net = validate_network(RoutingNetwork(net.net.vertices, net.net.edges, "O", "D", caps))
        assert len(net.edges) <= 12
        fast, slow = min_cut_capacity(net), exhaustive_min_cut(net)
        mismatches += not (fast == slow or math.isclose(fast, slow, rel_tol=1e-12))
    ok = a_sp and all(witnesses.values()) and mismatches == 0
    detail = f"fig A SP {a_sp}, non-SP with valid witness {witnesses}, min-cut mismatches {mismatches}/20"
    assert report(8, ok, detail, time.perf_counter() - t0, 30.0)


def test_criterion_9_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    outs = []
    codes = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        codes.append(dispatch(["simulate", str(SCENARIOS / "sec6_exponential.scn"), "--seed", "7", "--out", str(out)]))
        outs.append(out.read_bytes())
    capsys.readouterr()
    ok = codes == [0, 0] and outs[0] == outs[1] and len(outs[0]) > 0
    detail = f"two simulate runs, exit {codes}, {len(outs[0])} bytes each, identical {outs[0] == outs[1]}"
    assert report(9, ok, detail, time.perf_counter() - t0)

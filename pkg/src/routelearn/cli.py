"""Command line front end.

Exit status: 0 on success, 1 on a modelling/numerical error (printed
verbatim), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .costs import Belief
from .counterexample import ConverseParams, build_converse_instance, verify_converse
from .errors import DomainError, WitnessNotFound
from .learning import (
    FailsAt,
    HoldsOnGrid,
    Scenario,
    check_strong_learning,
    check_weak_learning,
    default_grid,
    run_dynamics,
)
from .network import find_od_paradox, is_series_parallel
from .scenario_file import (
    final_belief_from_rows,
    g17,
    load_network,
    load_scenario,
    read_trace_csv,
    serialize_scenario,
    write_trace_csv,
)


def _fmt(v: float) -> str:
    return "inf" if v == float("inf") else g17(v)


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(
        f"ok: {len(sc.net.edge_ids)} edges, {len(sc.states)} states, {len(sc.net.paths)} paths, "
        f"capacity {_fmt(sc.net.capacity_value)}, digest {sc.digest()}"
    )
    return 0


def cmd_paths(args) -> int:
    net = load_network(args.scenario)
    for i, p in enumerate(net.paths, 1):
        print(f"r{i} {','.join(p)}")
    return 0


def cmd_capacity(args) -> int:
    print(_fmt(load_network(args.scenario).capacity_value))
    return 0


def cmd_sp_check(args) -> int:
    net = load_network(args.scenario)
    tree = is_series_parallel(net)
    if tree is not None:
        print("series-parallel")
        print(tree)
        return 0
    print("not series-parallel")
    print(f"paradox {find_od_paradox(net)}")
    return 0


def cmd_equilibrium(args) -> int:
    sc = load_scenario(args.scenario)
    b = sc.prior if args.belief == "prior" else Belief.dirac(sc.states, sc.truth)
    res = sc.solver_for().solve(b, args.demand)
    print("edge,load")
    for e in sc.net.edge_ids:
        print(f"{e},{g17(res.loads[e])}")
    print("path,flow,cost")
    for p, y in res.flow_witness.flows.items():
        print(f"{'-'.join(p)},{g17(y)},{g17(res.path_costs[p])}")
    print(f"gap,{g17(res.gap)}")
    return 0


def _override(sc: Scenario, args) -> Scenario:
    if getattr(args, "seed", None) is not None:
        sc = replace(sc, seed=args.seed)
    if getattr(args, "horizon", None) is not None:
        sc = replace(sc, horizon=args.horizon)
    if getattr(args, "no_early_stop", False):
        sc = replace(sc, early_stop=False)
    return sc


def cmd_simulate(args) -> int:
    sc = _override(load_scenario(args.scenario), args)
    tr = run_dynamics(sc)
    with open(args.out, "w", newline="") as fh:
        write_trace_csv(tr, sc, fh)
    print(f"periods {len(tr.periods)}, strong learning {check_strong_learning(tr)}, tau_hat {tr.tau_hat}")
    return 0


def cmd_weak_check(args) -> int:
    sc = load_scenario(args.scenario)
    with open(args.trace) as fh:
        meta, rows = read_trace_csv(fh, sc)
    if meta.get("digest") not in (None, sc.digest()):
        print(f"warning: trace digest {meta['digest']} differs from scenario digest {sc.digest()}", file=sys.stderr)
    final = final_belief_from_rows(rows, sc)
    grid = [float(g) for g in args.at] if args.at else default_grid(sc, args.grid)
    print(check_weak_learning(sc, final, grid))
    return 0


def cmd_counterexample(args) -> int:
    net = load_network(args.network)
    params = ConverseParams(args.A, args.eps, args.kappa)
    sc = build_converse_instance(net, params, horizon=args.horizon, seed=args.seed)
    Path(args.out).write_text(serialize_scenario(sc))
    try:
        report = verify_converse(sc, kappa=params.kappa)
    except WitnessNotFound as exc:
        if args.report and exc.report is not None:
            Path(args.report).write_text(exc.report.csv())
        raise
    if args.report:
        Path(args.report).write_text(report.csv())
    print(report.summary())
    return 0


def _sweep_one(job):
    sc, seed = job
    sc = replace(sc, seed=seed)
    tr = run_dynamics(sc)
    strong = check_strong_learning(tr)
    weak = check_weak_learning(sc, tr.final_belief)
    if isinstance(weak, HoldsOnGrid):
        verdict, dev = "holds", weak.max_deviation
    else:
        assert isinstance(weak, FailsAt)
        verdict, dev = f"fails@{g17(weak.demand)}:{weak.edge}", weak.deviation
    at = str(strong.period) if strong.ok else ""
    return f"{seed},{at},{verdict},{g17(dev)}"


def cmd_sweep(args) -> int:
    sc = _override(load_scenario(args.scenario), args)
    jobs = [(sc, sc.seed + i) for i in range(args.seeds)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            lines = list(ex.map(_sweep_one, jobs))
    else:
        lines = [_sweep_one(j) for j in jobs]
    text = "seed,strong_at,weak_verdict,max_dev\n" + "".join(l + "\n" for l in lines)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="routelearn", description="Social learning in routing games.")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn, helptext in [
        ("validate", cmd_validate, "parse and validate a scenario"),
        ("paths", cmd_paths, "list origin-destination paths"),
        ("capacity", cmd_capacity, "network capacity (min cut)"),
        ("sp-check", cmd_sp_check, "series-parallel decomposition or paradox witness"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("scenario")
        p.set_defaults(func=fn)

    p = sub.add_parser("equilibrium", help="equilibrium loads for one demand")
    p.add_argument("scenario")
    p.add_argument("--demand", type=float, required=True)
    p.add_argument("--belief", choices=("prior", "truth"), default="prior")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("simulate", help="run the learning dynamics and write a trace CSV")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("weak-check", help="compare load maps under a trace's final belief and the truth")
    p.add_argument("scenario")
    p.add_argument("--trace", required=True)
    p.add_argument("--grid", type=int, default=33, help="number of grid demands")
    p.add_argument("--at", nargs="+", metavar="D", help="explicit grid demands")
    p.set_defaults(func=cmd_weak_check)

    p = sub.add_parser("counterexample", help="build and verify a learning-failure instance")
    p.add_argument("network")
    p.add_argument("--A", type=float, default=4.0)
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--kappa", type=float, default=0.4)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="per-demand check CSV")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("sweep", help="replicate simulate over seeds and summarise verdicts")
    p.add_argument("scenario")
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--horizon", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return ap


def dispatch(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except DomainError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

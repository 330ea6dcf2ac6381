"""Scan the learning-failure construction over a fine demand grid.

For each demand prints the bridge-path flow and e1 load under the prior,
and the largest edge-load difference between prior and truth equilibria.

    python3 scripts/converse_scan.py [--net scenarios/wheatstone.net] [--points 200] [--top 100]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from routelearn.counterexample import ConverseParams, build_converse_instance, converse_roles
from routelearn.costs import Belief
from routelearn.scenario_file import g17, load_network

HERE = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--net", default=str(HERE / "scenarios" / "wheatstone.net"))
    ap.add_argument("--A", type=float, default=4.0)
    ap.add_argument("--eps", type=float, default=0.3)
    ap.add_argument("--kappa", type=float, default=0.4)
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--top", type=float, default=100.0)
    args = ap.parse_args()

    sc = build_converse_instance(load_network(args.net), ConverseParams(args.A, args.eps, args.kappa))
    roles = converse_roles(sc.net)
    r1 = roles.paradox.r1
    solver = sc.solver_for()
    truth = Belief.dirac(sc.states, sc.truth)
    worst = 0.0
    print("demand,prior_r1_flow,truth_r1_flow,prior_e1_load,max_dev")
    for d in np.linspace(0.0, args.top, args.points + 1)[1:]:
        a = solver.solve(sc.prior, float(d))
        b = solver.solve(truth, float(d))
        dev = max(abs(a.loads[e] - b.loads[e]) for e in sc.net.edge_ids)
        worst = max(worst, dev)
        print(
            f"{g17(d)},{g17(a.flow_witness.flows.get(r1, 0.0))},{g17(b.flow_witness.flows.get(r1, 0.0))},"
            f"{g17(a.loads[roles.e1])},{g17(dev)}"
        )
    print(f"# largest deviation {worst:.3e}")


if __name__ == "__main__":
    main()

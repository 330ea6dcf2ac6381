from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from routelearn.corpus import random_costs, random_dag_network, random_sp_network
from routelearn.costs import Belief
from routelearn.scenario_file import load_network, load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

WHEATSTONE_EDGES = [
    ("e1", "O", "a"),
    ("e2", "O", "b"),
    ("e3", "a", "b"),
    ("e4", "a", "D"),
    ("e5", "b", "D"),
]


def scenario(name: str):
    return load_scenario(SCENARIOS / f"{name}.scn")


def network_file(name: str):
    return load_network(SCENARIOS / f"{name}.net")


def small_instances():
    """(net, fam, belief, d) tuples with at most three paths."""
    out = []
    for name, beliefs, demands in [
        ("pigou_bounded", ("prior", "thetaG"), (0.5, 20.0)),
        ("bounded_demand", ("prior", "thetaG"), (3.0, 9.0)),
        ("wheatstone", ("prior", "thetaG"), (1.0, 25.0)),
        ("no_sp", ("thetaG",), (0.5,)),
    ]:
        sc = scenario(name)
        for bname in beliefs:
            b = sc.prior if bname == "prior" else Belief.dirac(sc.states, bname)
            for d in demands:
                out.append((name, sc.net, sc.fam, b, d))
    rng = np.random.default_rng(77)
    while len(out) < 25:
        if rng.random() < 0.5:
            net = random_sp_network(rng, int(rng.integers(2, 6)))
        else:
            net = random_dag_network(rng, 4, int(rng.integers(3, 7)))
        if len(net.paths) > 3:
            continue
        net, fam = random_costs(rng, net, ("s0", "s1"), require_finite_capacity=bool(rng.random() < 0.6))
        b = Belief(("s0", "s1"), (0.3, 0.7))
        gamma = net.capacity_value
        d = float(rng.uniform(0.2, 0.95)) * (gamma if gamma < math.inf else 6.0)
        out.append((f"random{len(out)}", net, fam, b, d))
    return out

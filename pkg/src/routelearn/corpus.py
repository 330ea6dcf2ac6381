"""Random instance generators for property tests and experiment scripts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import Affine, CostFamily, ReciprocalCapacity
from .network import (
    Parallel,
    RoutingNetwork,
    Series,
    SpDecomposition,
    ValidatedNetwork,
    recompose,
    validate_network,
)

INF = math.inf


def random_sp_tree(rng: np.random.Generator, n_edges: int) -> SpDecomposition:
    """Grow a decomposition tree by repeatedly splitting a random leaf."""
    leaves = ["e1"]
    tree: SpDecomposition = "e1"
    count = 1

    def replace(node, target, new):
        if isinstance(node, str):
            return new if node == target else node
        kids = tuple(replace(c, target, new) for c in node.children)
        return type(node)(kids)

    while count < n_edges:
        target = leaves[int(rng.integers(len(leaves)))]
        count += 1
        fresh = f"e{count}"
        cls = Series if rng.random() < 0.5 else Parallel
        tree = replace(tree, target, cls((target, fresh)))
        leaves.append(fresh)
    return tree


def random_sp_network(rng: np.random.Generator, n_edges: int) -> ValidatedNetwork:
    return validate_network(recompose(random_sp_tree(rng, n_edges)))


def random_dag_network(
    rng: np.random.Generator, n_vertices: int, n_edges: int, max_tries: int = 200
) -> ValidatedNetwork:
    """Random multigraph DAG with dangling edges pruned (at least one edge kept)."""
    for _ in range(max_tries):
        names = ["O"] + [f"v{i}" for i in range(1, n_vertices - 1)] + ["D"]
        rows = []
        for k in range(n_edges):
            i, j = sorted(rng.choice(n_vertices, size=2, replace=False))
            rows.append((names[i], names[j]))
        fwd = {}
        for t, h in rows:
            fwd.setdefault(t, set()).add(h)
        reach_o = {"O"}
        for v in names:
            if v in reach_o:
                reach_o |= fwd.get(v, set())
        reach_d = {"D"}
        for v in reversed(names):
            if fwd.get(v, set()) & reach_d:
                reach_d.add(v)
        kept = [(t, h) for t, h in rows if t in reach_o and h in reach_d]
        if not kept:
            continue
        edges = [(f"e{k + 1}", t, h) for k, (t, h) in enumerate(kept)]
        return validate_network(RoutingNetwork.from_edges(edges, "O", "D"))
    raise RuntimeError("could not draw a connected DAG")


@dataclass(frozen=True)
class CostRecipe:
    """Knobs for ``random_costs``."""

    recip_fraction: float = 0.5
    capacity_range: tuple[float, float] = (1.0, 3.0)
    slope_range: tuple[float, float] = (0.2, 2.0)
    intercept_range: tuple[float, float] = (0.0, 1.0)
    scale_range: tuple[float, float] = (0.5, 2.0)
    differ_fraction: float = 0.5


def random_costs(
    rng: np.random.Generator,
    net: ValidatedNetwork,
    states: tuple[str, ...] = ("s0",),
    recipe: CostRecipe = CostRecipe(),
    require_finite_capacity: bool = False,
) -> tuple[ValidatedNetwork, CostFamily]:
    """Random Affine (infinite capacity) / ReciprocalCapacity costs on ``net``.

    Every pair of states differs on at least one edge.  With
    ``require_finite_capacity`` the edge kinds are redrawn until the network
    capacity is finite.
    """
    ids = net.edge_ids
    for _ in range(1000):
        recip = {e: rng.random() < recipe.recip_fraction for e in ids}
        if not require_finite_capacity:
            break
        caps = {e: (1.0 if recip[e] else INF) for e in ids}
        probe = validate_network(_with_caps(net, caps))
        if probe.capacity_value < INF:
            break
    else:
        recip = {e: True for e in ids}

    caps = {e: (float(rng.uniform(*recipe.capacity_range)) if recip[e] else INF) for e in ids}
    new_net = validate_network(_with_caps(net, caps))

    def draw(e):
        if recip[e]:
            return ReciprocalCapacity(
                caps[e], float(rng.uniform(*recipe.scale_range)), float(rng.uniform(*recipe.intercept_range))
            )
        return Affine(float(rng.uniform(*recipe.slope_range)), float(rng.uniform(*recipe.intercept_range)))

    per_edge = {}
    base = {e: draw(e) for e in ids}
    for e in ids:
        per_edge[e] = {}
        for k, s in enumerate(states):
            if k == 0 or rng.random() >= recipe.differ_fraction:
                per_edge[e][s] = base[e]
            else:
                per_edge[e][s] = draw(e)
    # identifiability: every later state must differ from each earlier one
    for k, s in enumerate(states):
        for s_prev in states[:k]:
            if all(per_edge[e][s].params() == per_edge[e][s_prev].params() for e in ids):
                e = ids[int(rng.integers(len(ids)))]
                per_edge[e][s] = draw(e)
                while per_edge[e][s].params() == per_edge[e][s_prev].params():
                    per_edge[e][s] = draw(e)
    return new_net, CostFamily(states, per_edge)


def _with_caps(net: ValidatedNetwork, caps: dict[str, float]) -> RoutingNetwork:
    n = net.net
    return RoutingNetwork(n.vertices, n.edges, n.origin, n.destination, dict(caps))


def random_learning_scenario(
    rng: np.random.Generator,
    n_edges: tuple[int, int] = (4, 12),
    n_states: tuple[int, ...] = (2, 3),
    horizon: int = 5000,
    recipe: CostRecipe = CostRecipe(),
):
    """Random SP scenario with costs unbounded at capacity and demand
    uniform on ``[0, 0.999 gamma)``.  The truth is drawn uniformly, the
    prior is uniform."""
    from .costs import Belief
    from .learning import Scenario, Uniform

    net = random_sp_network(rng, int(rng.integers(n_edges[0], n_edges[1] + 1)))
    k = int(rng.choice(n_states))
    states = tuple(f"s{i}" for i in range(k))
    net, fam = random_costs(rng, net, states, recipe, require_finite_capacity=True)
    fam.check_identifiable()
    truth = states[int(rng.integers(k))]
    gamma = net.capacity_value
    return Scenario(
        net=net,
        fam=fam,
        prior=Belief.uniform(states),
        truth=truth,
        demand=Uniform(0.0, gamma * (1 - 1e-3)),
        horizon=horizon,
    )

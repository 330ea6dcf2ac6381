"""Cross-module properties on random instances."""

from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import potential
from routelearn.corpus import random_costs, random_dag_network, random_learning_scenario
from routelearn.costs import Belief
from routelearn.equilibrium import beckmann_potential, solve_wardrop
from routelearn.learning import check_weak_learning, run_dynamics
from routelearn.network import loads_from_flows

seeds = st.integers(0, 10**6)


def random_instance(seed, states=("s0", "s1")):
    rng = np.random.default_rng(seed)
    net = random_dag_network(rng, int(rng.integers(3, 6)), int(rng.integers(3, 9)))
    net, fam = random_costs(rng, net, states, require_finite_capacity=bool(seed % 2))
    w = rng.dirichlet(np.ones(len(states)))
    b = Belief.from_mapping(dict(zip(states, w.tolist())), states)
    gamma = net.capacity_value
    d = float(rng.uniform(0.0, 0.99)) * (gamma if gamma < math.inf else 10.0)
    return rng, net, fam, b, d


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_potential_agrees_with_oracle(seed):
    _, net, fam, b, d = random_instance(seed)
    x = solve_wardrop(net, fam, b, d).loads
    assert math.isclose(beckmann_potential(net, fam, b, x), float(potential(net, fam, b, x)), rel_tol=1e-10, abs_tol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_equilibrium_beats_random_feasible_flows(seed):
    rng, net, fam, b, d = random_instance(seed)
    res = solve_wardrop(net, fam, b, d)
    best = float(potential(net, fam, b, res.loads))
    for _ in range(30):
        w = rng.dirichlet(np.ones(len(net.paths))) * d
        x = loads_from_flows(dict(zip(net.paths, w.tolist())), net)
        assert float(potential(net, fam, b, x)) >= best - 1e-9 * max(1.0, abs(best))


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_belief_mixing_moves_loads_continuously(seed):
    # loads under belief b and under a slightly perturbed belief stay close
    _, net, fam, b, d = random_instance(seed)
    w = np.asarray(b.weights)
    w2 = 0.999 * w + 0.001 * np.array([1.0, 0.0])
    b2 = Belief.from_mapping(dict(zip(b.states, w2.tolist())), b.states)
    x1 = solve_wardrop(net, fam, b, d).loads
    x2 = solve_wardrop(net, fam, b2, d).loads
    assert max(abs(x1[e] - x2[e]) for e in net.edge_ids) < 0.5 * max(1.0, d)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_posterior_support_shrinks_and_keeps_truth(seed):
    sc = random_learning_scenario(np.random.default_rng(seed), horizon=200)
    tr = run_dynamics(sc, seed=seed)
    prev = set(sc.prior.support)
    for p in tr.periods:
        now = set(p.posterior.support)
        assert now <= prev and sc.truth in now
        prev = now
    # once the truth is identified the load maps coincide
    if tr.final_belief.is_dirac(sc.truth):
        assert check_weak_learning(sc, tr.final_belief, [0.3 * sc.net.capacity_value]).ok

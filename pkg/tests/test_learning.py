from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import scenario
from routelearn.corpus import random_learning_scenario
from routelearn.costs import Affine, Belief, CostFamily
from routelearn.equilibrium import solve_wardrop
from routelearn.errors import EmptyPosterior, InvalidBelief, PeriodError, TruncationStarved, ValidationError
from routelearn.learning import (
    Achieved,
    Exponential,
    FailsAt,
    HoldsOnGrid,
    NotByHorizon,
    Observation,
    PointMass,
    Uniform,
    bayes_update,
    check_strong_learning,
    check_weak_learning,
    consistent_states,
    default_grid,
    observe,
    run_dynamics,
    sample_demand,
)


class TestDemand:
    def test_point(self):
        rng = np.random.default_rng(0)
        assert sample_demand(PointMass(3.0), rng) == 3.0

    def test_uniform_range(self):
        rng = np.random.default_rng(1)
        xs = [sample_demand(Uniform(2.0, 5.0), rng) for _ in range(2000)]
        assert min(xs) >= 2.0 and max(xs) < 5.0
        assert np.mean(xs) == pytest.approx(3.5, abs=0.1)

    def test_exponential_mean_and_truncation(self):
        rng = np.random.default_rng(2)
        xs = [Exponential(2.0).draw(rng) for _ in range(5000)]
        assert np.mean(xs) == pytest.approx(2.0, rel=0.06)
        ys = [Exponential(2.0, 1.0, 3.0).draw(rng) for _ in range(500)]
        assert all(1.0 <= y < 3.0 for y in ys)

    def test_starved(self, monkeypatch):
        import routelearn.learning as L

        monkeypatch.setattr(L, "REJECTION_LIMIT", 5)
        with pytest.raises(TruncationStarved):
            Exponential(1.0, 0.0, 1e-12).draw(np.random.default_rng(0))

    def test_bad(self):
        for make in [lambda: Uniform(3.0, 3.0), lambda: PointMass(-1.0), lambda: Exponential(0.0)]:
            with pytest.raises(ValidationError):
                make()

    def test_spec_strings(self):
        assert PointMass(3.0).spec() == "point 3"
        assert Uniform(0.0, 0.5).spec() == "uniform 0 0.5"
        assert Exponential(2.0, upper=9.0).spec() == "exp 2 upper 9"


def pigou(a=8.0):
    per_edge = {
        "e1": {"thetaG": Affine(1.0), "thetaB": Affine(1.0)},
        "e2": {"thetaG": Affine(1.0), "thetaB": Affine(1.0, a)},
    }
    return CostFamily(("thetaG", "thetaB"), per_edge)


class TestUpdate:
    def test_unused_edges_reveal_nothing(self):
        sc = scenario("bounded_demand")
        eq = solve_wardrop(sc.net, sc.fam, sc.prior, 3.0)
        obs = observe(sc.net, sc.fam, "thetaG", 3.0, eq)
        assert set(obs.realized) == {"e1"}
        assert bayes_update(sc.prior, obs, sc.fam) is sc.prior

    def test_used_edge_eliminates(self):
        fam = pigou()
        obs = Observation(1, 5.0, {"e1": 4.0, "e2": 1.0}, {"e1": 4.0, "e2": 1.0})
        post = bayes_update(Belief.uniform(fam.states), obs, fam)
        assert post.is_dirac("thetaG")
        assert consistent_states(Belief.uniform(fam.states), obs, fam) == {"thetaG"}

    def test_tolerance_is_relative(self):
        fam = pigou()
        b = Belief.uniform(fam.states)
        c = 1000.0 * (1 + 5e-8)
        obs = Observation(1, 1000.0, {"e1": 1000.0, "e2": 0.0}, {"e1": c})
        assert consistent_states(b, obs, fam) == {"thetaG", "thetaB"}
        obs = Observation(1, 1000.0, {"e1": 1000.0, "e2": 0.0}, {"e1": 1000.0 * (1 + 5e-7)})
        assert consistent_states(b, obs, fam) == set()

    def test_empty_posterior(self):
        fam = pigou()
        obs = Observation(4, 1.0, {"e1": 1.0, "e2": 0.0}, {"e1": 99.0})
        with pytest.raises(EmptyPosterior):
            bayes_update(Belief.uniform(fam.states), obs, fam)

    def test_proportional_rescale(self):
        per_edge = {"e1": {"a": Affine(1.0), "b": Affine(1.0), "c": Affine(2.0)}}
        fam = CostFamily(("a", "b", "c"), per_edge)
        b = Belief(("a", "b", "c"), (0.1, 0.3, 0.6))
        post = bayes_update(b, Observation(1, 2.0, {"e1": 2.0}, {"e1": 2.0}), fam)
        assert post.weights == pytest.approx((0.25, 0.75, 0.0), abs=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.0, 20.0), st.floats(0.0, 1.0))
    def test_truth_survives(self, d, p):
        # the realised cost comes from the truth, so the truth is always consistent
        sc = scenario("bounded_demand")
        fam = pigou()
        b = Belief(fam.states, (p, 1 - p)) if 0 < p < 1 else Belief.uniform(fam.states)
        eq = solve_wardrop(sc.net, fam, b, d)
        obs = observe(sc.net, fam, "thetaG", d, eq)
        assert "thetaG" in consistent_states(b, obs, fam)


class TestScenarioChecks:
    def test_demand_beyond_capacity(self):
        sc = random_learning_scenario(np.random.default_rng(3))
        with pytest.raises(ValidationError):
            replace(sc, demand=Uniform(0.0, 2 * sc.net.capacity_value))
        with pytest.raises(ValidationError):
            replace(sc, demand=PointMass(sc.net.capacity_value))

    def test_truth_needs_prior_mass(self):
        sc = scenario("bounded_demand")
        with pytest.raises(ValidationError):
            replace(sc, prior=Belief.dirac(sc.states, "thetaB"))
        with pytest.raises(ValidationError):
            replace(sc, truth="thetaX")


class TestDynamics:
    def test_bounded_costs(self):
        sc = scenario("pigou_bounded")
        tr = run_dynamics(sc, seed=3)
        assert len(tr.periods) == 200
        for p in tr.periods:
            assert p.obs.loads["e2"] <= 1e-10
            assert p.posterior == sc.prior
        assert isinstance(check_strong_learning(tr), NotByHorizon)
        assert tr.tau_hat == 0

    def test_first_large_demand_teaches(self):
        sc = scenario("sec6_exponential")
        tr = run_dynamics(sc, seed=11)
        v = check_strong_learning(tr)
        assert isinstance(v, Achieved)
        first_big = next(p.obs.period for p in tr.periods if p.obs.demand > 4.0)
        assert v.period == first_big == tr.tau_hat
        assert len(tr.periods) == first_big  # early stop after the Dirac

    def test_no_early_stop_runs_to_horizon(self):
        sc = scenario("sec6_exponential")
        tr = run_dynamics(sc, seed=11, horizon=300, early_stop=False)
        assert len(tr.periods) == 300

    def test_seed_determinism(self):
        sc = scenario("sec6_exponential")
        a = run_dynamics(sc, seed=5, horizon=50, early_stop=False)
        b = run_dynamics(sc, seed=5, horizon=50, early_stop=False)
        assert [p.obs for p in a.periods] == [p.obs for p in b.periods]
        c = run_dynamics(sc, seed=6, horizon=50, early_stop=False)
        assert [p.obs.demand for p in a.periods] != [p.obs.demand for p in c.periods]

    def test_period_error_locates_failure(self):
        # a negative tolerance makes every observation contradict every state
        sc2 = replace(scenario("bounded_demand"), tol_obs=-1.0)
        with pytest.raises(PeriodError) as info:
            run_dynamics(sc2)
        assert info.value.period == 1

    def test_random_sp_learns(self):
        rng = np.random.default_rng(8)
        sc = random_learning_scenario(rng, horizon=2000)
        tr = run_dynamics(sc, seed=0)
        assert all(p.posterior[sc.truth] > 0 for p in tr.periods)
        assert check_strong_learning(tr).ok


class TestWeak:
    def test_bounded_demand_fails_at_three(self):
        sc = scenario("bounded_demand")
        v = check_weak_learning(sc, sc.prior, [3.0])
        assert isinstance(v, FailsAt)
        assert v.demand == 3.0 and v.edge == "e2"
        assert v.deviation == pytest.approx(1.5, abs=1e-4)

    def test_truth_holds_trivially(self):
        sc = scenario("bounded_demand")
        v = check_weak_learning(sc, Belief.dirac(sc.states, "thetaG"), [3.0, 7.0])
        assert v == HoldsOnGrid(0.0)

    def test_wheatstone_holds(self):
        sc = scenario("wheatstone")
        v = check_weak_learning(sc, sc.prior, np.linspace(20.0, 29.9, 34))
        assert isinstance(v, HoldsOnGrid) and v.max_deviation < 1e-5

    def test_states_must_match(self):
        sc = scenario("wheatstone")
        with pytest.raises(InvalidBelief):
            check_weak_learning(sc, Belief.uniform(("x", "y")), [20.0])

    def test_grids(self):
        sc = scenario("bounded_demand")
        assert default_grid(sc) == [3.0]
        w = scenario("wheatstone")
        g = default_grid(w)
        assert g[0] == 20.0 and g[-1] == 30.0 and len(g) == 33
        s = scenario("sec6_exponential")
        g = default_grid(s)
        assert g[0] == 0.0 and g[-1] == pytest.approx(2.0 * math.log(1000.0))

    def test_grid_excludes_capacity(self):
        sc = random_learning_scenario(np.random.default_rng(4))
        gamma = sc.net.capacity_value
        g = default_grid(sc)
        assert max(g) < gamma
        assert gamma * (1 - 1e-3) in g

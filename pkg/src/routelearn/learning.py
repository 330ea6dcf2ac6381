"""The repeated routing game with an unknown state.

Each period a fresh generation of users routes a random demand on the
equilibrium of the current public belief.  The realised cost of every used
edge becomes public, states that predict a different cost are discarded, and
the surviving weights are renormalised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .costs import Belief, CostFamily
from .equilibrium import USED_THRESHOLD, EquilibriumResult, SolverOptions, WardropSolver
from .errors import (
    DomainError,
    EmptyPosterior,
    InvalidBelief,
    PeriodError,
    TruncationStarved,
    ValidationError,
)
from .network import ValidatedNetwork

INF = math.inf

TOL_OBS = 1e-7
REJECTION_LIMIT = 1_000_000
WEAK_TOL = 1e-5
DEFAULT_GRID = 33
DEFAULT_HORIZON = 10_000


# demand ----------------------------------------------------------------------


@dataclass(frozen=True)
class PointMass:
    d: float

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d >= 0):
            raise ValidationError(f"point demand must be a nonnegative number, got {self.d!r}")

    def support(self) -> tuple[float, float]:
        return (self.d, self.d)

    def draw(self, rng: np.random.Generator) -> float:
        return float(self.d)

    def spec(self) -> str:
        return f"point {_num(self.d)}"


@dataclass(frozen=True)
class Uniform:
    """Uniform on ``[lo, hi)``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi < INF):
            raise ValidationError(f"uniform demand needs 0 <= lo < hi < inf, got [{self.lo!r}, {self.hi!r})")

    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def draw(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.lo, self.hi))

    def spec(self) -> str:
        return f"uniform {_num(self.lo)} {_num(self.hi)}"


@dataclass(frozen=True)
class Exponential:
    """``offset + Exp(mean)``, optionally conditioned to stay below ``upper``."""

    mean: float
    offset: float = 0.0
    upper: float = INF

    def __post_init__(self):
        if not (0 < self.mean < INF):
            raise ValidationError(f"exponential mean must be positive, got {self.mean!r}")
        if not (0 <= self.offset < self.upper):
            raise ValidationError(f"need 0 <= offset < upper, got {self.offset!r}, {self.upper!r}")

    def support(self) -> tuple[float, float]:
        return (self.offset, self.upper)

    def draw(self, rng: np.random.Generator) -> float:
        for _ in range(REJECTION_LIMIT):
            d = self.offset + float(rng.exponential(self.mean))
            if d < self.upper:
                return d
        raise TruncationStarved(
            f"TruncationStarved: no draw below {self.upper!r} in {REJECTION_LIMIT} attempts"
        )

    def spec(self) -> str:
        out = f"exp {_num(self.mean)}"
        if self.offset:
            out += f" offset {_num(self.offset)}"
        if self.upper < INF:
            out += f" upper {_num(self.upper)}"
        return out


DemandDistribution = Union[PointMass, Uniform, Exponential]


def sample_demand(dist: DemandDistribution, rng: np.random.Generator) -> float:
    return dist.draw(rng)


def _num(v: float) -> str:
    if v == INF:
        return "inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.17g}"


# observation and update --------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    """What period ``t`` makes public: demand, loads, and costs of used edges."""

    period: int
    demand: float
    loads: dict[str, float]
    realized: dict[str, float]


def observe(
    net: ValidatedNetwork,
    fam: CostFamily,
    true_state: str,
    d: float,
    eq: EquilibriumResult,
    period: int = 0,
    threshold: float = USED_THRESHOLD,
) -> Observation:
    realized = {}
    for e in net.edge_ids:
        x = eq.loads[e]
        if x > threshold:
            realized[e] = fam.cost(e, true_state).value(x)
    return Observation(period, float(d), dict(eq.loads), realized)


def consistent_states(b: Belief, obs: Observation, fam: CostFamily, tol_obs: float = TOL_OBS) -> set[str]:
    keep = set()
    for s in b.support:
        for e, c in obs.realized.items():
            pred = fam.cost(e, s).value(obs.loads[e])
            if abs(pred - c) > tol_obs * max(1.0, abs(c)):
                break
        else:
            keep.add(s)
    return keep


def bayes_update(b: Belief, obs: Observation, fam: CostFamily, tol_obs: float = TOL_OBS) -> Belief:
    """Posterior after ``obs``: inconsistent states drop out, the rest rescale."""
    keep = consistent_states(b, obs, fam, tol_obs)
    if not keep:
        raise EmptyPosterior(f"EmptyPosterior: every state contradicts period {obs.period}")
    if keep == set(b.support):
        return b
    return b.restricted(keep)


# scenarios and traces --------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    net: ValidatedNetwork
    fam: CostFamily
    prior: Belief
    truth: str
    demand: DemandDistribution
    horizon: int = DEFAULT_HORIZON
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    tol_obs: float = TOL_OBS
    grid_size: int = DEFAULT_GRID
    early_stop: bool = True

    def __post_init__(self):
        if tuple(self.prior.states) != tuple(self.fam.states):
            raise ValidationError("prior and cost family list different states")
        if self.truth not in self.fam.states:
            raise ValidationError(f"true state {self.truth!r} is not a declared state")
        if self.prior[self.truth] <= 0:
            raise ValidationError(f"prior gives no weight to the true state {self.truth!r}")
        if set(self.fam.per_edge) != set(self.net.edge_ids):
            raise ValidationError("cost family and network have different edge sets")
        for e in self.net.edge_ids:
            if self.fam.cap(e) != self.net.capacity[e]:
                raise ValidationError(f"edge {e!r}: cost domain {self.fam.cap(e)!r} != capacity {self.net.capacity[e]!r}")
        lo, hi = self.demand.support()
        gamma = self.net.capacity_value
        if isinstance(self.demand, PointMass):
            ok = lo < gamma
        else:
            ok = hi <= gamma
        if not ok:
            raise ValidationError(f"demand support [{lo!r}, {hi!r}) is not inside [0, {gamma!r})")
        if self.horizon < 0 or self.grid_size < 1:
            raise ValidationError("horizon must be >= 0 and grid size >= 1")

    @property
    def states(self) -> tuple[str, ...]:
        return self.fam.states

    def digest(self) -> str:
        from .scenario_file import scenario_digest

        return scenario_digest(self)

    def solver_for(self) -> WardropSolver:
        return WardropSolver(self.net, self.fam, self.solver)


@dataclass(frozen=True)
class Period:
    obs: Observation
    posterior: Belief
    used_paths: tuple


@dataclass
class Trace:
    digest: str
    seed: int
    truth: str
    prior: Belief
    periods: list[Period] = field(default_factory=list)

    @property
    def final_belief(self) -> Belief:
        return self.periods[-1].posterior if self.periods else self.prior

    @property
    def posteriors(self) -> list[Belief]:
        return [p.posterior for p in self.periods]

    @property
    def tau_hat(self) -> int:
        """Last period whose update changed the belief (0 if none did)."""
        prev, last = self.prior, 0
        for p in self.periods:
            if p.posterior != prev:
                last = p.obs.period
            prev = p.posterior
        return last

    @property
    def dirac_at(self) -> int | None:
        """First period after which the posterior is a Dirac at the truth."""
        if self.prior.is_dirac(self.truth):
            return 0
        for p in self.periods:
            if p.posterior.is_dirac(self.truth):
                return p.obs.period
        return None


def run_dynamics(
    sc: Scenario,
    seed: int | None = None,
    horizon: int | None = None,
    early_stop: bool | None = None,
    solver: WardropSolver | None = None,
) -> Trace:
    """Play ``horizon`` periods.  Deterministic given ``seed``.

    With ``early_stop`` the run ends once the posterior is a Dirac measure
    (nothing can change after that).
    """
    seed = sc.seed if seed is None else seed
    horizon = sc.horizon if horizon is None else horizon
    early_stop = sc.early_stop if early_stop is None else early_stop
    rng = np.random.default_rng(seed)
    solver = solver or sc.solver_for()
    tr = Trace(sc.digest(), seed, sc.truth, sc.prior)
    b = sc.prior
    for t in range(1, horizon + 1):
        if early_stop and b.is_dirac():
            break
        try:
            d = sample_demand(sc.demand, rng)
            eq = solver.solve(b, d)
            obs = observe(sc.net, sc.fam, sc.truth, d, eq, t, sc.solver.used_threshold)
            b = bayes_update(b, obs, sc.fam, sc.tol_obs)
        except DomainError as exc:
            raise PeriodError(t, exc) from exc
        tr.periods.append(Period(obs, b, tuple(eq.used_paths(sc.solver.used_threshold))))
    return tr


# learning verdicts -------------------------------------------------------------


@dataclass(frozen=True)
class Achieved:
    period: int

    ok = True

    def __str__(self):
        return f"Achieved(period {self.period})"


@dataclass(frozen=True)
class NotByHorizon:
    horizon: int

    ok = False

    def __str__(self):
        return f"NotByHorizon({self.horizon})"


def check_strong_learning(tr: Trace) -> Achieved | NotByHorizon:
    if tr.final_belief.is_dirac(tr.truth):
        return Achieved(tr.dirac_at)
    return NotByHorizon(tr.periods[-1].obs.period if tr.periods else 0)


@dataclass(frozen=True)
class HoldsOnGrid:
    max_deviation: float

    ok = True

    def __str__(self):
        return f"HoldsOnGrid(max deviation {self.max_deviation:.3e})"


@dataclass(frozen=True)
class FailsAt:
    demand: float
    edge: str
    deviation: float

    ok = False

    def __str__(self):
        return f"FailsAt(demand {self.demand!r}, edge {self.edge}, deviation {self.deviation:.6g})"


def default_grid(sc: Scenario, n: int | None = None) -> list[float]:
    """Equally spaced demands over the support, plus 0.999 gamma when finite."""
    n = sc.grid_size if n is None else n
    gamma = sc.net.capacity_value
    dist = sc.demand
    if isinstance(dist, PointMass):
        return [dist.d]
    lo, hi = dist.support()
    if hi == INF:
        # exponential tail: cover up to its 0.999 quantile
        hi = lo + dist.mean * math.log(1000.0)
        hi = min(hi, gamma * (1 - 1e-3)) if gamma < INF else hi
    if n == 1:
        pts = [lo]
    else:
        # the right end of the support is open when it touches gamma
        last = n - 1 if hi < gamma else n
        pts = [lo + (hi - lo) * k / last for k in range(n)]
    if gamma < INF:
        top = gamma * (1 - 1e-3)
        if lo <= top < dist.support()[1]:
            pts.append(top)
    return sorted(set(pts))


def load_deviations(
    sc: Scenario, belief: Belief, grid: Sequence[float], solver: WardropSolver | None = None
) -> list[tuple[float, dict[str, float], dict[str, float]]]:
    """(d, loads under ``belief``, loads under the truth) for each grid demand."""
    from .equilibrium import equilibrium_load_map

    solver = solver or sc.solver_for()
    truth = Belief.dirac(sc.states, sc.truth)
    a = equilibrium_load_map(sc.net, sc.fam, belief, grid, solver=solver)
    b = equilibrium_load_map(sc.net, sc.fam, truth, grid, solver=solver)
    return [(d, xa, xb) for (d, xa), (_, xb) in zip(a, b)]


def check_weak_learning(
    sc: Scenario,
    final_belief: Belief,
    grid: Sequence[float] | None = None,
    tol: float = WEAK_TOL,
    solver: WardropSolver | None = None,
) -> HoldsOnGrid | FailsAt:
    """Compare equilibrium loads under ``final_belief`` and under the truth.

    On failure the first failing demand is reported, with the edge of largest
    deviation there; near-ties go to the edge the belief under-uses most.
    """
    if tuple(final_belief.states) != tuple(sc.states):
        raise InvalidBelief("belief is over different states than the scenario")
    grid = default_grid(sc) if grid is None else list(grid)
    worst = 0.0
    for d, xb, xt in load_deviations(sc, final_belief, grid, solver):
        devs = {e: abs(xb[e] - xt[e]) for e in sc.net.edge_ids}
        top = max(devs.values(), default=0.0)
        if top > tol:
            near = [e for e in sc.net.edge_ids if devs[e] >= top - 1e-9]
            e = max(near, key=lambda e: xt[e] - xb[e])
            return FailsAt(d, e, devs[e])
        worst = max(worst, top)
    return HoldsOnGrid(worst)

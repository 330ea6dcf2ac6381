"""Wardrop equilibria under a belief, via Beckmann-potential minimisation.

The solver works on path flows.  Each step takes the used paths plus the
cheapest path as the free set, computes a Newton direction for the potential
restricted to those flows (demand held fixed), and does an exact line search
along it, dropping paths whose flow reaches zero.  If Newton stalls it falls
back to moving flow from the dearest used path to a cheaper one.  It stops
once the Wardrop gap is below ``tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .costs import Belief, CostFamily, CostFunction
from .errors import DomainError, DomainViolation, GridPointError, InfeasibleDemand, NoConvergence
from .network import Path, ValidatedNetwork

INF = math.inf

USED_THRESHOLD = 1e-10
CAP_CLAMP = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iters: int = 1_000_000
    used_threshold: float = USED_THRESHOLD
    start: str = "auto"  # "auto" | "first" | "uniform"


@dataclass(frozen=True)
class FeasibleFlow:
    flows: Mapping[Path, float]
    demand: float

    def __post_init__(self):
        total = math.fsum(self.flows.values())
        if any(y < 0 for y in self.flows.values()):
            raise ValueError("negative path flow")
        if abs(total - self.demand) > 1e-9 * max(1.0, self.demand):
            raise ValueError(f"path flows sum to {total!r}, demand is {self.demand!r}")


@dataclass(frozen=True)
class EquilibriumResult:
    loads: Mapping[str, float]
    flow_witness: FeasibleFlow
    path_costs: Mapping[Path, float]
    gap: float
    potential_value: float
    iterations: int = 0

    def used_paths(self, threshold: float = USED_THRESHOLD) -> list[Path]:
        return [p for p, y in self.flow_witness.flows.items() if y > threshold]


# feasible starting points ------------------------------------------------------


_START_CACHE: dict[int, tuple[object, np.ndarray, float]] = {}


def _max_flow_split(net: ValidatedNetwork) -> tuple[np.ndarray, float]:
    """Path flows of a maximum flow (finite-capacity networks), and its value."""
    hit = _START_CACHE.get(id(net))
    if hit is not None and hit[0] is net:
        return hit[1], hit[2]
    paths = net.paths
    finite = [e for e in net.edge_ids if net.capacity[e] < INF]
    a = np.zeros((len(finite), len(paths)))
    row = {e: i for i, e in enumerate(finite)}
    for j, p in enumerate(paths):
        for e in p:
            if e in row:
                a[row[e], j] += 1.0
    b = np.array([net.capacity[e] for e in finite])
    res = linprog(-np.ones(len(paths)), A_ub=a, b_ub=b, bounds=(0, None), method="highs")
    y = np.maximum(res.x, 0.0)
    value = float(y.sum())
    _START_CACHE[id(net)] = (net, y, value)
    return y, value


def _path_caps(net: ValidatedNetwork) -> list[float]:
    return [min(net.capacity[e] for e in p) for p in net.paths]


def _feasible(net: ValidatedNetwork, y: Sequence[float]) -> bool:
    x = {e: 0.0 for e in net.edge_ids}
    for p, f in zip(net.paths, y):
        for e in p:
            x[e] += f
    return all(x[e] < net.capacity[e] for e in x)


def initial_flow(net: ValidatedNetwork, d: float, start: str = "auto") -> list[float]:
    paths = net.paths
    n = len(paths)
    if start == "first":
        y = [0.0] * n
        y[0] = d
        if _feasible(net, y):
            return y
    elif start == "uniform":
        y = [d / n] * n
        if _feasible(net, y):
            return y
    elif start != "auto":
        raise ValueError(f"unknown start {start!r}")
    if d == 0:
        return [0.0] * n
    caps = _path_caps(net)
    for j in range(n):
        if caps[j] == INF:
            y = [0.0] * n
            y[j] = d
            return y
    unit, value = _max_flow_split(net)
    scale = d / value
    y = [float(v) * scale for v in unit]
    if not _feasible(net, y):
        raise InfeasibleDemand(f"InfeasibleDemand: no strictly feasible flow for demand {d!r}")
    return y


# the solver -------------------------------------------------------------------


class _Problem:
    """Index-based view of (network, expected costs) for the inner loop."""

    def __init__(self, net: ValidatedNetwork, costs: Sequence[CostFunction]):
        self.net = net
        self.edge_ids = net.edge_ids
        index = {e: i for i, e in enumerate(self.edge_ids)}
        self.paths = net.paths
        self.pidx = [[index[e] for e in p] for p in self.paths]
        self.pset = [set(p) for p in self.pidx]
        self.f = list(costs)
        self.value = [f.value for f in self.f]
        self.deriv = [f.deriv for f in self.f]
        self.cap = [net.capacity[e] for e in self.edge_ids]
        self.limit = [c * (1.0 - CAP_CLAMP) if c < INF else INF for c in self.cap]
        self.incidence = np.zeros((len(self.paths), len(self.edge_ids)))
        for j, p in enumerate(self.pidx):
            self.incidence[j, p] = 1.0

    def loads(self, y):
        x = [0.0] * len(self.edge_ids)
        for j, p in enumerate(self.pidx):
            yj = y[j]
            if yj:
                for i in p:
                    x[i] += yj
        return x

    def path_costs(self, x):
        ce = [v(xi) for v, xi in zip(self.value, x)]
        return [sum(ce[i] for i in p) for p in self.pidx], ce

    def potential(self, x):
        return math.fsum(f.integral(xi) for f, xi in zip(self.f, x))


def _shift(prob: _Problem, x, gain, lose, dmax):
    """Flow to move from path ``lose`` to path ``gain`` (exact 1-D minimiser)."""
    val, der = prob.value, prob.deriv
    for i in gain:
        dmax = min(dmax, prob.limit[i] - x[i])
    if dmax <= 0:
        return 0.0

    def h(t):
        return sum(val[i](x[i] + t) for i in gain) - sum(val[i](max(x[i] - t, 0.0)) for i in lose)

    def dh(t):
        return sum(der[i](x[i] + t) for i in gain) + sum(der[i](max(x[i] - t, 0.0)) for i in lose)

    if h(dmax) <= 0:
        return dmax
    lo, hi = 0.0, dmax
    h0 = h(0.0)
    t = min(max(-h0 / dh(0.0), 0.0), dmax)
    for _ in range(200):
        ht = h(t)
        if ht == 0:
            return t
        if ht < 0:
            lo = t
        else:
            hi = t
        if hi - lo <= 4e-16 * max(1.0, hi):
            break
        step = ht / dh(t)
        nt = t - step
        if not (lo < nt < hi):
            nt = 0.5 * (lo + hi)
        if nt == t:
            break
        t = nt
    return t


def _line_search(prob: _Problem, x, dx, amax):
    """Exact minimiser of the potential on ``x + a * dx``, ``0 <= a <= amax``."""
    val, der = prob.value, prob.deriv
    idx = [i for i, v in enumerate(dx) if v != 0.0]
    for i in idx:
        if dx[i] > 0:
            amax = min(amax, (prob.limit[i] - x[i]) / dx[i])
    if amax <= 0:
        return 0.0

    def g(a):
        return sum(val[i](max(x[i] + a * dx[i], 0.0)) * dx[i] for i in idx)

    def dg(a):
        return sum(der[i](max(x[i] + a * dx[i], 0.0)) * dx[i] * dx[i] for i in idx)

    g0 = g(0.0)
    if g0 >= 0:
        return 0.0
    if g(amax) <= 0:
        return amax
    lo, hi = 0.0, amax
    d0 = dg(0.0)
    a = min(-g0 / d0, amax) if d0 > 0 else 0.5 * amax
    for _ in range(200):
        ga = g(a)
        if ga == 0:
            return a
        if ga < 0:
            lo = a
        else:
            hi = a
        if hi - lo <= 4e-16 * max(1.0, hi):
            break
        da = dg(a)
        na = a - ga / da if da > 0 else 0.5 * (lo + hi)
        if not (lo < na < hi):
            na = 0.5 * (lo + hi)
        if na == a:
            break
        a = na
    return lo


def _newton_direction(prob: _Problem, free, x, cr):
    """Newton step on the free path flows, in a basis where the total is fixed.

    The cheapest free path is the reference; the other free flows move
    independently and the reference absorbs the difference, so the step keeps
    the demand exactly (up to one rounding).
    """
    ref = min(free, key=cr.__getitem__)
    rest = [j for j in free if j != ref]
    h = np.array([prob.deriv[i](x[i]) for i in range(len(x))])
    z = prob.incidence[rest] - prob.incidence[ref]
    hess = (z * h) @ z.T
    grad = np.asarray([cr[j] - cr[ref] for j in rest])
    w = np.linalg.lstsq(hess, -grad, rcond=1e-13)[0]
    dy = np.zeros(len(free))
    pos = {j: k for k, j in enumerate(free)}
    for j, v in zip(rest, w):
        dy[pos[j]] = v
    dy[pos[ref]] = -math.fsum(w)
    return dy, dy @ prob.incidence[free]


def _solve(prob: _Problem, d: float, opts: SolverOptions, y0=None):
    thr = opts.used_threshold
    y = list(y0) if y0 is not None else initial_flow(prob.net, d, opts.start)
    n = len(y)
    it = 0
    while True:
        x = prob.loads(y)
        cr, _ = prob.path_costs(x)
        lo = min(range(n), key=cr.__getitem__)
        used = [j for j in range(n) if y[j] > thr]
        gap = max(cr[j] for j in used) - cr[lo] if used else 0.0
        if gap <= opts.tol:
            return y, x, cr, max(gap, 0.0), it
        if it >= opts.max_iters:
            raise NoConvergence(it, gap)
        it += 1
        free = sorted(set(used) | {lo})
        step = 0.0
        if len(free) > 1:
            dy, dx = _newton_direction(prob, free, x, cr)
            amax = INF
            for j, v in zip(free, dy):
                if v < 0:
                    amax = min(amax, y[j] / -v)
            if amax > 0:
                step = _line_search(prob, x, dx.tolist(), amax)
            if step > 0:
                for j, v in zip(free, dy):
                    y[j] = y[j] + step * v
                    if y[j] < 0 or (step == amax and v < 0 and y[j] <= thr * 1e-3):
                        y[j] = 0.0
                _renormalise(y, d)
                continue
        # Newton made no progress: move flow off the dearest used path
        hi = max(used, key=cr.__getitem__)
        moved = False
        for alt in sorted(range(n), key=cr.__getitem__):
            if alt == hi or cr[alt] >= cr[hi]:
                break
            gain = [i for i in prob.pidx[alt] if i not in prob.pset[hi]]
            lose = [i for i in prob.pidx[hi] if i not in prob.pset[alt]]
            t = _shift(prob, x, gain, lose, y[hi])
            if t > 0:
                if t >= y[hi]:
                    t = y[hi]
                    y[hi] = 0.0
                else:
                    y[hi] -= t
                y[alt] += t
                moved = True
                break
        if not moved:
            raise NoConvergence(it, gap)


def _renormalise(y, d):
    total = math.fsum(y)
    if total > 0 and total != d:
        j = max(range(len(y)), key=y.__getitem__)
        y[j] += d - total


def belief_costs(net: ValidatedNetwork, fam: CostFamily, b: Belief) -> list[CostFunction]:
    return [fam.expected(e, b) for e in net.edge_ids]


def _check_demand(net: ValidatedNetwork, d: float) -> None:
    if not (math.isfinite(d) and d >= 0):
        raise InfeasibleDemand(f"InfeasibleDemand: demand {d!r} is not a nonnegative number")
    gamma = net.capacity_value
    if d >= gamma:
        raise InfeasibleDemand(f"InfeasibleDemand: demand {d!r} >= network capacity {gamma!r}")


class WardropSolver:
    """Repeated equilibrium solves on one (network, cost family) pair.

    Expected-cost tables are cached per belief.
    """

    def __init__(self, net: ValidatedNetwork, fam: CostFamily, opts: SolverOptions | None = None):
        self.net = net
        self.fam = fam
        self.opts = opts or SolverOptions()
        self._problems: dict[tuple, _Problem] = {}

    def problem(self, b: Belief) -> _Problem:
        key = (b.states, b.weights)
        prob = self._problems.get(key)
        if prob is None:
            prob = self._problems[key] = _Problem(self.net, belief_costs(self.net, self.fam, b))
        return prob

    def solve(self, b: Belief, d: float, opts: SolverOptions | None = None, y0=None) -> EquilibriumResult:
        opts = opts or self.opts
        d = float(d)
        _check_demand(self.net, d)
        prob = self.problem(b)
        y, x, cr, gap, it = _solve(prob, d, opts, y0)
        paths = prob.paths
        flows = {p: y[j] for j, p in enumerate(paths)}
        return EquilibriumResult(
            loads=dict(zip(prob.edge_ids, x)),
            flow_witness=FeasibleFlow(flows, d),
            path_costs={p: cr[j] for j, p in enumerate(paths)},
            gap=gap,
            potential_value=prob.potential(x),
            iterations=it,
        )


def solve_wardrop(
    net: ValidatedNetwork,
    fam: CostFamily,
    b: Belief,
    d: float,
    opts: SolverOptions | None = None,
) -> EquilibriumResult:
    """Equilibrium loads for demand ``d`` when users route on ``b``-expected costs."""
    return WardropSolver(net, fam, opts).solve(b, d)


def beckmann_potential(
    net: ValidatedNetwork, fam: CostFamily, b: Belief, loads: Mapping[str, float]
) -> float:
    total = []
    for e in net.edge_ids:
        f = fam.expected(e, b)
        xe = loads.get(e, 0.0)
        if not (0 <= xe < f.cap):
            raise DomainViolation(f"DomainViolation: load {xe!r} on {e!r} outside [0, {f.cap!r})")
        total.append(f.integral(xe))
    return math.fsum(total)


def path_costs(
    net: ValidatedNetwork, fam: CostFamily, b: Belief, loads: Mapping[str, float]
) -> dict[Path, float]:
    ce = {e: fam.expected(e, b).value(loads.get(e, 0.0)) for e in net.edge_ids}
    return {p: sum(ce[e] for e in p) for p in net.paths}


def wardrop_gap(
    net: ValidatedNetwork,
    fam: CostFamily,
    b: Belief,
    flow: FeasibleFlow,
    used_threshold: float = USED_THRESHOLD,
) -> float:
    """Largest excess cost of a used path over the cheapest path."""
    x = {e: 0.0 for e in net.edge_ids}
    for p, y in flow.flows.items():
        for e in p:
            x[e] += y
    cr = path_costs(net, fam, b, x)
    best = min(cr.values())
    used = [cr[p] - best for p, y in flow.flows.items() if y > used_threshold]
    return max([0.0] + used)


def equilibrium_load_map(
    net: ValidatedNetwork,
    fam: CostFamily,
    b: Belief,
    demand_grid: Sequence[float],
    opts: SolverOptions | None = None,
    solver: WardropSolver | None = None,
) -> list[tuple[float, dict[str, float]]]:
    solver = solver or WardropSolver(net, fam, opts)
    out = []
    for d in demand_grid:
        try:
            res = solver.solve(b, d, opts)
        except DomainError as exc:
            raise GridPointError(d, exc) from exc
        out.append((float(d), dict(res.loads)))
    return out

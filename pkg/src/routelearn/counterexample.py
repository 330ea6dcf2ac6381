"""Two-state instances on non-SP networks built around an O-D paradox.

Given a network that is not series-parallel, ``build_converse_instance``
places the Wheatstone-type costs on a paradox subgraph and makes every other
edge a thin, steep side road.  The middle edge of the paradox, called e1
below, has a cost that depends on the state only beyond load 1.
``verify_converse`` solves the equilibria and checks whether e1 ever reaches
that region and whether full information would change the flow.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

from .costs import Affine, Belief, CostFamily, PiecewiseAffine, ReciprocalCapacity
from .equilibrium import SolverOptions, WardropSolver
from .errors import DomainError, GridPointError, NotApplicable, ParamViolation, WitnessNotFound
from .learning import Scenario, Uniform
from .network import OdParadox, RoutingNetwork, ValidatedNetwork, find_od_paradox, validate_network

INF = math.inf

GOOD, BAD = "thetaG", "thetaB"
FLOW_SLACK = 1e-6
WITNESS_DEV = 1e-3
DEFAULT_RANGE = 100.0  # demand range when the constructed network is uncapacitated


@dataclass(frozen=True)
class ConverseParams:
    A: float = 4.0
    eps: float = 0.3
    kappa: float = 0.4

    def __post_init__(self):
        bad = []
        if not (0 < self.eps < 1 / 3):
            bad.append(f"eps must lie in (0, 1/3), got {self.eps!r}")
        if not (3 < self.A < INF):
            bad.append(f"A must exceed 3, got {self.A!r}")
        if not (0 < self.kappa < 0.5):
            bad.append(f"kappa must lie in (0, 1/2), got {self.kappa!r}")
        if bad:
            raise ParamViolation("ParamViolation: " + "; ".join(bad))


@dataclass(frozen=True)
class ConverseRoles:
    """Which concrete edges play which part in the construction."""

    paradox: OdParadox
    segments: dict[str, tuple[str, ...]]
    e1: str
    e2: str
    e3: str

    @property
    def counts(self) -> dict[str, int]:
        k = {name: len(seg) for name, seg in self.segments.items()}
        k["r2"] = len(self.paradox.r2tilde)
        k["r3"] = len(self.paradox.r3tilde)
        return k

    @property
    def figure_edges(self) -> set[str]:
        return self.paradox.edge_set()


def converse_roles(net: ValidatedNetwork) -> ConverseRoles:
    p = find_od_paradox(net)
    if p is None:
        raise NotApplicable("NotApplicable: the network is series-parallel")
    seg = p.segments(net.net)
    # e3 opens the a-u run, e1 opens the u-v run, e2 closes the v-b run
    return ConverseRoles(p, seg, e1=seg["uv"][0], e2=seg["vb"][-1], e3=seg["au"][0])


def build_converse_instance(
    net: ValidatedNetwork,
    p: ConverseParams = ConverseParams(),
    horizon: int = 1000,
    seed: int = 0,
) -> Scenario:
    """Uniform-prior scenario over ``{thetaG, thetaB}`` with truth ``thetaG``.

    Costs on the paradox edges are linear except e1; edges outside the paradox
    get capacity ``kappa / |R|`` and cost ``1 / (gamma_e - x)``.  The demand is
    uniform on ``[0, 0.999 gamma)``, or on ``[0, 100)`` when gamma is infinite.
    """
    roles = converse_roles(net)
    A, eps, kappa = p.A, p.eps, p.kappa
    k = roles.counts
    side_cap = kappa / len(net.paths)
    fig = roles.figure_edges
    caps = {e: (INF if e in fig else side_cap) for e in net.edge_ids}
    host = validate_network(
        RoutingNetwork(net.net.vertices, net.net.edges, net.origin, net.destination, caps), net.max_paths
    )

    slope_of = {}
    for name in ("Oa", "au", "uv", "vb", "bD"):
        for e in roles.segments[name]:
            slope_of[e] = eps / k[name]
    for e in roles.paradox.r2tilde:
        slope_of[e] = eps / k["r2"]
    for e in roles.paradox.r3tilde:
        slope_of[e] = eps / k["r3"]
    slope_of[roles.e2] = A + eps / k["vb"]
    slope_of[roles.e3] = A + eps / k["au"]

    per_edge = {}
    for e in net.edge_ids:
        if e == roles.e1:
            s0 = A + eps / k["uv"]
            good = PiecewiseAffine((1.0,), (s0, eps * eps))
            bad = PiecewiseAffine((1.0,), (s0, 2 * A + 2 * eps / k["uv"] - eps * eps))
            per_edge[e] = {GOOD: good, BAD: bad}
        elif e in fig:
            f = Affine(slope_of[e])
            per_edge[e] = {GOOD: f, BAD: f}
        else:
            f = ReciprocalCapacity(side_cap)
            per_edge[e] = {GOOD: f, BAD: f}
    fam = CostFamily((GOOD, BAD), per_edge)
    fam.check_identifiable()
    gamma = host.capacity_value
    hi = DEFAULT_RANGE if gamma == INF else gamma * (1 - 1e-3)
    return Scenario(
        net=host,
        fam=fam,
        prior=Belief.uniform((GOOD, BAD)),
        truth=GOOD,
        demand=Uniform(0.0, hi),
        horizon=horizon,
        seed=seed,
        early_stop=False,
    )


@dataclass(frozen=True)
class ConverseRow:
    demand: float
    r1_flow: float
    e1_load: float
    max_dev: float
    dev_edge: str
    check_i: bool
    check_ii: bool


@dataclass
class ConverseReport:
    roles: ConverseRoles
    kappa: float
    rows: list[ConverseRow] = field(default_factory=list)
    witness: ConverseRow | None = None

    @property
    def check_i(self) -> bool:
        return all(r.check_i for r in self.rows)

    @property
    def check_ii(self) -> bool:
        return all(r.check_ii for r in self.rows)

    @property
    def check_iii(self) -> bool:
        return self.witness is not None

    def summary(self) -> str:
        w = self.witness
        lines = [
            f"paradox: {self.roles.paradox}",
            f"roles: e1 -> {self.roles.e1}, e2 -> {self.roles.e2}, e3 -> {self.roles.e3}",
            f"(i)   r1 flow <= kappa + {FLOW_SLACK:g} at every demand: {'pass' if self.check_i else 'FAIL'}"
            f" (max {max((r.r1_flow for r in self.rows), default=0.0):.6g})",
            f"(ii)  e1 load <= 1 + {FLOW_SLACK:g} at every demand: {'pass' if self.check_ii else 'FAIL'}"
            f" (max {max((r.e1_load for r in self.rows), default=0.0):.6g})",
        ]
        if w is None:
            top = max(self.rows, key=lambda r: r.max_dev, default=None)
            extra = f" (largest deviation {top.max_dev:.3e} at demand {top.demand:.6g})" if top else ""
            lines.append(f"(iii) weak-learning witness: none{extra}")
        else:
            lines.append(
                f"(iii) weak-learning witness: demand {w.demand:.17g}, edge {w.dev_edge}, deviation {w.max_dev:.6g}"
            )
        return "\n".join(lines)

    def csv(self) -> str:
        buf = io.StringIO()
        buf.write("demand,r1_flow,e1_load,max_dev,dev_edge,check_i,check_ii\n")
        for r in self.rows:
            buf.write(
                f"{r.demand:.17g},{r.r1_flow:.17g},{r.e1_load:.17g},{r.max_dev:.17g},{r.dev_edge},"
                f"{int(r.check_i)},{int(r.check_ii)}\n"
            )
        return buf.getvalue()


def standard_grid(sc: Scenario, n: int = 33, scale: float = 1.0) -> list[float]:
    """``n`` equally spaced demands on ``(0, top]`` with ``top = 0.999 gamma`` (or 100)."""
    gamma = sc.net.capacity_value
    top = DEFAULT_RANGE * scale if gamma == INF else gamma * (1 - 1e-3)
    return [top * i / n for i in range(1, n + 1)]


def verify_converse(
    sc: Scenario,
    demand_grid: list[float] | None = None,
    kappa: float | None = None,
    opts: SolverOptions | None = None,
) -> ConverseReport:
    """Check (i) r1 flow, (ii) e1 load and (iii) a weak-learning witness.

    ``kappa`` defaults to the one implied by the side-edge capacities.  If no
    witness is found the range is doubled once (uncapacitated case) or the
    grid refined once (capacitated case) before ``WitnessNotFound`` is raised;
    the exception carries the report.
    """
    roles = converse_roles(sc.net)
    if kappa is None:
        side = [sc.net.capacity[e] for e in sc.net.edge_ids if e not in roles.figure_edges]
        kappa = side[0] * len(sc.net.paths) if side else ConverseParams().kappa
    solver = WardropSolver(sc.net, sc.fam, opts or sc.solver)
    prior = sc.prior
    truth = Belief.dirac(sc.states, sc.truth)
    report = ConverseReport(roles, kappa)
    r1 = roles.paradox.r1

    def scan(grid):
        for d in grid:
            try:
                a = solver.solve(prior, d)
                b = solver.solve(truth, d)
            except DomainError as exc:
                raise GridPointError(d, exc) from exc
            devs = {e: abs(a.loads[e] - b.loads[e]) for e in sc.net.edge_ids}
            e_top = max(sc.net.edge_ids, key=devs.__getitem__)
            y1 = a.flow_witness.flows.get(r1, 0.0)
            x1 = a.loads[roles.e1]
            row = ConverseRow(
                float(d), y1, x1, devs[e_top], e_top, y1 <= kappa + FLOW_SLACK, x1 <= 1 + FLOW_SLACK
            )
            report.rows.append(row)
            if report.witness is None and row.max_dev > WITNESS_DEV:
                report.witness = row

    if demand_grid is None:
        scan(standard_grid(sc))
    else:
        scan(list(demand_grid))
    if report.witness is None:
        if sc.net.capacity_value == INF:
            top = max([r.demand for r in report.rows], default=DEFAULT_RANGE)
            extra = [top * (1 + i / 33) for i in range(1, 34)]
        else:
            extra = [g for g in standard_grid(sc, 66) if g not in {r.demand for r in report.rows}]
        scan(extra)
    if report.witness is None:
        raise WitnessNotFound(
            "WitnessNotFound: equilibrium loads under the truth and the prior agree to "
            f"{WITNESS_DEV:g} at every scanned demand\n" + report.summary(),
            report,
        )
    return report

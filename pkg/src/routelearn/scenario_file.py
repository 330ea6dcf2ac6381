"""Scenario files (``.scn``) and trace CSVs.

Grammar, version 1.  Blank lines and ``#`` comments are ignored; fields are
whitespace separated::

    version 1
    [network]
    origin O                       # optional, default O
    destination D                  # optional, default D
    edge <id> <tail> <head> [<capacity>|inf]
    [states]
    <label> <label> ...
    [costs]
    <edge> <state>|* <variant> <params...>
    [prior]
    uniform                        # or one "<state> <weight>" line per state
    [truth]
    <state>
    [demand]
    point <d> | uniform <lo> <hi> | exp <mean> [offset <o>] [upper <u>]
    [run]
    <key> <value>                  # keys listed in RUN_KEYS

Cost variants: ``affine a [b]``, ``pwaffine t1..tk s0..sk``, ``bexp k [a]``,
``recip gamma [scale [intercept]]`` (``gamma`` at least the edge capacity).
Weights accept fractions such as ``1/3``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Iterable, TextIO

from .costs import Affine, Belief, BoundedExp, CostFamily, CostFunction, PiecewiseAffine, ReciprocalCapacity
from .equilibrium import SolverOptions
from .errors import DomainError, ParseError, ValidationError
from .learning import Exponential, PointMass, Scenario, Trace, Uniform
from .network import RoutingNetwork, ValidatedNetwork, validate_network

INF = math.inf

SECTIONS = ("network", "states", "costs", "prior", "truth", "demand", "run")
REQUIRED = ("network", "states", "costs", "prior", "truth", "demand")
RUN_KEYS = {
    "horizon": int,
    "seed": int,
    "tol_obs": float,
    "grid": int,
    "solver_tol": float,
    "max_iters": int,
    "used_threshold": float,
    "early_stop": "bool",
    "max_paths": int,
}


def _num(tok: str, line: int, section: str) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity"):
        return INF
    try:
        if "/" in t:
            return float(Fraction(t))
        return float(t)
    except (ValueError, ZeroDivisionError):
        raise ParseError(line, section, f"not a number: {tok!r}") from None


def _fmt(v: float) -> str:
    if v == INF:
        return "inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def parse_cost(tokens: list[str], cap: float, line: int | None = None) -> CostFunction:
    sec = "costs"
    if not tokens:
        raise ParseError(line, sec, "missing cost variant")
    kind, args = tokens[0], [_num(t, line, sec) for t in tokens[1:]]
    try:
        if kind == "affine" and len(args) in (1, 2):
            return Affine(*args, cap=cap)
        if kind == "pwaffine" and len(args) % 2 == 1:
            k = len(args) // 2
            return PiecewiseAffine(tuple(args[:k]), tuple(args[k:]), cap)
        if kind == "bexp" and len(args) in (1, 2):
            return BoundedExp(*args, cap=cap)
        if kind == "recip" and 1 <= len(args) <= 3:
            if args[0] < cap:
                raise ValueError(f"recip pole {args[0]!r} lies below the edge capacity {cap!r}")
            return ReciprocalCapacity(*args, cap=cap)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"line {line}: bad {kind} cost: {exc}") from None
    raise ParseError(line, sec, f"unknown cost variant or wrong arity: {' '.join(tokens)!r}")


def _demand(tokens: list[str], line: int):
    sec = "demand"
    kind = tokens[0]
    try:
        if kind == "point" and len(tokens) == 2:
            return PointMass(_num(tokens[1], line, sec))
        if kind == "uniform" and len(tokens) == 3:
            return Uniform(_num(tokens[1], line, sec), _num(tokens[2], line, sec))
        if kind == "exp" and len(tokens) % 2 == 0:
            opts = {}
            for key, val in zip(tokens[2::2], tokens[3::2]):
                if key not in ("offset", "upper") or key in opts:
                    raise ParseError(line, sec, f"bad exponential option {key!r}")
                opts[key] = _num(val, line, sec)
            return Exponential(_num(tokens[1], line, sec), **opts)
    except ValidationError as exc:
        raise ValidationError(f"line {line}: {exc}") from None
    raise ParseError(line, sec, f"unknown demand distribution: {' '.join(tokens)!r}")


def _sections(text: str) -> dict[str, list[tuple[int, list[str]]]]:
    rows: dict[str, list[tuple[int, list[str]]]] = {}
    section = None
    seen_version = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if not seen_version:
            if body.split() != ["version", "1"]:
                raise ParseError(lineno, None, "file must start with 'version 1'")
            seen_version = True
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ParseError(lineno, None, f"malformed section header {body!r}")
            section = body[1:-1].strip()
            if section not in SECTIONS:
                raise ParseError(lineno, section, "unknown section")
            if section in rows:
                raise ParseError(lineno, section, "duplicate section")
            rows[section] = []
            continue
        if section is None:
            raise ParseError(lineno, None, "content before the first section")
        rows[section].append((lineno, body.split()))
    if not seen_version:
        raise ParseError(None, None, "empty file (missing 'version 1')")
    if "network" not in rows:
        raise ParseError(None, "network", "missing required section")
    return rows


def _network(rows, max_paths: int) -> ValidatedNetwork:
    origin, dest, edges = "O", "D", []
    for ln, tok in rows:
        if tok[0] == "origin" and len(tok) == 2:
            origin = tok[1]
        elif tok[0] == "destination" and len(tok) == 2:
            dest = tok[1]
        elif tok[0] == "edge" and len(tok) in (4, 5):
            cap = _num(tok[4], ln, "network") if len(tok) == 5 else INF
            edges.append((tok[1], tok[2], tok[3], cap))
        else:
            raise ParseError(ln, "network", f"unrecognised line {' '.join(tok)!r}")
    if not edges:
        raise ParseError(None, "network", "no edges")
    try:
        return validate_network(RoutingNetwork.from_edges(edges, origin, dest), max_paths)
    except DomainError as exc:
        raise ValidationError(str(exc)) from None


def parse_network(text: str) -> ValidatedNetwork:
    """Network of a scenario file, or of a file holding only a ``[network]`` section."""
    rows = _sections(text)
    run = _run_options(rows.get("run", []))
    return _network(rows["network"], run.get("max_paths", 10_000))


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate a scenario file."""
    rows = _sections(text)
    for sec in REQUIRED:
        if sec not in rows:
            raise ParseError(None, sec, "missing required section")
    run = _run_options(rows.get("run", []))
    net = _network(rows["network"], run.pop("max_paths", 10_000))

    states = []
    for ln, tok in rows["states"]:
        states.extend(tok)
    if not states or len(set(states)) != len(states):
        raise ValidationError("states must be a nonempty list of distinct labels")

    per_edge: dict[str, dict[str, CostFunction]] = {e: {} for e in net.edge_ids}
    for ln, tok in rows["costs"]:
        if len(tok) < 3:
            raise ParseError(ln, "costs", "expected '<edge> <state> <variant> ...'")
        e, s = tok[0], tok[1]
        if e not in per_edge:
            raise ValidationError(f"line {ln}: cost given for unknown edge {e!r}")
        targets = states if s == "*" else [s]
        if s != "*" and s not in states:
            raise ValidationError(f"line {ln}: unknown state {s!r}")
        f = parse_cost(tok[2:], net.capacity[e], ln)
        for t in targets:
            if t in per_edge[e]:
                raise ValidationError(f"line {ln}: cost of edge {e!r} in state {t!r} given twice")
            per_edge[e][t] = f
    for e, by in per_edge.items():
        missing = [s for s in states if s not in by]
        if missing:
            raise ValidationError(f"edge {e!r} has no cost for states {missing}")
    try:
        fam = CostFamily(tuple(states), per_edge)
        fam.check_identifiable()
    except DomainError as exc:
        raise ValidationError(str(exc)) from None

    prior_rows = rows["prior"]
    if len(prior_rows) == 1 and prior_rows[0][1] == ["uniform"]:
        prior_w = None
    else:
        prior_w = {}
        for ln, tok in prior_rows:
            if len(tok) != 2 or tok[0] not in states or tok[0] in prior_w:
                raise ValidationError(f"line {ln}: prior lines are '<declared state> <weight>'")
            prior_w[tok[0]] = _num(tok[1], ln, "prior")
    try:
        prior = Belief.uniform(states) if prior_w is None else Belief.from_mapping(prior_w, states)
    except DomainError as exc:
        raise ValidationError(str(exc)) from None

    truth_tok = [t for _, tok in rows["truth"] for t in tok]
    if len(truth_tok) != 1:
        raise ParseError(rows["truth"][0][0] if rows["truth"] else None, "truth", "expected one state label")
    dem_rows = rows["demand"]
    if len(dem_rows) != 1:
        raise ParseError(dem_rows[0][0] if dem_rows else None, "demand", "expected one distribution line")
    ln, tok = dem_rows[0]
    demand = _demand(tok, ln)

    solver = SolverOptions(
        tol=run.pop("solver_tol", 1e-9),
        max_iters=run.pop("max_iters", 1_000_000),
        used_threshold=run.pop("used_threshold", 1e-10),
    )
    return Scenario(
        net=net,
        fam=fam,
        prior=prior,
        truth=truth_tok[0],
        demand=demand,
        solver=solver,
        **run,
    )


def _run_options(rows) -> dict:
    names = {"grid": "grid_size"}
    out = {}
    for ln, tok in rows:
        if len(tok) != 2 or tok[0] not in RUN_KEYS:
            raise ParseError(ln, "run", f"unknown or malformed run option {' '.join(tok)!r}")
        key, val = tok
        kind = RUN_KEYS[key]
        try:
            if kind == "bool":
                if val not in ("true", "false"):
                    raise ValueError
                v = val == "true"
            elif kind is int:
                v = int(val)
            else:
                v = _num(val, ln, "run")
        except ValueError:
            raise ParseError(ln, "run", f"bad value for {key}: {val!r}") from None
        out[names.get(key, key)] = v
    return out


def load_scenario(path: str | FsPath) -> Scenario:
    return parse_scenario(FsPath(path).read_text())


def load_network(path: str | FsPath) -> ValidatedNetwork:
    return parse_network(FsPath(path).read_text())


def serialize_scenario(sc: Scenario) -> str:
    net = sc.net
    out = ["version 1", "", "[network]", f"origin {net.origin}", f"destination {net.destination}"]
    for e in net.edges:
        out.append(f"edge {e.id} {e.tail} {e.head} {_fmt(net.capacity[e.id])}")
    out += ["", "[states]", " ".join(sc.states), "", "[costs]"]
    for e in net.edge_ids:
        by = sc.fam.per_edge[e]
        specs = {s: by[s].spec() for s in sc.states}
        if len(set(specs.values())) == 1:
            out.append(f"{e} * {specs[sc.states[0]]}")
        else:
            out += [f"{e} {s} {specs[s]}" for s in sc.states]
    out += ["", "[prior]"]
    out += [f"{s} {_fmt(w)}" for s, w in zip(sc.prior.states, sc.prior.weights)]
    out += ["", "[truth]", sc.truth, "", "[demand]", sc.demand.spec(), "", "[run]"]
    out += [
        f"horizon {sc.horizon}",
        f"seed {sc.seed}",
        f"tol_obs {_fmt(sc.tol_obs)}",
        f"grid {sc.grid_size}",
        f"solver_tol {_fmt(sc.solver.tol)}",
        f"max_iters {int(sc.solver.max_iters)}",
        f"used_threshold {_fmt(sc.solver.used_threshold)}",
        f"early_stop {'true' if sc.early_stop else 'false'}",
    ]
    if net.max_paths != 10_000:
        out.append(f"max_paths {net.max_paths}")
    return "\n".join(out) + "\n"


def scenario_digest(sc: Scenario) -> str:
    return hashlib.sha256(serialize_scenario(sc).encode()).hexdigest()[:16]


def scenarios_equal(a: Scenario, b: Scenario) -> bool:
    """Structural equality (networks compared by edges, capacities, terminals)."""
    return serialize_scenario(a) == serialize_scenario(b)


# trace CSV ------------------------------------------------------------------------


def g17(v: float) -> str:
    return f"{v:.17g}"


def trace_header(sc: Scenario) -> list[str]:
    ids = sc.net.edge_ids
    return ["t", "demand"] + [f"x_{e}" for e in ids] + [f"obs_{e}" for e in ids] + [f"post_{s}" for s in sc.states]


def write_trace_csv(tr: Trace, sc: Scenario, stream: TextIO) -> None:
    stream.write(f"# digest={tr.digest} seed={tr.seed}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(trace_header(sc))
    ids = sc.net.edge_ids
    for p in tr.periods:
        o = p.obs
        row = [str(o.period), g17(o.demand)]
        row += [g17(o.loads[e]) for e in ids]
        row += [g17(o.realized[e]) if e in o.realized else "" for e in ids]
        row += [g17(w_) for w_ in p.posterior.weights]
        w.writerow(row)


def trace_csv_text(tr: Trace, sc: Scenario) -> str:
    buf = io.StringIO()
    write_trace_csv(tr, sc, buf)
    return buf.getvalue()


def read_trace_csv(stream: Iterable[str], sc: Scenario) -> tuple[dict, list[dict[str, str]]]:
    """Return (header-comment fields, rows) of a trace written by ``write_trace_csv``."""
    lines = list(stream)
    meta = {}
    while lines and lines[0].startswith("#"):
        for part in lines.pop(0)[1:].split():
            if "=" in part:
                k, v = part.split("=", 1)
                meta[k] = v
    rows = list(csv.DictReader(lines))
    want = trace_header(sc)
    if rows and list(rows[0].keys()) != want:
        raise ValidationError("trace columns do not match the scenario")
    return meta, rows


def final_belief_from_rows(rows: list[dict[str, str]], sc: Scenario) -> Belief:
    if not rows:
        return sc.prior
    last = rows[-1]
    return Belief(sc.states, tuple(float(last[f"post_{s}"]) for s in sc.states))

"""Routing networks: validation, O-D paths, capacity, series-parallel structure.

Vertices and edges are identified by strings.  Paths are tuples of edge ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

import networkx as nx

from .errors import (
    BadTerminals,
    DanglingEdge,
    NonpositiveCapacity,
    PathExplosion,
    SearchBudgetExceeded,
)

INF = math.inf

MAX_PATHS = 10_000
PARADOX_BUDGET = 1_000_000

Path = tuple[str, ...]


class Edge(NamedTuple):
    id: str
    tail: str
    head: str


@dataclass(frozen=True)
class RoutingNetwork:
    vertices: frozenset[str]
    edges: tuple[Edge, ...]
    origin: str
    destination: str
    capacity: Mapping[str, float]

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Sequence],
        origin: str = "O",
        destination: str = "D",
        vertices: Iterable[str] | None = None,
    ) -> "RoutingNetwork":
        """Build from ``(id, tail, head[, capacity])`` rows; capacity defaults to inf."""
        es, cap = [], {}
        for row in edges:
            eid, tail, head = row[0], row[1], row[2]
            es.append(Edge(str(eid), str(tail), str(head)))
            cap[str(eid)] = float(row[3]) if len(row) > 3 else INF
        vs = set(vertices or ())
        for e in es:
            vs.update((e.tail, e.head))
        return cls(frozenset(vs), tuple(es), origin, destination, cap)

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges)

    def edge(self, eid: str) -> Edge:
        return self._by_id[eid]

    @cached_property
    def _by_id(self) -> dict[str, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def out_edges(self) -> dict[str, list[Edge]]:
        out = {v: [] for v in self.vertices}
        for e in self.edges:
            out.setdefault(e.tail, []).append(e)
        for lst in out.values():
            lst.sort(key=lambda e: e.id)
        return out


@dataclass(frozen=True)
class ValidatedNetwork:
    """A network known to satisfy the model's standing assumptions."""

    net: RoutingNetwork
    max_paths: int = MAX_PATHS

    # convenience passthroughs
    @property
    def origin(self) -> str:
        return self.net.origin

    @property
    def destination(self) -> str:
        return self.net.destination

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self.net.edges

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return self.net.edge_ids

    @property
    def capacity(self) -> Mapping[str, float]:
        return self.net.capacity

    @cached_property
    def paths(self) -> list[Path]:
        return _enumerate(self.net, self.max_paths)

    @cached_property
    def capacity_value(self) -> float:
        return _min_cut(self.net)


def validate_network(net: RoutingNetwork, max_paths: int = MAX_PATHS) -> ValidatedNetwork:
    if net.origin == net.destination:
        raise BadTerminals("BadTerminals: origin and destination coincide")
    for t in (net.origin, net.destination):
        if t not in net.vertices:
            raise BadTerminals(f"BadTerminals: terminal {t!r} is not a vertex")
    ids = [e.id for e in net.edges]
    if len(set(ids)) != len(ids):
        raise BadTerminals("duplicate edge ids")
    for e in net.edges:
        if e.tail not in net.vertices or e.head not in net.vertices:
            raise BadTerminals(f"edge {e.id!r} references an unknown vertex")
        c = net.capacity.get(e.id)
        if c is None or not c > 0:
            raise NonpositiveCapacity(f"NonpositiveCapacity: edge {e.id!r} has capacity {c!r}")
    if not net.edges:
        raise BadTerminals("BadTerminals: network has no edges")
    on_path = {eid for p in _enumerate(net, max_paths) for eid in p}
    for e in net.edges:
        if e.id not in on_path:
            raise DanglingEdge(e.id)
    return ValidatedNetwork(net, max_paths)


# paths -----------------------------------------------------------------------


def simple_paths(
    net: RoutingNetwork,
    src: str,
    dst: str,
    allowed: set[str] | frozenset[str] | None = None,
) -> Iterator[Path]:
    """Simple ``src -> dst`` paths in lexicographic edge-id order.

    ``allowed`` restricts intermediate and end vertices (``src`` always allowed).
    """
    out = net.out_edges
    on_stack = {src}
    stack: list[tuple[Iterator[Edge], Edge | None]] = [(iter(out.get(src, ())), None)]
    path: list[str] = []
    while stack:
        it, _ = stack[-1]
        e = next(it, None)
        if e is None:
            stack.pop()
            if path:
                on_stack.discard(net.edge(path.pop()).head)
            continue
        v = e.head
        if v in on_stack or (allowed is not None and v not in allowed):
            continue
        if v == dst:
            yield tuple(path) + (e.id,)
            continue
        on_stack.add(v)
        path.append(e.id)
        stack.append((iter(out.get(v, ())), e))


def _enumerate(net: RoutingNetwork, max_paths: int) -> list[Path]:
    found = []
    for p in simple_paths(net, net.origin, net.destination):
        found.append(p)
        if len(found) > max_paths:
            raise PathExplosion(f"PathExplosion: more than {max_paths} origin-destination paths")
    return found


def enumerate_paths(net: ValidatedNetwork) -> list[Path]:
    """All simple O-D paths, sorted lexicographically by edge-id sequence."""
    return list(net.paths)


def path_vertices(net: RoutingNetwork, path: Path) -> list[str]:
    vs = [net.edge(path[0]).tail]
    vs.extend(net.edge(eid).head for eid in path)
    return vs


# capacity --------------------------------------------------------------------


def _min_cut(net: RoutingNetwork) -> float:
    infinite = [e for e in net.edges if net.capacity[e.id] == INF]
    g_inf = nx.DiGraph()
    g_inf.add_nodes_from(net.vertices)
    g_inf.add_edges_from((e.tail, e.head) for e in infinite)
    if nx.has_path(g_inf, net.origin, net.destination):
        return INF
    g = nx.DiGraph()
    g.add_nodes_from(net.vertices)
    for e in net.edges:
        c = net.capacity[e.id]
        if g.has_edge(e.tail, e.head):
            if "capacity" in g[e.tail][e.head]:
                g[e.tail][e.head]["capacity"] += c
        else:
            if c == INF:
                g.add_edge(e.tail, e.head)
            else:
                g.add_edge(e.tail, e.head, capacity=c)
    for e in infinite:
        # parallel finite + infinite edges: the pair is infinite
        g[e.tail][e.head].pop("capacity", None)
    return float(nx.maximum_flow_value(g, net.origin, net.destination))


def min_cut_capacity(net: ValidatedNetwork) -> float:
    """Network capacity: the smallest total capacity of an O-D cut."""
    return net.capacity_value


# series-parallel ---------------------------------------------------------------


@dataclass(frozen=True)
class Series:
    children: tuple["SpDecomposition", ...]

    def __str__(self):
        return "S(" + ", ".join(map(str, self.children)) + ")"


@dataclass(frozen=True)
class Parallel:
    children: tuple["SpDecomposition", ...]

    def __str__(self):
        return "P(" + ", ".join(map(str, self.children)) + ")"


SpDecomposition = Union[str, Series, Parallel]


def _min_leaf(node: SpDecomposition) -> str:
    if isinstance(node, str):
        return node
    return min(_min_leaf(c) for c in node.children)


def _series(a: SpDecomposition, b: SpDecomposition) -> Series:
    kids = []
    for n in (a, b):
        kids.extend(n.children if isinstance(n, Series) else (n,))
    return Series(tuple(kids))


def _parallel(nodes: Sequence[SpDecomposition]) -> Parallel:
    kids = []
    for n in nodes:
        kids.extend(n.children if isinstance(n, Parallel) else (n,))
    return Parallel(tuple(sorted(kids, key=_min_leaf)))


def sp_leaves(node: SpDecomposition) -> list[str]:
    if isinstance(node, str):
        return [node]
    return [leaf for c in node.children for leaf in sp_leaves(c)]


def is_series_parallel(net: ValidatedNetwork) -> SpDecomposition | None:
    """Decomposition tree if the network is two-terminal SP w.r.t. (O, D), else None."""
    net_ = net.net
    live: dict[int, tuple[str, str, SpDecomposition]] = {
        i: (e.tail, e.head, e.id) for i, e in enumerate(net_.edges)
    }
    next_id = len(live)
    terminals = {net_.origin, net_.destination}
    changed = True
    while changed:
        changed = False
        groups: dict[tuple[str, str], list[int]] = {}
        for k, (t, h, _) in live.items():
            groups.setdefault((t, h), []).append(k)
        for (t, h), ks in groups.items():
            if len(ks) > 1:
                node = _parallel([live.pop(k)[2] for k in ks])
                live[next_id] = (t, h, node)
                next_id += 1
                changed = True
        if changed:
            continue
        indeg: dict[str, list[int]] = {}
        outdeg: dict[str, list[int]] = {}
        for k, (t, h, _) in live.items():
            outdeg.setdefault(t, []).append(k)
            indeg.setdefault(h, []).append(k)
        for v in sorted(set(indeg) | set(outdeg)):
            if v in terminals:
                continue
            ins, outs = indeg.get(v, []), outdeg.get(v, [])
            if len(ins) == 1 and len(outs) == 1 and ins[0] != outs[0]:
                t, _, a = live.pop(ins[0])
                _, h, b = live.pop(outs[0])
                live[next_id] = (t, h, _series(a, b))
                next_id += 1
                changed = True
                break
    if len(live) == 1:
        (t, h, node), = live.values()
        if (t, h) == (net_.origin, net_.destination):
            return node
    return None


def recompose(tree: SpDecomposition, capacity: Mapping[str, float] | None = None) -> RoutingNetwork:
    """Build a network realising ``tree`` between fresh terminals O and D."""
    rows = []
    counter = [0]

    def fresh():
        counter[0] += 1
        return f"n{counter[0]}"

    def build(node, s, t):
        if isinstance(node, str):
            rows.append((node, s, t, capacity.get(node, INF) if capacity else INF))
        elif isinstance(node, Series):
            cur = s
            for i, c in enumerate(node.children):
                nxt = t if i == len(node.children) - 1 else fresh()
                build(c, cur, nxt)
                cur = nxt
        else:
            for c in node.children:
                build(c, s, t)

    build(tree, "O", "D")
    return RoutingNetwork.from_edges(rows, "O", "D")


# O-D paradox -------------------------------------------------------------------


@dataclass(frozen=True)
class OdParadox:
    """Wheatstone-type embedding.

    ``r1`` visits ``origin, a, u, v, b, destination`` in this order (``a`` may be
    the origin and ``b`` the destination); ``r2tilde`` joins ``a`` to ``v`` and
    ``r3tilde`` joins ``u`` to ``b``, each touching ``r1`` only at its ends and
    vertex-disjoint from each other.
    """

    r1: Path
    r2tilde: Path
    r3tilde: Path
    a: str
    u: str
    v: str
    b: str

    def segments(self, net: RoutingNetwork) -> dict[str, Path]:
        """Split ``r1`` into its O-a, a-u, u-v, v-b and b-D edge runs."""
        vs = path_vertices(net, self.r1)
        idx = {x: vs.index(x) for x in (self.a, self.u, self.v, self.b)}
        last = len(self.r1)
        cuts = [0, idx[self.a], idx[self.u], idx[self.v], idx[self.b], last]
        names = ["Oa", "au", "uv", "vb", "bD"]
        return {n: self.r1[cuts[i]:cuts[i + 1]] for i, n in enumerate(names)}

    def edge_set(self) -> set[str]:
        return set(self.r1) | set(self.r2tilde) | set(self.r3tilde)

    def __str__(self):
        return (
            f"a={self.a} u={self.u} v={self.v} b={self.b} "
            f"r1=({','.join(self.r1)}) r2~=({','.join(self.r2tilde)}) r3~=({','.join(self.r3tilde)})"
        )


def check_paradox(net: RoutingNetwork, p: OdParadox) -> list[str]:
    """Violated conditions of the paradox definition (empty list = valid)."""
    problems = []

    def chain(path, start, end):
        if not path:
            return False
        vs = [net.edge(path[0]).tail]
        for eid in path:
            e = net.edge(eid)
            if e.tail != vs[-1]:
                return False
            vs.append(e.head)
        return vs[0] == start and vs[-1] == end and len(set(vs)) == len(vs)

    if not chain(p.r1, net.origin, net.destination):
        problems.append("r1 is not a simple O-D path")
        return problems
    vs1 = path_vertices(net, p.r1)
    pos = [vs1.index(x) if x in vs1 else -1 for x in (p.a, p.u, p.v, p.b)]
    if -1 in pos or not (pos[0] < pos[1] < pos[2] < pos[3]):
        problems.append("(i) r1 does not meet a, u, v, b in order")
    if not chain(p.r2tilde, p.a, p.v):
        problems.append("(ii) r2~ is not a simple a-v path")
    elif set(path_vertices(net, p.r2tilde)) & set(vs1) != {p.a, p.v}:
        problems.append("(ii) r2~ meets r1 outside a, v")
    if not chain(p.r3tilde, p.u, p.b):
        problems.append("(iii) r3~ is not a simple u-b path")
    elif set(path_vertices(net, p.r3tilde)) & set(vs1) != {p.u, p.b}:
        problems.append("(iii) r3~ meets r1 outside u, b")
    if not problems:
        if set(path_vertices(net, p.r2tilde)) & set(path_vertices(net, p.r3tilde)):
            problems.append("(iv) r2~ and r3~ share a vertex")
    return problems


def find_od_paradox(net: ValidatedNetwork, budget: int = PARADOX_BUDGET) -> OdParadox | None:
    """Lexicographically smallest O-D paradox, or None.

    Candidates are ordered by ``(a, u, v, b, r1)``; for each, ``r2tilde`` and
    then ``r3tilde`` are searched in lexicographic edge-id order.
    """
    net_ = net.net
    spent = 0
    candidates = []
    for r1 in net.paths:
        vs = path_vertices(net_, r1)
        for i, j, k, l in combinations(range(len(vs)), 4):
            candidates.append((vs[i], vs[j], vs[k], vs[l], r1, frozenset(vs)))
            spent += 1
            if spent > budget:
                raise SearchBudgetExceeded(f"SearchBudgetExceeded: more than {budget} candidates")
    candidates.sort(key=lambda c: c[:5])
    off_r1_cache: dict[Path, frozenset[str]] = {}
    for a, u, v, b, r1, on_r1 in candidates:
        off = off_r1_cache.get(r1)
        if off is None:
            off = off_r1_cache[r1] = frozenset(net_.vertices - on_r1)
        for r2 in simple_paths(net_, a, v, allowed=off | {v}):
            spent += len(r2)
            if spent > budget:
                raise SearchBudgetExceeded(f"SearchBudgetExceeded: node budget {budget} exhausted")
            used2 = set(path_vertices(net_, r2))
            allowed3 = (off - used2) | {b}
            for r3 in simple_paths(net_, u, b, allowed=allowed3):
                return OdParadox(r1, r2, r3, a, u, v, b)
    return None


# loads ---------------------------------------------------------------------------


def loads_from_flows(flows: Mapping[Path, float], net: ValidatedNetwork) -> dict[str, float]:
    """Edge loads induced by path flows."""
    x = {eid: 0.0 for eid in net.edge_ids}
    for path, y in flows.items():
        for eid in path:
            x[eid] += y
    return x

"""State-dependent edge cost functions.

Every cost is one of a small closed set of variants, each with a closed-form
antiderivative (the Beckmann potential must be exact) and derivative (used by
the line search).  All variants are frozen dataclasses; ``cap`` is the edge
capacity, i.e. the right end of the open domain ``[0, cap)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import DomainViolation, IdentifiabilityError, InvalidBelief

INF = math.inf

BELIEF_TOL = 1e-12


class CostFunction:
    """Common interface. Subclasses implement ``value/integral/deriv``."""

    cap: float

    def value(self, x: float) -> float:
        raise NotImplementedError

    def integral(self, x: float) -> float:
        raise NotImplementedError

    def deriv(self, x: float) -> float:
        raise NotImplementedError

    @property
    def unbounded(self) -> bool:
        raise NotImplementedError

    def with_cap(self, cap: float) -> "CostFunction":
        raise NotImplementedError

    def params(self) -> tuple:
        raise NotImplementedError

    def spec(self) -> str:
        """Scenario-file representation (without the capacity)."""
        raise NotImplementedError

    def __call__(self, x: float) -> float:
        return self.value(x)


@dataclass(frozen=True)
class Affine(CostFunction):
    a: float
    b: float = 0.0
    cap: float = INF

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"affine slope must be > 0, got {self.a}")
        if self.b < 0:
            raise ValueError(f"affine intercept must be >= 0, got {self.b}")

    def value(self, x):
        return self.a * x + self.b

    def integral(self, x):
        return 0.5 * self.a * x * x + self.b * x

    def deriv(self, x):
        return self.a

    @property
    def unbounded(self):
        return self.cap == INF

    def with_cap(self, cap):
        return Affine(self.a, self.b, cap)

    def params(self):
        return ("affine", self.a, self.b)

    def spec(self):
        return f"affine {_fmt(self.a)} {_fmt(self.b)}"


@dataclass(frozen=True)
class PiecewiseAffine(CostFunction):
    """Continuous piecewise-affine cost through the origin.

    ``breakpoints`` are ``t1 < t2 < ...`` (``t0 = 0`` implicit); ``slopes`` has
    one more entry than ``breakpoints``.
    """

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    cap: float = INF
    _knots: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _values: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _areas: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bps = tuple(float(t) for t in self.breakpoints)
        sl = tuple(float(s) for s in self.slopes)
        if len(sl) != len(bps) + 1:
            raise ValueError("pwaffine needs exactly one more slope than breakpoints")
        if any(s <= 0 for s in sl):
            raise ValueError("pwaffine slopes must all be > 0")
        knots = (0.0,) + bps
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("pwaffine breakpoints must be strictly increasing and > 0")
        values = [0.0]
        areas = [0.0]
        for i in range(len(bps)):
            w = knots[i + 1] - knots[i]
            areas.append(areas[-1] + values[-1] * w + 0.5 * sl[i] * w * w)
            values.append(values[-1] + sl[i] * w)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "_knots", knots)
        object.__setattr__(self, "_values", tuple(values))
        object.__setattr__(self, "_areas", tuple(areas))

    def _piece(self, x):
        i = len(self._knots) - 1
        while i > 0 and x < self._knots[i]:
            i -= 1
        return i

    def value(self, x):
        i = self._piece(x)
        return self._values[i] + self.slopes[i] * (x - self._knots[i])

    def integral(self, x):
        i = self._piece(x)
        h = x - self._knots[i]
        return self._areas[i] + self._values[i] * h + 0.5 * self.slopes[i] * h * h

    def deriv(self, x):
        return self.slopes[self._piece(x)]

    @property
    def unbounded(self):
        return self.cap == INF

    def with_cap(self, cap):
        return PiecewiseAffine(self.breakpoints, self.slopes, cap)

    def params(self):
        return ("pwaffine", self.breakpoints, self.slopes)

    def spec(self):
        return "pwaffine " + " ".join(_fmt(v) for v in self.breakpoints + self.slopes)


@dataclass(frozen=True)
class BoundedExp(CostFunction):
    """``k * (1 - exp(-x)) + a * x``; bounded when ``a == 0``."""

    k: float
    a: float = 0.0
    cap: float = INF

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"bexp scale must be > 0, got {self.k}")
        if self.a < 0:
            raise ValueError(f"bexp affine slope must be >= 0, got {self.a}")

    def value(self, x):
        return self.k * -math.expm1(-x) + self.a * x

    def integral(self, x):
        # x + e^{-x} - 1, written to keep precision near 0
        return self.k * (x + math.expm1(-x)) + 0.5 * self.a * x * x

    def deriv(self, x):
        return self.k * math.exp(-x) + self.a

    @property
    def unbounded(self):
        return self.cap == INF and self.a > 0

    def with_cap(self, cap):
        return BoundedExp(self.k, self.a, cap)

    def params(self):
        return ("bexp", self.k, self.a)

    def spec(self):
        if self.a == 0:
            return f"bexp {_fmt(self.k)}"
        return f"bexp {_fmt(self.k)} {_fmt(self.a)}"


@dataclass(frozen=True)
class ReciprocalCapacity(CostFunction):
    """``scale / (gamma - x) + intercept`` on ``[0, gamma)``.

    With the defaults this is the M/M/1-style cost ``1 / (gamma - x)``.
    """

    gamma: float
    scale: float = 1.0
    intercept: float = 0.0
    cap: float | None = None

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"recip gamma must be finite and > 0, got {self.gamma}")
        if not self.scale > 0:
            raise ValueError(f"recip scale must be > 0, got {self.scale}")
        if self.intercept < 0:
            raise ValueError(f"recip intercept must be >= 0, got {self.intercept}")
        if self.cap is None:
            object.__setattr__(self, "cap", float(self.gamma))
        elif self.cap > self.gamma:
            raise ValueError(f"recip gamma {self.gamma} is below the edge capacity {self.cap}")

    def value(self, x):
        return self.scale / (self.gamma - x) + self.intercept

    def integral(self, x):
        return -self.scale * math.log1p(-x / self.gamma) + self.intercept * x

    def deriv(self, x):
        g = self.gamma - x
        return self.scale / (g * g)

    @property
    def unbounded(self):
        return self.cap == self.gamma

    def with_cap(self, cap):
        return ReciprocalCapacity(self.gamma, self.scale, self.intercept, cap)

    def params(self):
        return ("recip", self.gamma, self.scale, self.intercept)

    def spec(self):
        out = f"recip {_fmt(self.gamma)}"
        if self.scale != 1.0 or self.intercept != 0.0:
            out += f" {_fmt(self.scale)}"
        if self.intercept != 0.0:
            out += f" {_fmt(self.intercept)}"
        return out


@dataclass(frozen=True)
class Mixture(CostFunction):
    """Convex combination of heterogeneous variants (fallback of ``mix``)."""

    weights: tuple[float, ...]
    parts: tuple[CostFunction, ...]
    cap: float = INF

    def value(self, x):
        return sum(w * f.value(x) for w, f in zip(self.weights, self.parts))

    def integral(self, x):
        return sum(w * f.integral(x) for w, f in zip(self.weights, self.parts))

    def deriv(self, x):
        return sum(w * f.deriv(x) for w, f in zip(self.weights, self.parts))

    @property
    def unbounded(self):
        return any(f.unbounded for f in self.parts)

    def with_cap(self, cap):
        return Mixture(self.weights, tuple(f.with_cap(cap) for f in self.parts), cap)

    def params(self):
        return ("mixture", self.weights, tuple(f.params() for f in self.parts))

    def spec(self):
        raise TypeError("mixtures are derived objects and have no file representation")


def mix(weights: Sequence[float], parts: Sequence[CostFunction]) -> CostFunction:
    """Return ``sum_i w_i f_i`` as a single cost, collapsing same-shape variants."""
    pairs = [(w, f) for w, f in zip(weights, parts) if w > 0]
    if not pairs:
        raise InvalidBelief("mixture with no positive weight")
    cap = pairs[0][1].cap
    if len(pairs) == 1 and pairs[0][0] == 1.0:
        return pairs[0][1]
    total = sum(w for w, _ in pairs)
    kinds = {type(f) for _, f in pairs}
    if len(kinds) == 1:
        kind = kinds.pop()
        fs = [f for _, f in pairs]
        ws = [w / total for w, _ in pairs]
        if kind is Affine:
            return Affine(_dot(ws, [f.a for f in fs]), _dot(ws, [f.b for f in fs]), cap)
        if kind is BoundedExp:
            return BoundedExp(_dot(ws, [f.k for f in fs]), _dot(ws, [f.a for f in fs]), cap)
        if kind is PiecewiseAffine and len({f.breakpoints for f in fs}) == 1:
            n = len(fs[0].slopes)
            slopes = tuple(_dot(ws, [f.slopes[i] for f in fs]) for i in range(n))
            return PiecewiseAffine(fs[0].breakpoints, slopes, cap)
        if kind is ReciprocalCapacity and len({f.gamma for f in fs}) == 1:
            return ReciprocalCapacity(
                fs[0].gamma, _dot(ws, [f.scale for f in fs]), _dot(ws, [f.intercept for f in fs]), cap
            )
    return Mixture(tuple(w / total for w, _ in pairs), tuple(f for _, f in pairs), cap)


def _dot(a, b):
    return math.fsum(x * y for x, y in zip(a, b))


def _fmt(v: float) -> str:
    if v == INF:
        return "inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _check_domain(f: CostFunction, x: float) -> None:
    if not (0 <= x < f.cap):
        raise DomainViolation(f"DomainViolation: load {x!r} outside [0, {f.cap!r})")


def evaluate(f: CostFunction, x: float) -> float:
    _check_domain(f, x)
    return f.value(x)


def antiderivative(f: CostFunction, x: float) -> float:
    _check_domain(f, x)
    return f.integral(x)


def is_unbounded_at_capacity(f: CostFunction) -> bool:
    return f.unbounded


# beliefs -----------------------------------------------------------------


@dataclass(frozen=True)
class Belief:
    """Probability vector over an ordered finite state space."""

    states: tuple[str, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        states = tuple(self.states)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)
        if len(states) != len(weights) or not states:
            raise InvalidBelief("belief needs one weight per state")
        if len(set(states)) != len(states):
            raise InvalidBelief("duplicate state labels")
        if any(not (0.0 <= w <= 1.0) for w in weights):
            raise InvalidBelief(f"belief weights must lie in [0, 1], got {weights}")
        total = math.fsum(weights)
        if abs(total - 1.0) > BELIEF_TOL:
            raise InvalidBelief(f"belief weights sum to {total!r}, not 1")

    @classmethod
    def from_mapping(cls, weights: Mapping[str, float], states: Sequence[str]) -> "Belief":
        return cls(tuple(states), tuple(float(weights.get(s, 0.0)) for s in states))

    @classmethod
    def uniform(cls, states: Sequence[str]) -> "Belief":
        n = len(states)
        w = [float(Fraction(1, n))] * n
        # push rounding into the last weight so the sum is 1 to the last bit
        w[-1] = 1.0 - math.fsum(w[:-1])
        return cls(tuple(states), tuple(w))

    @classmethod
    def dirac(cls, states: Sequence[str], state: str) -> "Belief":
        if state not in states:
            raise InvalidBelief(f"unknown state {state!r}")
        return cls(tuple(states), tuple(1.0 if s == state else 0.0 for s in states))

    def __getitem__(self, state: str) -> float:
        return self.weights[self.states.index(state)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.states, self.weights))

    @property
    def support(self) -> tuple[str, ...]:
        return tuple(s for s, w in zip(self.states, self.weights) if w > 0)

    def is_dirac(self, state: str | None = None) -> bool:
        supp = self.support
        return len(supp) == 1 and (state is None or supp[0] == state)

    def restricted(self, keep: set[str]) -> "Belief":
        """Condition on the event ``state in keep`` (proportional renormalisation)."""
        raw = [w if s in keep else 0.0 for s, w in zip(self.states, self.weights)]
        total = math.fsum(raw)
        if total <= 0:
            raise InvalidBelief("conditioning on a null event")
        w = [r / total for r in raw]
        # make the sum exact; the largest weight absorbs the last-bit residual
        j = max(range(len(w)), key=w.__getitem__)
        w[j] = 1.0 - math.fsum(w[:j] + w[j + 1:])
        return Belief(self.states, tuple(w))


# families ------------------------------------------------------------------


WITNESS_GRID = 10_000
WITNESS_RANGE = 100.0


@dataclass(frozen=True)
class CostFamily:
    """Per-edge, per-state cost functions.

    ``per_edge[e][s]`` is the cost of edge ``e`` in state ``s``.
    """

    states: tuple[str, ...]
    per_edge: Mapping[str, Mapping[str, CostFunction]]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        for e, by_state in self.per_edge.items():
            missing = set(self.states) - set(by_state)
            extra = set(by_state) - set(self.states)
            if missing or extra:
                raise IdentifiabilityError(
                    f"edge {e!r}: costs must be given for exactly the states {self.states}"
                )
            caps = {f.cap for f in by_state.values()}
            if len(caps) != 1:
                raise IdentifiabilityError(f"edge {e!r}: states disagree on the domain cap")

    def cost(self, edge: str, state: str) -> CostFunction:
        return self.per_edge[edge][state]

    def expected(self, edge: str, belief: Belief) -> CostFunction:
        by_state = self.per_edge[edge]
        return mix(belief.weights, [by_state[s] for s in belief.states])

    def cap(self, edge: str) -> float:
        return next(iter(self.per_edge[edge].values())).cap

    def identifiability_witness(self, s1: str, s2: str) -> tuple[str, float] | None:
        """An (edge, load) where the two states' costs differ, or ``None``."""
        for e in sorted(self.per_edge):
            f, g = self.per_edge[e][s1], self.per_edge[e][s2]
            if f.params() == g.params():
                continue
            hi = min(f.cap, WITNESS_RANGE)
            for i in range(WITNESS_GRID):
                x = hi * i / WITNESS_GRID
                if f.value(x) != g.value(x):
                    return e, x
        return None

    def check_identifiable(self) -> None:
        for i, s1 in enumerate(self.states):
            for s2 in self.states[i + 1:]:
                if self.identifiability_witness(s1, s2) is None:
                    raise IdentifiabilityError(
                        f"states {s1!r} and {s2!r} induce identical costs on every edge"
                    )


def expected_cost(fam: CostFamily, edge: str, x: float, belief: Belief) -> float:
    """Belief-weighted cost of ``edge`` at load ``x``."""
    by_state = fam.per_edge[edge]
    total = 0.0
    for s, w in zip(belief.states, belief.weights):
        f = by_state[s]
        _check_domain(f, x)
        if w > 0:
            total += w * f.value(x)
    return total

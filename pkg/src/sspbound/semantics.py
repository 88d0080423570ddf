"""Exact affine/polyhedral model of a succinct MDP.

Everything here works over :class:`fractions.Fraction`; floating point only
appears in the LP engine and the simulator.
"""
from __future__ import annotations

import decimal
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Number = Fraction


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


@dataclass(frozen=True)
class LinearExpr:
    """``sum(coeff * name) + const`` with exact rational coefficients.

    Zero coefficients are never stored, so two expressions compare equal
    exactly when they denote the same affine function.
    """

    terms: tuple[tuple[str, Fraction], ...] = ()
    const: Fraction = Fraction(0)

    @classmethod
    def build(cls, coeffs: Mapping[str, object] | None = None, const=0) -> "LinearExpr":
        items = []
        for name, c in (coeffs or {}).items():
            c = as_fraction(c)
            if c != 0:
                items.append((name, c))
        items.sort()
        return cls(tuple(items), as_fraction(const))

    @classmethod
    def var(cls, name: str, coeff=1) -> "LinearExpr":
        return cls.build({name: coeff})

    @classmethod
    def constant(cls, value) -> "LinearExpr":
        return cls((), as_fraction(value))

    @property
    def coeffs(self) -> dict[str, Fraction]:
        return dict(self.terms)

    def coeff(self, name: str) -> Fraction:
        for n, c in self.terms:
            if n == name:
                return c
        return Fraction(0)

    def variables(self) -> frozenset[str]:
        return frozenset(n for n, _ in self.terms)

    def is_constant(self) -> bool:
        return not self.terms

    def __add__(self, other) -> "LinearExpr":
        if not isinstance(other, LinearExpr):
            other = LinearExpr.constant(other)
        acc = dict(self.terms)
        for n, c in other.terms:
            acc[n] = acc.get(n, Fraction(0)) + c
        return LinearExpr.build(acc, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinearExpr":
        return self * -1

    def __sub__(self, other) -> "LinearExpr":
        if not isinstance(other, LinearExpr):
            other = LinearExpr.constant(other)
        return self + (-other)

    def __rsub__(self, other) -> "LinearExpr":
        return (-self) + other

    def __mul__(self, k) -> "LinearExpr":
        if isinstance(k, LinearExpr):
            if k.is_constant():
                k = k.const
            elif self.is_constant():
                return k * self.const
            else:
                raise ValueError("product of two non-constant expressions is not linear")
        k = as_fraction(k)
        return LinearExpr.build({n: c * k for n, c in self.terms}, self.const * k)

    __rmul__ = __mul__

    def substitute(self, env: Mapping[str, "LinearExpr"]) -> "LinearExpr":
        out = LinearExpr.constant(self.const)
        for n, c in self.terms:
            out = out + (env[n] if n in env else LinearExpr.var(n)) * c
        return out

    def evaluate(self, values: Mapping[str, object]):
        total = self.const
        for n, c in self.terms:
            total = total + c * values[n]
        return total

    def __str__(self) -> str:
        return format_linear(self.coeffs, self.const)


def format_number(value) -> str:
    """Render a rational compactly: integers plain, terminating decimals as decimals."""
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return f"{value:.6g}"
    value = as_fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    d = value.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1 and value.denominator <= 10**6:
        with decimal.localcontext() as ctx:
            ctx.prec = 50
            text = format(decimal.Decimal(value.numerator) / decimal.Decimal(value.denominator), "f")
        return text.rstrip("0").rstrip(".") if "." in text else text
    return f"{value.numerator}/{value.denominator}"


def format_linear(coeffs: Mapping[str, object], const=0, *, order: Sequence[str] | None = None) -> str:
    """Human form such as ``2.5x - 2.5y + 5``."""
    names = list(order) if order is not None else sorted(coeffs)
    parts: list[str] = []
    for name in names:
        c = coeffs.get(name, 0)
        if c == 0:
            continue
        mag = format_number(abs(c))
        body = name if mag == "1" else (f"{mag}{name}" if "/" not in mag else f"({mag}){name}")
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    if const != 0 or not parts:
        mag = format_number(abs(const))
        if not parts:
            parts.append(mag if const >= 0 else f"-{mag}")
        else:
            parts.append(("+ " if const > 0 else "- ") + mag)
    return " ".join(parts)


@dataclass(frozen=True)
class HalfSpace:
    """``lhs <= rhs`` (or ``<`` when strict); ``lhs`` has no constant part."""

    lhs: LinearExpr
    rhs: Fraction
    strict: bool = False

    @classmethod
    def from_comparison(cls, left: LinearExpr, op: str, right: LinearExpr) -> "HalfSpace":
        diff = left - right
        lin = LinearExpr(diff.terms)
        bound = -diff.const
        if op == "<=":
            return cls(lin, bound, False)
        if op == "<":
            return cls(lin, bound, True)
        if op == ">=":
            return cls(-lin, -bound, False)
        if op == ">":
            return cls(-lin, -bound, True)
        raise ValueError(f"unknown comparison {op!r}")

    def closure(self) -> "HalfSpace":
        return HalfSpace(self.lhs, self.rhs, False)

    def holds(self, values: Mapping[str, object], tol=0) -> bool:
        v = self.lhs.evaluate(values)
        return v < self.rhs + tol if self.strict else v <= self.rhs + tol

    def substitute(self, env: Mapping[str, LinearExpr]) -> "HalfSpace":
        e = self.lhs.substitute(env)
        return HalfSpace(LinearExpr(e.terms), self.rhs - e.const, self.strict)

    def variables(self) -> frozenset[str]:
        return self.lhs.variables()

    def __str__(self) -> str:
        return f"{self.lhs} {'<' if self.strict else '<='} {format_number(self.rhs)}"


def negate_guard(g: HalfSpace) -> HalfSpace:
    """Complement of a half-space: ``not (e <= t)`` is ``-e < -t``."""
    return HalfSpace(-g.lhs, -g.rhs, not g.strict)


@dataclass(frozen=True)
class Polyhedron:
    """Conjunction of half-spaces; the empty conjunction is the whole space."""

    rows: tuple[HalfSpace, ...] = ()

    def __and__(self, other: "Polyhedron | HalfSpace") -> "Polyhedron":
        if isinstance(other, HalfSpace):
            return Polyhedron(self.rows + (other,))
        return Polyhedron(self.rows + other.rows)

    def closure(self) -> "Polyhedron":
        return Polyhedron(tuple(r.closure() for r in self.rows))

    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for r in self.rows:
            for n, _ in r.lhs.terms:
                seen.setdefault(n, None)
        return tuple(seen)

    def matrix(self, variables: Sequence[str]) -> tuple[list[list[Fraction]], list[Fraction], list[bool]]:
        P = [[r.lhs.coeff(v) for v in variables] for r in self.rows]
        q = [r.rhs for r in self.rows]
        return P, q, [r.strict for r in self.rows]

    def contains(self, values: Mapping[str, object], tol=0) -> bool:
        return all(r.holds(values, tol) for r in self.rows)


@dataclass(frozen=True)
class Distribution:
    """Joint distribution of one or more sampling variables.

    ``kind`` is ``"discrete"`` (``support`` holds ``(point, prob)`` pairs) or
    ``"uniform"`` (scalar, on ``[lo, hi]``).
    """

    variables: tuple[str, ...]
    kind: str
    support: tuple[tuple[tuple[Fraction, ...], Fraction], ...] = ()
    lo: Fraction | None = None
    hi: Fraction | None = None

    def __post_init__(self):
        if self.kind == "discrete":
            if not self.support:
                raise ValueError("discrete distribution needs at least one outcome")
            if any(p <= 0 for _, p in self.support):
                raise ValueError("discrete probabilities must be positive")
            if sum(p for _, p in self.support) != 1:
                raise ValueError("discrete probabilities must sum to 1")
            if any(len(pt) != len(self.variables) for pt, _ in self.support):
                raise ValueError("outcome arity does not match variable list")
        elif self.kind == "uniform":
            if len(self.variables) != 1:
                raise ValueError("uniform distributions are scalar")
            if not self.lo < self.hi:
                raise ValueError("uniform distribution needs lo < hi")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def discrete(cls, variables, outcomes: Mapping | Iterable) -> "Distribution":
        if isinstance(variables, str):
            variables = (variables,)
        items = outcomes.items() if isinstance(outcomes, Mapping) else outcomes
        support = []
        for pt, p in items:
            pt = tuple(as_fraction(v) for v in (pt if isinstance(pt, tuple) else (pt,)))
            support.append((pt, as_fraction(p)))
        return cls(tuple(variables), "discrete", tuple(support))

    @classmethod
    def uniform(cls, variable: str, lo, hi) -> "Distribution":
        return cls((variable,), "uniform", (), as_fraction(lo), as_fraction(hi))

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    def mean(self) -> tuple[Fraction, ...]:
        if self.kind == "uniform":
            return ((self.lo + self.hi) / 2,)
        return tuple(
            sum((pt[i] * p for pt, p in self.support), Fraction(0)) for i in range(len(self.variables))
        )

    def hull(self) -> tuple[tuple[Fraction, Fraction], ...]:
        if self.kind == "uniform":
            return ((self.lo, self.hi),)
        return tuple(
            (min(pt[i] for pt, _ in self.support), max(pt[i] for pt, _ in self.support))
            for i in range(len(self.variables))
        )

    def __len__(self) -> int:
        return len(self.support) if self.is_discrete else 0


def support_hull(dists: Iterable[Distribution]) -> dict[str, tuple[Fraction, Fraction]]:
    box: dict[str, tuple[Fraction, Fraction]] = {}
    for d in dists:
        for name, iv in zip(d.variables, d.hull()):
            box[name] = iv
    return box


def means(dists: Iterable[Distribution]) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    for d in dists:
        out.update(zip(d.variables, d.mean()))
    return out


@dataclass(frozen=True)
class AffineMap:
    """``F(x, u) = A x + B u + c`` over named program and sampling variables."""

    program_vars: tuple[str, ...]
    sampling_vars: tuple[str, ...]
    A: tuple[tuple[Fraction, ...], ...]
    B: tuple[tuple[Fraction, ...], ...]
    c: tuple[Fraction, ...]

    @classmethod
    def identity(cls, program_vars, sampling_vars=()) -> "AffineMap":
        n = len(program_vars)
        A = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))
        B = tuple(tuple(Fraction(0) for _ in sampling_vars) for _ in range(n))
        return cls(tuple(program_vars), tuple(sampling_vars), A, B, tuple(Fraction(0) for _ in range(n)))

    @classmethod
    def from_exprs(cls, exprs: Mapping[str, LinearExpr], program_vars, sampling_vars=()) -> "AffineMap":
        A, B, c = [], [], []
        for v in program_vars:
            e = exprs.get(v, LinearExpr.var(v))
            A.append(tuple(e.coeff(w) for w in program_vars))
            B.append(tuple(e.coeff(w) for w in sampling_vars))
            c.append(e.const)
        return cls(tuple(program_vars), tuple(sampling_vars), tuple(A), tuple(B), tuple(c))

    def exprs(self) -> dict[str, LinearExpr]:
        out = {}
        for i, v in enumerate(self.program_vars):
            coeffs = dict(zip(self.program_vars, self.A[i]))
            coeffs.update(zip(self.sampling_vars, self.B[i]))
            out[v] = LinearExpr.build(coeffs, self.c[i])
        return out

    def then(self, other: "AffineMap") -> "AffineMap":
        """Run ``self`` first, then ``other`` (both share variable orders)."""
        mine = self.exprs()
        composed = {v: e.substitute(mine) for v, e in other.exprs().items()}
        return AffineMap.from_exprs(composed, self.program_vars, self.sampling_vars)

    def apply(self, x: Sequence, u: Sequence = ()) -> tuple:
        out = []
        for i in range(len(self.program_vars)):
            val = self.c[i]
            for a, xv in zip(self.A[i], x):
                if a:
                    val = val + a * xv
            for b, uv in zip(self.B[i], u):
                if b:
                    val = val + b * uv
            out.append(val)
        return tuple(out)

    def used_sampling_vars(self) -> tuple[str, ...]:
        return tuple(w for j, w in enumerate(self.sampling_vars) if any(row[j] for row in self.B))


def compose_block(assignments: Sequence[tuple[str, LinearExpr]], program_vars, sampling_vars=()) -> AffineMap:
    """Lower a sequence of assignments to a single affine map.

    Later assignments see the results of earlier ones.
    """
    env: dict[str, LinearExpr] = {}
    for target, expr in assignments:
        env[target] = expr.substitute(env)
    return AffineMap.from_exprs(env, program_vars, sampling_vars)


def expected_update(fmap: AffineMap, dists: Iterable[Distribution]) -> AffineMap:
    """``x -> A x + B mu + c``, returned as a map with no sampling part."""
    mu = means(dists)
    c = []
    for i in range(len(fmap.program_vars)):
        c.append(fmap.c[i] + sum((b * mu[w] for b, w in zip(fmap.B[i], fmap.sampling_vars) if b), Fraction(0)))
    return AffineMap(fmap.program_vars, (), fmap.A, tuple(() for _ in fmap.program_vars), tuple(c))


def reward_expectation(reward: LinearExpr, dists: Iterable[Distribution]) -> Fraction:
    mu = means(dists)
    return reward.evaluate({n: mu[n] for n in reward.variables()})


@dataclass(frozen=True)
class Block:
    fmap: AffineMap
    reward: LinearExpr


@dataclass(frozen=True)
class ModelIR:
    program_vars: tuple[str, ...]
    sampling_vars: tuple[str, ...]
    guard: HalfSpace
    blocks: tuple[Block, ...]
    distributions: tuple[Distribution, ...]
    init: tuple[Fraction, ...] | None = None
    notes: tuple[str, ...] = field(default=(), compare=False)

    @property
    def k(self) -> int:
        return len(self.blocks)

    def dist_of(self, name: str) -> Distribution:
        for d in self.distributions:
            if name in d.variables:
                return d
        raise KeyError(name)

    def summary(self) -> str:
        return f"|X|={len(self.program_vars)} |R|={len(self.sampling_vars)} k={self.k}"

    def satisfies_guard(self, x: Sequence) -> bool:
        return self.guard.holds(dict(zip(self.program_vars, x)))

    def with_init(self, init: Sequence | None) -> "ModelIR":
        return ModelIR(
            self.program_vars, self.sampling_vars, self.guard, self.blocks, self.distributions,
            None if init is None else tuple(as_fraction(v) for v in init), self.notes,
        )


def reward_bound(model: ModelIR) -> Fraction:
    """R_max: largest |reward| over the corners of each block's support hull."""
    box = support_hull(model.distributions)
    best = Fraction(0)
    for blk in model.blocks:
        names = sorted(blk.reward.variables())
        for corner in itertools.product(*(box[n] for n in names)):
            val = abs(blk.reward.evaluate(dict(zip(names, corner))))
            best = max(best, val)
    return best


@dataclass(frozen=True)
class SupportSpec:
    """Sampling valuations a block can see: explicit points, or a hull box."""

    variables: tuple[str, ...]
    points: tuple[tuple[Fraction, ...], ...] | None
    box: tuple[tuple[Fraction, Fraction], ...]

    @property
    def enumerated(self) -> bool:
        return self.points is not None


def block_support(model: ModelIR, fmap: AffineMap, threshold: int = 16) -> SupportSpec:
    """Support of the sampling variables that ``fmap`` actually reads.

    Points are enumerated when every involved distribution is discrete and the
    joint support has at most ``threshold`` points; otherwise the interval hull
    is used.
    """
    used = fmap.used_sampling_vars()
    dists: list[Distribution] = []
    for name in used:
        d = model.dist_of(name)
        if d not in dists:
            dists.append(d)
    variables = tuple(v for d in dists for v in d.variables)
    box_map = support_hull(dists)
    box = tuple(box_map[v] for v in variables)
    size = math.prod(len(d) for d in dists)
    if all(d.is_discrete for d in dists) and size <= threshold:
        points = tuple(
            tuple(v for pt in combo for v in pt)
            for combo in itertools.product(*([pt for pt, _ in d.support] for d in dists))
        )
        return SupportSpec(variables, points, box)
    return SupportSpec(variables, None, box)

"""Potential-function conditions as polyhedral inclusions, and their
Farkas / Motzkin reformulations.

Template unknowns are named ``a[x]`` (one per program variable), ``b``,
``K``, ``Kp`` (K') and ``M``.  Conditions on ``h(x) = a.x + b`` become
:class:`InclusionAssertion` objects: a numeric polyhedron on the left, and on
the right a half-space whose coefficients are affine in the unknowns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .lp import LPProblem, lp_solve
from .semantics import (
    AffineMap,
    HalfSpace,
    LinearExpr,
    ModelIR,
    Polyhedron,
    block_support,
    expected_update,
    negate_guard,
    reward_expectation,
)

TAG_ORDER = {"C2-lower": 0, "C2-upper": 1, "C3": 2, "C3'": 2, "C4-plus": 3, "C4-minus": 4}


def coef_name(var: str) -> str:
    return f"a[{var}]"


@dataclass(frozen=True)
class Constraint:
    """``expr <= 0`` or ``expr == 0``."""

    expr: LinearExpr
    rel: str


@dataclass(frozen=True)
class PotentialTemplate:
    program_vars: tuple[str, ...]

    @property
    def coefficients(self) -> tuple[str, ...]:
        return tuple(coef_name(v) for v in self.program_vars)

    @property
    def unknowns(self) -> tuple[str, ...]:
        return self.coefficients + ("b", "K", "Kp", "M")

    def h(self, point: dict[str, LinearExpr] | None = None) -> LinearExpr:
        """``h`` as an expression in the unknowns, at a numeric point."""
        out = LinearExpr.var("b")
        for v in self.program_vars:
            val = point[v] if point is not None else 0
            out = out + LinearExpr.var(coef_name(v)) * val
        return out

    def constraints(self) -> list[Constraint]:
        return [
            Constraint(LinearExpr.var("M", -1), "<="),
            Constraint(LinearExpr.build({"K": 1, "Kp": -1}), "<="),
        ]

    def assignment(self, a: Sequence, b=0, K=0, Kp=0, M=0) -> dict[str, object]:
        values = dict(zip(self.coefficients, a))
        values.update(b=b, K=K, Kp=Kp, M=M)
        return values


def build_template(model: ModelIR) -> PotentialTemplate:
    if not model.program_vars:
        raise ValueError("a model must have at least one program variable")
    return PotentialTemplate(model.program_vars)


@dataclass(frozen=True)
class InclusionAssertion:
    """``lhs`` (over ``variables``) is contained in ``sum coeffs[i]*v_i <= bound``."""

    variables: tuple[str, ...]
    lhs: Polyhedron
    coeffs: tuple[LinearExpr, ...]
    bound: LinearExpr
    tag: str
    block: int | None = None
    point: int | None = None

    @property
    def key(self):
        return (TAG_ORDER[self.tag], -1 if self.block is None else self.block, -1 if self.point is None else self.point)

    def label(self) -> str:
        parts = [f"({self.tag})"]
        if self.block is not None:
            parts.append(f"block {self.block + 1}")
        if self.point is not None:
            parts.append(f"support point {self.point + 1}")
        return " ".join(parts)

    def instantiate(self, values: dict[str, object]) -> tuple[list, object]:
        """Numeric right-hand side for concrete unknowns."""
        return [c.evaluate(values) for c in self.coeffs], self.bound.evaluate(values)


def _h_after(template: PotentialTemplate, fmap: AffineMap, u: Sequence | None, u_vars: Sequence[str]):
    """``h(F(x, u))`` split into per-coordinate coefficients and a constant.

    With ``u`` given the sampling part is folded into the constant and the
    coordinates are the program variables only; otherwise the coordinates are
    program variables followed by ``u_vars``.
    """
    a = [LinearExpr.var(n) for n in template.coefficients]
    X = fmap.program_vars
    col = {w: j for j, w in enumerate(fmap.sampling_vars)}
    xs = []
    for j in range(len(X)):
        xs.append(sum((a[i] * fmap.A[i][j] for i in range(len(X)) if fmap.A[i][j]), LinearExpr()))
    const = LinearExpr.var("b")
    for i in range(len(X)):
        off = fmap.c[i]
        if u is not None:
            off = off + sum((fmap.B[i][col[w]] * val for w, val in zip(u_vars, u)), Fraction(0))
        if off:
            const = const + a[i] * off
    us = []
    if u is None:
        for w in u_vars:
            us.append(sum((a[i] * fmap.B[i][col[w]] for i in range(len(X)) if fmap.B[i][col[w]]), LinearExpr()))
    return xs, us, const


def _box_rows(u_vars, box) -> tuple[HalfSpace, ...]:
    rows = []
    for w, (lo, hi) in zip(u_vars, box):
        rows.append(HalfSpace(LinearExpr.var(w), hi))
        rows.append(HalfSpace(LinearExpr.var(w, -1), -lo))
    return tuple(rows)


def _regions(model: ModelIR, fmap: AffineMap, threshold: int):
    """Yield ``(point_index, u, u_vars, box)`` for each sampling region of a block."""
    sup = block_support(model, fmap, threshold)
    if sup.enumerated:
        for pi, pt in enumerate(sup.points):
            yield (pi if len(sup.points) > 1 or sup.variables else None), pt, sup.variables, None
    else:
        yield None, None, sup.variables, sup.box


def encode_c2(model: ModelIR, template: PotentialTemplate, threshold: int = 16) -> list[InclusionAssertion]:
    """Bounded potential on exit: ``K <= h(F(x,u)) <= K'`` whenever ``x`` meets
    the guard and ``F(x, u)`` does not."""
    out = []
    guard = model.guard
    exit_guard = negate_guard(guard)
    for li, blk in enumerate(model.blocks):
        fmap = blk.fmap
        exprs = fmap.exprs()
        for pi, u, u_vars, box in _regions(model, fmap, threshold):
            if u is not None:
                env = {v: e.substitute({w: LinearExpr.constant(val) for w, val in zip(u_vars, u)})
                       for v, e in exprs.items()}
                variables = model.program_vars
                lhs = Polyhedron((guard, exit_guard.substitute(env)))
            else:
                variables = model.program_vars + tuple(u_vars)
                lhs = Polyhedron((guard, exit_guard.substitute(exprs)) + _box_rows(u_vars, box))
            xs, us, const = _h_after(template, fmap, u, u_vars)
            hcoef = tuple(xs + us)
            out.append(InclusionAssertion(
                variables, lhs, tuple(-c for c in hcoef), const - LinearExpr.var("K"), "C2-lower", li, pi))
            out.append(InclusionAssertion(
                variables, lhs, hcoef, LinearExpr.var("Kp") - const, "C2-upper", li, pi))
    return sorted(out, key=lambda a: a.key)


def encode_c3(model: ModelIR, template: PotentialTemplate, block: int, direction: str) -> InclusionAssertion:
    """Drift condition for one block.

    ``direction=">="``: ``h(x) >= E h(F(x,u)) + E R``; ``"<="`` the reverse.
    """
    blk = model.blocks[block]
    mean_map = expected_update(blk.fmap, model.distributions)
    er = reward_expectation(blk.reward, model.distributions)
    xs, _, const = _h_after(template, mean_map, (), ())
    a = [LinearExpr.var(n) for n in template.coefficients]
    # h(x) - E h(F) - E R = sum_j (a_j - xs_j) x_j - (const - b) - E R
    diff = [a[j] - xs[j] for j in range(len(a))]
    offset = const - LinearExpr.var("b") + er
    if direction == ">=":
        coeffs, bound = tuple(-d for d in diff), -offset
        tag = "C3"
    elif direction == "<=":
        coeffs, bound = tuple(diff), offset
        tag = "C3'"
    else:
        raise ValueError(f"direction must be '>=' or '<=', not {direction!r}")
    return InclusionAssertion(model.program_vars, Polyhedron((model.guard,)), coeffs, bound, tag, block)


def encode_c4(model: ModelIR, template: PotentialTemplate, threshold: int = 16) -> list[InclusionAssertion]:
    """Bounded one-step change: ``|h(x) - h(F(x,u))| <= M`` on the guard."""
    out = []
    a = [LinearExpr.var(n) for n in template.coefficients]
    for li, blk in enumerate(model.blocks):
        fmap = blk.fmap
        for pi, u, u_vars, box in _regions(model, fmap, threshold):
            xs, us, const = _h_after(template, fmap, u, u_vars)
            # h(x) - h(F) = sum_j (a_j - xs_j) x_j - sum_k us_k u_k - (const - b)
            delta = [a[j] - xs[j] for j in range(len(a))] + [-c for c in us]
            dconst = const - LinearExpr.var("b")
            if u is not None:
                variables = model.program_vars
                lhs = Polyhedron((model.guard,))
            else:
                variables = model.program_vars + tuple(u_vars)
                lhs = Polyhedron((model.guard,) + _box_rows(u_vars, box))
            M = LinearExpr.var("M")
            out.append(InclusionAssertion(variables, lhs, tuple(delta), M + dconst, "C4-plus", li, pi))
            out.append(InclusionAssertion(variables, lhs, tuple(-d for d in delta), M - dconst, "C4-minus", li, pi))
    return sorted(out, key=lambda a: a.key)


def check_nonempty(p: Polyhedron, variables: Sequence[str] | None = None) -> bool:
    """Is the closure of ``p`` nonempty?  Decided by an exact phase-one solve."""
    variables = tuple(variables) if variables is not None else p.variables()
    P, q, _ = p.matrix(variables)
    lp = LPProblem(len(variables))
    for row, rhs in zip(P, q):
        if not any(row):
            if rhs < 0:
                return False
            continue
        lp.add(row, "<=", rhs)
    if not lp.rows:
        return True
    return lp_solve(lp, exact=True).status != "infeasible"


@dataclass
class LinearConstraintSystem:
    """Linear constraints over template unknowns and Farkas multipliers."""

    unknowns: tuple[str, ...]
    multipliers: list[str] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    audit: list[str] = field(default_factory=list)

    def extend(self, other: "LinearConstraintSystem") -> None:
        self.multipliers.extend(other.multipliers)
        self.constraints.extend(other.constraints)
        self.audit.extend(other.audit)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self.unknowns) + tuple(self.multipliers)

    def to_lp(self, objective: LinearExpr | None = None, sense: str = "min") -> tuple[LPProblem, dict[str, int]]:
        index = {n: i for i, n in enumerate(self.variables)}
        lp = LPProblem(len(index), sense=sense, nonneg={index[m] for m in self.multipliers})
        for c in self.constraints:
            row = [0] * len(index)
            for n, coef in c.expr.terms:
                row[index[n]] = coef
            lp.add(row, c.rel, -c.expr.const)
        if objective is not None:
            obj = [0] * len(index)
            for n, coef in objective.terms:
                obj[index[n]] = coef
            lp.objective = obj
        return lp, index


def farkas_transform(assertion: InclusionAssertion, prefix: str = "y") -> LinearConstraintSystem:
    """Replace an inclusion by multipliers ``y >= 0`` with ``P^T y = c`` and ``q.y <= d``.

    Strict rows are relaxed to their closure.  An empty left-hand side makes
    the assertion vacuous: the fragment is empty and an audit note is kept.
    """
    sys = LinearConstraintSystem(())
    lhs = assertion.lhs.closure()
    if not check_nonempty(lhs, assertion.variables):
        sys.audit.append(f"dropped vacuous assertion {assertion.label()}: empty left-hand side")
        return sys
    P, q, _ = lhs.matrix(assertion.variables)
    ys = [f"{prefix}{j}" for j in range(len(P))]
    sys.multipliers.extend(ys)
    for i, ci in enumerate(assertion.coeffs):
        e = LinearExpr.build({ys[j]: P[j][i] for j in range(len(P))}) - ci
        sys.constraints.append(Constraint(e, "=="))
    e = LinearExpr.build({ys[j]: q[j] for j in range(len(P))}) - assertion.bound
    sys.constraints.append(Constraint(e, "<="))
    return sys


@dataclass(frozen=True)
class BilinearConstraint:
    """``linear + sum(z * form) (<= | ==) 0`` where each ``form`` is affine in the unknowns."""

    linear: LinearExpr
    products: tuple[tuple[str, LinearExpr], ...]
    rel: str

    def fix_z(self, z: dict[str, object]) -> Constraint:
        e = self.linear
        for name, form in self.products:
            e = e + form * z[name]
        return Constraint(e, self.rel)

    def fix_unknowns(self, values: dict[str, object]) -> Constraint:
        # unknowns appear only inside products or in the linear part
        lin_terms = {n: c for n, c in self.linear.terms if n not in values}
        const = self.linear.const + sum((c * values[n] for n, c in self.linear.terms if n in values), 0)
        e = LinearExpr.build(lin_terms, const)
        for name, form in self.products:
            e = e + LinearExpr.var(name, form.evaluate(values))
        return Constraint(e, self.rel)


@dataclass
class BilinearSystem:
    unknowns: tuple[str, ...]
    y: list[str]
    z: list[str]
    constraints: list[BilinearConstraint]
    epsilon: Fraction = Fraction(1)


def motzkin_transform(guard_poly: Polyhedron, variables: Sequence[str],
                      disjuncts: Sequence[tuple[Sequence[LinearExpr], LinearExpr]],
                      epsilon=1, prefix: str = "m") -> BilinearSystem:
    """Emptiness of ``guard & (all c_l.x > d_l)`` as a bilinear system.

    ``disjuncts`` are the half-spaces ``c_l.x <= d_l`` whose union must cover
    the guard polyhedron.  Multipliers: ``y`` for guard rows, ``z`` per
    disjunct, with ``P^T y - sum z_l c_l = 0``, ``q.y - sum z_l d_l <= 0`` and
    ``sum z >= epsilon`` (the strict ``sum z > 0`` normalised by scaling).
    """
    P, q, _ = guard_poly.closure().matrix(variables)
    ys = [f"{prefix}y{j}" for j in range(len(P))]
    zs = [f"{prefix}z{l}" for l in range(len(disjuncts))]
    cons = []
    for i in range(len(variables)):
        lin = LinearExpr.build({ys[j]: P[j][i] for j in range(len(P))})
        prods = tuple((zs[l], -c[i]) for l, (c, _) in enumerate(disjuncts))
        cons.append(BilinearConstraint(lin, prods, "=="))
    lin = LinearExpr.build({ys[j]: q[j] for j in range(len(P))})
    cons.append(BilinearConstraint(lin, tuple((zs[l], -d) for l, (_, d) in enumerate(disjuncts)), "<="))
    cons.append(BilinearConstraint(LinearExpr.build({z: -1 for z in zs}, epsilon), (), "<="))
    unknowns = sorted({n for c, d in disjuncts for e in list(c) + [d] for n in e.variables()})
    return BilinearSystem(tuple(unknowns), ys, zs, cons, Fraction(epsilon))

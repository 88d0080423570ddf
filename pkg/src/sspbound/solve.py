"""Certificate synthesis: build the linear (or bilinear) programs from the
encoded conditions, solve them, then tighten and verify the result.

Which drift condition applies depends on the value being bounded:

=======  =====  ==========  =============  ================
problem  side   quantifier  direction      objective
=======  =====  ==========  =============  ================
sup      upper  every ℓ     h >= E h + R   min h(x0) - K
sup      lower  some ℓ      h <= E h + R   max h(x0) - K'
inf      lower  every ℓ     h <= E h + R   max h(x0) - K'
inf      upper  some ℓ      h >= E h + R   min h(x0) - K
=======  =====  ==========  =============  ================
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .certgen import (
    Constraint,
    InclusionAssertion,
    LinearConstraintSystem,
    PotentialTemplate,
    build_template,
    check_nonempty,
    encode_c2,
    encode_c3,
    encode_c4,
    farkas_transform,
    motzkin_transform,
)
from .lp import LPProblem, lp_solve
from .semantics import LinearExpr, ModelIR, as_fraction, format_linear, format_number

log = logging.getLogger(__name__)

SIDES = ("upper", "lower")
PROBLEMS = ("sup", "inf")
STRATEGIES = ("fixed", "motzkin")
SCHEMA = 1


class NoCertificate(Exception):
    """No linear potential function satisfies the conditions."""


@dataclass
class SolverConfig:
    support_threshold: int = 16
    snap_tol: float = 1e-6
    snap_denominator: int = 10**4
    verify_tol: float = 1e-6
    epsilon: Fraction = Fraction(1)
    max_iters: int = 50
    conv_tol: float = 1e-8
    min_starts: int = 8
    seed: int = 0


@dataclass
class SolverStats:
    iterations: int = 0
    lp_count: int = 0

    def record(self, res) -> None:
        self.iterations += res.iterations
        self.lp_count += 1


@dataclass
class VerificationReport:
    passed: bool
    failures: list[str] = field(default_factory=list)
    exact: bool = False


def quantifier(problem: str, side: str) -> str:
    _check(problem, side)
    return "all" if (problem, side) in (("sup", "upper"), ("inf", "lower")) else "some"


def direction(side: str) -> str:
    return ">=" if side == "upper" else "<="


def _check(problem: str, side: str) -> None:
    if problem not in PROBLEMS:
        raise ValueError(f"problem must be one of {PROBLEMS}, not {problem!r}")
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, not {side!r}")


@dataclass
class BoundCertificate:
    problem: str
    side: str
    variables: tuple[str, ...]
    a: tuple
    b: object
    K: object
    Kprime: object
    M: object
    strategy: str
    block: int | None = None  # 1-based block for a fixed choice, else None
    x0: tuple | None = None
    exact: bool = False
    verified: bool = False
    failures: list[str] = field(default_factory=list)
    audit: list[str] = field(default_factory=list)
    solver_stats: dict = field(default_factory=dict)

    @property
    def coefficients(self) -> dict[str, object]:
        return dict(zip(self.variables, self.a))

    @property
    def bound_expr(self) -> str:
        """The bound as a function of the initial state, ``h(x) - K`` (or ``- K'``)."""
        shift = self.K if self.side == "upper" else self.Kprime
        return format_linear(self.coefficients, self.b - shift, order=self.variables)

    def potential(self, x: Sequence) -> object:
        return sum((ai * as_fraction(xi) if self.exact else float(ai) * float(xi)
                    for ai, xi in zip(self.a, x)), self.b)

    def bound_at(self, x: Sequence) -> float:
        shift = self.K if self.side == "upper" else self.Kprime
        return float(self.potential(x) - shift)

    @property
    def value_at_init(self) -> float | None:
        return None if self.x0 is None else self.bound_at(self.x0)

    def values(self) -> dict[str, object]:
        out = {f"a[{v}]": ai for v, ai in zip(self.variables, self.a)}
        out.update(b=self.b, K=self.K, Kp=self.Kprime, M=self.M)
        return out

    def to_dict(self) -> dict:
        d = {
            "schema": SCHEMA,
            "problem": self.problem,
            "side": self.side,
            "variables": list(self.variables),
            "a": {v: float(ai) for v, ai in zip(self.variables, self.a)},
            "b": float(self.b),
            "K": float(self.K),
            "Kprime": float(self.Kprime),
            "M": float(self.M),
            "bound_expr": self.bound_expr,
            "value_at_init": self.value_at_init,
            "x0": None if self.x0 is None else [float(v) for v in self.x0],
            "strategy": self.strategy,
            "block": self.block,
            "verified": self.verified,
            "failures": list(self.failures),
            "audit": list(self.audit),
            "solver_stats": dict(self.solver_stats),
            "exact": None,
        }
        if self.exact:
            d["exact"] = {
                "a": {v: str(ai) for v, ai in zip(self.variables, self.a)},
                "b": str(self.b), "K": str(self.K), "Kprime": str(self.Kprime), "M": str(self.M),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BoundCertificate":
        if d.get("schema", SCHEMA) != SCHEMA:
            raise ValueError(f"unsupported certificate schema {d.get('schema')!r}")
        variables = tuple(d["variables"])
        ex = d.get("exact")
        if ex:
            a = tuple(Fraction(ex["a"][v]) for v in variables)
            b, K, Kp, M = (Fraction(ex[k]) for k in ("b", "K", "Kprime", "M"))
        else:
            a = tuple(float(d["a"][v]) for v in variables)
            b, K, Kp, M = (float(d[k]) for k in ("b", "K", "Kprime", "M"))
        x0 = d.get("x0")
        if x0 is not None:
            x0 = tuple(as_fraction(v) for v in x0)
        return cls(d["problem"], d["side"], variables, a, b, K, Kp, M, d["strategy"], d.get("block"), x0,
                   bool(ex), bool(d.get("verified")), list(d.get("failures", [])), list(d.get("audit", [])),
                   dict(d.get("solver_stats", {})))


# -- encoding helpers -----------------------------------------------------------------------------


@dataclass
class _Encoding:
    model: ModelIR
    template: PotentialTemplate
    c2: list[InclusionAssertion]
    c4: list[InclusionAssertion]
    c3: list[InclusionAssertion]
    base: LinearConstraintSystem


def _encode(model: ModelIR, side: str, cfg: SolverConfig) -> _Encoding:
    t = build_template(model)
    c2 = encode_c2(model, t, cfg.support_threshold)
    c4 = encode_c4(model, t, cfg.support_threshold)
    c3 = [encode_c3(model, t, l, direction(side)) for l in range(model.k)]
    base = LinearConstraintSystem(t.unknowns, constraints=t.constraints())
    seen = set()
    for i, asr in enumerate(c2 + c4):
        # blocks often share exit regions and one-step changes; encode each once
        key = (asr.variables, asr.lhs.closure(), asr.coeffs, asr.bound)
        if key in seen:
            continue
        seen.add(key)
        base.extend(farkas_transform(asr, prefix=f"f{i}_"))
    return _Encoding(model, t, c2, c4, c3, base)


def _objective(t: PotentialTemplate, side: str, x0) -> tuple[LinearExpr, str]:
    if x0 is None:
        return LinearExpr(), "min"
    h = t.h({v: LinearExpr.constant(as_fraction(val)) for v, val in zip(t.program_vars, x0)})
    if side == "upper":
        return h - LinearExpr.var("K"), "min"
    return h - LinearExpr.var("Kp"), "max"


def _solve_system(system: LinearConstraintSystem, objective: LinearExpr, sense: str, stats: SolverStats):
    lp, index = system.to_lp(objective, sense)
    res = lp_solve(lp)
    stats.record(res)
    for w in res.warnings:
        log.warning(w)
    if res.status == "unbounded":
        raise NoCertificate("LP unbounded: solver anomaly (are the exit regions empty?)")
    if not res.ok:
        return None
    return {n: float(res.x[i]) for n, i in index.items()}


def _with(system: LinearConstraintSystem, extra: Sequence[LinearConstraintSystem] = (),
          constraints: Sequence[Constraint] = (), multipliers: Sequence[str] = ()) -> LinearConstraintSystem:
    out = LinearConstraintSystem(system.unknowns, list(system.multipliers), list(system.constraints),
                                 list(system.audit))
    for e in extra:
        out.extend(e)
    out.multipliers.extend(multipliers)
    out.constraints.extend(constraints)
    return out


# -- verification ---------------------------------------------------------------------------------

_nonempty_cache: dict = {}


def _nonempty(asr: InclusionAssertion) -> bool:
    key = (asr.lhs.closure(), asr.variables)
    if key not in _nonempty_cache:
        _nonempty_cache[key] = check_nonempty(asr.lhs.closure(), asr.variables)
    return _nonempty_cache[key]


def max_violation(asr: InclusionAssertion, values: dict, exact: bool, stats: SolverStats | None = None):
    """``max over lhs of coeffs.v - bound``; ``None`` when the left side is empty."""
    if not _nonempty(asr):
        return None
    coeffs, bound = asr.instantiate(values)
    P, q, _ = asr.lhs.closure().matrix(asr.variables)
    lp = LPProblem(len(asr.variables), sense="max", objective=coeffs if exact else [float(c) for c in coeffs])
    for row, rhs in zip(P, q):
        lp.add(row, "<=", rhs)
    res = lp_solve(lp, exact=exact)
    if stats is not None:
        stats.record(res)
    if res.status == "unbounded":
        return math.inf
    if not res.ok:
        return None
    return res.objective - bound


def union_violation(guard_asr: Sequence[InclusionAssertion], values: dict, exact: bool,
                    stats: SolverStats | None = None):
    """Largest ``t <= 1`` such that some guard point violates every disjunct by ``t``."""
    first = guard_asr[0]
    n = len(first.variables)
    P, q, _ = first.lhs.closure().matrix(first.variables)
    conv = (lambda v: v) if exact else float
    lp = LPProblem(n + 1, sense="max", objective=[0] * n + [1])
    for row, rhs in zip(P, q):
        lp.add(list(row) + [0], "<=", rhs)
    for asr in guard_asr:
        coeffs, bound = asr.instantiate(values)
        # t <= coeffs.x - bound
        lp.add([-conv(c) for c in coeffs] + [1], "<=", -conv(bound))
    lp.add([0] * n + [1], "<=", 1)
    res = lp_solve(lp, exact=exact)
    if stats is not None:
        stats.record(res)
    if not res.ok:
        return None
    return res.objective


def verify_certificate(model: ModelIR, cert: BoundCertificate, cfg: SolverConfig | None = None) -> VerificationReport:
    """Re-check every condition with LPs over the certificate's values.

    Exact certificates are checked in rational arithmetic with zero tolerance.
    """
    cfg = cfg or SolverConfig()
    t = build_template(model)
    values = cert.values()
    exact = cert.exact
    tol = 0 if exact else cfg.verify_tol
    failures = []
    checks = encode_c2(model, t, cfg.support_threshold) + encode_c4(model, t, cfg.support_threshold)
    for asr in checks:
        v = max_violation(asr, values, exact)
        if v is not None and v > tol:
            failures.append(_failure(asr, v))
    if cert.M < 0:
        failures.append(f"M = {format_number(cert.M)} is negative")
    if cert.K > cert.Kprime:
        failures.append("K exceeds K'")
    c3 = [encode_c3(model, t, l, direction(cert.side)) for l in range(model.k)]
    if quantifier(cert.problem, cert.side) == "all":
        for asr in c3:
            v = max_violation(asr, values, exact)
            if v is not None and v > tol:
                failures.append(_failure(asr, v))
    elif cert.block is not None:
        asr = c3[cert.block - 1]
        v = max_violation(asr, values, exact)
        if v is not None and v > tol:
            failures.append(_failure(asr, v))
    elif _nonempty(c3[0]):
        v = union_violation(c3, values, exact)
        if v is not None and v > tol:
            failures.append(f"({c3[0].tag}) violated: some guard state fails every block (slack {float(v):.3g})")
    return VerificationReport(not failures, failures, exact)


def _failure(asr: InclusionAssertion, v) -> str:
    where = ""
    if asr.block is not None:
        where = f" for ℓ={asr.block + 1}"
        if asr.point is not None:
            where += f" at support point {asr.point + 1}"
    return f"({asr.tag.split('-')[0]}) violated{where} (slack {float(v):.3g})"


# -- tightening -----------------------------------------------------------------------------------


def _tighten(enc: _Encoding, a: Sequence, exact: bool, stats: SolverStats):
    """Smallest K / largest K' / smallest M for fixed coefficients, with b = 0."""
    values = enc.template.assignment(a)
    lows, highs, ms = [], [], [0]
    for asr in enc.c2:
        v = max_violation(asr, values, exact, stats)
        if v is None:
            continue
        (lows if asr.tag == "C2-lower" else highs).append(v)
    for asr in enc.c4:
        v = max_violation(asr, values, exact, stats)
        if v is not None:
            ms.append(v)
    kmin = -max(lows) if lows else 0
    kmax = max(highs) if highs else 0
    return kmin, kmax, max(ms)


def _snap(a: Sequence[float], cfg: SolverConfig):
    out = []
    for v in a:
        f = Fraction(v).limit_denominator(cfg.snap_denominator)
        if abs(float(f) - v) > cfg.snap_tol * max(1.0, abs(v)):
            return None
        out.append(f)
    return out


def _finalize(enc: _Encoding, a: Sequence[float], problem: str, side: str, strategy: str, block, x0,
              cfg: SolverConfig, stats: SolverStats) -> BoundCertificate:
    names = enc.model.program_vars
    attempts = []
    snapped = _snap(a, cfg)
    if snapped is not None:
        attempts.append((snapped, True))
    attempts.append(([float(v) for v in a], False))
    cert = None
    for coeffs, exact in attempts:
        kmin, kmax, M = _tighten(enc, coeffs, exact, stats)
        if any(isinstance(v, float) and math.isinf(v) for v in (kmin, kmax, M)):
            continue
        if side == "upper":
            b, K, Kp = -kmin, kmin - kmin, kmax - kmin
        else:
            b, K, Kp = -kmax, kmin - kmax, kmax - kmax
        cert = BoundCertificate(problem, side, names, tuple(coeffs), b, K, Kp, M, strategy, block,
                                None if x0 is None else tuple(as_fraction(v) for v in x0), exact)
        report = verify_certificate(enc.model, cert, cfg)
        cert.verified, cert.failures = report.passed, report.failures
        if report.passed:
            break
    if cert is None:
        raise NoCertificate("solver returned coefficients with unbounded exit potential")
    cert.audit = list(enc.base.audit)
    cert.solver_stats = {"iterations": stats.iterations, "lp_count": stats.lp_count}
    return cert


# -- synthesis ------------------------------------------------------------------------------------


def _better(side: str, new, old) -> bool:
    if old is None:
        return True
    return new < old - 1e-12 if side == "upper" else new > old + 1e-12


def _score(cert: BoundCertificate) -> float:
    return cert.value_at_init if cert.value_at_init is not None else 0.0


def synthesize(model: ModelIR, side: str, problem: str = "sup", strategy: str = "fixed",
               x0: Sequence | None = None, cfg: SolverConfig | None = None) -> BoundCertificate:
    """Best linear certificate for one side of ``sup`` or ``inf``.

    ``x0`` defaults to the model's initial valuation; without one the LP has a
    zero objective and any feasible certificate is returned.
    """
    _check(problem, side)
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, not {strategy!r}")
    cfg = cfg or SolverConfig()
    x0 = model.init if x0 is None else tuple(as_fraction(v) for v in x0)
    enc = _encode(model, side, cfg)
    stats = SolverStats()
    objective, sense = _objective(enc.template, side, x0)
    q = quantifier(problem, side)

    if q == "all":
        frags = [farkas_transform(asr, prefix=f"d{l}_") for l, asr in enumerate(enc.c3)]
        sol = _solve_system(_with(enc.base, frags), objective, sense, stats)
        if sol is None:
            raise NoCertificate(f"no linear {side} certificate: conditions are infeasible")
        return _finalize(enc, [sol[n] for n in enc.template.coefficients], problem, side, "all-blocks", None,
                         x0, cfg, stats)

    if strategy == "fixed" or model.k == 1:
        candidates = []
        for l, asr in enumerate(enc.c3):
            sol = _solve_system(_with(enc.base, [farkas_transform(asr, prefix="d_")]), objective, sense, stats)
            if sol is not None:
                val = objective.evaluate(sol)
                candidates.append((float(val) if sense == "min" else -float(val), l, sol))
        # tightening cannot beat the LP optimum, so finalize the best choices first
        candidates.sort(key=lambda c: (round(c[0], 9), c[1]))
        best = None
        for key, l, sol in candidates:
            if best is not None and round(key, 9) > round(best_key, 9):
                break
            cert = _finalize(enc, [sol[n] for n in enc.template.coefficients], problem, side, "fixed", l + 1,
                             x0, cfg, stats)
            if cert.verified and (best is None or _better(side, _score(cert), _score(best))):
                best, best_key = cert, key
        if best is None:
            raise NoCertificate(f"no linear {side} certificate with a fixed block choice")
        best.solver_stats = {"iterations": stats.iterations, "lp_count": stats.lp_count}
        return best

    return _motzkin(enc, problem, side, objective, sense, x0, cfg, stats)


def _starts(k: int, cfg: SolverConfig) -> list[np.ndarray]:
    starts = [np.eye(k)[l] for l in range(k)] + [np.full(k, 1.0 / k)]
    rng = np.random.default_rng(cfg.seed)
    while len(starts) < max(cfg.min_starts, k + 1):
        starts.append(rng.dirichlet(np.ones(k)))
    return starts


def _motzkin(enc: _Encoding, problem, side, objective, sense, x0, cfg: SolverConfig, stats: SolverStats):
    model = enc.model
    disjuncts = [(asr.coeffs, asr.bound) for asr in enc.c3]
    if not _nonempty(enc.c3[0]):
        # empty guard: every drift condition holds vacuously
        sol = _solve_system(enc.base, objective, sense, stats)
        if sol is None:
            raise NoCertificate(f"no linear {side} certificate")
        return _finalize(enc, [sol[n] for n in enc.template.coefficients], problem, side, "motzkin", None,
                         x0, cfg, stats)
    bil = motzkin_transform(enc.c3[0].lhs, model.program_vars, disjuncts, cfg.epsilon)
    body, norm = bil.constraints[:-1], bil.constraints[-1]
    best = None
    seen = set()
    for z0 in _starts(model.k, cfg):
        z = z0
        prev = None
        theta = None
        for _ in range(cfg.max_iters):
            zmap = {n: float(v) for n, v in zip(bil.z, z)}
            sys = _with(enc.base, constraints=[bc.fix_z(zmap) for bc in body], multipliers=bil.y)
            sol = _solve_system(sys, objective, sense, stats)
            if sol is None:
                break
            theta = {n: sol[n] for n in enc.template.unknowns}
            val = objective.evaluate(theta) if x0 is not None else 0.0
            if prev is not None and abs(val - prev) < cfg.conv_tol:
                break
            prev = val
            z_new = _best_z(bil, body, theta, stats)
            if z_new is None:
                break
            z = z_new
        if theta is None:
            continue
        a = tuple(round(theta[n], 9) for n in enc.template.coefficients)
        if a in seen:
            continue
        seen.add(a)
        cert = _finalize(enc, [theta[n] for n in enc.template.coefficients], problem, side, "motzkin", None,
                         x0, cfg, stats)
        if cert.verified and (best is None or _better(side, _score(cert), _score(best))):
            best = cert
    if best is None:
        raise NoCertificate(f"no linear {side} certificate found by alternating Motzkin search")
    best.solver_stats = {"iterations": stats.iterations, "lp_count": stats.lp_count}
    return best


def _best_z(bil, body, theta: dict, stats: SolverStats):
    """For fixed unknowns, multipliers ``(y, z)`` with ``sum z = 1`` maximising the slack."""
    names = list(bil.y) + list(bil.z) + ["__t"]
    index = {n: i for i, n in enumerate(names)}
    lp = LPProblem(len(names), sense="max", nonneg={index[n] for n in list(bil.y) + list(bil.z)})
    obj = [0.0] * len(names)
    obj[index["__t"]] = 1.0
    lp.objective = obj
    for bc in body:
        c = bc.fix_unknowns(theta)
        row = [0.0] * len(names)
        for n, coef in c.expr.terms:
            row[index[n]] = float(coef)
        if c.rel == "<=":
            row[index["__t"]] = 1.0
        lp.add(row, c.rel, -float(c.expr.const))
    row = [0.0] * len(names)
    for n in bil.z:
        row[index[n]] = 1.0
    lp.add(row, "==", 1.0)
    cap = [0.0] * len(names)
    cap[index["__t"]] = 1.0
    lp.add(cap, "<=", 1.0)
    res = lp_solve(lp)
    stats.record(res)
    if not res.ok:
        return None
    return np.array([res.x[index[n]] for n in bil.z])


# -- public entry points ----------------------------------------------------------------------------


def upper_bound(model: ModelIR, problem: str = "sup", *, x0=None, strategy: str = "fixed",
                cfg: SolverConfig | None = None) -> BoundCertificate:
    return synthesize(model, "upper", problem, strategy, x0, cfg)


def lower_bound_fixed(model: ModelIR, problem: str = "sup", *, x0=None,
                      cfg: SolverConfig | None = None) -> BoundCertificate:
    return synthesize(model, "lower", problem, "fixed", x0, cfg)


def lower_bound_motzkin(model: ModelIR, problem: str = "sup", *, x0=None,
                        cfg: SolverConfig | None = None) -> BoundCertificate:
    return synthesize(model, "lower", problem, "motzkin", x0, cfg)


def inf_bounds(model: ModelIR, *, x0=None, strategy: str = "fixed",
               cfg: SolverConfig | None = None) -> tuple[BoundCertificate, BoundCertificate]:
    """``(upper, lower)`` certificates for the infimum value."""
    return (synthesize(model, "upper", "inf", strategy, x0, cfg),
            synthesize(model, "lower", "inf", strategy, x0, cfg))

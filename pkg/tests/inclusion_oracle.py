"""Random inclusion instances and an independent oracle for them.

The oracle decides inclusion with HiGHS (scipy) and, for bounded left-hand
sides, cross-checks the optimum against brute-force vertex enumeration.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from sspbound.certgen import (
    InclusionAssertion, LinearConstraintSystem, check_nonempty, farkas_transform, motzkin_transform,
)
from sspbound.lp import lp_solve
from sspbound.semantics import HalfSpace, LinearExpr, Polyhedron

TOL = 1e-9


def random_polyhedron(rng: np.random.Generator, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    P = rng.integers(-3, 4, size=(m, n))
    q = rng.integers(-4, 8, size=m)
    return P, q


def to_polyhedron(P, q, names) -> Polyhedron:
    rows = []
    for row, rhs in zip(P, q):
        rows.append(HalfSpace(LinearExpr.build({v: int(c) for v, c in zip(names, row)}), Fraction(int(rhs))))
    return Polyhedron(tuple(rows))


def _vertices(P, q):
    n = P.shape[1]
    out = []
    for idx in itertools.combinations(range(P.shape[0]), n):
        A = P[list(idx)].astype(float)
        if abs(np.linalg.det(A)) < 1e-9:
            continue
        x = np.linalg.solve(A, q[list(idx)].astype(float))
        if np.all(P @ x <= q + 1e-9):
            out.append(x)
    return out


def _highs(c, A, b, bounds):
    # presolve can report an unbounded problem as infeasible, so it stays off
    return linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs", options={"presolve": False})


def oracle_empty(P, q) -> bool:
    return _highs(np.zeros(P.shape[1]), P, q, [(None, None)] * P.shape[1]).status == 2


def oracle_max(P, q, c):
    """(status, value) of max c.x over {P x <= q}; status empty | unbounded | optimal."""
    if oracle_empty(P, q):
        return "empty", None
    res = _highs(-np.asarray(c, float), P, q, [(None, None)] * P.shape[1])
    assert res.status in (0, 3), res.message
    if res.status == 3:
        return "unbounded", None
    value = -res.fun
    verts = _vertices(P, q)
    if verts:
        # a pointed polyhedron attains a bounded max at a vertex
        best = max(float(np.dot(c, v)) for v in verts)
        assert abs(best - value) < 1e-6, (best, value)
    return "optimal", value


def oracle_inclusion(P, q, c, d) -> bool:
    status, value = oracle_max(P, q, c)
    if status == "empty":
        return True
    if status == "unbounded":
        return False
    return value <= d + TOL


def oracle_union_covers(P, q, disjuncts) -> bool:
    """Does {P x <= q} lie inside the union of {c_l.x <= d_l}?"""
    n = P.shape[1]
    # max t: P x <= q, c_l.x - t >= d_l, t <= 1
    A = [list(row) + [0] for row in P]
    b = list(q)
    for c, d in disjuncts:
        A.append([-v for v in c] + [1])
        b.append(-d)
    if oracle_empty(P, q):
        return True
    res = _highs([0] * n + [-1], A, b, [(None, None)] * n + [(None, 1)])
    # t is free below, so a nonempty guard always gives an optimum
    assert res.status == 0, res.message
    return -res.fun <= TOL


def farkas_decides(P, q, c, d) -> bool:
    names = tuple(f"v{i}" for i in range(P.shape[1]))
    asr = InclusionAssertion(names, to_polyhedron(P, q, names),
                             tuple(LinearExpr.constant(int(v)) for v in c), LinearExpr.constant(int(d)), "C3")
    frag = farkas_transform(asr)
    if not frag.multipliers:
        return True  # vacuous
    sys = LinearConstraintSystem((), frag.multipliers, frag.constraints)
    lp, _ = sys.to_lp()
    return lp_solve(lp, exact=True).ok


def motzkin_decides(P, q, disjuncts) -> bool:
    names = tuple(f"v{i}" for i in range(P.shape[1]))
    guard = to_polyhedron(P, q, names)
    if not check_nonempty(guard, names):
        return True
    forms = [(tuple(LinearExpr.constant(int(v)) for v in c), LinearExpr.constant(int(d))) for c, d in disjuncts]
    bil = motzkin_transform(guard, names, forms)
    cons = [bc.fix_unknowns({}) for bc in bil.constraints]
    sys = LinearConstraintSystem((), list(bil.y) + list(bil.z), cons)
    lp, _ = sys.to_lp()
    return lp_solve(lp, exact=True).ok


def farkas_instance(rng):
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 7))
    P, q = random_polyhedron(rng, n, m)
    c = rng.integers(-3, 4, size=n)
    d = int(rng.integers(-4, 8))
    return P, q, c, d


def motzkin_instance(rng):
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 7))
    P, q = random_polyhedron(rng, n, m)
    k = int(rng.integers(1, 4))
    disjuncts = [(rng.integers(-3, 4, size=n), int(rng.integers(-4, 8))) for _ in range(k)]
    return P, q, disjuncts


def run_farkas(count: int, seed: int) -> tuple[int, int]:
    """(instances, disagreements)."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        P, q, c, d = farkas_instance(rng)
        bad += farkas_decides(P, q, c, d) != oracle_inclusion(P, q, c, d)
    return count, bad


def run_motzkin(count: int, seed: int) -> tuple[int, int]:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        P, q, disjuncts = motzkin_instance(rng)
        bad += motzkin_decides(P, q, disjuncts) != oracle_union_covers(P, q, disjuncts)
    return count, bad

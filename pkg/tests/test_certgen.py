from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inclusion_oracle import (
    farkas_decides, motzkin_decides, oracle_inclusion, oracle_union_covers, run_farkas, run_motzkin,
)
from sspbound.certgen import (
    TAG_ORDER, build_template, check_nonempty, encode_c2, encode_c3, encode_c4, farkas_transform,
    motzkin_transform,
)
from sspbound.semantics import HalfSpace, LinearExpr, Polyhedron


def _at(expr, **values):
    base = {"a[x]": 0, "b": 0, "K": 0, "Kp": 0, "M": 0}
    base.update({("a[x]" if k == "a" else k): Fraction(v) for k, v in values.items()})
    return expr.evaluate(base)


def test_template_unknowns(models):
    t = build_template(models["robot2d"])
    assert t.unknowns == ("a[x]", "a[y]", "b", "K", "Kp", "M")


def test_gambler_c3_reduces_to_constant_inequality(gambler):
    # known result: h(x) >= 0.4(1 + h(x+1)) + 0.6 h(x-1) reduces to 0 >= 0.4 - 0.2*lambda1; block 2 to 0 >= 0.3 - 0.4*lambda1
    t = build_template(gambler)
    c1, c2 = (encode_c3(gambler, t, l, ">=") for l in range(2))
    for asr in (c1, c2):
        assert all(c == LinearExpr() for c in asr.coeffs)
    # inclusion reads 0 <= bound, i.e. bound >= 0
    assert _at(c1.bound, a=2) == 0 and _at(c1.bound, a=1) == Fraction(-1, 5)
    assert _at(c2.bound, a=1) == Fraction(1, 10)


def test_gambler_c3_lower_direction(gambler):
    # known result: the disjuncts 0 <= 0.4 - 0.2*lambda1 or 0 <= 0.3 - 0.4*lambda1
    t = build_template(gambler)
    c1, c2 = (encode_c3(gambler, t, l, "<=") for l in range(2))
    assert _at(c1.bound, a=2) == 0 and _at(c1.bound, a=3) == Fraction(-1, 5)
    assert _at(c2.bound, a=Fraction(3, 4)) == 0


def test_gambler_c4_is_m_at_least_lambda(gambler):
    # known result: both (C4) conditions are equivalent to M >= lambda1
    t = build_template(gambler)
    for asr in encode_c4(gambler, t):
        assert all(c == LinearExpr() for c in asr.coeffs)
        # 0 <= M +- a[x]
        assert _at(asr.bound, a=2, M=2) >= 0
        assert _at(asr.bound, a=2, M=1.5) < 0 or _at(asr.bound, a=-2, M=1.5) < 0


def test_gambler_c2_exit_regions(gambler):
    # [DERIVED] leaving x >= 1 needs x in [1, 2) and a losing bet; winning never exits
    t = build_template(gambler)
    asr = encode_c2(gambler, t)
    live = [a for a in asr if check_nonempty(a.lhs.closure(), a.variables)]
    assert {a.point for a in live} == {1}
    for a in live:
        assert a.lhs.closure().contains({"x": 1}) and a.lhs.closure().contains({"x": 2})
        assert not a.lhs.closure().contains({"x": 3})


def test_assertions_sorted_by_tag_block_point(models):
    m = models["mini_roulette"]
    t = build_template(m)
    asr = encode_c2(m, t) + encode_c4(m, t)
    keys = [a.key for a in asr]
    assert keys == sorted(keys)
    assert TAG_ORDER["C2-lower"] < TAG_ORDER["C3"] < TAG_ORDER["C4-plus"]


def test_vacuous_assertion_dropped_with_audit(gambler):
    t = build_template(gambler)
    a = next(x for x in encode_c2(gambler, t) if x.point == 0)
    frag = farkas_transform(a)
    assert frag.constraints == [] and "vacuous" in frag.audit[0]


def test_farkas_example_interval():
    # [TRIVIAL] [1, 2] inside x <= 2 holds, inside x <= 1.5 does not
    assert farkas_decides(np.array([[1], [-1]]), np.array([2, -1]), np.array([1]), 2)
    assert not farkas_decides(np.array([[2], [-2]]), np.array([4, -2]), np.array([2]), 3)


def test_farkas_unbounded_lhs():
    # [TRIVIAL] a half-line is not inside any upper bound on its direction
    assert not farkas_decides(np.array([[-1]]), np.array([0]), np.array([1]), 100)


def test_motzkin_example_covering():
    # [TRIVIAL] x >= 0 is covered by x <= 1 or x >= 1, but not by x <= 1 or x >= 2
    P, q = np.array([[-1]]), np.array([0])
    assert motzkin_decides(P, q, [(np.array([1]), 1), (np.array([-1]), -1)])
    assert not motzkin_decides(P, q, [(np.array([1]), 1), (np.array([-1]), -2)])


def test_motzkin_gambler_disjunction_is_lambda_at_most_two(gambler):
    # known result: the C3' disjunction is equivalent to lambda1 <= 2
    t = build_template(gambler)
    c3 = [encode_c3(gambler, t, l, "<=") for l in range(2)]
    bil = motzkin_transform(c3[0].lhs, gambler.program_vars, [(a.coeffs, a.bound) for a in c3])
    from sspbound.certgen import LinearConstraintSystem
    from sspbound.lp import lp_solve
    for lam, expect in [(Fraction(2), True), (Fraction(1), True), (Fraction(5, 2), False)]:
        vals = {"a[x]": lam, "b": 0, "K": 0, "Kp": 0, "M": 0}
        cons = [bc.fix_unknowns(vals) for bc in bil.constraints]
        lp, _ = LinearConstraintSystem((), list(bil.y) + list(bil.z), cons).to_lp()
        assert lp_solve(lp, exact=True).ok is expect


def test_check_nonempty_strictness_relaxed():
    p = Polyhedron((HalfSpace(LinearExpr.var("x"), Fraction(0), strict=True),
                    HalfSpace(LinearExpr.var("x", -1), Fraction(0))))
    assert check_nonempty(p.closure())


rows = st.integers(-3, 3)


@st.composite
def inclusion(draw):
    n = draw(st.integers(1, 3))
    m = draw(st.integers(1, 5))
    P = np.array([[draw(rows) for _ in range(n)] for _ in range(m)])
    q = np.array([draw(st.integers(-3, 6)) for _ in range(m)])
    c = np.array([draw(rows) for _ in range(n)])
    return P, q, c, draw(st.integers(-3, 6))


@settings(max_examples=150, deadline=None)
@given(inclusion())
def test_farkas_agrees_with_oracle(inst):
    P, q, c, d = inst
    assert farkas_decides(P, q, c, d) == oracle_inclusion(P, q, c, d)


@settings(max_examples=150, deadline=None)
@given(inclusion(), st.lists(st.tuples(st.lists(rows, min_size=3, max_size=3), st.integers(-3, 6)),
                             min_size=1, max_size=3))
def test_motzkin_agrees_with_oracle(inst, raw):
    P, q, _, _ = inst
    n = P.shape[1]
    disjuncts = [(np.array(c[:n]), d) for c, d in raw]
    assert motzkin_decides(P, q, disjuncts) == oracle_union_covers(P, q, disjuncts)


def test_seeded_soundness_batch():
    assert run_farkas(100, seed=11)[1] == 0
    assert run_motzkin(100, seed=12)[1] == 0

"""Rewrite ``if prob(p) {..} else {..}`` into plain affine assignments.

A top-level probabilistic-if (with any nesting inside it) is flattened into
its leaves: the paths through the branches, each with a probability, an
update and a reward.  One leaf is the base; the others get fresh indicator
variables ``s_i`` sampled jointly one-hot, and every updated variable becomes
``v := base(v) + sum_i (leaf_i(v) - base(v)) * s_i``.  For a single
``if prob(p)`` that is one indicator with ``P(s=1) = p``.  This keeps the
pathwise behaviour of the original game, not just its expectation.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

from ..semantics import LinearExpr
from .ast import Assign, DiscreteSpec, DistDecl, ProbIf, Program, Reward, VarDecl
from .lexer import Diagnostic, SMDPError


class DesugarError(SMDPError):
    pass


Leaf = tuple[Fraction, dict, LinearExpr]


def _leaves(stmts, env: dict, reward: LinearExpr, prob: Fraction) -> list[Leaf]:
    cur: list[Leaf] = [(prob, env, reward)]
    for s in stmts:
        if isinstance(s, Assign):
            cur = [(p, {**e, s.target: s.expr.substitute(e)}, r) for p, e, r in cur]
        elif isinstance(s, Reward):
            cur = [(p, e, r + s.expr.substitute(e)) for p, e, r in cur]
        else:
            nxt: list[Leaf] = []
            for p, e, r in cur:
                nxt += _leaves(s.then, e, r, p * s.prob)
                nxt += _leaves(s.orelse, e, r, p * (1 - s.prob))
            cur = nxt
    return cur


def _ordered(updates: dict[str, LinearExpr], loc) -> list[Assign]:
    # emit a simultaneous update as sequential assignments: anything that
    # reads v must run before v is overwritten
    pending = dict(updates)
    out = []
    while pending:
        ready = [
            v for v in pending
            if not any(v in e.variables() for w, e in pending.items() if w != v)
        ]
        if not ready:
            raise DesugarError([Diagnostic(
                "error", "probabilistic branch swaps variables cyclically; not expressible as succinct MDP", loc)])
        v = sorted(ready)[0]
        out.append(Assign(v, pending.pop(v), loc))
    return out


class _Desugarer:
    def __init__(self, program: Program):
        self.taken = set()
        for d in program.decls:
            self.taken.update([d.name] if isinstance(d, VarDecl) else d.names)
        self.counter = itertools.count(1)
        self.new_decls: list[DistDecl] = []

    def fresh(self) -> str:
        while True:
            name = f"_s{next(self.counter)}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def stmts(self, stmts) -> list:
        out = []
        for s in stmts:
            if isinstance(s, ProbIf):
                out.extend(self.prob_if(s))
            else:
                out.append(s)
        return out

    def prob_if(self, node: ProbIf) -> list:
        leaves = [leaf for leaf in _leaves((node,), {}, LinearExpr(), Fraction(1)) if leaf[0] > 0]
        *others, (_, base_env, base_rew) = leaves
        names = sorted({v for _, e, _ in leaves for v in e})
        indicators = [self.fresh() for _ in others]
        updates: dict[str, LinearExpr] = {}
        for v in names:
            expr = base_env.get(v, LinearExpr.var(v))
            for s, (_, env, _) in zip(indicators, others):
                diff = env.get(v, LinearExpr.var(v)) - base_env.get(v, LinearExpr.var(v))
                if not diff.is_constant():
                    raise DesugarError([Diagnostic(
                        "error",
                        f"branches update '{v}' by non-constant difference {diff}; not expressible as succinct MDP",
                        node.loc,
                    )])
                expr = expr + LinearExpr.var(s, diff.const)
            if expr != LinearExpr.var(v):
                updates[v] = expr
        reward = base_rew
        for s, (_, _, rew) in zip(indicators, others):
            rdiff = rew - base_rew
            if not rdiff.is_constant():
                raise DesugarError([Diagnostic(
                    "error", f"branch rewards differ by non-constant {rdiff}; not expressible as succinct MDP",
                    node.loc)])
            reward = reward + LinearExpr.var(s, rdiff.const)
        if indicators:
            outcomes = [(tuple(Fraction(int(i == j)) for j in range(len(others))), p)
                        for i, (p, _, _) in enumerate(others)]
            outcomes.append((tuple(Fraction(0) for _ in others), leaves[-1][0]))
            self.new_decls.append(DistDecl(tuple(indicators), DiscreteSpec(tuple(outcomes)), node.loc))
        out: list = _ordered(updates, node.loc)
        if reward != LinearExpr.constant(0):
            out.append(Reward(reward, node.loc))
        return out


def desugar_prob_if(program: Program) -> Program:
    """Return an equivalent program without probabilistic-if nodes."""
    d = _Desugarer(program)
    blocks = tuple(tuple(d.stmts(b)) for b in program.blocks)
    return Program(tuple(program.decls) + tuple(d.new_decls), program.guard, blocks)

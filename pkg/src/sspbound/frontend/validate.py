from __future__ import annotations

from fractions import Fraction

from ..semantics import Block, Distribution, HalfSpace, LinearExpr, ModelIR, compose_block
from .ast import Assign, DiscreteSpec, DistDecl, ProbIf, Program, Reward, VarDecl
from .desugar import desugar_prob_if
from .lexer import Diagnostic, SMDPError, tokenize
from .parser import parse

PROB_TOL = Fraction(1, 10**9)


class ValidationError(SMDPError):
    pass


def validate(program: Program) -> ModelIR:
    """Check a desugared program and lower it to :class:`ModelIR`.

    All problems found are reported together in one :class:`ValidationError`.
    """
    errors: list[Diagnostic] = []
    warnings: list[str] = []
    program_vars: list[str] = []
    sampling_vars: list[str] = []
    inits: dict[str, Fraction] = {}
    dists: list[Distribution] = []
    declared: set[str] = set()

    def err(msg, loc=None):
        errors.append(Diagnostic("error", msg, loc))

    for d in program.decls:
        names = [d.name] if isinstance(d, VarDecl) else list(d.names)
        for name in names:
            if name in declared:
                err(f"'{name}' declared more than once", d.loc)
            declared.add(name)
        if isinstance(d, VarDecl):
            program_vars.append(d.name)
            if d.init is not None:
                inits[d.name] = d.init
            continue
        sampling_vars.extend(d.names)
        if len(set(d.names)) != len(d.names):
            continue
        if isinstance(d.spec, DiscreteSpec):
            total = sum((p for _, p in d.spec.outcomes), Fraction(0))
            bad_arity = [pt for pt, _ in d.spec.outcomes if len(pt) != len(d.names)]
            if bad_arity:
                err(f"outcome {bad_arity[0]} does not match the {len(d.names)} variable(s) {', '.join(d.names)}", d.loc)
            elif any(p <= 0 for _, p in d.spec.outcomes):
                err(f"distribution of {', '.join(d.names)} has a non-positive probability", d.loc)
            elif abs(total - 1) > PROB_TOL:
                err(f"probabilities sum to {float(total):g}, expected 1", d.loc)
            else:
                outcomes = [(pt, p / total) for pt, p in d.spec.outcomes]
                dists.append(Distribution.discrete(tuple(d.names), outcomes))
        else:
            if len(d.names) != 1:
                err("uniform distributions are scalar", d.loc)
            elif not d.spec.lo < d.spec.hi:
                err(f"uniform({d.spec.lo}, {d.spec.hi}) needs lo < hi", d.loc)
            else:
                dists.append(Distribution.uniform(d.names[0], d.spec.lo, d.spec.hi))

    pset, sset = set(program_vars), set(sampling_vars)
    if not program_vars:
        err("a model needs at least one program variable")

    g = program.guard
    gvars = g.left.variables() | g.right.variables()
    for name in sorted(gvars):
        if name in sset:
            err(f"guard over program variables only; '{name}' is a sampling variable", g.loc)
        elif name not in pset:
            err(f"undeclared identifier '{name}' in guard", g.loc)
    guard = HalfSpace.from_comparison(g.left, g.op, g.right)
    if not guard.lhs.terms:
        err("guard does not mention any program variable", g.loc)

    blocks: list[Block] = []
    for bi, stmts in enumerate(program.blocks, start=1):
        assigns: list[tuple[str, LinearExpr]] = []
        reward = LinearExpr.constant(0)
        for s in stmts:
            if isinstance(s, ProbIf):
                err("probabilistic if must be desugared before validation", s.loc)
                continue
            for name in sorted(s.expr.variables()):
                if name not in declared:
                    err(f"undeclared identifier '{name}' in block {bi}", s.loc)
            if isinstance(s, Assign):
                if s.target in sset:
                    err(f"cannot assign to sampling variable '{s.target}'", s.loc)
                elif s.target not in pset:
                    err(f"undeclared identifier '{s.target}' in block {bi}", s.loc)
                else:
                    assigns.append((s.target, s.expr))
            elif isinstance(s, Reward):
                used = s.expr.variables() & pset
                if used:
                    err(f"reward may not mention program variable(s) {', '.join(sorted(used))}", s.loc)
                reward = reward + s.expr
        if not errors:
            blocks.append(Block(compose_block(assigns, program_vars, sampling_vars), reward))

    if not program.blocks:
        err("loop needs at least one block")
    if errors:
        raise ValidationError(errors)

    init = None
    if len(inits) == len(program_vars):
        init = tuple(inits[v] for v in program_vars)
    elif inits:
        warnings.append("only some program variables have initial values; no initial valuation recorded")
    return ModelIR(tuple(program_vars), tuple(sampling_vars), guard, tuple(blocks), tuple(dists), init,
                   tuple(warnings))


def load_model(source: str) -> ModelIR:
    """Source text to validated model: tokenize, parse, desugar, validate."""
    return validate(desugar_prob_if(parse(tokenize(source))))


def load_model_file(path) -> ModelIR:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())

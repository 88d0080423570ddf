"""Syntax tree for ``.smdp`` programs, plus a pretty-printer that re-parses."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from ..semantics import LinearExpr, format_number
from .lexer import Location


@dataclass(frozen=True)
class DiscreteSpec:
    outcomes: tuple[tuple[tuple[Fraction, ...], Fraction], ...]


@dataclass(frozen=True)
class UniformSpec:
    lo: Fraction
    hi: Fraction


@dataclass(frozen=True)
class VarDecl:
    name: str
    init: Fraction | None = None
    loc: Location | None = field(default=None, compare=False)


@dataclass(frozen=True)
class DistDecl:
    names: tuple[str, ...]
    spec: Union[DiscreteSpec, UniformSpec]
    loc: Location | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Guard:
    left: LinearExpr
    op: str
    right: LinearExpr
    loc: Location | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Assign:
    target: str
    expr: LinearExpr
    loc: Location | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Reward:
    expr: LinearExpr
    loc: Location | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ProbIf:
    prob: Fraction
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...]
    loc: Location | None = field(default=None, compare=False)


Stmt = Union[Assign, Reward, ProbIf]


@dataclass(frozen=True)
class Program:
    decls: tuple[Union[VarDecl, DistDecl], ...]
    guard: Guard
    blocks: tuple[tuple[Stmt, ...], ...]


def _num(v: Fraction) -> str:
    # fractions stay as p/q so re-parsing is exact
    text = format_number(v)
    return text


def _expr(e: LinearExpr) -> str:
    parts: list[str] = []
    for name, c in e.terms:
        mag = _num(abs(c))
        body = name if mag == "1" else f"{mag} * {name}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    if e.const != 0 or not parts:
        mag = _num(abs(e.const))
        if not parts:
            parts.append(mag if e.const >= 0 else f"-{mag}")
        else:
            parts.append(("+ " if e.const > 0 else "- ") + mag)
    return " ".join(parts)


def _stmts(stmts, indent: str) -> list[str]:
    lines = []
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{indent}{s.target} := {_expr(s.expr)};")
        elif isinstance(s, Reward):
            lines.append(f"{indent}reward {_expr(s.expr)};")
        else:
            lines.append(f"{indent}if prob({_num(s.prob)}) {{")
            lines.extend(_stmts(s.then, indent + "  "))
            lines.append(f"{indent}}} else {{")
            lines.extend(_stmts(s.orelse, indent + "  "))
            lines.append(f"{indent}}}")
    return lines


def pretty(program: Program) -> str:
    lines = []
    for d in program.decls:
        if isinstance(d, VarDecl):
            lines.append(f"var {d.name}" + ("" if d.init is None else f" = {_num(d.init)}") + ";")
        elif isinstance(d.spec, UniformSpec):
            lines.append(f"dist {d.names[0]} ~ uniform({_num(d.spec.lo)}, {_num(d.spec.hi)});")
        else:
            entries = []
            for pt, p in d.spec.outcomes:
                key = _num(pt[0]) if len(pt) == 1 else "(" + ", ".join(_num(v) for v in pt) + ")"
                entries.append(f"{key}: {_num(p)}")
            lines.append(f"dist {', '.join(d.names)} ~ discrete {{ {', '.join(entries)} }};")
    g = program.guard
    lines.append(f"while {_expr(g.left)} {g.op} {_expr(g.right)} do")
    for i, blk in enumerate(program.blocks):
        lines.append("{" if i == 0 else "[] {")
        lines.extend(_stmts(blk, "  "))
        lines.append("}")
    lines.append("od")
    return "\n".join(lines) + "\n"

"""Recursive-descent parser for ``.smdp`` sources."""
from __future__ import annotations

from fractions import Fraction

from ..semantics import LinearExpr
from .ast import Assign, DiscreteSpec, DistDecl, Guard, ProbIf, Program, Reward, UniformSpec, VarDecl
from .lexer import Diagnostic, SMDPError, Token, tokenize

COMPARISONS = (">=", ">", "<=", "<")


class ParseError(SMDPError):
    pass


class _Parser:
    def __init__(self, tokens: list[Token]):
        if not tokens or tokens[-1].kind != "eof":
            last = tokens[-1] if tokens else None
            tokens = list(tokens) + [Token("eof", "", last.line if last else 1, last.col if last else 1)]
        self.toks = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.pos]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.cur
        return ParseError([Diagnostic("error", message, tok.loc)])

    def at(self, lexeme: str) -> bool:
        return self.cur.kind in ("symbol", "keyword") and self.cur.lexeme == lexeme

    def accept(self, lexeme: str) -> Token | None:
        if self.at(lexeme):
            tok = self.cur
            self.pos += 1
            return tok
        return None

    def expect(self, lexeme: str, context: str = "") -> Token:
        tok = self.accept(lexeme)
        if tok is None:
            found = self.cur.lexeme or "end of input"
            where = f" {context}" if context else ""
            raise self.error(f"expected '{lexeme}'{where}, found '{found}'")
        return tok

    def ident(self) -> Token:
        if self.cur.kind != "ident":
            found = self.cur.lexeme or "end of input"
            raise self.error(f"expected identifier, found '{found}'")
        tok = self.cur
        self.pos += 1
        return tok

    # numbers: [+-] NUM [/ NUM]
    def number(self) -> Fraction:
        sign = 1
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
        if self.cur.kind != "number":
            raise self.error(f"expected number, found '{self.cur.lexeme or 'end of input'}'")
        value = Fraction(self.cur.lexeme)
        self.pos += 1
        if self.accept("/"):
            if self.cur.kind != "number":
                raise self.error("expected denominator after '/'")
            den = Fraction(self.cur.lexeme)
            if den == 0:
                raise self.error("division by zero")
            self.pos += 1
            value = value / den
        return sign * value

    def program(self) -> Program:
        decls = []
        while self.at("var") or self.at("dist"):
            decls.append(self.decl())
        self.expect("while", "to start the loop")
        guard = self.guard()
        self.expect("do", "after the loop guard")
        if self.at("od"):
            raise self.error("nondet-block-list requires at least one block")
        wrapped = False
        # the figure-style form wraps the whole block list in braces
        if self.at("{") and self._outer_braces():
            self.expect("{")
            wrapped = True
        blocks = [self.block(top=True)]
        while self.accept("[]"):
            blocks.append(self.block(top=True))
        if wrapped:
            self.expect("}", "to close the block list")
        self.expect("od", "to close the loop")
        if self.cur.kind != "eof":
            if self.at("while"):
                raise self.error("only a single while loop is allowed")
            raise self.error(f"unexpected '{self.cur.lexeme}' after 'od'")
        return Program(tuple(decls), guard, tuple(blocks))

    def _outer_braces(self) -> bool:
        # '{' ... '}' followed by 'od' with a top-level '[]' inside means a wrapped list
        depth, i = 0, self.pos
        saw_choice = False
        while self.toks[i].kind != "eof":
            lex = self.toks[i].lexeme if self.toks[i].kind == "symbol" else None
            if lex == "{":
                depth += 1
            elif lex == "}":
                depth -= 1
                if depth == 0:
                    nxt = self.toks[i + 1]
                    return saw_choice and nxt.kind == "keyword" and nxt.lexeme == "od"
            elif lex == "[]" and depth == 1:
                saw_choice = True
            i += 1
        return False

    def decl(self):
        start = self.cur
        if self.accept("var"):
            name = self.ident().lexeme
            init = self.number() if self.accept("=") else None
            self.expect(";", "after declaration")
            return VarDecl(name, init, start.loc)
        self.expect("dist")
        names = [self.ident().lexeme]
        while self.accept(","):
            names.append(self.ident().lexeme)
        self.expect("~", "in distribution declaration")
        if self.accept("uniform"):
            self.expect("(")
            lo = self.number()
            self.expect(",")
            hi = self.number()
            self.expect(")")
            spec = UniformSpec(lo, hi)
        elif self.accept("discrete"):
            self.expect("{")
            outcomes = [self.outcome()]
            while self.accept(","):
                outcomes.append(self.outcome())
            self.expect("}", "to close the discrete distribution")
            spec = DiscreteSpec(tuple(outcomes))
        else:
            raise self.error(f"expected 'discrete' or 'uniform', found '{self.cur.lexeme}'")
        self.expect(";", "after declaration")
        return DistDecl(tuple(names), spec, start.loc)

    def outcome(self):
        if self.accept("("):
            pt = [self.number()]
            while self.accept(","):
                pt.append(self.number())
            self.expect(")")
        else:
            pt = [self.number()]
        self.expect(":", "between outcome and probability")
        return tuple(pt), self.number()

    def guard(self) -> Guard:
        start = self.cur
        left = self.linexpr()
        if not (self.cur.kind == "symbol" and self.cur.lexeme in COMPARISONS):
            raise self.error(f"expected comparison operator, found '{self.cur.lexeme}'")
        op = self.cur.lexeme
        self.pos += 1
        right = self.linexpr()
        return Guard(left, op, right, start.loc)

    def block(self, top: bool = False) -> tuple:
        if self.accept("{"):
            stmts = self.stmts(closers=("}",))
            self.expect("}", "to close the block")
            return tuple(stmts)
        if not top:
            raise self.error(f"expected '{{', found '{self.cur.lexeme}'")
        stmts = self.stmts(closers=("[]", "od", "}"))
        if not stmts:
            raise self.error("empty block")
        return tuple(stmts)

    def stmts(self, closers) -> list:
        out = []
        while not any(self.at(c) for c in closers) and self.cur.kind != "eof":
            out.append(self.stmt())
            if not self.accept(";") and not any(self.at(c) for c in closers):
                if not isinstance(out[-1], ProbIf):
                    raise self.error(f"expected ';', found '{self.cur.lexeme}'")
        return out

    def stmt(self):
        start = self.cur
        if self.at("while"):
            raise self.error("nested while loops are not allowed")
        if self.accept("reward"):
            self.accept("=")
            return Reward(self.linexpr(), start.loc)
        if self.accept("if"):
            self.expect("prob", "after 'if' (only probabilistic branching is supported)")
            self.expect("(")
            p = self.number()
            self.expect(")")
            then = self.block()
            self.expect("else", "after probabilistic branch")
            orelse = self.block()
            if not 0 <= p <= 1:
                raise ParseError([Diagnostic("error", f"branch probability {p} outside [0, 1]", start.loc)])
            return ProbIf(p, then, orelse, start.loc)
        target = self.ident()
        self.expect(":=", "in assignment")
        return Assign(target.lexeme, self.linexpr(), start.loc)

    # linear expressions: products need a constant side, divisors must be constant
    def linexpr(self) -> LinearExpr:
        e = self.term()
        while self.cur.kind == "symbol" and self.cur.lexeme in "+-":
            op = self.cur.lexeme
            self.pos += 1
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> LinearExpr:
        e = self.unary()
        while self.cur.kind == "symbol" and self.cur.lexeme in ("*", "/"):
            tok = self.cur
            self.pos += 1
            rhs = self.unary()
            if tok.lexeme == "*":
                if not (e.is_constant() or rhs.is_constant()):
                    raise self.error("non-linear product", tok)
                e = e * rhs
            else:
                if not rhs.is_constant():
                    raise self.error("division by a non-constant expression", tok)
                if rhs.const == 0:
                    raise self.error("division by zero", tok)
                e = e * (1 / rhs.const)
        return e

    def unary(self) -> LinearExpr:
        if self.accept("-"):
            return -self.unary()
        if self.accept("+"):
            return self.unary()
        tok = self.cur
        if tok.kind == "number":
            self.pos += 1
            return LinearExpr.constant(Fraction(tok.lexeme))
        if tok.kind == "ident":
            self.pos += 1
            return LinearExpr.var(tok.lexeme)
        if self.accept("("):
            e = self.linexpr()
            self.expect(")")
            return e
        raise self.error(f"expected expression, found '{tok.lexeme or 'end of input'}'")


def parse(tokens: list[Token]) -> Program:
    """Build a :class:`Program` from a token list; raises :class:`ParseError`."""
    return _Parser(tokens).program()


def parse_source(source: str) -> Program:
    return parse(tokenize(source))

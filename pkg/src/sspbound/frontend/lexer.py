from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset(
    {"while", "do", "od", "var", "dist", "discrete", "uniform", "reward", "if", "prob", "else"}
)

# longest first so that ":=" wins over ":" and "[]" over "["
SYMBOLS = (":=", ">=", "<=", "[]", "{", "}", "(", ")", ";", ",", ":", "~", "+", "-", "*", "/", ">", "<", "=")
ALIASES = {"≥": ">=", "≤": "<=", "□": "[]", "−": "-"}

_NUMBER = re.compile(r"\d+(?:\.\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Location:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | ident | number | symbol | eof
    lexeme: str
    line: int
    col: int

    @property
    def loc(self) -> Location:
        return Location(self.line, self.col)

    def __repr__(self) -> str:
        short = {"keyword": "kw", "ident": "ident", "number": "num", "symbol": "sym", "eof": "eof"}[self.kind]
        return f"[{short} {self.lexeme}]"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    message: str
    location: Location | None = None

    def __str__(self) -> str:
        where = f"{self.location}: " if self.location else ""
        return f"{where}{self.severity}: {self.message}"


class SMDPError(Exception):
    """Raised when source text cannot be turned into a model."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class LexError(SMDPError):
    pass


def tokenize(source: str) -> list[Token]:
    """Split ``.smdp`` source into tokens; comments are dropped.

    The returned list always ends with an ``eof`` token.
    """
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def advance(text: str) -> None:
        nonlocal i, line, col
        for ch in text:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += len(text)

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance(ch)
            continue
        if source.startswith("//", i):
            end = source.find("\n", i)
            advance(source[i:] if end < 0 else source[i:end])
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                raise LexError([Diagnostic("error", "unterminated block comment", Location(line, col))])
            advance(source[i : end + 2])
            continue
        m = _NUMBER.match(source, i)
        if m:
            tokens.append(Token("number", m.group(), line, col))
            advance(m.group())
            continue
        m = _IDENT.match(source, i)
        if m:
            word = m.group()
            tokens.append(Token("keyword" if word in KEYWORDS else "ident", word, line, col))
            advance(word)
            continue
        if ch in ALIASES:
            tokens.append(Token("symbol", ALIASES[ch], line, col))
            advance(ch)
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                tokens.append(Token("symbol", sym, line, col))
                advance(sym)
                break
        else:
            raise LexError([Diagnostic("error", f"unexpected character {ch!r}", Location(line, col))])
    tokens.append(Token("eof", "", line, col))
    return tokens

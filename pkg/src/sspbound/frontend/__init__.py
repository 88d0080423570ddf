"""Reading ``.smdp`` model files."""
from .ast import Assign, DiscreteSpec, DistDecl, Guard, ProbIf, Program, Reward, UniformSpec, VarDecl, pretty
from .desugar import DesugarError, desugar_prob_if
from .lexer import Diagnostic, LexError, Location, SMDPError, Token, tokenize
from .parser import ParseError, parse, parse_source
from .validate import ValidationError, load_model, load_model_file, validate

__all__ = [
    "Assign", "DesugarError", "Diagnostic", "DiscreteSpec", "DistDecl", "Guard", "LexError", "Location",
    "ParseError", "ProbIf", "Program", "Reward", "SMDPError", "Token", "UniformSpec", "ValidationError",
    "VarDecl", "desugar_prob_if", "load_model", "load_model_file", "parse", "parse_source", "pretty",
    "tokenize", "validate",
]

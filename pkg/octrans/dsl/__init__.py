"""Optimal-control DSL: tokenizer, parser and canonical printer."""

from .ast import (
    Binary,
    CompRef,
    Const,
    ConstraintDecl,
    ConstraintKind,
    CostDecl,
    DeclKind,
    Expr,
    Instant,
    OcpProblem,
    ParamRef,
    Sense,
    TimeSpec,
    TimeSym,
    Unary,
    VarDecl,
)
from .lexer import Token, TokenType, tokenize
from .parser import parse_ocp
from .printer import pretty_print

__all__ = [
    # Entry points
    "tokenize",
    "parse_ocp",
    "pretty_print",
    # Tokens
    "Token",
    "TokenType",
    # Problem structure
    "OcpProblem",
    "TimeSpec",
    "VarDecl",
    "ConstraintDecl",
    "CostDecl",
    "ConstraintKind",
    "DeclKind",
    "Instant",
    "Sense",
    # Expressions
    "Expr",
    "Const",
    "TimeSym",
    "ParamRef",
    "CompRef",
    "Unary",
    "Binary",
]

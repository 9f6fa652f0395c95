"""Tokenizer for the optimal-control DSL."""

import re
from dataclasses import dataclass
from enum import Enum
from typing import List

from octrans.core.exceptions import LexicalError


class TokenType(str, Enum):
    """Token types of the DSL."""

    IDENT = "ident"
    KEYWORD = "kw"
    INT = "int"
    FLOAT = "float"
    OP = "op"
    LPAREN = "lparen"
    RPAREN = "rparen"
    LBRACKET = "lbracket"
    RBRACKET = "rbracket"
    COMMA = "comma"
    NEWLINE = "newline"


KEYWORDS = frozenset(
    {
        "in",
        "state",
        "control",
        "variable",
        "time",
        "derivative",
        "integral",
        "min",
        "max",
    }
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<float>(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=>|==|<=|>=|=|\+|-|\*|/|\^)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<lbracket>\[)
  | (?P<rbracket>\])
  | (?P<comma>,)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    type: TokenType
    text: str
    line: int
    column: int

    def is_op(self, *ops: str) -> bool:
        return self.type == TokenType.OP and self.text in ops

    def is_keyword(self, *words: str) -> bool:
        return self.type == TokenType.KEYWORD and self.text in words

    def __str__(self) -> str:
        if self.type in _PUNCTUATION:
            return f"[{self.type.value}]"
        return f"[{self.type.value} {self.text}]"


_PUNCTUATION = frozenset(
    {
        TokenType.LPAREN,
        TokenType.RPAREN,
        TokenType.LBRACKET,
        TokenType.RBRACKET,
        TokenType.COMMA,
        TokenType.NEWLINE,
    }
)


def tokenize(source: str) -> List[Token]:
    """Split ``source`` into tokens carrying 1-based line and column.

    Comments (``#`` to end of line) and blanks are dropped; line breaks are
    kept as NEWLINE tokens because the grammar is line oriented.
    """
    tokens: List[Token] = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise LexicalError(
                f"illegal character {source[pos]!r}",
                line=line,
                column=pos - line_start + 1,
            )
        kind = match.lastgroup
        text = match.group()
        column = pos - line_start + 1
        if kind == "newline":
            tokens.append(Token(TokenType.NEWLINE, "\n", line, column))
            line += 1
            line_start = match.end()
        elif kind == "ident":
            token_type = TokenType.KEYWORD if text in KEYWORDS else TokenType.IDENT
            tokens.append(Token(token_type, text, line, column))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(TokenType(kind), text, line, column))
        pos = match.end()
    return tokens

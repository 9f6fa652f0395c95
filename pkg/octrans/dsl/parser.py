"""Parser and semantic analysis for the optimal-control DSL.

The grammar is line oriented (see ``docs/grammar.md``). A logical line
continues past a line break while a parenthesis or bracket is open or when
the line ends with an operator or a comma.
"""

import math
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union, cast

from octrans.core.exceptions import ParseError, SemanticError
from octrans.core.logging import get_logger

from .ast import (
    UNARY_FUNCTIONS,
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
    fold_binary,
    fold_unary,
    negate,
)
from .lexer import Token, TokenType, tokenize

logger = get_logger(__name__)

_INDEXED_NAME = re.compile(r"^([A-Za-z_][A-Za-z_]*?)(\d+)$")
_RESERVED = frozenset(UNARY_FUNCTIONS) | {"pi", "Inf", "inf", "zeros", "ones", "R"}
_COMPARISONS = ("==", "<=", ">=")
_CONTINUATION_OPS = ("+", "-", "*", "/", "^", "=", "==", "<=", ">=", "=>")


@dataclass(frozen=True)
class _Vector:
    """Constant bound vector: ``[a, b]``, ``zeros(n)`` or ``ones(n)``."""

    values: Tuple[float, ...]


@dataclass(frozen=True)
class _WholeRef:
    """Reference to every component of a declaration (vector constraint)."""

    decl: VarDecl
    at: Optional[Instant]


@dataclass(frozen=True)
class _Integral:
    """``integral(e)`` while parsing a cost line."""

    arg: Expr


_Operand = Union[Expr, _Vector, _WholeRef, _Integral]


@dataclass
class _Line:
    tokens: List[Token]
    text: str

    @property
    def number(self) -> int:
        return self.tokens[0].line


def _split_lines(tokens: Sequence[Token], source_lines: Sequence[str]) -> List[_Line]:
    lines: List[_Line] = []
    current: List[Token] = []
    depth = 0
    for token in tokens:
        if token.type in (TokenType.LPAREN, TokenType.LBRACKET):
            depth += 1
        elif token.type in (TokenType.RPAREN, TokenType.RBRACKET):
            depth = max(0, depth - 1)
        if token.type != TokenType.NEWLINE:
            current.append(token)
            continue
        if not current:
            continue
        last = current[-1]
        if depth > 0 or last.type == TokenType.COMMA or last.is_op(*_CONTINUATION_OPS):
            continue
        lines.append(_make_line(current, source_lines))
        current = []
        depth = 0
    if current:
        lines.append(_make_line(current, source_lines))
    return lines


def _make_line(tokens: List[Token], source_lines: Sequence[str]) -> _Line:
    first, last = tokens[0].line, tokens[-1].line
    text = " ".join(s.strip() for s in source_lines[first - 1 : last])
    return _Line(tokens=tokens, text=text)


class _Cursor:
    """Token cursor over one logical line."""

    def __init__(self, line: _Line):
        self.line = line
        self.tokens = line.tokens
        self.pos = 0

    def peek(self, offset: int = 0) -> Optional[Token]:
        index = self.pos + offset
        return self.tokens[index] if index < len(self.tokens) else None

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def advance(self) -> Token:
        token = self.peek()
        if token is None:
            raise ParseError(
                "unexpected end of line", line=self.tokens[-1].line, source_text=None
            )
        self.pos += 1
        return token

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.peek() or self.tokens[-1]
        return ParseError(message, line=token.line, column=token.column)

    def expect(self, token_type: TokenType, text: Optional[str] = None) -> Token:
        token = self.peek()
        if token is None or token.type != token_type or (
            text is not None and token.text != text
        ):
            wanted = text or token_type.value
            found = "end of line" if token is None else repr(token.text)
            raise self.error(f"expected {wanted!r}, found {found}", token)
        self.pos += 1
        return token

    def check(self, token_type: TokenType) -> bool:
        token = self.peek()
        return token is not None and token.type == token_type

    def check_op(self, *ops: str) -> bool:
        token = self.peek()
        return token is not None and token.is_op(*ops)

    def expect_end(self) -> None:
        token = self.peek()
        if token is not None:
            raise self.error(f"unexpected {token.text!r}", token)


class OcpParser:
    """Parse DSL source into a validated :class:`OcpProblem`."""

    def __init__(self, source: str, name: str = "ocp"):
        self.source = source
        self.name = name
        self.constants: Dict[str, float] = {}
        self.aliases: Dict[str, Expr] = {}
        self.decls: List[VarDecl] = []
        self.components: Dict[str, Tuple[VarDecl, int]] = {}
        self.time: Optional[TimeSpec] = None
        self.dynamics: Dict[int, ConstraintDecl] = {}
        self.constraints: List[ConstraintDecl] = []
        self.cost: Optional[CostDecl] = None
        self._allow_integral = False

    # ------------------------------------------------------------------
    # Entry point
    # ------------------------------------------------------------------

    def parse(self) -> OcpProblem:
        source_lines = self.source.split("\n")
        lines = _split_lines(tokenize(self.source), source_lines)
        for line in lines:
            self._parse_line(line)
        return self._finish(last_line=max(1, len(source_lines)))

    def _parse_line(self, line: _Line) -> None:
        toks = line.tokens
        first = toks[0]
        second = toks[1] if len(toks) > 1 else None
        has_in = any(t.is_keyword("in") for t in toks)
        if first.type == TokenType.IDENT and second is not None:
            if second.is_keyword("in"):
                self._declaration(_Cursor(line))
                return
            if second.is_op("=") and has_in:
                self._declaration(_Cursor(line))
                return
            if second.is_op("="):
                self._definition(_Cursor(line))
                return
        if first.is_keyword("derivative"):
            self._dynamics(_Cursor(line))
            return
        if any(t.is_op("=>") for t in toks):
            self._cost(_Cursor(line))
            return
        if any(t.is_op(*_COMPARISONS) for t in toks):
            self._constraint(_Cursor(line))
            return
        raise ParseError(
            "expected a declaration, constraint, dynamics equation or cost",
            line=line.number,
            column=first.column,
            source_text=line.text,
        )

    # ------------------------------------------------------------------
    # Names
    # ------------------------------------------------------------------

    def _is_defined(self, name: str) -> bool:
        if name in self.constants or name in self.aliases:
            return True
        if name in self.components or any(d.name == name for d in self.decls):
            return True
        return self.time is not None and self.time.name == name

    def _claim(self, name: str, token: Token) -> None:
        if name in _RESERVED:
            raise SemanticError(
                f"'{name}' is reserved", line=token.line, column=token.column
            )
        if self._is_defined(name):
            raise SemanticError(
                f"duplicate identifier '{name}'", line=token.line, column=token.column
            )

    def _decl_named(self, name: str) -> Optional[VarDecl]:
        for decl in self.decls:
            if decl.name == name:
                return decl
        return None

    def _resolve_component(self, name: str) -> Optional[Tuple[VarDecl, Optional[int]]]:
        """Map a name to (declaration, component); component None = whole."""
        decl = self._decl_named(name)
        if decl is not None:
            return (decl, 0) if decl.dim == 1 else (decl, None)
        if name in self.components:
            return self.components[name]
        match = _INDEXED_NAME.match(name)
        if match:
            decl = self._decl_named(match.group(1))
            if decl is not None:
                index = int(match.group(2))
                if 1 <= index <= decl.dim:
                    return decl, index - 1
        return None

    # ------------------------------------------------------------------
    # Line kinds
    # ------------------------------------------------------------------

    def _declaration(self, cur: _Cursor) -> None:
        name_token = cur.expect(TokenType.IDENT)
        aliases: Optional[List[Token]] = None
        if cur.check_op("="):
            cur.advance()
            cur.expect(TokenType.LPAREN)
            aliases = [cur.expect(TokenType.IDENT)]
            while cur.check(TokenType.COMMA):
                cur.advance()
                aliases.append(cur.expect(TokenType.IDENT))
            cur.expect(TokenType.RPAREN)
        cur.expect(TokenType.KEYWORD, "in")

        token = cur.peek()
        if token is not None and token.type == TokenType.LBRACKET:
            if aliases is not None:
                raise cur.error("a time declaration takes no component names")
            self._time_declaration(cur, name_token)
            return

        space = cur.expect(TokenType.IDENT)
        if space.text != "R":
            raise cur.error(f"expected 'R', found {space.text!r}", space)
        dim = 1
        if cur.check_op("^"):
            cur.advance()
            dim_token = cur.expect(TokenType.INT)
            dim = int(dim_token.text)
            if dim < 1:
                raise SemanticError(
                    "dimension must be at least 1",
                    line=dim_token.line,
                    column=dim_token.column,
                )
        cur.expect(TokenType.COMMA)
        kind_token = cur.advance()
        if not kind_token.is_keyword("state", "control", "variable"):
            raise cur.error(
                f"expected 'state', 'control' or 'variable', found {kind_token.text!r}",
                kind_token,
            )
        cur.expect_end()

        self._claim(name_token.text, name_token)
        if dim > 1 and aliases is None and name_token.text[-1].isdigit():
            raise SemanticError(
                f"'{name_token.text}' ends with a digit; "
                "its indexed components would be ambiguous",
                line=name_token.line,
                column=name_token.column,
            )
        names: Optional[Tuple[str, ...]] = None
        if aliases is not None:
            if len(aliases) != dim:
                raise SemanticError(
                    f"{len(aliases)} component names given for R^{dim}",
                    line=name_token.line,
                    column=name_token.column,
                )
            for alias in aliases:
                self._claim(alias.text, alias)
            names = tuple(a.text for a in aliases)
            if len(set(names)) != len(names):
                raise SemanticError(
                    "duplicate component name", line=name_token.line
                )
        decl = VarDecl(
            name=name_token.text,
            kind=DeclKind(kind_token.text),
            dim=dim,
            component_names=names,
            source_line=name_token.line,
        )
        self.decls.append(decl)
        if names is not None:
            for i, alias_name in enumerate(names):
                self.components[alias_name] = (decl, i)

    def _time_declaration(self, cur: _Cursor, name_token: Token) -> None:
        if self.time is not None:
            raise SemanticError(
                "duplicate time declaration",
                line=name_token.line,
                column=name_token.column,
            )
        cur.expect(TokenType.LBRACKET)
        t0 = self._time_bound(cur)
        cur.expect(TokenType.COMMA)
        tf = self._time_bound(cur)
        cur.expect(TokenType.RBRACKET)
        cur.expect(TokenType.COMMA)
        cur.expect(TokenType.KEYWORD, "time")
        cur.expect_end()
        self._claim(name_token.text, name_token)
        if isinstance(t0, Const) and isinstance(tf, Const) and not tf.value > t0.value:
            raise SemanticError(
                "final time must exceed initial time", line=name_token.line
            )
        self.time = TimeSpec(
            name=name_token.text, t0=t0, tf=tf, source_line=name_token.line
        )

    def _time_bound(self, cur: _Cursor) -> Expr:
        token = cur.peek()
        expr = self._scalar(cur, self._expression(cur))
        if isinstance(expr, Const) and math.isfinite(expr.value):
            return expr
        if isinstance(expr, ParamRef):
            return expr
        raise SemanticError(
            "time bounds must be constants or declared variables",
            line=token.line if token else cur.line.number,
        )

    def _definition(self, cur: _Cursor) -> None:
        name_token = cur.expect(TokenType.IDENT)
        cur.expect(TokenType.OP, "=")
        expr = self._scalar(cur, self._expression(cur))
        cur.expect_end()
        self._claim(name_token.text, name_token)
        if isinstance(expr, Const):
            self.constants[name_token.text] = expr.value
        else:
            self.aliases[name_token.text] = expr

    def _dynamics(self, cur: _Cursor) -> None:
        start = cur.expect(TokenType.KEYWORD, "derivative")
        cur.expect(TokenType.LPAREN)
        target = cur.expect(TokenType.IDENT)
        cur.expect(TokenType.RPAREN)
        cur.expect(TokenType.LPAREN)
        time_token = cur.expect(TokenType.IDENT)
        cur.expect(TokenType.RPAREN)
        cur.expect(TokenType.OP, "==")
        rhs = self._scalar(cur, self._expression(cur))
        cur.expect_end()

        if self.time is None or time_token.text != self.time.name:
            raise SemanticError(
                "derivative must be taken at the declared time symbol",
                line=time_token.line,
                column=time_token.column,
            )
        resolved = self._resolve_component(target.text)
        if resolved is None or resolved[0].kind != DeclKind.STATE:
            raise SemanticError(
                f"'{target.text}' is not a state component",
                line=target.line,
                column=target.column,
            )
        decl, component = resolved
        if component is None:
            raise SemanticError(
                f"vector form derivative({target.text}) is not supported; "
                "write one equation per component",
                line=target.line,
                column=target.column,
            )
        self._require_instants(rhs, {Instant.SYMBOLIC}, start.line, "dynamics")
        slot = self._state_slot(decl, component)
        if slot in self.dynamics:
            raise SemanticError(
                "duplicate dynamics for state component "
                f"{decl.component_label(component)}",
                line=start.line,
            )
        self.dynamics[slot] = ConstraintDecl(
            kind=ConstraintKind.DYNAMICS,
            exprs=(rhs,),
            lower=(0.0,),
            upper=(0.0,),
            component=slot,
            source_line=start.line,
        )

    def _state_slot(self, decl: VarDecl, component: int) -> int:
        offset = 0
        for d in self.decls:
            if d.kind != DeclKind.STATE:
                continue
            if d is decl:
                return offset + component
            offset += d.dim
        raise SemanticError(f"unknown state '{decl.name}'", line=decl.source_line)

    def _cost(self, cur: _Cursor) -> None:
        first = cur.peek()
        assert first is not None
        if self.cost is not None:
            raise SemanticError("duplicate cost declaration", line=first.line)
        self._allow_integral = True
        try:
            expr = self._expression(cur)
        finally:
            self._allow_integral = False
        cur.expect(TokenType.OP, "=>")
        sense_token = cur.advance()
        if not sense_token.is_keyword("min", "max"):
            raise cur.error("expected 'min' or 'max'", sense_token)
        cur.expect_end()

        if isinstance(expr, (_Vector, _WholeRef)):
            raise SemanticError("cost must be scalar", line=first.line)
        mayer, lagrange = self._split_bolza(expr, first.line)
        if mayer is not None:
            self._require_instants(
                mayer, {Instant.INITIAL, Instant.FINAL}, first.line, "endpoint cost"
            )
        if lagrange is not None:
            self._require_instants(
                lagrange, {Instant.SYMBOLIC}, first.line, "integral cost"
            )
        if not any(
            e is not None and _references_decisions(e) for e in (mayer, lagrange)
        ):
            raise SemanticError(
                "cost does not depend on any state, control or variable",
                line=first.line,
            )
        sense = Sense(sense_token.text)
        if sense == Sense.MAX:
            mayer = negate(mayer) if mayer is not None else None
            lagrange = negate(lagrange) if lagrange is not None else None
        self.cost = CostDecl(
            mayer=mayer, lagrange=lagrange, sense=sense, source_line=first.line
        )

    def _split_bolza(
        self, expr: _Operand, line: int
    ) -> Tuple[Optional[Expr], Optional[Expr]]:
        """Split a cost into (endpoint part, integrand)."""
        if isinstance(expr, _Integral):
            return None, expr.arg
        if not _contains_integral(expr):
            return cast(Expr, expr), None
        if isinstance(expr, Binary) and expr.op in ("+", "-"):
            lm, ll = self._split_bolza(expr.left, line)
            rm, rl = self._split_bolza(expr.right, line)
            if expr.op == "-":
                rm = negate(rm) if rm is not None else None
                rl = negate(rl) if rl is not None else None
            return _add(lm, rm), _add(ll, rl)
        if isinstance(expr, Unary) and expr.op == "neg":
            m, lg = self._split_bolza(expr.arg, line)
            return (
                negate(m) if m is not None else None,
                negate(lg) if lg is not None else None,
            )
        if isinstance(expr, Binary) and expr.op == "*":
            if isinstance(expr.left, Const):
                m, lg = self._split_bolza(expr.right, line)
                return _scale(expr.left, m), _scale(expr.left, lg)
            if isinstance(expr.right, Const):
                m, lg = self._split_bolza(expr.left, line)
                return _scale(expr.right, m), _scale(expr.right, lg)
        if isinstance(expr, Binary) and expr.op == "/":
            if isinstance(expr.right, Const) and expr.right.value != 0.0:
                inverse = Const(1.0 / expr.right.value)
                m, lg = self._split_bolza(expr.left, line)
                return _scale(inverse, m), _scale(inverse, lg)
        raise SemanticError(
            "integral(...) must appear as a term scaled by a constant", line=line
        )

    def _constraint(self, cur: _Cursor) -> None:
        line = cur.line
        operands: List[_Operand] = [self._expression(cur)]
        ops: List[str] = []
        while not cur.at_end():
            token = cur.advance()
            if not token.is_op(*_COMPARISONS):
                raise cur.error(f"unexpected {token.text!r}", token)
            ops.append(token.text)
            operands.append(self._expression(cur))

        if len(operands) == 2:
            left, right = operands
            left_const = _is_constant(left)
            right_const = _is_constant(right)
            if left_const == right_const:
                raise SemanticError(
                    "constraint needs exactly one side depending on decisions",
                    line=line.number,
                    source_text=line.text,
                )
            body, bound = (right, left) if left_const else (left, right)
            op = ops[0]
            if left_const and op != "==":
                op = "<=" if op == ">=" else ">="
            if op == "==":
                lower_operand, upper_operand = bound, bound
            elif op == "<=":
                lower_operand, upper_operand = None, bound
            else:
                lower_operand, upper_operand = bound, None
        elif len(operands) == 3:
            if ops[0] != ops[1] or ops[0] == "==":
                raise SemanticError(
                    "chained constraints must use '<=' twice or '>=' twice",
                    line=line.number,
                    source_text=line.text,
                )
            a, body, b = operands
            if not (_is_constant(a) and _is_constant(b)) or _is_constant(body):
                raise SemanticError(
                    "chained constraint bounds must be constants",
                    line=line.number,
                    source_text=line.text,
                )
            lower_operand, upper_operand = (a, b) if ops[0] == "<=" else (b, a)
        else:
            raise SemanticError(
                "a constraint has one or two comparisons",
                line=line.number,
                source_text=line.text,
            )

        rows = self._rows(body, line)
        lower = self._bound_vector(lower_operand, len(rows), -math.inf, line)
        upper = self._bound_vector(upper_operand, len(rows), math.inf, line)
        for lo, up in zip(lower, upper):
            if lo > up:
                raise SemanticError(
                    "lower bound exceeds upper bound",
                    line=line.number,
                    source_text=line.text,
                )
        kind = self._classify(rows, line)
        self.constraints.append(
            ConstraintDecl(
                kind=kind,
                exprs=tuple(rows),
                lower=lower,
                upper=upper,
                source_line=line.number,
            )
        )

    def _rows(self, body: _Operand, line: _Line) -> List[Expr]:
        if isinstance(body, _Vector):
            raise SemanticError("constraint body is constant", line=line.number)
        if isinstance(body, _Integral) or _contains_integral(body):
            raise SemanticError(
                "integral(...) is only allowed in the cost", line=line.number
            )
        if isinstance(body, _WholeRef):
            decl = body.decl
            if decl.kind == DeclKind.VARIABLE:
                return [ParamRef(decl.name, i) for i in range(decl.dim)]
            assert body.at is not None
            return [CompRef(decl.kind, decl.name, i, body.at) for i in range(decl.dim)]
        return [cast(Expr, body)]

    def _bound_vector(
        self,
        operand: Optional[_Operand],
        rows: int,
        default: float,
        line: _Line,
    ) -> Tuple[float, ...]:
        if operand is None:
            return (default,) * rows
        if isinstance(operand, Const):
            values: Tuple[float, ...] = (operand.value,)
        elif isinstance(operand, _Vector):
            values = operand.values
        else:
            raise SemanticError("bounds must be constants", line=line.number)
        if len(values) != rows:
            raise SemanticError(
                f"wrong bound dimension ({line.text}): "
                f"{len(values)} bound value(s) for {rows} row(s)",
                line=line.number,
                source_text=line.text,
            )
        return values

    def _classify(self, rows: List[Expr], line: _Line) -> ConstraintKind:
        instants = set()
        has_time = False
        kinds = set()
        for expr in rows:
            for node in _walk(expr):
                if isinstance(node, CompRef):
                    instants.add(node.at)
                    kinds.add(node.kind)
                elif isinstance(node, TimeSym):
                    has_time = True
        running = has_time or Instant.SYMBOLIC in instants
        endpoint = bool(instants - {Instant.SYMBOLIC})
        if running and endpoint:
            raise SemanticError(
                "constraint mixes the running time with endpoint instants",
                line=line.number,
                source_text=line.text,
            )
        if all(isinstance(e, ParamRef) for e in rows):
            return ConstraintKind.BOX_VARIABLE
        if running:
            if all(isinstance(e, CompRef) for e in rows) and len(kinds) == 1:
                return (
                    ConstraintKind.BOX_STATE
                    if DeclKind.STATE in kinds
                    else ConstraintKind.BOX_CONTROL
                )
            return ConstraintKind.PATH
        if not any(_references_decisions(e) for e in rows):
            raise SemanticError(
                "constraint does not involve any state, control or variable",
                line=line.number,
                source_text=line.text,
            )
        return ConstraintKind.BOUNDARY

    def _require_instants(
        self, expr: Expr, allowed: set, line: int, where: str
    ) -> None:
        for node in _walk(expr):
            at = None
            if isinstance(node, CompRef):
                at = node.at
            elif isinstance(node, TimeSym):
                at = Instant.SYMBOLIC
            if at is not None and at not in allowed:
                if at == Instant.SYMBOLIC:
                    message = f"{where} may only use t0/tf instants"
                else:
                    message = f"{where} must be evaluated at the running time"
                raise SemanticError(message, line=line)

    # ------------------------------------------------------------------
    # Expressions
    # ------------------------------------------------------------------

    def _scalar(self, cur: _Cursor, operand: _Operand) -> Expr:
        if isinstance(operand, (_Vector, _WholeRef)):
            raise cur.error("vector value where a scalar is expected")
        if isinstance(operand, _Integral) or _contains_integral(operand):
            raise cur.error("integral(...) is only allowed in the cost")
        return operand

    def _arith(self, cur: _Cursor, operand: _Operand) -> Expr:
        """Operand of an arithmetic node; integrals pass through for the cost."""
        if isinstance(operand, (_Vector, _WholeRef)):
            raise cur.error("vector value used in arithmetic")
        return cast(Expr, operand)

    def _expression(self, cur: _Cursor) -> _Operand:
        left = self._term(cur)
        while True:
            token = cur.peek()
            if token is None or not token.is_op("+", "-"):
                return left
            cur.advance()
            right = self._term(cur)
            left = fold_binary(
                token.text, self._arith(cur, left), self._arith(cur, right)
            )

    def _term(self, cur: _Cursor) -> _Operand:
        left = self._unary(cur)
        while True:
            token = cur.peek()
            if token is None or not token.is_op("*", "/"):
                return left
            cur.advance()
            right = self._unary(cur)
            left = fold_binary(
                token.text, self._arith(cur, left), self._arith(cur, right)
            )

    def _unary(self, cur: _Cursor) -> _Operand:
        token = cur.peek()
        if token is not None and token.is_op("-"):
            cur.advance()
            return negate(self._arith(cur, self._unary(cur)))
        if token is not None and token.is_op("+"):
            cur.advance()
            return self._arith(cur, self._unary(cur))
        return self._power(cur)

    def _power(self, cur: _Cursor) -> _Operand:
        base = self._juxtaposition(cur)
        token = cur.peek()
        if token is not None and token.is_op("^"):
            cur.advance()
            exponent = self._unary(cur)
            return fold_binary(
                "^", self._arith(cur, base), self._arith(cur, exponent)
            )
        return base

    def _juxtaposition(self, cur: _Cursor) -> _Operand:
        token = cur.peek()
        primary = self._primary(cur)
        if token is None or token.type not in (TokenType.INT, TokenType.FLOAT):
            return primary
        follower = cur.peek()
        if follower is not None and (
            follower.type in (TokenType.IDENT, TokenType.LPAREN)
            or follower.is_keyword("integral")
        ):
            # Numeric literal coefficient: "2x^2" is 2 * (x^2).
            factor = self._power(cur)
            return fold_binary("*", primary, self._arith(cur, factor))
        return primary

    def _primary(self, cur: _Cursor) -> _Operand:
        token = cur.advance()
        if token.type in (TokenType.INT, TokenType.FLOAT):
            return Const(float(token.text))
        if token.type == TokenType.LPAREN:
            inner = self._expression(cur)
            cur.expect(TokenType.RPAREN)
            return inner
        if token.type == TokenType.LBRACKET:
            return self._vector_literal(cur)
        if token.is_keyword("integral"):
            if not self._allow_integral:
                raise cur.error("integral(...) is only allowed in the cost", token)
            cur.expect(TokenType.LPAREN)
            arg = self._scalar(cur, self._expression(cur))
            cur.expect(TokenType.RPAREN)
            return _Integral(arg)
        if token.type == TokenType.IDENT:
            return self._identifier(cur, token)
        raise cur.error(f"unexpected {token.text!r}", token)

    def _vector_literal(self, cur: _Cursor) -> _Vector:
        values: List[float] = []
        token = cur.peek()
        if token is not None and token.type == TokenType.RBRACKET:
            cur.advance()
            return _Vector(())
        while True:
            value = self._scalar(cur, self._expression(cur))
            if not isinstance(value, Const):
                raise cur.error("vector entries must be constants")
            values.append(value.value)
            token = cur.advance()
            if token.type == TokenType.RBRACKET:
                return _Vector(tuple(values))
            if token.type != TokenType.COMMA:
                raise cur.error(f"expected ',' or ']', found {token.text!r}", token)

    def _identifier(self, cur: _Cursor, token: Token) -> _Operand:
        name = token.text
        follower = cur.peek()
        calls = follower is not None and follower.type == TokenType.LPAREN

        if name in UNARY_FUNCTIONS:
            cur.expect(TokenType.LPAREN)
            arg = self._arith(cur, self._expression(cur))
            cur.expect(TokenType.RPAREN)
            if isinstance(arg, _Integral):
                raise cur.error("integral(...) must not be nested in a function", token)
            return fold_unary(name, arg)
        if name in ("zeros", "ones"):
            cur.expect(TokenType.LPAREN)
            size = cur.expect(TokenType.INT)
            cur.expect(TokenType.RPAREN)
            fill = 0.0 if name == "zeros" else 1.0
            return _Vector((fill,) * int(size.text))
        if name == "pi":
            return Const(math.pi)
        if name in ("Inf", "inf"):
            return Const(math.inf)
        if name in self.constants:
            return Const(self.constants[name])
        if name in self.aliases:
            return self.aliases[name]
        if self.time is not None and name == self.time.name:
            return TimeSym()
        if self.time is not None and name in ("t0", "tf"):
            # Endpoint names stand for the declared bounds of the horizon.
            return self.time.t0 if name == "t0" else self.time.tf

        resolved = self._resolve_component(name)
        if resolved is None:
            raise SemanticError(
                f"undeclared identifier '{name}'", line=token.line, column=token.column
            )
        decl, component = resolved
        if decl.kind == DeclKind.VARIABLE:
            if calls:
                raise cur.error(f"variable '{name}' takes no time argument", token)
            if component is None:
                return _WholeRef(decl, None)
            return ParamRef(decl.name, component)

        if not calls:
            raise cur.error(f"'{name}' needs a time argument, e.g. {name}(t)", token)
        cur.expect(TokenType.LPAREN)
        at_token = cur.peek()
        at_expr = self._scalar(cur, self._expression(cur))
        cur.expect(TokenType.RPAREN)
        at = self._instant(at_expr, at_token or token)
        if component is None:
            return _WholeRef(decl, at)
        return CompRef(decl.kind, decl.name, component, at)

    def _instant(self, expr: Expr, token: Token) -> Instant:
        if isinstance(expr, TimeSym):
            return Instant.SYMBOLIC
        if self.time is None:
            raise SemanticError(
                "time must be declared before endpoint references",
                line=token.line,
                column=token.column,
            )
        if expr == self.time.t0:
            return Instant.INITIAL
        if expr == self.time.tf:
            return Instant.FINAL
        raise SemanticError(
            "time argument must be the running time or an endpoint "
            "(interior instants are not supported)",
            line=token.line,
            column=token.column,
        )

    # ------------------------------------------------------------------
    # Whole-problem checks
    # ------------------------------------------------------------------

    def _finish(self, last_line: int) -> OcpProblem:
        if self.time is None:
            raise SemanticError("missing time declaration", line=last_line)
        if self.cost is None:
            raise SemanticError("missing cost declaration", line=last_line)
        states = [d for d in self.decls if d.kind == DeclKind.STATE]
        if not states:
            raise SemanticError("at least one state is required", line=last_line)
        slot = 0
        for decl in states:
            for i in range(decl.dim):
                if slot not in self.dynamics:
                    raise SemanticError(
                        "missing dynamics for state component "
                        f"{decl.component_label(i)}",
                        line=decl.source_line,
                    )
                slot += 1

        problem = OcpProblem(
            time=self.time,
            decls=tuple(self.decls),
            dynamics=tuple(self.dynamics[i] for i in range(slot)),
            constraints=tuple(self.constraints),
            cost=self.cost,
            name=self.name,
        )
        logger.debug(
            "problem_parsed",
            problem=self.name,
            states=problem.state_dim,
            controls=problem.control_dim,
            variables=problem.variable_dim,
            constraints=len(problem.constraints),
        )
        return problem


def _walk(expr: _Operand):
    yield expr
    if isinstance(expr, Unary):
        yield from _walk(expr.arg)
    elif isinstance(expr, Binary):
        yield from _walk(expr.left)
        yield from _walk(expr.right)
    elif isinstance(expr, _Integral):
        yield from _walk(expr.arg)


def _contains_integral(expr: _Operand) -> bool:
    return any(isinstance(node, _Integral) for node in _walk(expr))


def _references_decisions(expr: Expr) -> bool:
    return any(isinstance(node, (CompRef, ParamRef)) for node in _walk(expr))


def _is_constant(operand: _Operand) -> bool:
    return isinstance(operand, (Const, _Vector))


def _add(a: Optional[Expr], b: Optional[Expr]) -> Optional[Expr]:
    if a is None:
        return b
    if b is None:
        return a
    return fold_binary("+", a, b)


def _scale(factor: Const, expr: Optional[Expr]) -> Optional[Expr]:
    if expr is None:
        return None
    return fold_binary("*", factor, expr)


def parse_ocp(source: str, name: str = "ocp") -> OcpProblem:
    """Parse and validate DSL source text."""
    return OcpParser(source, name=name).parse()

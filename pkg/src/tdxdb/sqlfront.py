"""Lexer and recursive-descent parser for the SQL subset the engine runs.

Supported: SELECT/FROM/WHERE, non-recursive WITH, one `row_number() over
(partition by ... order by ...)` window call per select, and the transducer
select form: `transducer_col_<type>(ordinal)` projections, one
`transducer($$...$$)` call, then trailing input expressions. `$$` is the
only dollar-quote delimiter; the body is captured verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .datamodel import ColumnType, Schema, parse_type_name
from .errors import ParseError
from .transducer import BuiltinMode, ExternalMode
from .expr import (
    Arith,
    Case,
    ColumnRef,
    Compare,
    Expr,
    Literal,
    Logical,
    Negate,
    Not,
)

KEYWORDS = {
    "select",
    "from",
    "where",
    "with",
    "as",
    "case",
    "when",
    "then",
    "else",
    "and",
    "or",
    "not",
    "over",
    "partition",
    "order",
    "by",
    "asc",
    "desc",
    "true",
    "false",
    "null",
}
# `end` stays usable as a column name outside CASE (run records need it).


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | dollar | op | eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|!=|=|<|>|\+|-|\*|/|%|\(|\)|,|\.|;)
    """,
    re.VERBOSE,
)


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0

    def location(at: int) -> tuple[int, int]:
        return line, at - line_start + 1

    def advance_lines(text: str, start: int) -> None:
        nonlocal line, line_start
        idx = text.rfind("\n")
        if idx >= 0:
            line += text.count("\n")
            line_start = start + idx + 1

    while pos < len(sql):
        if sql.startswith("$$", pos):
            end = sql.find("$$", pos + 2)
            if end < 0:
                ln, col = location(pos)
                raise ParseError("unterminated $$ string", ln, col)
            body = sql[pos + 2 : end]
            ln, col = location(pos)
            tokens.append(Token("dollar", body, ln, col))
            advance_lines(sql[pos : end + 2], pos)
            pos = end + 2
            continue
        if sql.startswith("'", pos):
            # Single-quoted string; '' escapes a quote.
            i = pos + 1
            chunks = []
            while True:
                if i >= len(sql):
                    ln, col = location(pos)
                    raise ParseError("unterminated string literal", ln, col)
                ch = sql[i]
                if ch == "'":
                    if sql.startswith("''", i):
                        chunks.append("'")
                        i += 2
                        continue
                    break
                chunks.append(ch)
                i += 1
            ln, col = location(pos)
            tokens.append(Token("string", "".join(chunks), ln, col))
            advance_lines(sql[pos : i + 1], pos)
            pos = i + 1
            continue
        m = _TOKEN_RE.match(sql, pos)
        if m is None:
            ln, col = location(pos)
            raise ParseError(f"unexpected character {sql[pos]!r}", ln, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            ln, col = location(pos)
            tokens.append(Token(kind, text, ln, col))
        advance_lines(text, pos)
        pos = m.end()
    ln, col = location(pos)
    tokens.append(Token("eof", "", ln, col))
    return tokens


# --- AST ---------------------------------------------------------------


@dataclass(frozen=True)
class TransducerCol:
    col_type: ColumnType
    ordinal: int


@dataclass(frozen=True)
class TransducerCall:
    body: str


@dataclass(frozen=True)
class OrderKey:
    column: ColumnRef
    ascending: bool = True


@dataclass(frozen=True)
class WindowCall:
    partition_by: tuple[ColumnRef, ...]
    order_by: tuple[OrderKey, ...]


@dataclass(frozen=True)
class Star:
    table: Optional[str] = None


ItemValue = Union[Expr, TransducerCol, TransducerCall, WindowCall, Star]


@dataclass(frozen=True)
class SelectItem:
    value: ItemValue
    alias: Optional[str] = None


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: Optional[str] = None


@dataclass(frozen=True)
class SubqueryRef:
    query: "Select"
    alias: str


FromItem = Union[TableRef, SubqueryRef]


@dataclass(frozen=True)
class Cte:
    name: str
    query: "Select"


@dataclass(frozen=True)
class Select:
    items: tuple[SelectItem, ...]
    from_item: FromItem
    where: Optional[Expr] = None
    ctes: tuple[Cte, ...] = ()

    def transducer_item(self) -> Optional[TransducerCall]:
        for item in self.items:
            if isinstance(item.value, TransducerCall):
                return item.value
        return None


_COL_FN_RE = re.compile(r"^transducer_col_([a-z0-9]+)$", re.IGNORECASE)

_CANONICAL_TYPE_SPELLING = {
    ColumnType.INT32: "int4",
    ColumnType.INT64: "int8",
    ColumnType.FLOAT64: "float8",
    ColumnType.TEXT: "text",
    ColumnType.BOOL: "bool",
}


class Parser:
    def __init__(self, sql: str):
        self.tokens = tokenize(sql)
        self.pos = 0

    # -- token helpers --

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.col)

    def at_word(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.text.lower() == word

    def accept_word(self, word: str) -> bool:
        if self.at_word(word):
            self.advance()
            return True
        return False

    def expect_word(self, word: str) -> Token:
        if not self.at_word(word):
            raise self.error(f"expected {word.upper()}")
        return self.advance()

    def accept_op(self, op: str) -> bool:
        tok = self.peek()
        if tok.kind == "op" and tok.text == op:
            self.advance()
            return True
        return False

    def expect_op(self, op: str) -> Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise self.error(f"expected {op!r}")
        return self.advance()

    def ident(self, what: str = "identifier", allow_keywords: bool = False) -> str:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error(f"expected {what}")
        if not allow_keywords and tok.text.lower() in KEYWORDS:
            raise self.error(f"expected {what}, found keyword {tok.text!r}")
        self.advance()
        return tok.text

    # -- grammar --

    def parse_statement(self) -> Select:
        stmt = self.parse_query()
        self.accept_op(";")
        if self.peek().kind != "eof":
            raise self.error("unexpected trailing input")
        return stmt

    def parse_query(self) -> Select:
        ctes: list[Cte] = []
        if self.accept_word("with"):
            while True:
                name = self.ident("WITH clause name")
                self.expect_word("as")
                self.expect_op("(")
                query = self.parse_query()
                self.expect_op(")")
                ctes.append(Cte(name, query))
                if not self.accept_op(","):
                    break
        select = self.parse_select()
        if ctes:
            select = Select(select.items, select.from_item, select.where, tuple(ctes))
        return select

    def parse_select(self) -> Select:
        self.expect_word("select")
        items = [self.parse_item()]
        while self.accept_op(","):
            items.append(self.parse_item())
        self.expect_word("from")
        from_item = self.parse_from_item()
        where = None
        if self.accept_word("where"):
            where = self.parse_expr()
        select = Select(tuple(items), from_item, where)
        self._validate(select)
        return select

    def parse_from_item(self) -> FromItem:
        if self.accept_op("("):
            query = self.parse_query()
            self.expect_op(")")
            self.accept_word("as")
            alias = self.ident("subquery alias")
            return SubqueryRef(query, alias)
        name = self.ident("table name")
        alias = self.parse_optional_alias()
        return TableRef(name, alias)

    def parse_optional_alias(self) -> Optional[str]:
        if self.accept_word("as"):
            return self.ident("alias")
        tok = self.peek()
        if tok.kind == "ident" and tok.text.lower() not in KEYWORDS:
            self.advance()
            return tok.text
        return None

    def _call_follows(self) -> bool:
        nxt = self.tokens[self.pos + 1]
        return nxt.kind == "op" and nxt.text == "("

    def parse_item(self) -> SelectItem:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "*":
            self.advance()
            return SelectItem(Star())
        if tok.kind == "ident":
            lowered = tok.text.lower()
            if lowered == "transducer" and self._call_follows():
                return SelectItem(self.parse_transducer_call())
            match = _COL_FN_RE.match(tok.text)
            if match and self._call_follows():
                return self.parse_transducer_col(match.group(1))
            if lowered == "row_number" and self._call_follows():
                return self.parse_window_item()
            # `tbl.*` star projection
            nxt = self.tokens[self.pos + 1 : self.pos + 3]
            if (
                len(nxt) == 2
                and nxt[0].kind == "op"
                and nxt[0].text == "."
                and nxt[1].kind == "op"
                and nxt[1].text == "*"
            ):
                self.advance()
                self.advance()
                self.advance()
                return SelectItem(Star(tok.text))
        expr = self.parse_expr()
        alias = self.parse_optional_alias()
        return SelectItem(expr, alias)

    def parse_transducer_call(self) -> TransducerCall:
        self.advance()  # transducer
        self.expect_op("(")
        tok = self.peek()
        if tok.kind != "dollar":
            raise self.error("transducer() takes one $$...$$ script body")
        self.advance()
        self.expect_op(")")
        return TransducerCall(tok.text)

    def parse_transducer_col(self, suffix: str) -> SelectItem:
        start = self.advance()
        try:
            ctype = parse_type_name(suffix)
        except Exception:
            raise self.error(f"unknown transducer_col type suffix {suffix!r}", start) from None
        self.expect_op("(")
        negative = self.accept_op("-")
        tok = self.peek()
        if tok.kind != "number" or not tok.text.isdigit():
            raise self.error("transducer_col ordinal must be an integer literal")
        ordinal = int(tok.text)
        if negative or ordinal == 0:
            raise self.error("transducer_col ordinal must be positive", tok)
        self.advance()
        self.expect_op(")")
        alias = self.parse_optional_alias()
        return SelectItem(TransducerCol(ctype, ordinal), alias)

    def parse_window_item(self) -> SelectItem:
        self.advance()  # row_number
        self.expect_op("(")
        self.expect_op(")")
        self.expect_word("over")
        self.expect_op("(")
        partition: list[ColumnRef] = []
        order: list[OrderKey] = []
        if self.accept_word("partition"):
            self.expect_word("by")
            partition.append(self.parse_column_ref())
            while self.accept_op(","):
                partition.append(self.parse_column_ref())
        if self.accept_word("order"):
            self.expect_word("by")
            order.append(self.parse_order_key())
            while self.accept_op(","):
                order.append(self.parse_order_key())
        self.expect_op(")")
        alias = self.parse_optional_alias()
        return SelectItem(WindowCall(tuple(partition), tuple(order)), alias)

    def parse_column_ref(self) -> ColumnRef:
        first = self.ident("column name")
        if self.accept_op("."):
            second = self.ident("column name", allow_keywords=True)
            return ColumnRef(second, table=first)
        return ColumnRef(first)

    def parse_order_key(self) -> OrderKey:
        column = self.parse_column_ref()
        if self.accept_word("desc"):
            return OrderKey(column, ascending=False)
        self.accept_word("asc")
        return OrderKey(column, ascending=True)

    # expression precedence: or < and < not < comparison < additive < multiplicative < unary

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.accept_word("or"):
            left = Logical("or", left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.accept_word("and"):
            left = Logical("and", left, self.parse_not())
        return left

    def parse_not(self) -> Expr:
        if self.accept_word("not"):
            return Not(self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        left = self.parse_additive()
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("=", "<>", "!=", "<", "<=", ">", ">="):
            self.advance()
            op = "<>" if tok.text == "!=" else tok.text
            return Compare(op, left, self.parse_additive())
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_multiplicative()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("+", "-"):
                self.advance()
                left = Arith(tok.text, left, self.parse_multiplicative())
            else:
                return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("*", "/", "%"):
                self.advance()
                left = Arith(tok.text, left, self.parse_unary())
            else:
                return left

    def parse_unary(self) -> Expr:
        if self.accept_op("-"):
            operand = self.parse_unary()
            if isinstance(operand, Literal) and isinstance(operand.value, (int, float)):
                return Literal(-operand.value)
            return Negate(operand)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            if "." in tok.text or "e" in tok.text.lower():
                return Literal(float(tok.text))
            return Literal(int(tok.text))
        if tok.kind == "string":
            self.advance()
            return Literal(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        if tok.kind == "ident":
            lowered = tok.text.lower()
            if lowered == "true":
                self.advance()
                return Literal(True)
            if lowered == "false":
                self.advance()
                return Literal(False)
            if lowered == "null":
                self.advance()
                return Literal(None)
            if lowered == "case":
                return self.parse_case()
            if lowered in KEYWORDS:
                raise self.error(f"unexpected keyword {tok.text!r} in expression")
            self.advance()
            if self.accept_op("."):
                column = self.ident("column name", allow_keywords=True)
                return ColumnRef(column, table=tok.text)
            return ColumnRef(tok.text)
        raise self.error("expected an expression")

    def parse_case(self) -> Expr:
        self.expect_word("case")
        whens = []
        if not self.at_word("when"):
            raise self.error("CASE requires at least one WHEN arm")
        while self.accept_word("when"):
            cond = self.parse_expr()
            self.expect_word("then")
            result = self.parse_expr()
            whens.append((cond, result))
        default = None
        if self.accept_word("else"):
            default = self.parse_expr()
        self.expect_word("end")
        return Case(tuple(whens), default)

    # -- AST invariants --

    def _validate(self, select: Select) -> None:
        transducers = [i for i in select.items if isinstance(i.value, TransducerCall)]
        cols = [i.value for i in select.items if isinstance(i.value, TransducerCol)]
        if len(transducers) > 1:
            raise self.error("at most one transducer() call per SELECT")
        if transducers and not cols:
            raise self.error("transducer() requires at least one transducer_col projection")
        if cols and not transducers:
            raise self.error("transducer_col without transducer")
        if cols:
            ordinals = {c.ordinal for c in cols}
            expected = set(range(1, max(ordinals) + 1))
            if ordinals != expected:
                missing = sorted(expected - ordinals)
                raise self.error(
                    f"transducer_col ordinals must form a contiguous 1..k set; missing {missing}"
                )


def parse(sql: str) -> Select:
    """Parse one statement; raises ParseError with line/column on failure."""
    return Parser(sql).parse_statement()


# --- pretty printer (parse . to_sql is structurally the identity) --------


def _quote_string(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def expr_to_sql(expr: Expr) -> str:
    if isinstance(expr, Literal):
        v = expr.value
        if v is None:
            return "null"
        if v is True:
            return "true"
        if v is False:
            return "false"
        if isinstance(v, str):
            return _quote_string(v)
        return repr(v)
    if isinstance(expr, ColumnRef):
        return f"{expr.table}.{expr.name}" if expr.table else expr.name
    if isinstance(expr, (Arith, Compare)):
        return f"{_wrap(expr.left)} {expr.op} {_wrap(expr.right)}"
    if isinstance(expr, Logical):
        return f"{_wrap(expr.left)} {expr.op} {_wrap(expr.right)}"
    if isinstance(expr, Not):
        return f"not {_wrap(expr.operand)}"
    if isinstance(expr, Negate):
        return f"-{_wrap(expr.operand)}"
    if isinstance(expr, Case):
        parts = ["case"]
        for cond, result in expr.whens:
            parts.append(f"when {expr_to_sql(cond)} then {expr_to_sql(result)}")
        if expr.default is not None:
            parts.append(f"else {expr_to_sql(expr.default)}")
        parts.append("end")
        return " ".join(parts)
    raise TypeError(f"cannot print expression {expr!r}")


def _wrap(expr: Expr) -> str:
    if isinstance(expr, (Literal, ColumnRef, Case)):
        return expr_to_sql(expr)
    return f"({expr_to_sql(expr)})"


def _item_to_sql(item: SelectItem) -> str:
    value = item.value
    if isinstance(value, Star):
        text = f"{value.table}.*" if value.table else "*"
    elif isinstance(value, TransducerCol):
        text = f"transducer_col_{_CANONICAL_TYPE_SPELLING[value.col_type]}({value.ordinal})"
    elif isinstance(value, TransducerCall):
        text = f"transducer($${value.body}$$)"
    elif isinstance(value, WindowCall):
        inner = []
        if value.partition_by:
            inner.append("partition by " + ", ".join(expr_to_sql(c) for c in value.partition_by))
        if value.order_by:
            keys = ", ".join(
                expr_to_sql(k.column) + ("" if k.ascending else " desc") for k in value.order_by
            )
            inner.append("order by " + keys)
        text = f"row_number() over ({' '.join(inner)})"
    else:
        text = expr_to_sql(value)
    if item.alias:
        text += f" as {item.alias}"
    return text


def to_sql(select: Select) -> str:
    parts = []
    if select.ctes:
        ctes = ", ".join(f"{c.name} as ({to_sql(c.query)})" for c in select.ctes)
        parts.append(f"with {ctes}")
    parts.append("select " + ", ".join(_item_to_sql(i) for i in select.items))
    if isinstance(select.from_item, TableRef):
        from_sql = select.from_item.name
        if select.from_item.alias:
            from_sql += f" as {select.from_item.alias}"
    else:
        from_sql = f"({to_sql(select.from_item.query)}) as {select.from_item.alias}"
    parts.append("from " + from_sql)
    if select.where is not None:
        parts.append("where " + expr_to_sql(select.where))
    return " ".join(parts)


# --- transducer script directives ----------------------------------------

_COMMENT_RE = re.compile(r"^\s*(//|#|--)\s?(.*)$")


def extract_io_schemas(body: str) -> tuple[Schema, Schema]:
    """Parse the BEGIN INPUT/OUTPUT comment directive blocks of a script.

    Each block holds one `name type` comment line per column; int4/int8/
    float4/float8/float32 are accepted as type aliases.
    """
    blocks: dict[str, list[tuple[str, str]]] = {}
    current: Optional[str] = None
    for raw in body.splitlines():
        m = _COMMENT_RE.match(raw)
        if not m:
            continue
        content = m.group(2).strip()
        upper = content.upper()
        if upper in ("BEGIN INPUT", "BEGIN OUTPUT"):
            name = upper.split()[1]
            if name in blocks:
                raise ParseError(f"duplicate BEGIN {name} directive block")
            if current is not None:
                raise ParseError(f"BEGIN {name} inside another directive block")
            blocks[name] = []
            current = name
            continue
        if upper in ("END INPUT", "END OUTPUT"):
            name = upper.split()[1]
            if current != name:
                raise ParseError(f"END {name} without matching BEGIN {name}")
            current = None
            continue
        if current is not None and content:
            tokens = content.split()
            if len(tokens) != 2:
                raise ParseError(
                    f"directive line must be 'name type', got {content!r} in {current} block"
                )
            blocks[current].append((tokens[0], tokens[1]))
    if current is not None:
        raise ParseError(f"missing END {current} directive")
    for name in ("INPUT", "OUTPUT"):
        if name not in blocks:
            raise ParseError(f"script body is missing its BEGIN {name} directive block")
        if not blocks[name]:
            raise ParseError(f"{name} directive block declares no columns")

    def build(name: str) -> Schema:
        try:
            return Schema.of(*blocks[name])
        except Exception as exc:
            raise ParseError(f"bad {name} directive block: {exc}") from None

    return build("INPUT"), build("OUTPUT")


def parse_exec_header(body: str):
    """Parse the PHIExec header line into a transducer execution mode."""
    for raw in body.splitlines():
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0].lower() != "phiexec":
            raise ParseError(f"script body must start with a PHIExec line, got {line!r}")
        if len(tokens) < 2:
            raise ParseError("PHIExec line names no language or builtin")
        tag = tokens[1].lower()
        if tag == "builtin":
            if len(tokens) < 3:
                raise ParseError("PHIExec builtin needs a program name")
            params = []
            for arg in tokens[3:]:
                if "=" not in arg:
                    raise ParseError(f"builtin parameter must be key=value, got {arg!r}")
                key, value = arg.split("=", 1)
                params.append((key, value))
            return BuiltinMode(tokens[2], tuple(params))
        return ExternalMode(tag)
    raise ParseError("empty transducer script body")

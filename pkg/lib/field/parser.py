"""
Recursive-descent parser for the vector-field text format.

Grammar (highest precedence first):

    atom    := NUMBER | IDENT | "(" sum ")"
    power   := atom ("^" INT)*          right-associative, integer exponents >= 0
    unary   := "-" unary | "+" unary | power
    product := unary ("*" unary)*
    sum     := product (("+" | "-") product)*

File format:

    # comment
    param a = 0.432
    dx = -y - z
    dy = x + a*y
    dz = b + z*(x - c)
"""
import re
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from lib.errors import FieldSyntaxError, InputFileError, UnknownIdentifierError
from lib.field.expr import Expr, Param, Var, VARIABLE_NAMES, add, const, mul, neg, power
from lib.field.vector_field import VectorField

_TOKEN_RE = re.compile(
    r"""
    (?P<space>[ \t]+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*^()])
    """,
    re.VERBOSE,
)

_COMPONENT_KEYS = {"dx": 0, "dy": 1, "dz": 2}


class Token:
    def __init__(self, kind: str, text: str, column: int):
        self.kind = kind
        self.text = text
        self.column = column

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, col={self.column})"


def tokenize(text: str, line: int = 1, column_offset: int = 0) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise FieldSyntaxError(f"unexpected character {text[pos]!r}", line, pos + 1 + column_offset)
        kind = match.lastgroup
        if kind != "space":
            tokens.append(Token(kind, match.group(), pos + 1 + column_offset))
        pos = match.end()
    tokens.append(Token("end", "", len(text) + 1 + column_offset))
    return tokens


class _Parser:
    def __init__(self, tokens: List[Token], params: Iterable[str], line: int):
        self.tokens = tokens
        self.params = set(params)
        self.line = line
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def error(self, message: str, token: Optional[Token] = None):
        token = token or self.current
        return FieldSyntaxError(message, self.line, token.column)

    def expect_op(self, text: str) -> Token:
        if self.current.kind != "op" or self.current.text != text:
            found = self.current.text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        return self.advance()

    def parse(self) -> Expr:
        if self.current.kind == "end":
            raise self.error("empty expression")
        expr = self.sum()
        if self.current.kind != "end":
            raise self.error(f"unexpected '{self.current.text}'")
        return expr

    def sum(self) -> Expr:
        terms = [self.product()]
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            term = self.product()
            terms.append(term if op == "+" else neg(term))
        return add(*terms)

    def product(self) -> Expr:
        factors = [self.unary()]
        while self.current.kind == "op" and self.current.text == "*":
            self.advance()
            factors.append(self.unary())
        return mul(*factors)

    def unary(self) -> Expr:
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            return neg(self.unary())
        if self.current.kind == "op" and self.current.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.current.kind == "op" and self.current.text == "^":
            self.advance()
            return power(base, self.exponent())
        return base

    def exponent(self) -> int:
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            raise self.error("exponent must be a non-negative integer literal")
        self.advance()
        value = int(token.text)
        if self.current.kind == "op" and self.current.text == "^":
            self.advance()
            value = value ** self.exponent()
        return value

    def atom(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self.advance()
            return const(float(token.text))
        if token.kind == "ident":
            self.advance()
            if token.text in VARIABLE_NAMES:
                return Var(VARIABLE_NAMES.index(token.text))
            if token.text in self.params:
                return Param(token.text)
            raise UnknownIdentifierError(token.text, self.line, token.column)
        if token.kind == "op" and token.text == "(":
            self.advance()
            inner = self.sum()
            self.expect_op(")")
            return inner
        found = token.text or "end of input"
        raise self.error(f"unexpected '{found}'")


def parse_expression(text: str, params: Iterable[str] = (), line: int = 1, column_offset: int = 0) -> Expr:
    """Parse one component expression; identifiers other than x, y, z must be in `params`."""
    tokens = tokenize(text, line, column_offset)
    return _Parser(tokens, params, line).parse()


def field_from_components(components: Sequence[str], params: Optional[Mapping[str, float]] = None,
                          derived=None) -> VectorField:
    if len(components) != 3:
        raise ValueError(f"a vector field needs exactly 3 components, got {len(components)}")
    params = dict(params or {})
    names = list(params) + list((derived or {}).keys())
    exprs = [parse_expression(text, names) for text in components]
    return VectorField(exprs, params, derived=derived)


def parse_field(source: str) -> VectorField:
    """Parse the `dx = ... / dy = ... / dz = ... / param name = value` text format."""
    params: Dict[str, float] = {}
    lines: List[Tuple[int, str]] = []

    # first pass: parameter declarations, so components may reference params declared later
    for number, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0].rstrip()
        if not text.strip():
            continue
        stripped = text.lstrip()
        if stripped.startswith("param ") or stripped.startswith("param\t"):
            body = stripped[len("param"):].strip()
            name, sep, value = body.partition("=")
            name = name.strip()
            column = len(text) - len(stripped) + 1
            if not sep or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise FieldSyntaxError("expected 'param <name> = <value>'", number, column)
            if name in VARIABLE_NAMES:
                raise FieldSyntaxError(f"'{name}' is a state variable and cannot be a parameter", number, column)
            if name in params:
                raise FieldSyntaxError(f"parameter '{name}' declared twice", number, column)
            try:
                params[name] = float(value.strip())
            except ValueError:
                raise FieldSyntaxError(f"invalid default value {value.strip()!r}", number, column) from None
        else:
            lines.append((number, text))

    exprs: List[Optional[Expr]] = [None, None, None]
    for number, text in lines:
        key, sep, body = text.partition("=")
        key = key.strip()
        if not sep or key not in _COMPONENT_KEYS:
            raise FieldSyntaxError("expected 'dx = ...', 'dy = ...', 'dz = ...' or 'param ...'",
                                   number, len(text) - len(text.lstrip()) + 1)
        index = _COMPONENT_KEYS[key]
        if exprs[index] is not None:
            raise FieldSyntaxError(f"component '{key}' defined twice", number, 1)
        exprs[index] = parse_expression(body, params, line=number, column_offset=text.index("=") + 1)

    missing = [key for key, index in _COMPONENT_KEYS.items() if exprs[index] is None]
    if missing:
        last_line = len(source.splitlines()) or 1
        raise FieldSyntaxError(f"missing component(s): {', '.join(missing)}", last_line, 1)
    return VectorField(exprs, params)


def load_field_file(path: str) -> VectorField:
    try:
        with open(path, "r", encoding="utf-8") as f:
            source = f.read()
    except OSError as exc:
        raise InputFileError(f"cannot read system file {path}: {exc}") from exc
    return parse_field(source)

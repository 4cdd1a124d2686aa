"""
Immutable expression trees for polynomial vector fields.

Nodes are built through the helper constructors (`add`, `mul`, `neg`, `power`)
which flatten sums and products and fold constants, so every tree in the
library is already in the structural normal form described below:

- sums and products are flat (no Add directly inside an Add, same for Mul)
- at most one numeric constant per sum / product, placed first in a product
- no Neg(Neg(...)) chains, no Pow with exponent 0 or 1
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, singledispatch
from typing import Mapping, Sequence, Tuple

import numpy as np

from lib.errors import UnknownParameterError

VARIABLE_NAMES = ("x", "y", "z")

# printing precedence, higher binds tighter
_PREC_ADD = 1
_PREC_NEG = 2
_PREC_MUL = 3
_PREC_POW = 4
_PREC_ATOM = 5


class Expr:
    precedence = _PREC_ATOM

    def evaluate(self, state: Sequence, params: Mapping[str, float]):
        raise NotImplementedError

    @cached_property
    def variables(self) -> frozenset:
        return frozenset()

    @cached_property
    def parameters(self) -> frozenset:
        return frozenset()

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0

    def evaluate_many(self, points: np.ndarray, params: Mapping[str, float]) -> np.ndarray:
        """Evaluate at every row of an (N, 3) array, always returning shape (N,)."""
        points = np.asarray(points, dtype=float)
        value = self.evaluate((points[:, 0], points[:, 1], points[:, 2]), params)
        return np.broadcast_to(np.asarray(value, dtype=float), (points.shape[0],)).copy()

    def __add__(self, other):
        return add(self, const(other))

    def __radd__(self, other):
        return add(const(other), self)

    def __sub__(self, other):
        return add(self, neg(const(other)))

    def __rsub__(self, other):
        return add(const(other), neg(self))

    def __mul__(self, other):
        return mul(self, const(other))

    def __rmul__(self, other):
        return mul(const(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: int):
        return power(self, exponent)

    def _wrap(self, child: "Expr", minimum: int) -> str:
        text = str(child)
        if child.precedence < minimum:
            return f"({text})"
        return text


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    @property
    def precedence(self):
        return _PREC_NEG if self.value < 0 else _PREC_ATOM

    def evaluate(self, state, params):
        return self.value

    def __str__(self):
        v = self.value
        if float(v).is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(float(v))


@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int

    def evaluate(self, state, params):
        return state[self.index]

    @cached_property
    def variables(self):
        return frozenset((self.index,))

    def __str__(self):
        return VARIABLE_NAMES[self.index]


@dataclass(frozen=True, eq=True)
class Param(Expr):
    name: str

    def evaluate(self, state, params):
        try:
            return params[self.name]
        except KeyError:
            raise UnknownParameterError(f"parameter '{self.name}' is not bound") from None

    @cached_property
    def parameters(self):
        return frozenset((self.name,))

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Add(Expr):
    terms: Tuple[Expr, ...]
    precedence = _PREC_ADD

    def evaluate(self, state, params):
        total = self.terms[0].evaluate(state, params)
        for term in self.terms[1:]:
            total = total + term.evaluate(state, params)
        return total

    @cached_property
    def variables(self):
        return frozenset().union(*(t.variables for t in self.terms))

    @cached_property
    def parameters(self):
        return frozenset().union(*(t.parameters for t in self.terms))

    def __str__(self):
        parts = [self._wrap(self.terms[0], _PREC_ADD)]
        for term in self.terms[1:]:
            if isinstance(term, Neg):
                parts.append(" - " + self._wrap(term.arg, _PREC_MUL))
            elif isinstance(term, Const) and term.value < 0:
                parts.append(" - " + str(Const(-term.value)))
            elif isinstance(term, Mul) and term.has_negative_coefficient():
                parts.append(" - " + str(neg(term)))
            else:
                parts.append(" + " + self._wrap(term, _PREC_NEG))
        return "".join(parts)


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    factors: Tuple[Expr, ...]
    precedence = _PREC_MUL

    def evaluate(self, state, params):
        total = self.factors[0].evaluate(state, params)
        for factor in self.factors[1:]:
            total = total * factor.evaluate(state, params)
        return total

    @cached_property
    def variables(self):
        return frozenset().union(*(f.variables for f in self.factors))

    @cached_property
    def parameters(self):
        return frozenset().union(*(f.parameters for f in self.factors))

    def has_negative_coefficient(self) -> bool:
        head = self.factors[0]
        return isinstance(head, Const) and head.value < 0

    def __str__(self):
        if self.has_negative_coefficient():
            return "-" + str(neg(self))
        return "*".join(self._wrap(f, _PREC_MUL) for f in self.factors)


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    precedence = _PREC_NEG

    def evaluate(self, state, params):
        return -self.arg.evaluate(state, params)

    @cached_property
    def variables(self):
        return self.arg.variables

    @cached_property
    def parameters(self):
        return self.arg.parameters

    def __str__(self):
        return "-" + self._wrap(self.arg, _PREC_POW)


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int
    precedence = _PREC_POW

    def evaluate(self, state, params):
        return self.base.evaluate(state, params) ** self.exponent

    @cached_property
    def variables(self):
        return self.base.variables

    @cached_property
    def parameters(self):
        return self.base.parameters

    def __str__(self):
        return f"{self._wrap(self.base, _PREC_ATOM)}^{self.exponent}"


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


def neg(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        return mul(Const(-e.factors[0].value), *e.factors[1:])
    return Neg(e)


def add(*terms: Expr) -> Expr:
    flat = []
    constant = 0.0
    for term in terms:
        term = const(term)
        items = term.terms if isinstance(term, Add) else (term,)
        for item in items:
            if isinstance(item, Const):
                constant += item.value
            else:
                flat.append(item)
    if constant != 0.0:
        flat.append(Const(constant))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors: Expr) -> Expr:
    flat = []
    coefficient = 1.0
    for factor in factors:
        factor = const(factor)
        # pull negations out so the sign ends up in the coefficient
        while isinstance(factor, Neg):
            coefficient = -coefficient
            factor = factor.arg
        items = factor.factors if isinstance(factor, Mul) else (factor,)
        for item in items:
            if isinstance(item, Const):
                coefficient *= item.value
            elif isinstance(item, Neg):
                coefficient = -coefficient
                flat.append(item.arg)
            else:
                flat.append(item)
    if coefficient == 0.0:
        return ZERO
    if not flat:
        return Const(coefficient)
    if coefficient == -1.0:
        body = flat[0] if len(flat) == 1 else Mul(tuple(flat))
        return Neg(body)
    if coefficient != 1.0:
        flat.insert(0, Const(coefficient))
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def power(base: Expr, exponent: int) -> Expr:
    base = const(base)
    if int(exponent) != exponent or exponent < 0:
        raise ValueError(f"exponent must be a non-negative integer, got {exponent}")
    exponent = int(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** exponent)
    if isinstance(base, Pow):
        return Pow(base.base, base.exponent * exponent)
    if isinstance(base, Neg):
        inner = power(base.arg, exponent)
        return inner if exponent % 2 == 0 else neg(inner)
    return Pow(base, exponent)


@singledispatch
def _diff(e: Expr, var: int) -> Expr:
    raise TypeError(f"cannot differentiate {type(e).__name__}")


@_diff.register
def _(e: Const, var):
    return ZERO


@_diff.register
def _(e: Param, var):
    return ZERO


@_diff.register
def _(e: Var, var):
    return ONE if e.index == var else ZERO


@_diff.register
def _(e: Add, var):
    return add(*(diff(t, var) for t in e.terms))


@_diff.register
def _(e: Mul, var):
    terms = []
    for i, factor in enumerate(e.factors):
        d = diff(factor, var)
        if d.is_zero():
            continue
        terms.append(mul(*e.factors[:i], d, *e.factors[i + 1:]))
    return add(*terms)


@_diff.register
def _(e: Neg, var):
    return neg(diff(e.arg, var))


@_diff.register
def _(e: Pow, var):
    return mul(Const(float(e.exponent)), power(e.base, e.exponent - 1), diff(e.base, var))


def diff(e: Expr, var: int) -> Expr:
    """Exact partial derivative with respect to state variable `var` (0, 1, 2)."""
    if var not in e.variables:
        return ZERO
    return _diff(e, var)


def gradient(e: Expr) -> Tuple[Expr, Expr, Expr]:
    return tuple(diff(e, i) for i in range(3))


def dot(u: Sequence[Expr], v: Sequence[Expr]) -> Expr:
    return add(*(mul(a, b) for a, b in zip(u, v)))


def cross(u: Sequence[Expr], v: Sequence[Expr]) -> Tuple[Expr, Expr, Expr]:
    return (
        add(mul(u[1], v[2]), neg(mul(u[2], v[1]))),
        add(mul(u[2], v[0]), neg(mul(u[0], v[2]))),
        add(mul(u[0], v[1]), neg(mul(u[1], v[0]))),
    )


def matvec(matrix: Sequence[Sequence[Expr]], v: Sequence[Expr]) -> Tuple[Expr, Expr, Expr]:
    return tuple(dot(row, v) for row in matrix)


@singledispatch
def _python(e: Expr, params) -> str:
    raise TypeError(f"cannot generate code for {type(e).__name__}")


@_python.register
def _(e: Const, params):
    return f"({e.value!r})"


@_python.register
def _(e: Var, params):
    return VARIABLE_NAMES[e.index]


@_python.register
def _(e: Param, params):
    return f"({float(e.evaluate(None, params))!r})"


@_python.register
def _(e: Add, params):
    return "(" + " + ".join(_python(t, params) for t in e.terms) + ")"


@_python.register
def _(e: Mul, params):
    return "(" + " * ".join(_python(f, params) for f in e.factors) + ")"


@_python.register
def _(e: Neg, params):
    return f"(-{_python(e.arg, params)})"


@_python.register
def _(e: Pow, params):
    return f"({_python(e.base, params)} ** {e.exponent})"


def to_python(e: Expr, params: Mapping[str, float]) -> str:
    """Python source for e over names x, y, z, with parameters inlined as literals."""
    return _python(e, params)

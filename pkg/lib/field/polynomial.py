"""Dense monomial expansion of expression trees with numerically bound parameters."""
from collections import defaultdict
from functools import singledispatch
from typing import Dict, Mapping, Optional, Sequence, Tuple

from lib.field.expr import Add, Const, Expr, Mul, Neg, Param, Pow, Var, add, const, mul, power

Monomial = Tuple[int, int, int]
Polynomial = Dict[Monomial, float]

_UNIT = (0, 0, 0)


def _poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    out = defaultdict(float, p)
    for mono, c in q.items():
        out[mono] += c
    return dict(out)


def _poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    out = defaultdict(float)
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            out[(m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2])] += c1 * c2
    return dict(out)


@singledispatch
def _expand(e: Expr, params, shift) -> Polynomial:
    raise TypeError(f"cannot expand {type(e).__name__}")


@_expand.register
def _(e: Const, params, shift):
    return {_UNIT: e.value}


@_expand.register
def _(e: Param, params, shift):
    return {_UNIT: float(e.evaluate(None, params))}


@_expand.register
def _(e: Var, params, shift):
    mono = [0, 0, 0]
    mono[e.index] = 1
    out = {tuple(mono): 1.0}
    if shift[e.index] != 0.0:
        out[_UNIT] = float(shift[e.index])
    return out


@_expand.register
def _(e: Add, params, shift):
    out: Polynomial = {}
    for term in e.terms:
        out = _poly_add(out, _expand(term, params, shift))
    return out


@_expand.register
def _(e: Mul, params, shift):
    out: Polynomial = {_UNIT: 1.0}
    for factor in e.factors:
        out = _poly_mul(out, _expand(factor, params, shift))
    return out


@_expand.register
def _(e: Neg, params, shift):
    return {mono: -c for mono, c in _expand(e.arg, params, shift).items()}


@_expand.register
def _(e: Pow, params, shift):
    base = _expand(e.base, params, shift)
    out: Polynomial = {_UNIT: 1.0}
    for _ in range(e.exponent):
        out = _poly_mul(out, base)
    return out


def expand(e: Expr, params: Mapping[str, float], shift: Sequence[float] = (0.0, 0.0, 0.0)) -> Polynomial:
    """
    Expand e(X + shift) into {(i, j, k): coefficient of x^i y^j z^k}.
    Parameters are replaced by their bound numeric values; zero coefficients are dropped.
    """
    shift = tuple(float(s) for s in shift)
    return {mono: c for mono, c in _expand(e, params, shift).items() if c != 0.0}


def degree(e: Expr) -> int:
    return degree_of(_expand(e, _AnyParams(), (0.0, 0.0, 0.0)))


class _AnyParams(dict):
    # generic value, avoids accidental cancellation
    def __missing__(self, key):
        return 1.2345678901


def degree_of(poly: Polynomial) -> int:
    return max((sum(mono) for mono, c in poly.items() if c != 0.0), default=0)


def _leading(poly: Polynomial) -> Monomial:
    # graded lexicographic order
    return max(poly, key=lambda m: (sum(m), m))


def divide(p: Polynomial, q: Polynomial, rtol: float = 1e-9) -> Optional[Polynomial]:
    """
    Exact quotient p / q, or None when q does not divide p. Remainder coefficients
    below `rtol` times the largest coefficient of p count as zero.
    """
    q = {mono: c for mono, c in q.items() if c != 0.0}
    if not q:
        raise ZeroDivisionError("division by the zero polynomial")
    rest = {mono: c for mono, c in p.items() if c != 0.0}
    floor = rtol * max((abs(c) for c in rest.values()), default=0.0)
    lead_q = _leading(q)
    quotient: Polynomial = defaultdict(float)
    while True:
        rest = {mono: c for mono, c in rest.items() if abs(c) > floor}
        if not rest:
            return {mono: c for mono, c in quotient.items() if c != 0.0}
        lead = _leading(rest)
        if any(a < b for a, b in zip(lead, lead_q)):
            return None
        mono = tuple(a - b for a, b in zip(lead, lead_q))
        coefficient = rest[lead] / q[lead_q]
        quotient[mono] += coefficient
        rest = _poly_add(rest, _poly_mul({mono: -coefficient}, q))
        rest.pop(lead, None)


def strip_factors(p: Polynomial, factors: Sequence[Polynomial], rtol: float = 1e-9) -> Polynomial:
    """Divide every nonconstant factor out of p as many times as it divides."""
    out = dict(p)
    for q in factors:
        if degree_of(q) == 0:
            continue
        while out:
            quotient = divide(out, q, rtol)
            if quotient is None:
                break
            out = quotient
    return out


def to_expr(poly: Polynomial) -> Expr:
    """Rebuild an expression tree, highest total degree first."""
    terms = []
    for mono in sorted(poly, key=lambda m: (-sum(m), tuple(-i for i in m))):
        c = poly[mono]
        if c == 0.0:
            continue
        factors = [power(Var(i), n) for i, n in enumerate(mono) if n]
        terms.append(mul(const(c), *factors))
    return add(*terms)

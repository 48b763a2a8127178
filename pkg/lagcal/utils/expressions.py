"""
Expression-string grammar for Hamiltonians, heights and model coefficients.

Strings are parsed with sympy over a minimal vocabulary: arithmetic, ``^``
or ``**`` powers, ``sin``, ``cos``, ``exp``, ``sqrt``, ``pi``, ``I`` and the
smooth compactly supported ``bump``.
"""

import re
from functools import lru_cache
from typing import Iterable, Tuple, Union

import sympy as sp
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .errors import ExpressionError

TIME = sp.Symbol("t", real=True)
FAMILY = sp.Symbol("s", real=True)

_ALLOWED_CHARS = re.compile(r"^[A-Za-z0-9_\s\.\+\-\*/\^\(\),]*$")
_TRANSFORMATIONS = standard_transformations + (convert_xor,)


def bump(arg) -> sp.Expr:
    """exp(1 - 1/(1 - a^2)) on |a| < 1, zero elsewhere; equals 1 at a = 0."""
    a2 = sp.sympify(arg) ** 2
    return sp.Piecewise((sp.exp(1 - 1 / (1 - a2)), a2 < 1), (sp.Integer(0), True))


FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "exp": sp.exp,
    "sqrt": sp.sqrt,
    "bump": bump,
}

CONSTANTS = {"pi": sp.pi, "I": sp.I}


@lru_cache(maxsize=None)
def coordinate_names(dim: int) -> Tuple[str, ...]:
    """Interleaved chart names: (x, y) in dimension 2, else (x1, y1, ..., xn, yn)."""
    if dim <= 0 or dim % 2:
        raise ValueError(f"ambient dimension must be even and positive, got {dim}")
    if dim == 2:
        return ("x", "y")
    names = []
    for j in range(1, dim // 2 + 1):
        names.extend((f"x{j}", f"y{j}"))
    return tuple(names)


@lru_cache(maxsize=None)
def coordinate_symbols(dim: int) -> Tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(name, real=True) for name in coordinate_names(dim))


def parse_expression(
    text: Union[str, int, float, sp.Expr],
    variables: Iterable[sp.Symbol] = (),
) -> sp.Expr:
    """Parse ``text`` into a sympy expression over ``variables``."""
    if isinstance(text, sp.Basic):
        expr = text
    elif isinstance(text, (int, float)):
        return sp.sympify(text)
    else:
        if not isinstance(text, str) or not text.strip():
            raise ExpressionError(str(text), "empty expression")
        if not _ALLOWED_CHARS.match(text) or "__" in text:
            raise ExpressionError(text, "illegal characters")
        variables = tuple(variables)
        local_dict = {str(v): v for v in variables}
        local_dict.update(FUNCTIONS)
        local_dict.update(CONSTANTS)
        try:
            expr = parse_expr(text, local_dict=local_dict, transformations=_TRANSFORMATIONS)
        except Exception as exc:  # sympy raises a zoo of types here
            raise ExpressionError(text, str(exc) or type(exc).__name__) from None
        if not isinstance(expr, sp.Basic):
            raise ExpressionError(text, "not an expression")
    allowed = set(variables)
    unknown = sorted(str(s) for s in expr.free_symbols if s not in allowed)
    if unknown:
        raise ExpressionError(str(text), f"unknown names {unknown}")
    for func in expr.atoms(sp.Function):
        if not isinstance(func, (sp.sin, sp.cos, sp.exp, sp.Piecewise)):
            raise ExpressionError(str(text), f"function '{func.func}' not allowed")
    return expr

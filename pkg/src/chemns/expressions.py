"""Closed-form coordinate expressions for initial data and the potential.

Expressions are written over x, y (and z in 3D) with the usual arithmetic
operators plus sin, cos, tan, exp, log, sqrt and the constants pi and e.
Gradients are obtained by exact symbolic differentiation, so the forcing
carries no finite-difference error of its own.
"""

from __future__ import annotations

import re

import numpy as np
import sympy as sp

_COORDS = sp.symbols("x y z")

_ALLOWED_LOCALS = {
    "x": _COORDS[0],
    "y": _COORDS[1],
    "z": _COORDS[2],
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "pi": sp.pi,
    "e": sp.E,
}


class ExpressionError(ValueError):
    pass


_TOKEN = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_CHARSET = re.compile(r"[A-Za-z0-9_+\-*/().,^eE\s]*\Z")


class CoordExpression:
    """A parsed coordinate expression with exact derivatives."""

    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        if not _CHARSET.match(text):
            raise ExpressionError(f"expression {text!r} contains characters "
                                  "outside the allowed grammar")
        for name in _TOKEN.findall(text):
            if name not in _ALLOWED_LOCALS:
                raise ExpressionError(f"expression {text!r} uses unknown "
                                      f"name {name!r}")
        try:
            expr = sp.sympify(text, locals=dict(_ALLOWED_LOCALS), rational=False)
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise ExpressionError(f"cannot parse expression {text!r}: {exc}") from exc
        allowed = set(_COORDS[:dim])
        extra = expr.free_symbols - allowed
        if extra:
            names = ", ".join(sorted(str(s) for s in extra))
            raise ExpressionError(f"expression {text!r} uses unknown symbols: {names}")
        self.expr = expr
        self._fn = sp.lambdify(_COORDS[:dim], expr, modules="numpy")

    def __call__(self, *coords):
        vals = np.asarray(self._fn(*coords), dtype=np.float64)
        return np.broadcast_to(vals, np.broadcast(*coords).shape).copy() \
            if vals.shape != np.broadcast(*coords).shape else vals

    def derivative(self, axis: int) -> "CoordExpression":
        d = CoordExpression.__new__(CoordExpression)
        d.text = f"d/d{_COORDS[axis]}({self.text})"
        d.dim = self.dim
        d.expr = sp.diff(self.expr, _COORDS[axis])
        d._fn = sp.lambdify(_COORDS[: self.dim], d.expr, modules="numpy")
        return d


def sample_on_cells(expr: CoordExpression, grid):
    """Evaluate on cell centers, returning a plain ndarray."""
    return expr(*grid.center_mesh())


def sample_gradient_on_faces(expr: CoordExpression, grid):
    """Exact gradient components sampled on the matching face lattices.

    Boundary faces are zeroed: face gradients feed forcing terms that must
    vanish on no-slip walls.
    """
    from .grid import FaceField, _sl

    comps = []
    for a in range(grid.dim):
        vals = expr.derivative(a)(*grid.face_mesh(a))
        vals = np.array(vals, dtype=np.float64)
        vals[_sl(grid.dim, a, 0)] = 0.0
        vals[_sl(grid.dim, a, -1)] = 0.0
        comps.append(vals)
    return FaceField(grid, comps)

from typing import Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from lib.errors import UnknownParameterError
from lib.field.expr import Expr, VARIABLE_NAMES, const, to_python

DerivedRule = Callable[[Mapping[str, float]], float]


class VectorField:
    """
    Three polynomial components F = (F_x, F_y, F_z) with named, late-bound parameters.

    `params` holds the tunable parameters and their defaults, in declaration order.
    `derived` holds parameters computed from the tunable ones at bind time (for
    coefficients such as c - x_fp that the expression grammar cannot state directly);
    they may be referenced by the components but never overridden.
    """

    def __init__(self, exprs: Sequence[Expr], params: Optional[Mapping[str, float]] = None,
                 derived: Optional[Mapping[str, DerivedRule]] = None):
        if len(exprs) != 3:
            raise ValueError(f"a vector field needs exactly 3 components, got {len(exprs)}")
        self.exprs = tuple(const(e) for e in exprs)
        self.params: Dict[str, float] = {name: float(value) for name, value in (params or {}).items()}
        self.derived: Dict[str, DerivedRule] = dict(derived or {})

        overlap = set(self.params) & set(self.derived)
        if overlap:
            raise ValueError(f"parameters declared both tunable and derived: {sorted(overlap)}")
        referenced = frozenset().union(*(e.parameters for e in self.exprs))
        undeclared = referenced - set(self.params) - set(self.derived)
        if undeclared:
            raise UnknownParameterError(f"undeclared parameter(s) {sorted(undeclared)}")
        self._jacobian = None

    def bind(self, overrides: Optional[Mapping[str, float]] = None) -> Dict[str, float]:
        """Return a full parameter binding: defaults, then overrides, then derived values."""
        bound = dict(self.params)
        for name, value in (overrides or {}).items():
            if name in self.derived:
                raise UnknownParameterError(f"'{name}' is derived from other parameters and cannot be set")
            if name not in bound:
                known = ", ".join(self.params) or "none"
                raise UnknownParameterError(f"unknown parameter '{name}' (declared: {known})")
            bound[name] = float(value)
        for name, rule in self.derived.items():
            bound[name] = float(rule(bound))
        return bound

    @property
    def jacobian(self):
        if self._jacobian is None:
            from lib.field.derivatives import jacobian
            self._jacobian = jacobian(self)
        return self._jacobian

    @property
    def is_affine(self) -> bool:
        return all(not entry.variables for row in self.jacobian.matrix for entry in row)

    def evaluate(self, state, params: Mapping[str, float]) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        return np.array([float(e.evaluate(state, params)) for e in self.exprs])

    def evaluate_many(self, points, params: Mapping[str, float]) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.column_stack([e.evaluate_many(points, params) for e in self.exprs])

    def rhs(self, params: Mapping[str, float]):
        """Right-hand side callback `f(t, X)` for scipy integrators, compiled to Python source."""
        components = ", ".join(to_python(e, params) for e in self.exprs)
        source = f"def _rhs(t, state):\n    x, y, z = state\n    return np.array(({components}), dtype=float)\n"
        namespace = {"np": np}
        exec(compile(source, "<vector-field>", "exec"), namespace)
        return namespace["_rhs"]

    def __str__(self):
        lines = [f"param {name} = {value!r}" for name, value in self.params.items()]
        lines += [f"# derived parameter: {name}" for name in self.derived]
        lines += [f"d{VARIABLE_NAMES[i]} = {e}" for i, e in enumerate(self.exprs)]
        return "\n".join(lines) + "\n"

    def __repr__(self):
        comps = ", ".join(str(e) for e in self.exprs)
        return f"VectorField([{comps}], params={self.params})"

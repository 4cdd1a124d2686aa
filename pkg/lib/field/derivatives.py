"""
Exact time derivatives along the flow X' = F(X):

    X'   = F
    X''  = J X'
    X''' = J X'' + (dJ/dt) X'      with  dJ/dt = sum_k (dJ/dx_k) F_k
"""
from dataclasses import dataclass
from typing import Mapping, Tuple

import numpy as np

from lib.field.expr import Expr, add, diff, matvec, mul

Matrix = Tuple[Tuple[Expr, Expr, Expr], Tuple[Expr, Expr, Expr], Tuple[Expr, Expr, Expr]]


def evaluate_matrix(matrix: Matrix, points: np.ndarray, params: Mapping[str, float]) -> np.ndarray:
    out = np.empty((points.shape[0], 3, 3))
    for i in range(3):
        for j in range(3):
            out[:, i, j] = matrix[i][j].evaluate_many(points, params)
    return out


class SymbolicJacobian:
    def __init__(self, matrix: Matrix, material: Matrix):
        self.matrix = matrix
        self.material = material

    def evaluate(self, state, params: Mapping[str, float]) -> np.ndarray:
        return evaluate_matrix(self.matrix, np.atleast_2d(np.asarray(state, dtype=float)), params)[0]

    def evaluate_material(self, state, params: Mapping[str, float]) -> np.ndarray:
        return evaluate_matrix(self.material, np.atleast_2d(np.asarray(state, dtype=float)), params)[0]

    def __repr__(self):
        rows = "; ".join("[" + ", ".join(str(e) for e in row) + "]" for row in self.matrix)
        return f"SymbolicJacobian({rows})"


def jacobian(f) -> SymbolicJacobian:
    F = f.exprs
    matrix = tuple(tuple(diff(F[i], j) for j in range(3)) for i in range(3))
    material = tuple(
        tuple(add(*(mul(diff(matrix[i][j], k), F[k]) for k in range(3))) for j in range(3))
        for i in range(3)
    )
    return SymbolicJacobian(matrix, material)


@dataclass
class DerivativeStack:
    """(X, X', X'', X''') with J and dJ/dt; arrays carry a leading sample axis when batched."""
    state: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray
    jac: np.ndarray
    jac_dot: np.ndarray

    def __len__(self):
        return 1 if self.state.ndim == 1 else self.state.shape[0]

    def __getitem__(self, index) -> "DerivativeStack":
        return DerivativeStack(self.state[index], self.velocity[index], self.acceleration[index],
                               self.jerk[index], self.jac[index], self.jac_dot[index])


def time_derivatives_batch(f, params: Mapping[str, float], points) -> DerivativeStack:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    sym = f.jacobian
    velocity = f.evaluate_many(points, params)
    jac = evaluate_matrix(sym.matrix, points, params)
    jac_dot = evaluate_matrix(sym.material, points, params)
    acceleration = np.einsum("nij,nj->ni", jac, velocity)
    jerk = np.einsum("nij,nj->ni", jac, acceleration) + np.einsum("nij,nj->ni", jac_dot, velocity)
    return DerivativeStack(points, velocity, acceleration, jerk, jac, jac_dot)


def time_derivatives(f, params: Mapping[str, float], state) -> DerivativeStack:
    return time_derivatives_batch(f, params, np.asarray(state, dtype=float).reshape(1, 3))[0]


def symbolic_derivatives(f):
    """Symbolic (X', X'', J X'', (dJ/dt) X') as tuples of Expr."""
    sym = f.jacobian
    velocity = f.exprs
    acceleration = matvec(sym.matrix, velocity)
    jerk_static = matvec(sym.matrix, acceleration)
    jerk_transport = matvec(sym.material, velocity)
    return velocity, acceleration, jerk_static, jerk_transport

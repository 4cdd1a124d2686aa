from lib.field.expr import Expr, Const, Var, Param, Add, Mul, Neg, Pow, add, mul, neg, power, const, diff, gradient
from lib.field.vector_field import VectorField
from lib.field.parser import parse_expression, parse_field, load_field_file, field_from_components
from lib.field.derivatives import SymbolicJacobian, DerivativeStack, jacobian, time_derivatives, time_derivatives_batch

"""Second-order forward-mode differentiation of parsed expressions.

A :class:`Jet2` carries the value, gradient and Hessian of a scalar function of
the chart parameters.  Every propagation rule builds the Hessian from symmetric
pieces (scaled Hessians, ``g g^T``, ``g h^T + h g^T``), so it is symmetric
bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .expr import BinOp, Call, Expr, Neg, Num, Param, Pow, to_text

# |cos x| below this counts as a pole of tan (pi/2 is not representable)
TAN_POLE_TOL = 1e-12


@dataclass(frozen=True)
class Jet2:
    value: float
    grad: np.ndarray
    hess: np.ndarray

    @classmethod
    def constant(cls, value: float, s: int) -> "Jet2":
        return cls(float(value), np.zeros(s), np.zeros((s, s)))

    @classmethod
    def variable(cls, value: float, index: int, s: int) -> "Jet2":
        g = np.zeros(s)
        g[index] = 1.0
        return cls(float(value), g, np.zeros((s, s)))

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hess)

    def __mul__(self, other: "Jet2") -> "Jet2":
        cross = self.grad[:, None] * other.grad[None, :]
        return Jet2(
            self.value * other.value,
            self.value * other.grad + other.value * self.grad,
            self.value * other.hess + other.value * self.hess + (cross + cross.T),
        )

    def scale(self, c: float) -> "Jet2":
        return Jet2(c * self.value, c * self.grad, c * self.hess)

    def apply(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Chain rule for a scalar function with value/derivatives f0, f1, f2 at ``value``."""
        g = self.grad
        return Jet2(f0, f1 * g, f1 * self.hess + f2 * (g[:, None] * g[None, :]))


def _reciprocal(u: Jet2, node) -> Jet2:
    if u.value == 0.0:
        raise DomainError("division by zero", to_text(node))
    inv = 1.0 / u.value
    return u.apply(inv, -inv * inv, 2.0 * inv ** 3)


def _power(u: Jet2, n: int, node) -> Jet2:
    x = u.value
    if n == 0:
        return Jet2.constant(1.0, u.grad.shape[0])
    if n < 0 and x == 0.0:
        raise DomainError("negative power of zero", to_text(node))
    f0 = x ** n
    f1 = n * x ** (n - 1) if n != 1 else 1.0
    f2 = n * (n - 1) * x ** (n - 2) if n not in (0, 1) else 0.0
    return u.apply(f0, f1, f2)


def _call(func: str, u: Jet2, node) -> Jet2:
    x = u.value
    if func == "sin":
        sx, cx = math.sin(x), math.cos(x)
        return u.apply(sx, cx, -sx)
    if func == "cos":
        sx, cx = math.sin(x), math.cos(x)
        return u.apply(cx, -sx, -cx)
    if func == "tan":
        if abs(math.cos(x)) < TAN_POLE_TOL:
            raise DomainError("tan at a pole", to_text(node))
        t = math.tan(x)
        sec2 = 1.0 + t * t
        return u.apply(t, sec2, 2.0 * t * sec2)
    if func == "exp":
        e = math.exp(x)
        return u.apply(e, e, e)
    if func == "log":
        if x <= 0.0:
            raise DomainError("log of nonpositive value", to_text(node))
        return u.apply(math.log(x), 1.0 / x, -1.0 / (x * x))
    if func == "sqrt":
        if x <= 0.0:
            raise DomainError("sqrt of nonpositive value", to_text(node))
        r = math.sqrt(x)
        return u.apply(r, 0.5 / r, -0.25 / (r * x))
    raise ValueError(f"unknown function {func!r}")


def eval_jet2(node: Expr, point) -> Jet2:
    """Value, gradient and Hessian of ``node`` at the chart point ``point``."""
    point = np.asarray(point, dtype=float).reshape(-1)
    return _jet(node, point, point.shape[0])


def _jet(node: Expr, point: np.ndarray, s: int) -> Jet2:
    if isinstance(node, Num):
        return Jet2.constant(node.value, s)
    if isinstance(node, Param):
        if node.index > s:
            raise DomainError("parameter out of range", to_text(node))
        return Jet2.variable(point[node.index - 1], node.index - 1, s)
    if isinstance(node, Neg):
        return -_jet(node.arg, point, s)
    if isinstance(node, BinOp):
        # constant factors are common in data files; scaling skips the product rule
        if node.op == "*" and isinstance(node.left, Num):
            return _jet(node.right, point, s).scale(node.left.value)
        if node.op in "*/" and isinstance(node.right, Num):
            c = node.right.value
            if node.op == "/" and c == 0.0:
                raise DomainError("division by zero", to_text(node.right))
            return _jet(node.left, point, s).scale(c if node.op == "*" else 1.0 / c)
        left = _jet(node.left, point, s)
        right = _jet(node.right, point, s)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            return left * _reciprocal(right, node.right)
        raise ValueError(f"unknown operator {node.op!r}")
    if isinstance(node, Pow):
        return _power(_jet(node.base, point, s), node.exponent, node)
    if isinstance(node, Call):
        return _call(node.func, _jet(node.arg, point, s), node)
    raise TypeError(f"not an expression node: {node!r}")


def eval_value(node: Expr, point) -> float:
    """Plain value, without derivatives (used by finite-difference oracles)."""
    point = np.asarray(point, dtype=float).reshape(-1)
    return _value(node, point)


def _value(node: Expr, p: np.ndarray) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Param):
        return float(p[node.index - 1])
    if isinstance(node, Neg):
        return -_value(node.arg, p)
    if isinstance(node, BinOp):
        x, y = _value(node.left, p), _value(node.right, p)
        if node.op == "+":
            return x + y
        if node.op == "-":
            return x - y
        if node.op == "*":
            return x * y
        if y == 0.0:
            raise DomainError("division by zero", to_text(node.right))
        return x / y
    if isinstance(node, Pow):
        x = _value(node.base, p)
        if node.exponent < 0 and x == 0.0:
            raise DomainError("negative power of zero", to_text(node))
        return x ** node.exponent if node.exponent else 1.0
    if isinstance(node, Call):
        x = _value(node.arg, p)
        if node.func in ("log", "sqrt") and x <= 0.0:
            raise DomainError(f"{node.func} of nonpositive value", to_text(node))
        if node.func == "tan" and abs(math.cos(x)) < TAN_POLE_TOL:
            raise DomainError("tan at a pole", to_text(node))
        return getattr(math, node.func)(x)
    raise TypeError(f"not an expression node: {node!r}")


def eval_vector(nodes, point) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack jets of a list of expressions: value (n,), jacobian (n, s), hessian (n, s, s)."""
    jets = [eval_jet2(e, point) for e in nodes]
    return (
        np.array([j.value for j in jets]),
        np.array([j.grad for j in jets]),
        np.array([j.hess for j in jets]),
    )


def eval_vector_value(nodes, point) -> np.ndarray:
    return np.array([eval_value(e, point) for e in nodes])

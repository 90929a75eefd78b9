"""Tiny arithmetic expressions for boundary data: + - * / ^, x, y, t, constants."""

from __future__ import annotations

import ast
import math

import numpy as np

_NAMES = {"pi": math.pi, "e": math.e}
_VARS = ("x", "y", "t")
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


def _check(node):
    if isinstance(node, ast.Expression):
        return _check(node.body)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check(node.left)
        _check(node.right)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        _check(node.operand)
        return
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return
    if isinstance(node, ast.Name) and (node.id in _VARS or node.id in _NAMES):
        return
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)}")


def _eval(node, env):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        return float(node.value)
    if node.id in env:
        return env[node.id]
    return _NAMES[node.id]


class Expression:
    """Vectorized evaluator: ``Expression("x^2 - y")(points, t=0.0)``."""

    def __init__(self, text: str | float | int):
        self.text = str(text)
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.text!r}: {exc.msg}") from None
        _check(tree)
        self._tree = tree.body

    def __call__(self, points, t: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        env = {"x": pts[:, 0], "y": pts[:, 1], "t": float(t)}
        with np.errstate(all="ignore"):
            out = np.broadcast_to(np.asarray(_eval(self._tree, env), float), (len(pts),))
        return np.array(out, float)

    def at_time(self, t: float):
        return lambda pts: self(pts, t)

    def __repr__(self):
        return f"Expression({self.text!r})"

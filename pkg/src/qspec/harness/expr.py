"""A tiny, safe expression grammar for operator profiles.

Expressions are parsed with :mod:`ast` and only whitelisted nodes are
accepted. Variables: ``x1 .. xd`` (coordinates), ``r`` (the norm of x),
``s`` (the coordinate sum) and, for coordinatewise maps, ``t`` (the current
coordinate). Constants ``pi`` and ``e``. Functions: sin, cos, tan, tanh,
exp, log, sqrt, abs, sign, min, max.
"""

from __future__ import annotations

import ast
import operator
from typing import Callable

import numpy as np

from ..errors import ConfigError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "tanh": np.tanh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sign": np.sign,
    "min": np.minimum,
    "max": np.maximum,
}
_CONSTS = {"pi": np.pi, "e": np.e}


def _check(node: ast.AST, names: set, src: str):
    if isinstance(node, ast.Expression):
        return _check(node.body, names, src)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return
    if isinstance(node, ast.Name):
        if node.id not in names and node.id not in _CONSTS:
            raise ConfigError(f"unknown variable {node.id!r} in expression {src!r}")
        return
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check(node.left, names, src)
        _check(node.right, names, src)
        return
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        _check(node.operand, names, src)
        return
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords:
        expected = 2 if node.func.id in ("min", "max") else 1
        if len(node.args) != expected:
            raise ConfigError(f"{node.func.id} takes {expected} argument(s) in {src!r}")
        for a in node.args:
            _check(a, names, src)
        return
    raise ConfigError(f"unsupported syntax {type(node).__name__} in expression {src!r}")


def _eval(node: ast.AST, env: dict):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, env))
    return _FUNCS[node.func.id](*(_eval(a, env) for a in node.args))


def _parse(src: str, names: set) -> ast.Expression:
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {src!r}: {exc.msg}") from None
    _check(tree, names, src)
    return tree


def _env(X: np.ndarray, norms: np.ndarray) -> dict:
    env = {f"x{i + 1}": X[:, i] for i in range(X.shape[1])}
    env["r"] = norms
    env["s"] = X.sum(axis=1)
    return env


def compile_scalar(src: str, dim: int, norm_fn: Callable[[np.ndarray], np.ndarray]) -> Callable:
    """Compile ``src`` to a map (n, dim) -> (n,)."""
    names = {f"x{i + 1}" for i in range(dim)} | {"r", "s"}
    tree = _parse(src, names)

    def fn(X):
        X = np.atleast_2d(X)
        with np.errstate(all="ignore"):
            out = _eval(tree, _env(X, norm_fn(X)))
        return np.broadcast_to(np.asarray(out, dtype=float), (len(X),)).copy()

    return fn


def compile_coordinatewise(src: str, dim: int, norm_fn: Callable[[np.ndarray], np.ndarray]) -> Callable:
    """Compile ``src`` (may use ``t``) to a coordinatewise map (n, dim) -> (n, dim)."""
    names = {f"x{i + 1}" for i in range(dim)} | {"r", "s", "t"}
    tree = _parse(src, names)

    def fn(X):
        X = np.atleast_2d(X)
        env = {k: (v[:, None] if np.ndim(v) == 1 else v) for k, v in _env(X, norm_fn(X)).items()}
        env["t"] = X
        with np.errstate(all="ignore"):
            out = _eval(tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), X.shape).copy()

    return fn

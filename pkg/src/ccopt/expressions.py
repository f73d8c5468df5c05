"""Safe arithmetic expression compiler for JSON-defined problems.

Expressions are restricted to arithmetic on named variables, numeric
literals, and a small table of elementwise functions, so that problem
files can be loaded without executing arbitrary code. Compiled
expressions evaluate with numpy and therefore broadcast over array
inputs.
"""

from __future__ import annotations

import ast

import numpy as np

_FUNCTIONS = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "tanh": np.tanh,
    "minimum": np.minimum,
    "maximum": np.maximum,
}

_CONSTANTS = {
    "pi": np.pi,
    "e": np.e,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}

_UNARYOPS = {
    ast.USub: np.negative,
    ast.UAdd: np.positive,
}


def compile_expression(text, variables):
    """Compile ``text`` into a callable taking an environment dict.

    ``variables`` is the set of names the expression may reference in
    addition to the built-in constants and functions. Unknown names,
    statements, comparisons, attribute access and any other non-arithmetic
    syntax raise ValueError.
    """
    variables = set(variables)
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"invalid expression: {exc}") from exc

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARYOPS:
            check(node.operand)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ValueError(f"non-numeric literal {node.value!r}")
        elif isinstance(node, ast.Name):
            if node.id not in variables and node.id not in _CONSTANTS:
                raise ValueError(f"unknown name {node.id!r}")
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
                raise ValueError("only calls to the built-in function table are allowed")
            if node.keywords:
                raise ValueError("keyword arguments are not allowed")
            for arg in node.args:
                check(arg)
        else:
            raise ValueError(f"disallowed syntax: {type(node).__name__}")

    check(tree)
    code = compile(tree, "<expression>", "eval")
    names = dict(_CONSTANTS)
    names.update(_FUNCTIONS)

    def evaluate(env):
        scope = dict(names)
        scope.update(env)
        return eval(code, {"__builtins__": {}}, scope)

    return evaluate

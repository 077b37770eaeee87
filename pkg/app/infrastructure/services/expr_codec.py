"""
JSON codec for expressions: nested lists, one list per node.

    ["c", value]            constant
    ["v", name, kind]       variable
    ["~", e]                bitwise not
    ["t", table, e]         table application
    ["<<", amount, e]       shift (also ">>")
    [op, l, r]              binary operator
"""

import json
from typing import Dict, List, Sequence

from app.domain.entities.expr import POOL, Expr, ExprKind, ExprPool, Op, VarKind, topological_nodes

_BINARY = {op.value: op for op in Op if op.is_binary}


def encode(expr: Expr) -> list:
    encoded: Dict[int, list] = {}
    for node in topological_nodes((expr,)):
        if node.kind == ExprKind.CONST:
            encoded[node.id] = ["c", node.value]
        elif node.kind == ExprKind.VAR:
            encoded[node.id] = ["v", node.name, node.var_kind.value]
        elif node.kind == ExprKind.NOT:
            encoded[node.id] = ["~", encoded[node.left.id]]
        elif node.kind == ExprKind.TABLE:
            encoded[node.id] = ["t", node.table, encoded[node.left.id]]
        elif node.kind == ExprKind.SHIFT:
            encoded[node.id] = [node.op.value, node.amount, encoded[node.left.id]]
        else:
            encoded[node.id] = [node.op.value, encoded[node.left.id], encoded[node.right.id]]
    return encoded[expr.id]


def decode(data: list, width: int, pool: ExprPool = POOL) -> Expr:
    # Explicit stack: encoded trees can be deeper than the recursion limit
    results: List[Expr] = []
    stack = [(data, False)]
    while stack:
        item, expanded = stack.pop()
        tag = item[0]
        if tag == "c":
            results.append(pool.const(int(item[1]), width))
            continue
        if tag == "v":
            results.append(pool.var(item[1], VarKind(item[2])))
            continue
        children = [item[1]] if tag == "~" else [item[2]] if tag in ("t", "<<", ">>") else [item[1], item[2]]
        if not expanded:
            stack.append((item, True))
            for child in reversed(children):
                stack.append((child, False))
            continue
        args = results[len(results) - len(children):]
        del results[len(results) - len(children):]
        if tag == "~":
            results.append(pool.not_(args[0]))
        elif tag == "t":
            results.append(pool.table(item[1], args[0]))
        elif tag in ("<<", ">>"):
            results.append(pool.shift(Op(tag), int(item[1]), args[0]))
        elif tag in _BINARY:
            results.append(pool.binary(_BINARY[tag], args[0], args[1]))
        else:
            raise ValueError(f"unknown expression tag {tag!r}")
    return results[0]


def dumps(exprs: Sequence[Expr]) -> str:
    return json.dumps([encode(e) for e in exprs], separators=(",", ":"))


def loads(text: str, width: int, pool: ExprPool = POOL) -> List[Expr]:
    return [decode(item, width, pool) for item in json.loads(text)]

"""
Hash-consed expression DAGs over κ-bit words.

Every node is created through an `ExprPool`; structurally equal nodes are the
same Python object, so identity comparison is structural comparison. Per-node
analyses (variables, random variables, dominant variables, sizes) are
computed lazily and cached on the node.
"""

from __future__ import annotations

import threading
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple


class Op(str, Enum):
    """Operators of the masking language"""
    XOR = "^"
    AND = "&"
    OR = "|"
    GMUL = "@"
    ADD = "+"
    SUB = "-"
    MUL = "*"
    NOT = "~"
    SHL = "<<"
    SHR = ">>"

    @property
    def is_binary(self) -> bool:
        return self in BINARY_OPS

    @property
    def is_shift(self) -> bool:
        return self in (Op.SHL, Op.SHR)


BINARY_OPS = frozenset({Op.XOR, Op.AND, Op.OR, Op.GMUL, Op.ADD, Op.SUB, Op.MUL})
COMMUTATIVE_OPS = frozenset({Op.XOR, Op.AND, Op.OR, Op.GMUL, Op.ADD, Op.MUL})
# Operators through which a single random occurrence keeps the result uniform
INVERTIBLE_OPS = frozenset({Op.XOR, Op.ADD, Op.SUB})


class ExprKind(str, Enum):
    """Node kinds"""
    CONST = "const"
    VAR = "var"
    NOT = "not"
    TABLE = "table"
    BIN = "bin"
    SHIFT = "shift"


class VarKind(str, Enum):
    """Classification of a leaf variable"""
    PUBLIC = "public"
    PRIVATE = "private"
    RANDOM = "random"
    COLLAPSED = "collapsed"

    @property
    def is_random(self) -> bool:
        return self in (VarKind.RANDOM, VarKind.COLLAPSED)


class Expr:
    """Immutable expression node. Build through `ExprPool`, never directly."""

    __hash__ = object.__hash__

    def __init__(
        self,
        node_id: int,
        kind: ExprKind,
        op: Optional[Op] = None,
        children: Tuple["Expr", ...] = (),
        value: Optional[int] = None,
        name: Optional[str] = None,
        var_kind: Optional[VarKind] = None,
        table: Optional[str] = None,
        amount: Optional[int] = None,
    ):
        self.id = node_id
        self.kind = kind
        self.op = op
        self.children = children
        self.value = value
        self.name = name
        self.var_kind = var_kind
        self.table = table
        self.amount = amount

    def __eq__(self, other: object) -> bool:
        return self is other

    # Structure

    @property
    def is_const(self) -> bool:
        return self.kind == ExprKind.CONST

    @property
    def is_var(self) -> bool:
        return self.kind == ExprKind.VAR

    @property
    def left(self) -> "Expr":
        return self.children[0]

    @property
    def right(self) -> "Expr":
        return self.children[-1]

    # Memoized analyses

    @cached_property
    def vars(self) -> FrozenSet[str]:
        """Names of all variables occurring in the expression."""
        if self.kind == ExprKind.VAR:
            return frozenset((self.name,))
        result: FrozenSet[str] = frozenset()
        for child in self.children:
            result = result | child.vars
        return result

    @cached_property
    def rvars(self) -> FrozenSet[str]:
        """Names of the random (or collapsed) variables occurring in the expression."""
        if self.kind == ExprKind.VAR:
            return frozenset((self.name,)) if self.var_kind.is_random else frozenset()
        result: FrozenSet[str] = frozenset()
        for child in self.children:
            result = result | child.rvars
        return result

    @cached_property
    def var_kinds(self) -> Dict[str, VarKind]:
        if self.kind == ExprKind.VAR:
            return {self.name: self.var_kind}
        kinds: Dict[str, VarKind] = {}
        for child in self.children:
            kinds.update(child.var_kinds)
        return kinds

    @cached_property
    def dominators(self) -> FrozenSet[str]:
        """Random variables occurring exactly once along an invertible path."""
        if self.kind == ExprKind.VAR:
            return frozenset((self.name,)) if self.var_kind.is_random else frozenset()
        if self.kind in (ExprKind.NOT, ExprKind.TABLE):
            return self.children[0].dominators
        if self.kind != ExprKind.BIN:
            return frozenset()
        left, right = self.children
        if self.op in INVERTIBLE_OPS:
            return (left.dominators - right.rvars) | (right.dominators - left.rvars)
        if self.op == Op.GMUL:
            if right.is_const and right.value != 0:
                return left.dominators
            if left.is_const and left.value != 0:
                return right.dominators
        return frozenset()

    @cached_property
    def size(self) -> int:
        """Tree size (shared nodes counted once per occurrence)."""
        return 1 + sum(child.size for child in self.children)

    @cached_property
    def height(self) -> int:
        return 1 + max((child.height for child in self.children), default=0)

    def warm(self) -> None:
        """Compute the cached analyses eagerly (children are always warm first)."""
        for name in ("vars", "rvars", "var_kinds", "dominators", "size", "height"):
            getattr(self, name)

    def nodes(self) -> List["Expr"]:
        """Distinct nodes of the DAG in post-order (children before parents)."""
        return topological_nodes((self,))

    def __iter__(self) -> Iterator["Expr"]:
        return iter(self.nodes())

    # Rendering

    def __str__(self) -> str:
        if self.kind == ExprKind.CONST:
            return str(self.value)
        if self.kind == ExprKind.VAR:
            return self.name
        if self.kind == ExprKind.NOT:
            return f"~{_wrap(self.children[0])}"
        if self.kind == ExprKind.TABLE:
            return f"{self.table}({self.children[0]})"
        if self.kind == ExprKind.SHIFT:
            return f"({self.children[0]} {self.op.value} {self.amount})"
        left, right = self.children
        return f"({left} {self.op.value} {right})"

    def __repr__(self) -> str:
        return f"<Expr(id={self.id}, {self})>"


def _wrap(e: Expr) -> str:
    text = str(e)
    return text if e.kind in (ExprKind.CONST, ExprKind.VAR) or text.startswith("(") else f"({text})"


def topological_nodes(roots: Iterable[Expr]) -> List[Expr]:
    """Distinct nodes reachable from `roots`, children before parents."""
    order: List[Expr] = []
    seen = set()
    for root in roots:
        if root.id in seen:
            continue
        stack: List[Tuple[Expr, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.id in seen:
                continue
            seen.add(node.id)
            stack.append((node, True))
            for child in reversed(node.children):
                if child.id not in seen:
                    stack.append((child, False))
    return order


def occurrence_counts(roots: Iterable[Expr]) -> Dict[int, int]:
    """Number of distinct root-to-node paths for every node of a set of roots.

    A root listed twice counts twice. Shared sub-DAGs multiply through their
    reference count, which matches counting occurrences in the unfolded trees.
    """
    roots = list(roots)
    counts: Dict[int, int] = {}
    for root in roots:
        counts[root.id] = counts.get(root.id, 0) + 1
    for node in reversed(topological_nodes(roots)):
        here = counts.get(node.id, 0)
        if not here:
            continue
        for child in node.children:
            counts[child.id] = counts.get(child.id, 0) + here
    return counts


class ExprPool:
    """Hash-consing factory for `Expr` nodes.

    The pool is shared process-wide by default; creation is serialised with a
    lock so workers may build expressions concurrently.
    """

    def __init__(self):
        self._nodes: Dict[tuple, Expr] = {}
        self._lock = threading.Lock()
        self._next_id = 0

    def __len__(self) -> int:
        return len(self._nodes)

    def _intern(self, key: tuple, **fields) -> Expr:
        node = self._nodes.get(key)
        if node is not None:
            return node
        with self._lock:
            node = self._nodes.get(key)
            if node is None:
                node = Expr(self._next_id, **fields)
                node.warm()
                self._next_id += 1
                self._nodes[key] = node
        return node

    # Factories

    def const(self, value: int, width: int) -> Expr:
        value = int(value) & ((1 << width) - 1)
        return self._intern(("c", value), kind=ExprKind.CONST, value=value)

    def var(self, name: str, var_kind: VarKind) -> Expr:
        return self._intern(("v", name, var_kind), kind=ExprKind.VAR, name=name, var_kind=var_kind)

    def not_(self, child: Expr) -> Expr:
        return self._intern(("n", child.id), kind=ExprKind.NOT, op=Op.NOT, children=(child,))

    def table(self, table: str, child: Expr) -> Expr:
        return self._intern(("t", table, child.id), kind=ExprKind.TABLE, table=table, children=(child,))

    def shift(self, op: Op, amount: int, child: Expr) -> Expr:
        if not op.is_shift:
            raise ValueError(f"{op.value} is not a shift operator")
        return self._intern(
            ("s", op, int(amount), child.id),
            kind=ExprKind.SHIFT, op=op, amount=int(amount), children=(child,),
        )

    def binary(self, op: Op, left: Expr, right: Expr) -> Expr:
        if not op.is_binary:
            raise ValueError(f"{op.value} is not a binary operator")
        return self._intern(("b", op, left.id, right.id), kind=ExprKind.BIN, op=op, children=(left, right))

    def xor_all(self, leaves: List[Expr], width: int) -> Expr:
        """Left-associated ⊕ of `leaves` (0 when empty)."""
        if not leaves:
            return self.const(0, width)
        result = leaves[0]
        for leaf in leaves[1:]:
            result = self.binary(Op.XOR, result, leaf)
        return result

    def rebuild(self, node: Expr, children: Tuple[Expr, ...]) -> Expr:
        """Node of the same shape as `node` over new children."""
        if all(a is b for a, b in zip(children, node.children)):
            return node
        if node.kind == ExprKind.NOT:
            return self.not_(children[0])
        if node.kind == ExprKind.TABLE:
            return self.table(node.table, children[0])
        if node.kind == ExprKind.SHIFT:
            return self.shift(node.op, node.amount, children[0])
        if node.kind == ExprKind.BIN:
            return self.binary(node.op, children[0], children[1])
        return node

    def substitute(self, roots: Iterable[Expr], mapping: Dict[int, Expr]) -> List[Expr]:
        """Replace every occurrence of the nodes keyed in `mapping` (by node id)."""
        roots = list(roots)
        memo: Dict[int, Expr] = {}
        for node in topological_nodes(roots):
            if node.id in mapping:
                memo[node.id] = mapping[node.id]
            elif node.children:
                memo[node.id] = self.rebuild(node, tuple(memo[c.id] for c in node.children))
            else:
                memo[node.id] = node
        return [memo[root.id] for root in roots]


POOL = ExprPool()

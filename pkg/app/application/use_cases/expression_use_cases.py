"""
Computation map 𝓔, exact evaluation over 𝕀 and the dominator-based uniformity check.
"""

import logging
import threading
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Tuple, Union

import networkx as nx
import numpy as np

from app.core.exceptions import VariableError
from app.domain.entities.bijective_table import BijectiveTable
from app.domain.entities.expr import POOL, Expr, ExprKind, ExprPool, Op
from app.domain.entities.program import Operand, Program
from app.infrastructure.services.galois_field import GaloisField, field_for

logger = logging.getLogger(__name__)

ArrayLike = Union[int, np.ndarray]


class ComputationMap:
    """Memoised map x ↦ 𝓔(x) for every variable of a Program."""

    def __init__(self, program: Program, pool: ExprPool = POOL):
        self.program = program
        self.pool = pool
        self._memo: Dict[str, Expr] = {}
        self._lock = threading.Lock()

    def __getitem__(self, name: str) -> Expr:
        cached = self._memo.get(name)
        if cached is not None:
            return cached
        with self._lock:
            return self._build(name)

    def __contains__(self, name: str) -> bool:
        return name in self.program.order_index()

    def get_many(self, names: Iterable[str]) -> Dict[str, Expr]:
        return {name: self[name] for name in names}

    def _operand(self, operand: Operand) -> Expr:
        if isinstance(operand, int):
            return self.pool.const(operand, self.program.width)
        if operand in self._memo:
            return self._memo[operand]
        expr = self.pool.var(operand, self.program.kind_of(operand))
        self._memo[operand] = expr
        return expr

    def _build(self, name: str) -> Expr:
        cached = self._memo.get(name)
        if cached is not None:
            return cached
        if name not in self.program.x_i:
            return self._operand(name)
        # SSA order is topological: build every earlier intermediate first
        for a in self.program.assignments:
            if a.target in self._memo:
                continue
            children = [self._operand(o) for o in a.operands]
            if a.table is not None:
                expr = self.pool.table(a.table, children[0])
            elif a.op is None:
                expr = children[0]
            elif a.op == Op.NOT:
                expr = self.pool.not_(children[0])
            elif a.op.is_shift:
                expr = self.pool.shift(a.op, a.amount, children[0])
            else:
                expr = self.pool.binary(a.op, children[0], children[1])
            self._memo[a.target] = expr
            if a.target == name:
                break
        return self._memo[name]


class Evaluator:
    """Vectorised evaluation of expressions over uint64 arrays of κ-bit words."""

    def __init__(
        self,
        width: int,
        tables: Optional[Mapping[str, BijectiveTable]] = None,
        field: Optional[GaloisField] = None,
    ):
        self.width = width
        self.mask = np.uint64((1 << width) - 1)
        self.tables = dict(tables or {})
        self._field = field

    @property
    def field(self) -> GaloisField:
        if self._field is None:
            self._field = field_for(self.width)
        return self._field

    @classmethod
    def for_program(cls, program: Program) -> "Evaluator":
        return cls(program.width, program.tables)

    def evaluate_many(self, exprs: Iterable[Expr], values: Mapping[str, ArrayLike]) -> Tuple[np.ndarray, ...]:
        """Evaluate several expressions sharing one memo over the same valuation arrays."""
        exprs = list(exprs)
        memo: Dict[int, np.ndarray] = {}
        results = []
        for expr in exprs:
            for node in expr.nodes():
                if node.id not in memo:
                    memo[node.id] = self._apply(node, memo, values)
            results.append(memo[expr.id])
        return tuple(results)

    def evaluate(self, expr: Expr, values: Mapping[str, ArrayLike]) -> np.ndarray:
        return self.evaluate_many((expr,), values)[0]

    def _apply(self, node: Expr, memo: Dict[int, np.ndarray], values: Mapping[str, ArrayLike]) -> np.ndarray:
        if node.kind == ExprKind.CONST:
            return np.asarray(node.value, dtype=np.uint64)
        if node.kind == ExprKind.VAR:
            try:
                return np.asarray(values[node.name], dtype=np.uint64)
            except KeyError:
                raise VariableError(f"no value supplied for {node.name}") from None

        args = [memo[child.id] for child in node.children]
        if node.kind == ExprKind.NOT:
            return ~args[0] & self.mask
        if node.kind == ExprKind.TABLE:
            return self.tables[node.table].lookup(args[0])
        if node.kind == ExprKind.SHIFT:
            amount = np.uint64(node.amount)
            if node.op == Op.SHL:
                return (args[0] << amount) & self.mask
            return args[0] >> amount

        a, b = args
        if node.op == Op.XOR:
            return a ^ b
        if node.op == Op.AND:
            return a & b
        if node.op == Op.OR:
            return a | b
        if node.op == Op.ADD:
            return (a + b) & self.mask
        if node.op == Op.SUB:
            # wraps modulo 2^64 before masking
            with np.errstate(over="ignore"):
                return (a - b) & self.mask
        if node.op == Op.MUL:
            return (a * b) & self.mask
        if node.op == Op.GMUL:
            return self.field.mul_array(a, b)
        raise ValueError(f"unsupported operator {node.op}")


def eval_expr(expr: Expr, values: Mapping[str, int], evaluator: Evaluator) -> int:
    """Value of `expr` under a single valuation."""
    missing = expr.vars - set(values)
    if missing:
        raise VariableError(f"valuation does not cover {', '.join(sorted(missing))}")
    return int(evaluator.evaluate(expr, values))


def operands(program: Program, name: str) -> FrozenSet[Operand]:
    """Direct operands of the single assignment defining `name`."""
    return frozenset(program.definition(name).operands)


def uniform_by_dominators(exprs: Mapping[str, Expr]) -> Tuple[bool, Dict[str, str]]:
    """
    Decide uniformity of a set through dominant random variables.

    Every member needs a dominant random variable occurring in no other
    member; the assignment is found as a maximum bipartite matching.

    Returns:
        (uniform, witnesses) where witnesses maps each member to its random.
    """
    if not exprs:
        return True, {}

    graph = nx.Graph()
    members = list(exprs)
    graph.add_nodes_from((("x", m) for m in members), bipartite=0)
    for member in members:
        others: FrozenSet[str] = frozenset()
        for other in members:
            if other != member:
                others = others | exprs[other].rvars
        for r in sorted(exprs[member].dominators - others):
            graph.add_node(("r", r), bipartite=1)
            graph.add_edge(("x", member), ("r", r))

    top = [("x", m) for m in members]
    matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=top)
    witnesses = {member: matching[("x", member)][1] for member in members if ("x", member) in matching}
    uniform = len(witnesses) == len(members)
    logger.debug(f"Dominator matching for {sorted(members)}: uniform={uniform} witnesses={witnesses}")
    return uniform, witnesses

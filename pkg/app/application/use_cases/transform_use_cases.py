"""
Sound rewrites of computation sets: algebraic simplification, replacement of
dominated sub-expressions and collapsing of XOR-clustered variable pairs.

Sets are ordered lists of expressions so callers can map results back to the
observables they came from.
"""

import logging
import threading
from collections import Counter
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from app.domain.entities.bijective_table import BijectiveTable
from app.domain.entities.distribution import TransformLevel
from app.domain.entities.expr import (
    POOL,
    Expr,
    ExprKind,
    ExprPool,
    Op,
    VarKind,
    occurrence_counts,
    topological_nodes,
)
from app.domain.entities.transform_trace import FreshVar, TransformKind, TransformStep, TransformTrace
from app.application.use_cases.expression_use_cases import Evaluator

logger = logging.getLogger(__name__)

ExprList = List[Expr]


def _is_xor(node: Expr) -> bool:
    return node.kind == ExprKind.BIN and node.op == Op.XOR


def _xor_leaves(node: Expr) -> ExprList:
    """Leaves of the maximal ⊕-tree rooted at `node`, left to right, with multiplicity."""
    leaves: ExprList = []
    stack = [node]
    while stack:
        current = stack.pop()
        if _is_xor(current):
            stack.append(current.children[1])
            stack.append(current.children[0])
        else:
            leaves.append(current)
    return leaves


def _kind_class(kind: VarKind) -> str:
    return "random" if kind.is_random else kind.value


class _ChainInfo:
    """Maximal ⊕-chains of a set and the collapsible variables they contain"""

    def __init__(self, roots: Sequence[Expr]):
        self.occ = occurrence_counts(roots)
        nodes = topological_nodes(roots)

        # Occurrences of ⊕ nodes reached from a non-⊕ context (or as a root)
        context: Dict[int, int] = {}
        for root in roots:
            if _is_xor(root):
                context[root.id] = context.get(root.id, 0) + 1
        for node in nodes:
            if _is_xor(node):
                continue
            for child in node.children:
                if _is_xor(child):
                    context[child.id] = context.get(child.id, 0) + self.occ.get(node.id, 0)

        self.chains: Dict[int, Expr] = {n.id: n for n in nodes if n.id in context}
        self.leaves: Dict[int, ExprList] = {cid: _xor_leaves(c) for cid, c in self.chains.items()}
        self.variables: Dict[str, Expr] = {n.name: n for n in nodes if n.is_var}

        chain_occ: Dict[str, int] = {}
        chains_of: Dict[str, List[int]] = {}
        repeated: set = set()
        for cid, leaves in self.leaves.items():
            counts = Counter(leaf.name for leaf in leaves if leaf.is_var)
            for name, count in counts.items():
                if count != 1:
                    repeated.add(name)
                chain_occ[name] = chain_occ.get(name, 0) + context[cid] * count
                chains_of.setdefault(name, []).append(cid)

        self.candidates: Dict[str, FrozenSet[int]] = {}
        for name, var in self.variables.items():
            if name in repeated or name not in chain_occ:
                continue
            if chain_occ[name] == self.occ.get(var.id, 0):
                self.candidates[name] = frozenset(chains_of[name])

    def collapsible(self, z1: str, z2: str) -> bool:
        if z1 not in self.candidates or z2 not in self.candidates or z1 == z2:
            return False
        kind1 = self.variables[z1].var_kind
        kind2 = self.variables[z2].var_kind
        return _kind_class(kind1) == _kind_class(kind2) and self.candidates[z1] == self.candidates[z2]

    def first_pair(self) -> Optional[Tuple[str, str]]:
        names = sorted(self.candidates)
        for i, z1 in enumerate(names):
            for z2 in names[i + 1:]:
                if self.collapsible(z1, z2):
                    return z1, z2
        return None


class TransformUseCases:
    """Simply_Alg, Simply_Dom and Simply_Col over ordered computation sets."""

    ALG_LAWS = ("const-fold", "xor-cancel", "xor-zero", "sub-self", "mul-zero", "gmul-zero")

    def __init__(self, width: int, tables: Optional[Mapping[str, BijectiveTable]] = None, pool: ExprPool = POOL):
        self.width = width
        self.pool = pool
        self.evaluator = Evaluator(width, tables)
        self._fresh: Dict[str, FreshVar] = {}
        self._lock = threading.Lock()

    # Simply_Alg

    def simplify_alg(self, exprs: Sequence[Expr]) -> Tuple[ExprList, TransformTrace]:
        trace = TransformTrace()
        current = list(exprs)
        while True:
            fired: List[str] = []
            memo: Dict[int, Expr] = {}
            for node in topological_nodes(current):
                children = tuple(memo[c.id] for c in node.children)
                memo[node.id] = self._alg_node(node, children, fired)
            rewritten = [memo[e.id] for e in current]
            for law in dict.fromkeys(fired):
                trace.append(TransformStep(TransformKind.ALG, law=law))
            if all(a is b for a, b in zip(rewritten, current)):
                return rewritten, trace
            current = rewritten

    def _alg_node(self, node: Expr, children: Tuple[Expr, ...], fired: List[str]) -> Expr:
        rebuilt = self.pool.rebuild(node, children)
        if rebuilt.kind in (ExprKind.CONST, ExprKind.VAR):
            return rebuilt
        if all(c.is_const for c in rebuilt.children):
            if rebuilt.kind != ExprKind.TABLE or rebuilt.table in self.evaluator.tables:
                fired.append("const-fold")
                return self.pool.const(int(self.evaluator.evaluate(rebuilt, {})), self.width)
        if rebuilt.kind != ExprKind.BIN:
            return rebuilt

        left, right = rebuilt.children
        if rebuilt.op == Op.XOR:
            return self._xor_chain(rebuilt, fired)
        if rebuilt.op == Op.SUB and left is right:
            fired.append("sub-self")
            return self.pool.const(0, self.width)
        if rebuilt.op in (Op.MUL, Op.GMUL) and (self._is_zero(left) or self._is_zero(right)):
            fired.append("mul-zero" if rebuilt.op == Op.MUL else "gmul-zero")
            return self.pool.const(0, self.width)
        return rebuilt

    def _xor_chain(self, node: Expr, fired: List[str]) -> Expr:
        leaves = _xor_leaves(node)
        counts: Counter = Counter()
        first: Dict[int, Expr] = {}
        constant = 0
        constants = 0
        for leaf in leaves:
            if leaf.is_const:
                constant ^= leaf.value
                constants += 1
                continue
            counts[leaf.id] += 1
            first.setdefault(leaf.id, leaf)

        kept = [first[i] for i in first if counts[i] % 2 == 1]
        cancelled = any(count > 1 for count in counts.values())
        dropped_zero = constants >= 1 and constant == 0
        folded = constants > 1
        if not (cancelled or dropped_zero or folded):
            return node

        if cancelled:
            fired.append("xor-cancel")
        if dropped_zero:
            fired.append("xor-zero")
        if folded:
            fired.append("const-fold")
        if constant:
            kept.append(self.pool.const(constant, self.width))
        return self.pool.xor_all(kept, self.width)

    @staticmethod
    def _is_zero(node: Expr) -> bool:
        return node.is_const and node.value == 0

    # Simply_Dom

    def simplify_dom(self, exprs: Sequence[Expr]) -> Tuple[ExprList, TransformTrace]:
        trace = TransformTrace()
        current = list(exprs)
        while True:
            found = self._dominated_candidate(current)
            if found is None:
                return current, trace
            node, var = found
            current = self.pool.substitute(current, {node.id: var})
            trace.append(
                TransformStep(TransformKind.DOM, replaced=str(node), replaced_id=node.id, random=var.name)
            )
            logger.debug(f"Simply_Dom replaced {node} by {var.name}")

    def _dominated_candidate(self, roots: Sequence[Expr]) -> Optional[Tuple[Expr, Expr]]:
        """Largest non-variable sub-expression dominated by a random occurring only inside it."""
        occ = occurrence_counts(roots)
        nodes = topological_nodes(roots)
        variables = {n.name: n for n in nodes if n.is_var}
        best: Optional[Tuple[Expr, Expr]] = None
        for node in nodes:
            if node.is_var or not node.dominators:
                continue
            for r in sorted(node.dominators):
                var = variables[r]
                if occ[var.id] != occ[node.id]:
                    continue
                if best is None or (node.size, -node.id) > (best[0].size, -best[0].id):
                    best = (node, var)
                break
        return best

    def _dom_step_legal(self, roots: Sequence[Expr], node: Expr, r: str) -> Optional[Expr]:
        occ = occurrence_counts(roots)
        if node.id not in occ or r not in node.dominators:
            return None
        variables = {n.name: n for n in topological_nodes(roots) if n.is_var}
        var = variables.get(r)
        if var is None or occ[var.id] != occ[node.id]:
            return None
        return var

    # Simply_Col

    def simplify_col(self, exprs: Sequence[Expr]) -> Tuple[ExprList, TransformTrace]:
        trace = TransformTrace()
        current = list(exprs)
        while True:
            info = _ChainInfo(current)
            pair = info.first_pair()
            if pair is None:
                return current, trace
            fresh = self._fresh_var(info, *pair)
            current = self._collapse(current, info, pair, fresh)
            trace.append(TransformStep(TransformKind.COL, fresh=fresh, pair=pair))
            logger.debug(f"Simply_Col collapsed {pair[0]} and {pair[1]} into {fresh.name}")

    def _fresh_var(self, info: _ChainInfo, z1: str, z2: str) -> FreshVar:
        origin: FrozenSet[str] = frozenset()
        for z in (z1, z2):
            known = self._fresh.get(z)
            origin = origin | (known.origin if known is not None else frozenset((z,)))
        kind = info.variables[z1].var_kind
        if kind.is_random:
            kind = VarKind.COLLAPSED
        name = "{" + "+".join(sorted(origin)) + "}"
        with self._lock:
            fresh = self._fresh.setdefault(name, FreshVar(name, kind, origin))
        return fresh

    def _collapse(self, roots: Sequence[Expr], info: _ChainInfo, pair: Tuple[str, str], fresh: FreshVar) -> ExprList:
        targets = info.candidates[pair[0]]
        removed = {info.variables[z].id for z in pair}
        fresh_node = self.pool.var(fresh.name, fresh.kind)
        memo: Dict[int, Expr] = {}
        for node in topological_nodes(roots):
            if node.id in targets:
                kept = [memo[leaf.id] for leaf in info.leaves[node.id] if leaf.id not in removed]
                memo[node.id] = self.pool.xor_all(kept + [fresh_node], self.width)
            elif node.children:
                memo[node.id] = self.pool.rebuild(node, tuple(memo[c.id] for c in node.children))
            else:
                memo[node.id] = node
        return [memo[root.id] for root in roots]

    # Escalation and replay

    def escalate(self, exprs: Sequence[Expr], level: TransformLevel) -> Tuple[ExprList, TransformTrace]:
        """
        Transformed set for a Check escalation level.

        DOM runs Simply_Alg and Simply_Dom to a joint fixpoint; COL starts
        from that result and alternates Simply_Col with the DOM fixpoint
        while Simply_Col still changes the set.
        """
        trace = TransformTrace()
        current = list(exprs)
        if level == TransformLevel.PLAIN:
            return current, trace

        current = self._alg_dom_fixpoint(current, trace)
        if level == TransformLevel.DOM:
            return current, trace

        while True:
            collapsed, col_trace = self.simplify_col(current)
            if not col_trace:
                return current, trace
            trace.extend(col_trace)
            current = self._alg_dom_fixpoint(collapsed, trace)

    def _alg_dom_fixpoint(self, current: ExprList, trace: TransformTrace) -> ExprList:
        while True:
            current, alg_trace = self.simplify_alg(current)
            trace.extend(alg_trace)
            current, dom_trace = self.simplify_dom(current)
            trace.extend(dom_trace)
            if not dom_trace:
                return current

    def replay(self, trace: TransformTrace, exprs: Sequence[Expr]) -> Optional[ExprList]:
        """
        Re-apply a recorded trace to a (usually extended) set.

        Returns:
            The transformed set, or None when some DOM or COL step is no
            longer legal on the extended set.
        """
        current = list(exprs)
        previous_alg = False
        for step in trace.steps:
            if step.kind == TransformKind.ALG:
                if not previous_alg:
                    current, _ = self.simplify_alg(current)
                previous_alg = True
                continue
            previous_alg = False

            if step.kind == TransformKind.DOM:
                node = next((n for n in topological_nodes(current) if n.id == step.replaced_id), None)
                var = self._dom_step_legal(current, node, step.random) if node is not None else None
                if var is None:
                    logger.debug(f"Replay rejected at {step}")
                    return None
                current = self.pool.substitute(current, {node.id: var})
            else:
                info = _ChainInfo(current)
                if not info.collapsible(*step.pair):
                    logger.debug(f"Replay rejected at {step}")
                    return None
                current = self._collapse(current, info, step.pair, step.fresh)
        return current

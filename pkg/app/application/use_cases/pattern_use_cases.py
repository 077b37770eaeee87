"""
Pattern reuse across observable sets.

A computation set is normalised by absorbing assimilable constants into
their anchor variables, bucketed by a renaming-invariant fingerprint and
matched against stored sets by a type-respecting variable bijection. Sets
that match have the same distribution type, so a stored verdict answers
every later set of the same shape.
"""

import hashlib
import logging
import random
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from app.application.use_cases.transform_use_cases import TransformUseCases, _is_xor, _kind_class, _xor_leaves
from app.domain.entities.bijective_table import BijectiveTable
from app.domain.entities.distribution import DistType
from app.domain.entities.expr import POOL, COMMUTATIVE_OPS, Expr, ExprKind, ExprPool, Op, VarKind, topological_nodes
from app.domain.entities.pattern import Assimilation, NormalizedSet, PatternEntry
from app.domain.ports.pattern_repository import PatternRepository

logger = logging.getLogger(__name__)

ASSIMILATING_OPS = (Op.XOR, Op.ADD, Op.SUB)

Binding = Tuple[Dict[str, str], Dict[str, str]]


@dataclass(frozen=True)
class _Context:
    """One occurrence of a leaf: the operator around it and the constants (or anchors) sharing it"""

    op: Optional[Op]
    constants: int = 0
    anchors: frozenset = frozenset()


class _Term:
    """Matching view of an expression: ⊕-chains flattened, commutative operands unordered"""

    __slots__ = ("tag", "name", "children", "ordered", "shape")

    def __init__(self, tag: str, shape: str, children: Tuple["_Term", ...] = (), ordered: bool = True, name: str = ""):
        self.tag = tag
        self.shape = shape
        self.children = children
        self.ordered = ordered
        self.name = name


def _digest(text: str) -> str:
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]


def table_tag(table: BijectiveTable) -> str:
    """Table identity used in fingerprints: name plus a digest of the entries."""
    content = ",".join(str(v) for v in table.entries)
    return f"{table.name}:{_digest(content)}"


def _chain_roots(roots: Sequence[Expr]) -> Set[int]:
    """⊕ nodes that start a maximal chain: members, or children of a non-⊕ node."""
    starts = {r.id for r in roots if _is_xor(r)}
    for node in topological_nodes(roots):
        if _is_xor(node):
            continue
        for child in node.children:
            if _is_xor(child):
                starts.add(child.id)
    return starts


def _base_name(name: str) -> str:
    return name.split("#", 1)[0]


class PatternUseCases:
    """Normalisation, fingerprinting, matching and the verdict cache."""

    def __init__(
        self,
        store: PatternRepository,
        width: int,
        tables: Optional[Mapping[str, BijectiveTable]] = None,
        transforms: Optional[TransformUseCases] = None,
        pool: ExprPool = POOL,
    ):
        self.store = store
        self.width = width
        self.pool = pool
        self.transforms = transforms or TransformUseCases(width, tables, pool)
        self.table_tags = {name: table_tag(t) for name, t in (tables or {}).items()}
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    # ───────────────────────────────────────────────
    # NORMALISATION
    # ───────────────────────────────────────────────

    def normalize(self, exprs: Sequence[Expr]) -> NormalizedSet:
        """
        Absorb assimilable constants until none is left.

        Constants are tried smallest value first, anchors by node id. The
        anchor x of `x ∘ c` is renamed `x#n` and every `x ∘ c'` becomes
        `x#n ∘ c''` with c'' = c' ⊕ c for ⊕ and c' − c for + and −.
        """
        current, trace = self.transforms.simplify_alg(list(exprs))
        assimilated: List[Assimilation] = []
        while True:
            found = self._assimilable(current)
            if found is None:
                break
            constant, anchor, op = found
            fresh = self._fresh_anchor(anchor, current, len(assimilated) + 1)
            current = self._assimilate(current, constant, anchor, op, fresh)
            assimilated.append(Assimilation(constant, anchor.name, op, fresh.name))
            logger.debug(f"Assimilated {constant} into {anchor.name} as {fresh.name}")
        return NormalizedSet(tuple(current), tuple(assimilated), bool(trace))

    def _fresh_anchor(self, anchor: Expr, roots: Sequence[Expr], n: int) -> Expr:
        taken: Set[str] = set()
        for root in roots:
            taken |= root.vars
        base = _base_name(anchor.name)
        while f"{base}#{n}" in taken:
            n += 1
        return self.pool.var(f"{base}#{n}", anchor.var_kind)

    def _contexts(self, roots: Sequence[Expr]) -> Tuple[Dict[str, List[_Context]], Dict[int, List[_Context]], Dict[str, Expr]]:
        """Context of every variable and constant occurrence in the set."""
        var_ctx: Dict[str, List[_Context]] = defaultdict(list)
        const_ctx: Dict[int, List[_Context]] = defaultdict(list)
        variables: Dict[str, Expr] = {}
        bare = _Context(None)

        def leaf(node: Expr, context: _Context) -> None:
            if node.is_var:
                variables[node.name] = node
                var_ctx[node.name].append(context)
            elif node.is_const:
                const_ctx[node.value].append(context)

        for root in roots:
            if root.is_var or root.is_const:
                leaf(root, bare)

        starts = _chain_roots(roots)
        for node in topological_nodes(roots):
            if _is_xor(node):
                if node.id not in starts:
                    continue
                leaves = _xor_leaves(node)
                constants = [l for l in leaves if l.is_const]
                names = [l.name for l in leaves if l.is_var]
                single = frozenset(n for n in names if names.count(n) == 1)
                for l in leaves:
                    if l.is_var:
                        leaf(l, _Context(Op.XOR, len(constants)))
                    elif l.is_const:
                        leaf(l, _Context(Op.XOR, len(constants), single))
                continue
            if node.kind == ExprKind.BIN and node.op in (Op.ADD, Op.SUB):
                left, right = node.children
                if left.is_var and right.is_const:
                    leaf(left, _Context(node.op, 1))
                    leaf(right, _Context(node.op, 1, frozenset((left.name,))))
                    continue
                if node.op == Op.ADD and left.is_const and right.is_var:
                    leaf(right, _Context(node.op, 1))
                    leaf(left, _Context(node.op, 1, frozenset((right.name,))))
                    continue
            for child in node.children:
                if not _is_xor(child):
                    leaf(child, bare)
        return var_ctx, const_ctx, variables

    def _assimilable(self, roots: Sequence[Expr]) -> Optional[Tuple[int, Expr, Op]]:
        var_ctx, const_ctx, variables = self._contexts(roots)
        for constant in sorted(const_ctx):
            occurrences = const_ctx[constant]
            op = occurrences[0].op
            if op not in ASSIMILATING_OPS or any(o.op != op for o in occurrences):
                continue
            anchors = frozenset.intersection(*(o.anchors for o in occurrences))
            candidates = sorted((variables[a] for a in anchors), key=lambda v: v.id)
            for anchor in candidates:
                if all(c.op == op and c.constants == 1 for c in var_ctx[anchor.name]):
                    return constant, anchor, op
        return None

    def _assimilate(self, roots: Sequence[Expr], constant: int, anchor: Expr, op: Op, fresh: Expr) -> List[Expr]:
        starts = _chain_roots(roots)
        memo: Dict[int, Expr] = {}
        for node in topological_nodes(roots):
            if _is_xor(node) and node.id in starts and op == Op.XOR:
                leaves = _xor_leaves(node)
                if any(l is anchor for l in leaves):
                    kept = [fresh if l is anchor else memo[l.id] for l in leaves if not l.is_const]
                    value = 0
                    for l in leaves:
                        if l.is_const:
                            value ^= l.value ^ constant
                    if value:
                        kept.append(self.pool.const(value, self.width))
                    memo[node.id] = self.pool.xor_all(kept, self.width)
                    continue
            if node.kind == ExprKind.BIN and node.op == op and op in (Op.ADD, Op.SUB) and anchor in node.children:
                other = node.right if node.left is anchor else node.left
                if other.is_const:
                    delta = (other.value - constant) & ((1 << self.width) - 1)
                    memo[node.id] = fresh if delta == 0 else self.pool.binary(op, fresh, self.pool.const(delta, self.width))
                    continue
            memo[node.id] = self.pool.rebuild(node, tuple(memo[c.id] for c in node.children)) if node.children else node
        return [memo[r.id] for r in roots]

    # ───────────────────────────────────────────────
    # FINGERPRINT AND MATCHING
    # ───────────────────────────────────────────────

    def _terms(self, exprs: Sequence[Expr], table_tags: Optional[Mapping[str, str]] = None) -> List[_Term]:
        tags = self.table_tags if table_tags is None else table_tags
        built: Dict[int, _Term] = {}
        for node in topological_nodes(exprs):
            if node.kind == ExprKind.CONST:
                built[node.id] = _Term("c", f"c{node.value}")
            elif node.kind == ExprKind.VAR:
                built[node.id] = _Term("v", f"v:{_kind_class(node.var_kind)}", name=node.name)
            elif _is_xor(node):
                children = tuple(built[l.id] for l in _xor_leaves(node))
                shape = _digest("^(" + ",".join(sorted(c.shape for c in children)) + ")")
                built[node.id] = _Term("^", shape, children, ordered=False)
            elif node.kind == ExprKind.BIN and node.op in COMMUTATIVE_OPS:
                children = tuple(built[c.id] for c in node.children)
                shape = _digest(f"{node.op.value}(" + ",".join(sorted(c.shape for c in children)) + ")")
                built[node.id] = _Term(node.op.value, shape, children, ordered=False)
            else:
                children = tuple(built[c.id] for c in node.children)
                if node.kind == ExprKind.TABLE:
                    label = f"T[{tags.get(node.table, node.table)}]"
                elif node.kind == ExprKind.SHIFT:
                    label = f"{node.op.value}{node.amount}"
                else:
                    label = node.op.value
                shape = _digest(f"{label}(" + ",".join(c.shape for c in children) + ")")
                built[node.id] = _Term(label, shape, children)
        return [built[e.id] for e in exprs]

    def fingerprint(self, nset: NormalizedSet) -> str:
        """Hash of the multiset of per-member shapes; invariant under renaming."""
        shapes = sorted(t.shape for t in self._terms(nset.exprs))
        return hashlib.sha1(f"{self.width}|{'|'.join(shapes)}".encode("utf-8")).hexdigest()

    def match(
        self,
        left: Union[NormalizedSet, Sequence[Expr]],
        right: Union[NormalizedSet, Sequence[Expr]],
        right_tags: Optional[Mapping[str, str]] = None,
    ) -> Optional[Dict[str, str]]:
        """Type-respecting bijection h with right = h(left), or None."""
        left = left.exprs if isinstance(left, NormalizedSet) else list(left)
        right = right.exprs if isinstance(right, NormalizedSet) else list(right)
        if len(left) != len(right):
            return None
        a = self._terms(left)
        b = self._terms(right, right_tags)
        if sorted(t.shape for t in a) != sorted(t.shape for t in b):
            return None
        for h, _ in self._unify_bag(a, b, {}, {}):
            return h
        return None

    def _unify(self, a: _Term, b: _Term, h: Dict[str, str], hi: Dict[str, str]) -> Iterator[Binding]:
        if a.shape != b.shape:
            return
        if a.tag == "v":
            mapped = h.get(a.name)
            if mapped is not None:
                if mapped == b.name:
                    yield h, hi
                return
            if b.name in hi:
                return
            yield {**h, a.name: b.name}, {**hi, b.name: a.name}
            return
        if not a.children:
            yield h, hi
        elif a.ordered:
            yield from self._unify_seq(a.children, b.children, 0, h, hi)
        else:
            yield from self._unify_bag(list(a.children), list(b.children), h, hi)

    def _unify_seq(self, xs, ys, i: int, h, hi) -> Iterator[Binding]:
        if i == len(xs):
            yield h, hi
            return
        for h1, hi1 in self._unify(xs[i], ys[i], h, hi):
            yield from self._unify_seq(xs, ys, i + 1, h1, hi1)

    def _unify_bag(self, xs: List[_Term], ys: List[_Term], h, hi) -> Iterator[Binding]:
        if not xs:
            yield h, hi
            return
        first, rest = xs[0], xs[1:]
        for j, y in enumerate(ys):
            if y.shape != first.shape:
                continue
            for h1, hi1 in self._unify(first, y, h, hi):
                yield from self._unify_bag(rest, ys[:j] + ys[j + 1:], h1, hi1)

    # ───────────────────────────────────────────────
    # CACHE
    # ───────────────────────────────────────────────

    def lookup(self, exprs: Sequence[Expr]) -> Tuple[NormalizedSet, str, Optional[PatternEntry]]:
        nset = self.normalize(exprs)
        fingerprint = self.fingerprint(nset)
        for entry in self.store.find_by_fingerprint(self.width, fingerprint):
            if self.match(nset.exprs, entry.exprs, entry.table_tags) is not None:
                self.store.record_hit(entry)
                return nset, fingerprint, entry
        return nset, fingerprint, None

    def insert(self, nset: NormalizedSet, fingerprint: str, verdict: DistType, provenance: str = "") -> PatternEntry:
        if verdict == DistType.UNKNOWN:
            raise ValueError("only resolved verdicts can be stored")
        entry = PatternEntry(
            fingerprint=fingerprint,
            width=self.width,
            exprs=nset.exprs,
            verdict=verdict,
            table_tags=dict(self.table_tags),
            provenance=provenance,
            hits=1,
        )
        return self.store.add(entry)

    def lookup_or_insert(
        self,
        exprs: Sequence[Expr],
        resolve: Optional[Callable[[], DistType]] = None,
        provenance: str = "",
        on_hit: Optional[Callable[[PatternEntry], None]] = None,
    ) -> Optional[DistType]:
        """
        Stored verdict of a matching pattern.

        On a hit the matching entry is passed to `on_hit`. On a miss,
        `resolve` (when given) decides the set and its verdict is stored;
        without it the miss returns None.
        """
        with self._lock:
            nset, fingerprint, entry = self.lookup(exprs)
            if entry is not None:
                self.hits += 1
                logger.debug(f"Pattern hit for {nset} (entry {entry.id})")
                if on_hit is not None:
                    on_hit(entry)
                return entry.verdict
            self.misses += 1
            if resolve is None:
                return None
            verdict = resolve()
            if verdict != DistType.UNKNOWN:
                self.insert(nset, fingerprint, verdict, provenance)
            return verdict

    def summary(self) -> List[Dict[str, object]]:
        """Every stored pattern with the number of sets it served."""
        return [
            {
                "id": entry.id,
                "pattern": entry.rendered,
                "verdict": entry.verdict.value,
                "sets": entry.hits,
                "provenance": entry.provenance,
            }
            for entry in self.store.get_all()
            if entry.width == self.width
        ]


# ───────────────────────────────────────────────
# FAULTY SBOX FAMILIES
# ───────────────────────────────────────────────


@dataclass(frozen=True)
class FamilyMember:
    family: int
    parameter: int
    copy: int
    exprs: Dict[str, Expr]


def faulty_sbox_families(
    table: str = "sbox",
    renamings: int = 3,
    seed: int = 0,
    width: int = 8,
    pool: ExprPool = POOL,
) -> Iterator[FamilyMember]:
    """
    Observable sets of a faulty fourth-order masked Sbox, in three families:

      1. {x0, S(k ⊕ x0) ⊕ r, S(k ⊕ i ⊕ x0) ⊕ r}        0 < i < 2^κ
      2. {S(k) ⊕ r, S(k ⊕ x0) ⊕ r, S(k ⊕ i ⊕ x0) ⊕ r}  0 < i < 2^κ
      3. {x0, S(k) ⊕ r, S(k ⊕ x0 ⊕ j) ⊕ r}              0 ≤ j < 2^κ

    Every set is emitted `renamings` times under fresh variable names.
    Copies of family 1 after the first also shift the key by a random
    offset j, giving {x0, S(k ⊕ j ⊕ x0) ⊕ r, S(k ⊕ (i ⊕ j) ⊕ x0) ⊕ r}.
    """
    rng = random.Random(seed)
    size = 1 << width

    def c(value: int) -> Expr:
        return pool.const(value, width)

    def s(*leaves: Expr) -> Expr:
        return pool.table(table, pool.xor_all(list(leaves), width))

    def names(copy: int) -> Tuple[Expr, Expr, Expr]:
        tag = rng.randrange(1 << 20)
        return (
            pool.var(f"x{tag}_{copy}", VarKind.RANDOM),
            pool.var(f"k{tag}_{copy}", VarKind.PRIVATE),
            pool.var(f"r{tag}_{copy}", VarKind.RANDOM),
        )

    for i in range(1, size):
        for copy in range(renamings):
            x0, k, r = names(copy)
            if copy == 0:
                members = [x0, pool.binary(Op.XOR, s(k, x0), r), pool.binary(Op.XOR, s(k, c(i), x0), r)]
            else:
                j = rng.choice([v for v in range(1, size) if v != i])
                members = [x0, pool.binary(Op.XOR, s(k, c(j), x0), r), pool.binary(Op.XOR, s(k, c(i ^ j), x0), r)]
            yield FamilyMember(1, i, copy, dict(zip(("o1", "o2", "o3"), members)))

    for i in range(1, size):
        for copy in range(renamings):
            x0, k, r = names(copy)
            members = [
                pool.binary(Op.XOR, s(k), r),
                pool.binary(Op.XOR, s(k, x0), r),
                pool.binary(Op.XOR, s(k, c(i), x0), r),
            ]
            yield FamilyMember(2, i, copy, dict(zip(("o1", "o2", "o3"), members)))

    for j in range(size):
        for copy in range(renamings):
            x0, k, r = names(copy)
            members = [x0, pool.binary(Op.XOR, s(k), r), pool.binary(Op.XOR, s(k, x0, c(j)), r)]
            yield FamilyMember(3, j, copy, dict(zip(("o1", "o2", "o3"), members)))

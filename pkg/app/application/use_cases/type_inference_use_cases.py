"""
Distribution-type inference: first-order rules on single assignments, set
rules by peeling members off an observable set, and the escalating Check.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from app.application.use_cases.expression_use_cases import ComputationMap
from app.application.use_cases.transform_use_cases import TransformUseCases
from app.core.exceptions import VariableError
from app.domain.entities.distribution import DistType, Judgement, RuleApplication, TransformLevel
from app.domain.entities.exploration import AnalysisCache, ExplorationStats
from app.domain.entities.expr import Expr, Op, VarKind
from app.domain.entities.program import Operand, Program
from app.domain.entities.transform_trace import TransformTrace

logger = logging.getLogger(__name__)

# Operators of the Sid4 rule; Sdd is kept to the two whose masking by a uniform operand is injective
MULTIPLICATIVE_OPS = frozenset({Op.AND, Op.OR, Op.GMUL, Op.MUL})
SDD_OPS = frozenset({Op.AND, Op.OR})
SELF_CANCELLING_OPS = frozenset({Op.XOR, Op.SUB})
IDEMPOTENT_OPS = frozenset({Op.AND, Op.OR})

LEVELS = (TransformLevel.PLAIN, TransformLevel.DOM, TransformLevel.COL)


class TypeInferenceUseCases:
    """Type rules over one program. Variable types are computed once, in SSA order."""

    def __init__(self, program: Program, cm: ComputationMap, analysis: AnalysisCache, transforms: TransformUseCases):
        self.program = program
        self.cm = cm
        self.analysis = analysis
        self.transforms = transforms
        self._types: Dict[str, RuleApplication] = {}
        self._lock = threading.Lock()

    # Analyses

    def expression(self, name: str) -> Expr:
        """λ(x) when Simply_Alg changed 𝓔(x), else 𝓔(x)."""
        return self.analysis.lam.get(name) or self.cm[name]

    def dominators(self, name: str) -> FrozenSet[str]:
        cached = self.analysis.pi.get(name)
        return cached if cached is not None else self.expression(name).dominators

    # First order

    def infer_var(self, name: str) -> DistType:
        return self.var_rule(name).result

    def var_rule(self, name: str) -> RuleApplication:
        if not self._types:
            with self._lock:
                if not self._types:
                    self._types = self._compute_types()
        try:
            return self._types[name]
        except KeyError:
            raise VariableError(f"{name} is not a program variable") from None

    def _compute_types(self) -> Dict[str, RuleApplication]:
        types: Dict[str, RuleApplication] = {}
        for name in self.program.public:
            types[name] = RuleApplication("Input", (name,), DistType.SECRET_INDEPENDENT, note="public input")
        for name in self.program.private:
            types[name] = RuleApplication("Input", (name,), DistType.LEAKY, note="private input")
        for name in self.program.random:
            types[name] = RuleApplication("Input", (name,), DistType.UNIFORM, witnesses=((name, name),))
        for assignment in self.program.assignments:
            types[assignment.target] = self._infer_intermediate(assignment.target, types)
        return types

    def _infer_intermediate(self, name: str, types: Dict[str, RuleApplication]) -> RuleApplication:
        dominators = self.dominators(name)
        if dominators:
            witness = min(dominators)
            return RuleApplication("Rud", (name,), DistType.UNIFORM, witnesses=((name, witness),))

        structural = self._structural(name, types)
        if structural is not None and structural.result == DistType.UNIFORM:
            return structural
        if not (self.expression(name).vars & self.program.x_k):
            return RuleApplication("No-Key", (name,), DistType.SECRET_INDEPENDENT)
        if structural is not None:
            return structural
        return RuleApplication("none", (name,), DistType.UNKNOWN)

    def _operand_type(self, operand: Operand, types: Dict[str, RuleApplication]) -> DistType:
        if isinstance(operand, int):
            return DistType.SECRET_INDEPENDENT
        return types[operand].result

    def _structural(self, name: str, types: Dict[str, RuleApplication]) -> Optional[RuleApplication]:
        """Rules on the single defining assignment of `name`."""
        a = self.program.definition(name)
        members = (name,)

        if a.op is None or a.op == Op.NOT:
            t = self._operand_type(a.operands[0], types)
            if t == DistType.UNKNOWN:
                return None
            rule = "Copy" if a.op is None and a.table is None else "Ide1"
            return RuleApplication(rule, members, t)

        if a.op.is_shift:
            t = self._operand_type(a.operands[0], types)
            if t.is_secure:
                return RuleApplication("Sid5", members, DistType.SECRET_INDEPENDENT, note="shift by a constant")
            return None

        left, right = a.operands
        t1 = self._operand_type(left, types)
        t2 = self._operand_type(right, types)

        # Operations with a constant operand
        if isinstance(left, int) or isinstance(right, int):
            variable, constant = (right, left) if isinstance(left, int) else (left, right)
            t = t2 if isinstance(left, int) else t1
            if isinstance(variable, int):
                return RuleApplication("Sid5", members, DistType.SECRET_INDEPENDENT, note="constant operands")
            bijective = a.op in (Op.XOR, Op.ADD, Op.SUB) or (a.op == Op.GMUL and constant != 0)
            if bijective and t != DistType.UNKNOWN:
                return RuleApplication("Ide1", members, t, note=f"bijective in {variable}")
            if t.is_secure:
                return RuleApplication("Sid5", members, DistType.SECRET_INDEPENDENT)
            return None

        # Both operands the same variable
        if left == right:
            if a.op in SELF_CANCELLING_OPS:
                return RuleApplication("Ide3", members, DistType.SECRET_INDEPENDENT)
            if a.op in IDEMPOTENT_OPS and t1 != DistType.UNKNOWN:
                return RuleApplication("Ide4", members, t1)
            if t1.is_secure:
                return RuleApplication("Ide2", members, DistType.SECRET_INDEPENDENT)
            return None

        e1, e2 = self.cm[left], self.cm[right]
        if a.op in MULTIPLICATIVE_OPS and t1 == DistType.UNIFORM and t2 == DistType.UNIFORM:
            for first, other in ((left, e2), (right, e1)):
                free = self.dominators(first) - other.rvars
                if free:
                    rule = "Sid4" if first == left else "Com+Sid4"
                    return RuleApplication(rule, members, DistType.SECRET_INDEPENDENT, witnesses=((first, min(free)),))

        if t1.is_secure and t2.is_secure and not (e1.rvars & e2.rvars):
            return RuleApplication("Sid5", members, DistType.SECRET_INDEPENDENT)

        if a.op in SDD_OPS:
            for leaky, uniform, t_leaky, t_uniform in ((left, right, t1, t2), (right, left, t2, t1)):
                if t_leaky == DistType.LEAKY and t_uniform == DistType.UNIFORM:
                    free = self.dominators(uniform) - self.cm[leaky].rvars
                    if free:
                        return RuleApplication("Sdd", members, DistType.LEAKY, witnesses=((uniform, min(free)),))
        return None

    # Higher order

    def infer_set(
        self,
        names: Sequence[str],
        exprs: Optional[Sequence[Expr]] = None,
        level: TransformLevel = TransformLevel.PLAIN,
        trace: Optional[TransformTrace] = None,
    ) -> Judgement:
        """
        Type an observable set from its (possibly transformed) computations.

        Members are peeled off one at a time: a member with a dominant
        random used by no other remaining member (Rud, or Sid3 once the
        remainder is only secret independent), a member determined by the
        others and public inputs (Sid2), or members over public inputs only
        (Sid1). Whatever remains is typed by No-Key or, for a single
        member, by its first-order type.
        """
        observables = frozenset(names)
        if exprs is None:
            exprs = [self.expression(name) for name in names]
        judgement = Judgement(observables, DistType.UNKNOWN, level=level, trace=trace)

        for name in names:
            rule = self.var_rule(name)
            if rule.result == DistType.LEAKY:
                judgement.rules.append(rule)
                judgement.dist_type = DistType.LEAKY
                return judgement

        order = self.program.order_index()
        remaining: Dict[str, Expr] = dict(zip(names, exprs))
        only_uniform_steps = True

        while remaining:
            peeled = self._peelable(remaining, order)
            if peeled is not None:
                member, witness = peeled
                del remaining[member]
                judgement.rules.append(
                    RuleApplication("Rud", (member,), DistType.UNIFORM, witnesses=((member, witness),))
                )
                continue

            determined = self._determined(remaining, order)
            if determined is not None:
                del remaining[determined]
                only_uniform_steps = False
                judgement.rules.append(RuleApplication("Sid2", (determined,), DistType.SECRET_INDEPENDENT))
                continue

            public_only = [
                m for m, e in remaining.items() if all(k == VarKind.PUBLIC for k in e.var_kinds.values())
            ]
            if public_only:
                for member in public_only:
                    del remaining[member]
                only_uniform_steps = False
                judgement.rules.append(
                    RuleApplication("Sid1", tuple(sorted(public_only)), DistType.SECRET_INDEPENDENT)
                )
                continue
            break

        if not remaining:
            judgement.dist_type = DistType.UNIFORM if only_uniform_steps else DistType.SECRET_INDEPENDENT
            return self._finish(judgement)

        rest = tuple(sorted(remaining, key=order.get))
        keyed = any(VarKind.PRIVATE in e.var_kinds.values() for e in remaining.values())
        if not keyed:
            judgement.rules.append(RuleApplication("No-Key", rest, DistType.SECRET_INDEPENDENT))
            judgement.dist_type = DistType.SECRET_INDEPENDENT
            return self._finish(judgement)

        if len(rest) == 1:
            rule = self.var_rule(rest[0])
            if rule.result.is_secure:
                judgement.rules.append(rule)
                uniform = rule.result == DistType.UNIFORM and only_uniform_steps
                judgement.dist_type = DistType.UNIFORM if uniform else DistType.SECRET_INDEPENDENT
                return self._finish(judgement)

        judgement.rules.append(RuleApplication("none", rest, DistType.UNKNOWN))
        return judgement

    def _peelable(self, remaining: Dict[str, Expr], order: Dict[str, int]) -> Optional[Tuple[str, str]]:
        for member in sorted(remaining, key=lambda m: order.get(m, -1)):
            others: FrozenSet[str] = frozenset()
            for other, e in remaining.items():
                if other != member:
                    others = others | e.rvars
            free = remaining[member].dominators - others
            if free:
                return member, min(free)
        return None

    def _determined(self, remaining: Dict[str, Expr], order: Dict[str, int]) -> Optional[str]:
        """Latest member whose defining operands are other members, public inputs or constants."""
        for member in sorted(remaining, key=lambda m: order.get(m, -1), reverse=True):
            if member not in self.program.x_i:
                continue
            allowed = (set(remaining) - {member}) | self.program.x_p
            if all(isinstance(o, int) or o in allowed for o in self.program.definition(member).operands):
                return member
        return None

    @staticmethod
    def _finish(judgement: Judgement) -> Judgement:
        logger.debug(f"Derived {judgement!r}")
        return judgement


@dataclass
class _CacheEntry:
    names: Tuple[str, ...]
    level: TransformLevel
    trace: TransformTrace


class CheckSession:
    """
    Check with escalation plain → Simply_Dom → Simply_Col and a cache of the
    transformations that succeeded, replayed when a checked set is extended.

    One session per exploration branch.
    """

    def __init__(self, typer: TypeInferenceUseCases, stats: Optional[ExplorationStats] = None):
        self.typer = typer
        self.stats = stats or ExplorationStats()
        self._cache: Dict[FrozenSet[str], _CacheEntry] = {}

    def check(self, names: Sequence[str], base: Optional[FrozenSet[str]] = None) -> Judgement:
        """
        Try to derive a secure type for `names`.

        Args:
            names: Observable set, in a deterministic order.
            base: A previously checked subset whose transformations may be
                replayed on the extended set.

        Returns:
            The judgement; `is_secure` tells whether Check succeeds.
        """
        names = tuple(names)
        key = frozenset(names)
        if base is not None:
            self.stats.extension_checks += 1
            entry = self._cache.get(base)
            if entry is not None:
                judgement = self._replay(entry, names)
                if judgement is not None:
                    return judgement
        else:
            self.stats.checks += 1

        lam = [self.typer.expression(name) for name in names]
        previous: Optional[List[Expr]] = None
        judgement: Optional[Judgement] = None
        for level in LEVELS:
            exprs, trace = self.typer.transforms.escalate(lam, level)
            if previous is not None and all(a is b for a, b in zip(exprs, previous)):
                continue
            previous = exprs
            judgement = self.typer.infer_set(names, exprs, level, trace)
            if judgement.dist_type == DistType.LEAKY:
                self.stats.leaky_shortcuts += 1
                return judgement
            if judgement.is_secure:
                self._record(key, names, level, trace)
                return judgement
        return judgement

    def _replay(self, entry: _CacheEntry, names: Tuple[str, ...]) -> Optional[Judgement]:
        lam = [self.typer.expression(name) for name in names]
        if entry.level == TransformLevel.PLAIN:
            exprs: Optional[List[Expr]] = lam
        else:
            self.stats.replays += 1
            exprs = self.typer.transforms.replay(entry.trace, lam)
        if exprs is None:
            return None
        judgement = self.typer.infer_set(names, exprs, entry.level, entry.trace)
        if judgement.is_secure:
            self._record(frozenset(names), names, entry.level, entry.trace, count=False)
            return judgement
        return None

    def _record(
        self, key: FrozenSet[str], names: Tuple[str, ...], level: TransformLevel, trace: TransformTrace, count: bool = True
    ) -> None:
        self._cache[key] = _CacheEntry(names, level, trace)
        if count and level == TransformLevel.DOM:
            self.stats.dom_successes += 1
        elif count and level == TransformLevel.COL:
            self.stats.col_successes += 1

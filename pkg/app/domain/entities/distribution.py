from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

from app.domain.entities.transform_trace import TransformTrace


class DistType(str, Enum):
    """Distribution type of an observable set"""
    UNIFORM = "uniform"
    SECRET_INDEPENDENT = "secret_independent"
    LEAKY = "leaky"
    UNKNOWN = "unknown"

    @property
    def is_secure(self) -> bool:
        """Uniform is a subtype of secret independent."""
        return self in (DistType.UNIFORM, DistType.SECRET_INDEPENDENT)

    @property
    def symbol(self) -> str:
        return {
            DistType.UNIFORM: "uf",
            DistType.SECRET_INDEPENDENT: "si",
            DistType.LEAKY: "lk",
            DistType.UNKNOWN: "?",
        }[self]


class TransformLevel(str, Enum):
    """How far Check escalated before a type was derived"""
    PLAIN = "plain"
    DOM = "dom"
    COL = "col"


@dataclass(frozen=True)
class RuleApplication:
    """One logged rule firing: rule name, the members it concerned and any witnesses"""

    rule: str
    members: Tuple[str, ...]
    result: DistType
    witnesses: Tuple[Tuple[str, str], ...] = ()
    note: str = ""

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {
            "rule": self.rule,
            "members": list(self.members),
            "result": self.result.value,
        }
        if self.witnesses:
            data["witnesses"] = {member: witness for member, witness in self.witnesses}
        if self.note:
            data["note"] = self.note
        return data


@dataclass
class Judgement:
    """`⊢ O : τ` together with the rules and transformations that produced it"""

    observables: FrozenSet[str]
    dist_type: DistType
    level: TransformLevel = TransformLevel.PLAIN
    rules: List[RuleApplication] = field(default_factory=list)
    trace: Optional[TransformTrace] = None

    @property
    def is_secure(self) -> bool:
        return self.dist_type.is_secure

    def to_dict(self) -> Dict[str, object]:
        return {
            "observables": sorted(self.observables),
            "type": self.dist_type.value,
            "level": self.level.value,
            "rules": [rule.to_dict() for rule in self.rules],
            "trace": self.trace.to_list() if self.trace is not None else [],
        }

    def __repr__(self) -> str:
        return f"<Judgement({{{', '.join(sorted(self.observables))}}} : {self.dist_type.symbol}, level={self.level.value})>"

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple, Union

from app.core.exceptions import VariableError
from app.domain.entities.bijective_table import BijectiveTable
from app.domain.entities.expr import Op, VarKind

Operand = Union[str, int]


@dataclass(frozen=True)
class Assignment:
    """Single-operator SSA assignment `target ← op(operands)`.

    `op` is None for a plain copy; `amount` is set for shifts and `table`
    for table applications.
    """

    target: str
    op: Optional[Op]
    operands: Tuple[Operand, ...]
    amount: Optional[int] = None
    table: Optional[str] = None
    preshare: bool = False

    def variables(self) -> List[str]:
        return [o for o in self.operands if isinstance(o, str)]

    def __str__(self) -> str:
        ops = [str(o) for o in self.operands]
        if self.table is not None:
            rhs = f"{self.table}({ops[0]})"
        elif self.op is None:
            rhs = ops[0]
        elif self.op == Op.NOT:
            rhs = f"~{ops[0]}"
        elif self.op.is_shift:
            rhs = f"{ops[0]} {self.op.value} {self.amount}"
        else:
            rhs = f"{ops[0]} {self.op.value} {ops[1]}"
        return f"{self.target} = {rhs};"


@dataclass(frozen=True)
class Program:
    """Straight-line SSA program with its variable partition"""

    assignments: Tuple[Assignment, ...]
    public: Tuple[str, ...]
    private: Tuple[str, ...]
    random: Tuple[str, ...]
    observables: Tuple[str, ...]
    width: int
    output: Optional[str] = None
    tables: Mapping[str, BijectiveTable] = field(default_factory=dict)
    versions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.width <= 16:
            raise ValueError("width must be between 1 and 16")
        inputs = set(self.public) | set(self.private) | set(self.random)
        if len(inputs) != len(self.public) + len(self.private) + len(self.random):
            raise ValueError("input classes must be disjoint")
        targets = [a.target for a in self.assignments]
        if len(set(targets)) != len(targets) or inputs & set(targets):
            raise ValueError("program is not in SSA form")
        if set(self.observables) & set(self.private):
            raise ValueError("private inputs cannot be observable")

    # Partition

    @property
    def intermediates(self) -> Tuple[str, ...]:
        return tuple(a.target for a in self.assignments)

    @property
    def x_p(self) -> FrozenSet[str]:
        return frozenset(self.public)

    @property
    def x_k(self) -> FrozenSet[str]:
        return frozenset(self.private)

    @property
    def x_r(self) -> FrozenSet[str]:
        return frozenset(self.random)

    @property
    def x_i(self) -> FrozenSet[str]:
        return frozenset(self.intermediates)

    def kind_of(self, name: str) -> VarKind:
        if name in self.x_p:
            return VarKind.PUBLIC
        if name in self.x_k:
            return VarKind.PRIVATE
        if name in self.x_r:
            return VarKind.RANDOM
        raise VariableError(f"{name} is not an input variable")

    def definition(self, name: str) -> Assignment:
        """Defining assignment of an intermediate."""
        try:
            return self._definitions[name]
        except KeyError:
            raise VariableError(f"{name} is not an intermediate variable") from None

    @property
    def _definitions(self) -> Dict[str, Assignment]:
        cached = self.__dict__.get("_definitions_cache")
        if cached is None:
            cached = {a.target: a for a in self.assignments}
            object.__setattr__(self, "_definitions_cache", cached)
        return cached

    def order_index(self) -> Dict[str, int]:
        """Position of every variable: inputs first, then SSA order."""
        names = list(self.public) + list(self.private) + list(self.random) + list(self.intermediates)
        return {name: i for i, name in enumerate(names)}

    def __repr__(self) -> str:
        return (
            f"<Program(width={self.width}, assignments={len(self.assignments)}, "
            f"observables={len(self.observables)})>"
        )

"""
Abstract syntax of `.mask` sources, as produced by the parser.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from app.domain.entities.expr import Op


class InputKind(str, Enum):
    """Declared class of an input variable"""
    PUBLIC = "public"
    PRIVATE = "private"
    RANDOM = "random"


@dataclass(frozen=True)
class Declaration:
    name: str
    kind: InputKind
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class TableDeclaration:
    name: str
    source: str
    line: int = 0
    column: int = 0


# Expressions


@dataclass(frozen=True)
class Number:
    value: int
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Name:
    name: str
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Unary:
    op: Op
    operand: "SourceExpr"
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Binary:
    op: Op
    left: "SourceExpr"
    right: "SourceExpr"
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Shift:
    op: Op
    operand: "SourceExpr"
    amount: Union[Number, Name]
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class TableApply:
    table: str
    argument: "SourceExpr"
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Call:
    procedure: str
    arguments: Tuple["SourceExpr", ...]
    line: int = 0
    column: int = 0


SourceExpr = Union[Number, Name, Unary, Binary, Shift, TableApply, Call]


# Statements


@dataclass(frozen=True)
class Assign:
    target: str
    value: SourceExpr
    preshare: bool = False
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class CallStatement:
    call: Call
    preshare: bool = False
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class ForLoop:
    variable: str
    start: Union[Number, Name]
    stop: Union[Number, Name]
    body: Tuple["Statement", ...]
    preshare: bool = False
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Return:
    value: SourceExpr
    line: int = 0
    column: int = 0


Statement = Union[Assign, CallStatement, ForLoop, Return]


@dataclass(frozen=True)
class Procedure:
    name: str
    parameters: Tuple[str, ...]
    body: Tuple[Statement, ...]
    result: SourceExpr
    line: int = 0
    column: int = 0


@dataclass
class SourceProgram:
    """Parsed `.mask` program: declarations, procedures and the main body"""

    declarations: List[Declaration] = field(default_factory=list)
    tables: List[TableDeclaration] = field(default_factory=list)
    procedures: Dict[str, Procedure] = field(default_factory=dict)
    body: List[Statement] = field(default_factory=list)
    result: Optional[Return] = None
    path: Optional[str] = None

    def inputs_of(self, kind: InputKind) -> List[str]:
        return [d.name for d in self.declarations if d.kind == kind]

    def assignments(self) -> List[Assign]:
        """Top-level assignments of the main body, loops flattened syntactically."""
        found: List[Assign] = []

        def walk(statements):
            for statement in statements:
                if isinstance(statement, Assign):
                    found.append(statement)
                elif isinstance(statement, ForLoop):
                    walk(statement.body)

        walk(self.body)
        return found

    def __repr__(self) -> str:
        return (
            f"<SourceProgram(declarations={len(self.declarations)}, "
            f"procedures={len(self.procedures)}, statements={len(self.body)})>"
        )

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Union

import networkx as nx

from app.core.config import settings
from app.core.exceptions import ElaborationError
from app.domain.entities.bijective_table import BijectiveTable
from app.domain.entities.program import Assignment, Operand, Program
from app.domain.entities.source_program import (
    Assign,
    Binary,
    Call,
    CallStatement,
    ForLoop,
    InputKind,
    Name,
    Number,
    Return,
    Shift,
    SourceExpr,
    SourceProgram,
    Statement,
    TableApply,
    Unary,
)
from app.infrastructure.services.table_loader import TableLoader

logger = logging.getLogger(__name__)

Binding = Union[str, int]


class _NameSupply:
    """Deterministic SSA names: `base`, then `base.1`, `base.2`, ... and `_tN` temporaries"""

    def __init__(self, reserved: Set[str], taken: Iterable[str]):
        self.reserved = set(reserved)
        self.used: Set[str] = set(taken)
        self.counters: Dict[str, int] = {}
        self.temp_counter = 0

    def fresh(self, base: str, own: bool = False) -> str:
        if own and base not in self.used:
            self.used.add(base)
            return base
        n = self.counters.get(base, 0)
        while True:
            n += 1
            candidate = f"{base}.{n}"
            if candidate not in self.used and candidate not in self.reserved:
                break
        self.counters[base] = n
        self.used.add(candidate)
        return candidate

    def temporary(self) -> str:
        while True:
            self.temp_counter += 1
            candidate = f"_t{self.temp_counter}"
            if candidate not in self.used and candidate not in self.reserved:
                self.used.add(candidate)
                return candidate


class ElaborationUseCases:
    """Inline procedures, unroll loops and lower a SourceProgram to one-operator SSA."""

    def __init__(self, table_loader: Optional[TableLoader] = None, unroll_limit: Optional[int] = None):
        self.table_loader = table_loader
        self.unroll_limit = unroll_limit if unroll_limit is not None else settings.UNROLL_LIMIT

    # Entry point

    def elaborate(self, source: SourceProgram, width: int) -> Program:
        if not 1 <= width <= 16:
            raise ElaborationError(f"width {width} is out of range 1..16")

        self._check_recursion(source)
        tables = self._load_tables(source, width)

        self.source = source
        self.width = width
        self.mask = (1 << width) - 1
        self.assignments: List[Assignment] = []
        self.unrolled = 0

        public = source.inputs_of(InputKind.PUBLIC)
        private = source.inputs_of(InputKind.PRIVATE)
        random = source.inputs_of(InputKind.RANDOM)
        inputs = public + private + random
        self.names = _NameSupply(_identifiers(source), inputs)

        env: Dict[str, Binding] = {name: name for name in inputs}
        self._statements(source.body, env, preshare=False, main=True)

        output: Optional[str] = None
        if source.result is not None:
            output = self._as_variable(self._lower(source.result.value, env, False), preshare=False)

        observables = self._observables(public, random, output)
        versions = {name: bound for name, bound in env.items() if isinstance(bound, str)}

        program = Program(
            assignments=tuple(self.assignments),
            public=tuple(public),
            private=tuple(private),
            random=tuple(random),
            observables=tuple(observables),
            width=width,
            output=output,
            tables=tables,
            versions=versions,
        )
        logger.info(
            f"Elaborated {source.path or '<input>'}: {len(program.assignments)} assignments, "
            f"{len(program.observables)} observables, {self.unrolled} loop iterations unrolled"
        )
        return program

    # Checks and tables

    def _check_recursion(self, source: SourceProgram) -> None:
        graph = nx.DiGraph()
        for name, procedure in source.procedures.items():
            graph.add_node(name)
            for callee in _called(list(procedure.body) + [Return(procedure.result)]):
                graph.add_edge(name, callee)
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return
        chain = " -> ".join([edge[0] for edge in cycle] + [cycle[0][0]])
        procedure = source.procedures[cycle[0][0]]
        raise ElaborationError(f"recursion detected: {chain}", procedure.line, procedure.column)

    def _load_tables(self, source: SourceProgram, width: int) -> Dict[str, BijectiveTable]:
        loader = self.table_loader
        if loader is None:
            loader = TableLoader(Path(source.path).parent if source.path else None)
        return {t.name: loader.load(t.name, t.source, width) for t in source.tables}

    # Statements

    def _statements(self, statements: Iterable[Statement], env: Dict[str, Binding], preshare: bool, main: bool) -> None:
        for statement in statements:
            if isinstance(statement, Assign):
                flag = preshare or statement.preshare
                target = self.names.fresh(statement.target, own=main)
                self._lower_into(target, statement.value, env, flag)
                env[statement.target] = target
            elif isinstance(statement, CallStatement):
                self._inline(statement.call, env, preshare or statement.preshare)
            elif isinstance(statement, ForLoop):
                self._unroll(statement, env, preshare or statement.preshare, main)
            else:
                raise ElaborationError("unexpected return inside a statement list", statement.line, statement.column)

    def _unroll(self, loop: ForLoop, env: Dict[str, Binding], preshare: bool, main: bool) -> None:
        start = self._constant(loop.start, env)
        stop = self._constant(loop.stop, env)
        count = max(0, stop - start)
        if count > self.unroll_limit or self.unrolled + count > self.unroll_limit:
            raise ElaborationError(
                f"loop over {loop.variable} exceeds the unroll limit of {self.unroll_limit}", loop.line, loop.column
            )
        self.unrolled += count
        for value in range(start, stop):
            env[loop.variable] = value
            self._statements(loop.body, env, preshare, main)
        env.pop(loop.variable, None)

    def _inline(self, call: Call, env: Dict[str, Binding], preshare: bool) -> Operand:
        procedure = self.source.procedures[call.procedure]
        arguments = [self._lower(argument, env, preshare) for argument in call.arguments]

        local: Dict[str, Binding] = {
            name: env.get(name, name) for name in self.source.inputs_of(InputKind.PUBLIC)
            + self.source.inputs_of(InputKind.PRIVATE) + self.source.inputs_of(InputKind.RANDOM)
        }
        local.update(zip(procedure.parameters, arguments))
        self._statements(procedure.body, local, preshare, main=False)
        return self._lower(procedure.result, local, preshare)

    # Expressions

    def _constant(self, bound: Union[Number, Name], env: Dict[str, Binding]) -> int:
        if isinstance(bound, Number):
            return bound.value
        value = env.get(bound.name)
        if not isinstance(value, int):
            raise ElaborationError(f"'{bound.name}' is not a constant", bound.line, bound.column)
        return value

    def _lower(self, expr: SourceExpr, env: Dict[str, Binding], preshare: bool) -> Operand:
        """Lower an expression to a single operand, emitting temporaries for operators."""
        if isinstance(expr, Number):
            return expr.value & self.mask
        if isinstance(expr, Name):
            try:
                bound = env[expr.name]
            except KeyError:
                raise ElaborationError(f"'{expr.name}' is not visible here", expr.line, expr.column) from None
            return bound & self.mask if isinstance(bound, int) else bound
        if isinstance(expr, Call):
            return self._inline(expr, env, preshare)
        target = self.names.temporary()
        self._lower_into(target, expr, env, preshare)
        return target

    def _lower_into(self, target: str, expr: SourceExpr, env: Dict[str, Binding], preshare: bool) -> None:
        if isinstance(expr, Unary):
            operand = self._lower(expr.operand, env, preshare)
            self._emit(Assignment(target, expr.op, (operand,), preshare=preshare))
        elif isinstance(expr, Binary):
            left = self._lower(expr.left, env, preshare)
            right = self._lower(expr.right, env, preshare)
            self._emit(Assignment(target, expr.op, (left, right), preshare=preshare))
        elif isinstance(expr, Shift):
            operand = self._lower(expr.operand, env, preshare)
            amount = self._constant(expr.amount, env)
            if amount < 0:
                raise ElaborationError(f"shift amount {amount} is negative", expr.line, expr.column)
            if amount >= self.width:
                # every bit is shifted out
                self._emit(Assignment(target, None, (0,), preshare=preshare))
            else:
                self._emit(Assignment(target, expr.op, (operand,), amount=amount, preshare=preshare))
        elif isinstance(expr, TableApply):
            operand = self._lower(expr.argument, env, preshare)
            self._emit(Assignment(target, None, (operand,), table=expr.table, preshare=preshare))
        else:
            operand = self._lower(expr, env, preshare)
            self._emit(Assignment(target, None, (operand,), preshare=preshare))

    def _as_variable(self, operand: Operand, preshare: bool) -> str:
        if isinstance(operand, str):
            return operand
        target = self.names.temporary()
        self._emit(Assignment(target, None, (operand,), preshare=preshare))
        return target

    def _emit(self, assignment: Assignment) -> None:
        self.assignments.append(assignment)

    # Observables

    def _observables(self, public: List[str], random: List[str], output: Optional[str]) -> List[str]:
        """Public and random inputs plus every intermediate except presharing ones used only inside presharing."""
        used_outside: Set[str] = set()
        for assignment in self.assignments:
            if not assignment.preshare:
                used_outside.update(assignment.variables())
        if output is not None:
            used_outside.add(output)

        observables = list(public) + list(random)
        for assignment in self.assignments:
            if assignment.preshare and assignment.target not in used_outside:
                continue
            observables.append(assignment.target)
        return observables


def _called(statements: Iterable[Statement]) -> Set[str]:
    found: Set[str] = set()

    def visit(expr: SourceExpr) -> None:
        if isinstance(expr, Call):
            found.add(expr.procedure)
            for argument in expr.arguments:
                visit(argument)
        elif isinstance(expr, (Unary, Shift)):
            visit(expr.operand)
        elif isinstance(expr, Binary):
            visit(expr.left)
            visit(expr.right)
        elif isinstance(expr, TableApply):
            visit(expr.argument)

    for statement in statements:
        if isinstance(statement, (Assign, Return)):
            visit(statement.value)
        elif isinstance(statement, CallStatement):
            visit(statement.call)
        elif isinstance(statement, ForLoop):
            found |= _called(statement.body)
    return found


def _identifiers(source: SourceProgram) -> Set[str]:
    """Every identifier spelled in the source, so generated names never collide with one."""
    names: Set[str] = {d.name for d in source.declarations} | {t.name for t in source.tables}

    def visit(expr: SourceExpr) -> None:
        if isinstance(expr, Name):
            names.add(expr.name)
        elif isinstance(expr, Call):
            for argument in expr.arguments:
                visit(argument)
        elif isinstance(expr, (Unary, Shift)):
            visit(expr.operand)
        elif isinstance(expr, Binary):
            visit(expr.left)
            visit(expr.right)
        elif isinstance(expr, TableApply):
            visit(expr.argument)

    def walk(statements: Iterable[Statement]) -> None:
        for statement in statements:
            if isinstance(statement, Assign):
                names.add(statement.target)
                visit(statement.value)
            elif isinstance(statement, CallStatement):
                visit(statement.call)
            elif isinstance(statement, ForLoop):
                names.add(statement.variable)
                walk(statement.body)
            elif isinstance(statement, Return):
                visit(statement.value)

    walk(source.body)
    if source.result is not None:
        visit(source.result.value)
    for procedure in source.procedures.values():
        names.update(procedure.parameters)
        walk(procedure.body)
        visit(procedure.result)
    return names

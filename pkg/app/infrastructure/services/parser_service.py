"""
Tokenizer, recursive-descent parser and pretty-printer for `.mask` sources.
"""

import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple, Union

from app.core.exceptions import ParseError
from app.domain.entities.expr import Op
from app.domain.entities.program import Program
from app.domain.entities.source_program import (
    Assign,
    Binary,
    Call,
    CallStatement,
    Declaration,
    ForLoop,
    InputKind,
    Name,
    Number,
    Procedure,
    Return,
    Shift,
    SourceExpr,
    SourceProgram,
    Statement,
    TableApply,
    TableDeclaration,
    Unary,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int


TOKEN_SPEC: List[Tuple[str, str]] = [
    ("LINE_COMMENT", r"//[^\n]*"),
    ("BLOCK_COMMENT", r"/\*(?s:.*?)\*/"),
    ("PRAGMA", r"\#[A-Za-z_]+"),
    ("NUMBER", r"0[xX][0-9A-Fa-f]+|0[bB][01]+|[0-9]+"),
    ("IDENT", r"[A-Za-z_][A-Za-z0-9_']*(?:\.[0-9]+)*"),
    ("STRING", r'"[^"\n]*"'),
    ("RANGE", r"\.\."),
    ("SHIFT", r"<<|>>|≪|≫"),
    ("OP", r"[\^&|@+\-*~⊕∧∨⊙×−¬]"),
    ("ASSIGN", r"=|←"),
    ("SYMBOL", r"[{}();,]"),
    ("NEWLINE", r"\n"),
    ("WS", r"[ \t\r]+"),
    ("MISMATCH", r"."),
]

TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in TOKEN_SPEC))

OPERATORS: Dict[str, Op] = {
    "^": Op.XOR, "⊕": Op.XOR,
    "&": Op.AND, "∧": Op.AND,
    "|": Op.OR, "∨": Op.OR,
    "@": Op.GMUL, "⊙": Op.GMUL,
    "+": Op.ADD,
    "-": Op.SUB, "−": Op.SUB,
    "*": Op.MUL, "×": Op.MUL,
    "~": Op.NOT, "¬": Op.NOT,
    "<<": Op.SHL, "≪": Op.SHL,
    ">>": Op.SHR, "≫": Op.SHR,
}

# Binary precedence levels, loosest first
PRECEDENCE: List[Tuple[Op, ...]] = [
    (Op.OR,),
    (Op.XOR,),
    (Op.AND,),
    (Op.SHL, Op.SHR),
    (Op.ADD, Op.SUB),
    (Op.MUL, Op.GMUL),
]

KEYWORDS = {"proc", "for", "in", "return"}
DECLARATION_PRAGMAS = {
    "#public": InputKind.PUBLIC,
    "#private": InputKind.PRIVATE,
    "#random": InputKind.RANDOM,
}


def tokenize(text: str) -> List[Token]:
    """Split source text into tokens, dropping whitespace and comments."""
    tokens: List[Token] = []
    line, column = 1, 1
    for match in TOKEN_RE.finditer(text):
        kind = match.lastgroup
        value = match.group()
        if kind == "NEWLINE":
            line += 1
            column = 1
            continue
        if kind in ("WS", "LINE_COMMENT", "BLOCK_COMMENT"):
            newlines = value.count("\n")
            if newlines:
                line += newlines
                column = len(value) - value.rfind("\n")
            else:
                column += len(value)
            continue
        if kind == "MISMATCH":
            raise ParseError(f"unknown operator or character {value!r}", line, column)
        tokens.append(Token(kind, value, line, column))
        column += len(value)
    tokens.append(Token("EOF", "", line, column))
    return tokens


class _Scope:
    """Names visible at a point of the source"""

    def __init__(self, names: Set[str], loop_vars: Tuple[str, ...] = ()):
        self.names = set(names)
        self.loop_vars = loop_vars

    def child_loop(self, variable: str) -> "_Scope":
        scope = _Scope(self.names, self.loop_vars + (variable,))
        return scope


class MaskParser:
    """Recursive-descent parser producing a `SourceProgram`."""

    def __init__(self, text: str, path: Optional[str] = None):
        self.path = path
        self.tokens = tokenize_with_path(text, path)
        self.pos = 0
        self.program = SourceProgram(path=path)
        self.inputs: Dict[str, InputKind] = {}
        self.table_names: Set[str] = set()
        self.defining: Optional[str] = None

    # Token helpers

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "EOF":
            self.pos += 1
        return token

    def _error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.current
        return ParseError(message, token.line, token.column, self.path)

    def _check(self, kind: str, value: Optional[str] = None) -> bool:
        token = self.current
        return token.kind == kind and (value is None or token.value == value)

    def _expect(self, kind: str, value: Optional[str] = None) -> Token:
        if not self._check(kind, value):
            expected = value or kind.lower()
            found = self.current.value or "end of input"
            raise self._error(f"expected '{expected}', found '{found}'")
        return self._advance()

    def _identifier(self) -> Token:
        token = self._expect("IDENT")
        if token.value in KEYWORDS:
            raise self._error(f"'{token.value}' is a reserved word", token)
        return token

    # Program level

    def parse(self) -> SourceProgram:
        scope = _Scope(set())
        while not self._check("EOF"):
            token = self.current
            if token.kind == "PRAGMA" and token.value in DECLARATION_PRAGMAS:
                self._declaration(scope)
            elif token.kind == "PRAGMA" and token.value == "#table":
                self._table_declaration()
            elif token.kind == "IDENT" and token.value == "proc":
                self._procedure()
            elif token.kind == "IDENT" and token.value == "return":
                self.program.result = self._return(scope)
                if not self._check("EOF"):
                    raise self._error("statements after the final return")
            else:
                self.program.body.extend(self._statement(scope, top_level=True))
        logger.debug(f"Parsed {self.program!r}")
        return self.program

    def _declaration(self, scope: _Scope) -> None:
        kind = DECLARATION_PRAGMAS[self._advance().value]
        while True:
            token = self._identifier()
            if token.value in self.inputs or token.value in self.table_names:
                raise self._error(f"'{token.value}' declared twice", token)
            if token.value in scope.names:
                raise self._error(f"'{token.value}' declared after its first assignment", token)
            self.inputs[token.value] = kind
            scope.names.add(token.value)
            self.program.declarations.append(Declaration(token.value, kind, token.line, token.column))
            if not self._check("SYMBOL", ","):
                break
            self._advance()
        self._expect("SYMBOL", ";")

    def _table_declaration(self) -> None:
        self._advance()
        name = self._identifier()
        if name.value in self.inputs or name.value in self.table_names:
            raise self._error(f"'{name.value}' declared twice", name)
        if self._check("STRING"):
            source = self._advance().value[1:-1]
        else:
            source = self._identifier().value
        self._expect("SYMBOL", ";")
        self.table_names.add(name.value)
        self.program.tables.append(TableDeclaration(name.value, source, name.line, name.column))

    def _procedure(self) -> None:
        start = self._advance()
        name = self._identifier()
        if name.value in self.program.procedures or name.value in self.table_names:
            raise self._error(f"procedure '{name.value}' defined twice", name)
        self._expect("SYMBOL", "(")
        parameters: List[str] = []
        if not self._check("SYMBOL", ")"):
            while True:
                parameter = self._identifier().value
                if parameter in parameters:
                    raise self._error(f"duplicate parameter '{parameter}'")
                parameters.append(parameter)
                if not self._check("SYMBOL", ","):
                    break
                self._advance()
        self._expect("SYMBOL", ")")
        self._expect("SYMBOL", "{")

        self.defining = name.value
        self._pending = (name.value, len(parameters))
        scope = _Scope(set(parameters) | set(self.inputs))
        body: List[Statement] = []
        while not self._check("IDENT", "return"):
            if self._check("SYMBOL", "}") or self._check("EOF"):
                raise self._error(f"procedure '{name.value}' must end with a return")
            body.extend(self._statement(scope, top_level=False))
        result = self._return(scope)
        self._expect("SYMBOL", "}")
        self.defining = None

        self.program.procedures[name.value] = Procedure(
            name.value, tuple(parameters), tuple(body), result.value, start.line, start.column
        )

    def _return(self, scope: _Scope) -> Return:
        token = self._advance()
        value = self._expression(scope)
        self._expect("SYMBOL", ";")
        return Return(value, token.line, token.column)

    # Statements

    def _statement(self, scope: _Scope, top_level: bool, preshare: bool = False) -> List[Statement]:
        token = self.current
        if token.kind == "PRAGMA" and token.value == "#preshare":
            if not top_level or preshare:
                raise self._error("#preshare blocks are only allowed in the main body")
            self._advance()
            self._expect("SYMBOL", "{")
            statements: List[Statement] = []
            while not self._check("SYMBOL", "}"):
                if self._check("EOF"):
                    raise self._error("unterminated #preshare block")
                statements.extend(self._statement(scope, top_level=False, preshare=True))
            self._advance()
            return statements
        if token.kind == "PRAGMA":
            raise self._error(f"unexpected {token.value} here")
        if token.kind == "IDENT" and token.value == "for":
            return [self._for_loop(scope, preshare)]
        if token.kind == "IDENT" and token.value == "return":
            raise self._error("return is only allowed at the end of a procedure or program")
        if token.kind != "IDENT":
            raise self._error(f"unexpected '{token.value or 'end of input'}'")

        target = self._identifier()
        if self._check("SYMBOL", "("):
            call = self._call(target, scope)
            if not isinstance(call, Call):
                raise self._error("a table application is not a statement", target)
            self._expect("SYMBOL", ";")
            return [CallStatement(call, preshare, target.line, target.column)]
        if target.value in self.table_names:
            raise self._error(f"cannot assign to table '{target.value}'", target)
        if target.value in scope.loop_vars:
            raise self._error(f"cannot assign to loop variable '{target.value}'", target)
        if not self._check("ASSIGN"):
            if self.current.kind in ("OP", "SHIFT"):
                raise self._error(f"unknown operator '{self.current.value}='")
            raise self._error(f"expected '=' after '{target.value}'")
        self._advance()
        value = self._expression(scope)
        self._expect("SYMBOL", ";")
        scope.names.add(target.value)
        return [Assign(target.value, value, preshare, target.line, target.column)]

    def _for_loop(self, scope: _Scope, preshare: bool) -> ForLoop:
        start_token = self._advance()
        variable = self._identifier()
        if variable.value in scope.names or variable.value in scope.loop_vars:
            raise self._error(f"loop variable '{variable.value}' shadows another name", variable)
        self._expect("IDENT", "in")
        start = self._bound(scope)
        self._expect("RANGE")
        stop = self._bound(scope)
        self._expect("SYMBOL", "{")
        inner = scope.child_loop(variable.value)
        body: List[Statement] = []
        while not self._check("SYMBOL", "}"):
            if self._check("EOF"):
                raise self._error("unterminated loop body")
            body.extend(self._statement(inner, top_level=False, preshare=preshare))
        self._advance()
        scope.names |= inner.names
        return ForLoop(variable.value, start, stop, tuple(body), preshare, start_token.line, start_token.column)

    def _bound(self, scope: _Scope) -> Union[Number, Name]:
        token = self.current
        if token.kind == "NUMBER":
            self._advance()
            return Number(int(token.value, 0), token.line, token.column)
        if token.kind == "IDENT" and token.value in scope.loop_vars:
            self._advance()
            return Name(token.value, token.line, token.column)
        raise self._error("non-constant loop bound")

    # Expressions

    def _expression(self, scope: _Scope, level: int = 0) -> SourceExpr:
        if level == len(PRECEDENCE):
            return self._unary(scope)
        left = self._expression(scope, level + 1)
        while self.current.kind in ("OP", "SHIFT") and OPERATORS.get(self.current.value) in PRECEDENCE[level]:
            token = self._advance()
            op = OPERATORS[token.value]
            if op.is_shift:
                amount = self._shift_amount(scope)
                left = Shift(op, left, amount, token.line, token.column)
            else:
                right = self._expression(scope, level + 1)
                left = Binary(op, left, right, token.line, token.column)
        return left

    def _shift_amount(self, scope: _Scope) -> Union[Number, Name]:
        token = self.current
        if token.kind == "NUMBER":
            self._advance()
            return Number(int(token.value, 0), token.line, token.column)
        if token.kind == "IDENT" and token.value in scope.loop_vars:
            self._advance()
            return Name(token.value, token.line, token.column)
        raise self._error("shift amount must be a constant")

    def _unary(self, scope: _Scope) -> SourceExpr:
        token = self.current
        if token.kind == "OP" and OPERATORS.get(token.value) == Op.NOT:
            self._advance()
            return Unary(Op.NOT, self._unary(scope), token.line, token.column)
        return self._primary(scope)

    def _primary(self, scope: _Scope) -> SourceExpr:
        token = self.current
        if token.kind == "NUMBER":
            self._advance()
            return Number(int(token.value, 0), token.line, token.column)
        if token.kind == "SYMBOL" and token.value == "(":
            self._advance()
            inner = self._expression(scope)
            self._expect("SYMBOL", ")")
            return inner
        if token.kind == "IDENT":
            name = self._identifier()
            if self._check("SYMBOL", "("):
                return self._call(name, scope)
            if name.value in self.table_names or name.value in self.program.procedures:
                raise self._error(f"'{name.value}' must be applied to arguments", name)
            if name.value not in scope.names and name.value not in scope.loop_vars:
                raise self._error(f"use of undeclared variable '{name.value}'", name)
            return Name(name.value, name.line, name.column)
        if token.kind in ("OP", "SHIFT"):
            raise self._error(f"unexpected operator '{token.value}'")
        raise self._error(f"unexpected '{token.value or 'end of input'}'")

    def _call(self, name: Token, scope: _Scope) -> Union[Call, TableApply]:
        self._expect("SYMBOL", "(")
        arguments: List[SourceExpr] = []
        if not self._check("SYMBOL", ")"):
            while True:
                arguments.append(self._expression(scope))
                if not self._check("SYMBOL", ","):
                    break
                self._advance()
        self._expect("SYMBOL", ")")

        if name.value in self.table_names:
            if len(arguments) != 1:
                raise self._error(f"table '{name.value}' takes exactly one argument", name)
            return TableApply(name.value, arguments[0], name.line, name.column)

        if name.value in self.program.procedures:
            arity = len(self.program.procedures[name.value].parameters)
        elif name.value == self.defining:
            arity = self._pending[1]
        else:
            raise self._error(f"unknown function '{name.value}'", name)
        if len(arguments) != arity:
            raise self._error(f"'{name.value}' expects {arity} arguments, got {len(arguments)}", name)
        return Call(name.value, tuple(arguments), name.line, name.column)


def tokenize_with_path(text: str, path: Optional[str]) -> List[Token]:
    try:
        return tokenize(text)
    except ParseError as exc:
        exc.source = path
        raise


def parse(text: str, path: Optional[str] = None) -> SourceProgram:
    """Parse `.mask` source text into a SourceProgram."""
    return MaskParser(text, path).parse()


class ProgramPrinter:
    """Render an elaborated Program back into `.mask` syntax."""

    @staticmethod
    def render(program: Program) -> str:
        lines: List[str] = []
        for pragma, names in (("#public", program.public), ("#private", program.private), ("#random", program.random)):
            if names:
                lines.append(f"{pragma} {', '.join(names)};")
        for table in program.tables.values():
            source = table.source if table.source == "aes" else f'"{table.source}"'
            lines.append(f"#table {table.name} {source};")

        in_preshare = False
        for assignment in program.assignments:
            if assignment.preshare and not in_preshare:
                lines.append("#preshare {")
                in_preshare = True
            elif not assignment.preshare and in_preshare:
                lines.append("}")
                in_preshare = False
            indent = "    " if in_preshare else ""
            lines.append(f"{indent}{assignment}")
        if in_preshare:
            lines.append("}")
        if program.output is not None:
            lines.append(f"return {program.output};")
        return "\n".join(lines) + "\n"

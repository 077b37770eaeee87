"""
SMT-LIB 2 encoding Ψ^O of "two secrets give different counts" and the
solver backends that decide it.

The document contains, for every random assignment f, one equation per
member and f (plus a primed copy for members reading private inputs), an
indicator integer per copy and f, and a single disequality between the two
indicator sums. sat means the set is leaky.
"""

import json
import logging
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from app.core.config import settings
from app.core.exceptions import BudgetExceededError, SolverError
from app.domain.entities.bijective_table import BijectiveTable
from app.domain.entities.distribution import DistType
from app.domain.entities.expr import Expr, ExprKind, Op, VarKind, topological_nodes
from app.domain.ports.smt_solver import SmtSolver
from app.infrastructure.services.galois_field import polynomial_for

logger = logging.getLogger(__name__)

ANSWERS = {
    "sat": DistType.LEAKY,
    "unsat": DistType.SECRET_INDEPENDENT,
    "unknown": DistType.UNKNOWN,
}

_BV_OPS = {
    Op.XOR: "bvxor",
    Op.AND: "bvand",
    Op.OR: "bvor",
    Op.ADD: "bvadd",
    Op.SUB: "bvsub",
    Op.MUL: "bvmul",
    Op.SHL: "bvshl",
    Op.SHR: "bvlshr",
}


def sexpr(items) -> str:
    return "({})".format(" ".join(str(i) for i in items))


def bvsort(width: int) -> str:
    return sexpr(["_", "BitVec", width])


def bvconst(value: int, width: int) -> str:
    return "(_ bv{} {})".format(int(value), width)


def symbol(name: str) -> str:
    return f"|{name}|"


def fun(name: str, params: Sequence[Tuple[str, str]], sort: str, term: str) -> str:
    s_params = " ".join("({} {})".format(p, s) for p, s in params)
    return "(define-fun {} ({}) {} {})".format(name, s_params, sort, term)


def conjunction(terms: Sequence[str]) -> str:
    return terms[0] if len(terms) == 1 else sexpr(["and", *terms])


def summation(terms: Sequence[str]) -> str:
    return terms[0] if len(terms) == 1 else sexpr(["+", *terms])


@dataclass
class SmtDocument:
    """Ψ^O split into sections, with the manifest written next to it"""

    declarations: List[str] = field(default_factory=list)
    definitions: List[str] = field(default_factory=list)
    assertions: List[str] = field(default_factory=list)
    manifest: Dict[str, object] = field(default_factory=dict)

    def script(self) -> str:
        """Declarations, definitions and assertions only (for in-process solvers)."""
        return "\n".join(self.declarations + self.definitions + self.assertions) + "\n"

    def text(self) -> str:
        """Complete stand-alone SMT-LIB 2 file."""
        return "(set-logic ALL)\n" + self.script() + "(check-sat)\n(exit)\n"

    @property
    def census(self) -> Dict[str, int]:
        return dict(self.manifest.get("census", {}))


class SmtEmitter:
    """Build Ψ^O for a set of computations over κ-bit words."""

    def __init__(
        self,
        width: int,
        tables: Optional[Mapping[str, BijectiveTable]] = None,
        cap_bits: Optional[int] = None,
    ):
        self.width = width
        self.tables = dict(tables or {})
        self.cap_bits = cap_bits if cap_bits is not None else settings.SMT_CAP_BITS

    def emit(self, exprs: Mapping[str, Expr]) -> SmtDocument:
        members = list(exprs)
        kinds: Dict[str, VarKind] = {}
        for name in members:
            kinds.update(exprs[name].var_kinds)
        public = sorted(n for n, k in kinds.items() if k == VarKind.PUBLIC)
        private = sorted(n for n, k in kinds.items() if k == VarKind.PRIVATE)
        randoms = sorted(n for n, k in kinds.items() if k.is_random)

        bits = self.width * len(randoms)
        if bits > self.cap_bits:
            raise BudgetExceededError(f"SMT encoding needs {bits} random bits, cap is {self.cap_bits}", budget="smt")

        keyed = [m for m in members if exprs[m].vars & set(private)]
        doc = SmtDocument()
        sort = bvsort(self.width)

        for name in public + private:
            doc.declarations.append(f"(declare-fun {symbol(name)} () {sort})")
        for name in private:
            doc.declarations.append(f"(declare-fun {symbol(name + '!p')} () {sort})")
        for name in members:
            doc.declarations.append(f"(declare-fun {symbol('c!' + name)} () {sort})")
        self._definitions(doc, exprs)

        program = indicators = 0
        sums: List[str] = []
        primed_sums: List[str] = []
        space = 1 << bits
        mask = (1 << self.width) - 1
        for f in range(space):
            assignment = {r: (f >> (self.width * i)) & mask for i, r in enumerate(randoms)}
            plain_eqs: List[str] = []
            primed_eqs: List[str] = []
            for name in members:
                x_f = symbol(f"{name}!f{f}")
                doc.declarations.append(f"(declare-fun {x_f} () {sort})")
                term = self.term(exprs[name], assignment, primed=False)
                doc.assertions.append(f"(assert (= {x_f} {term}))")
                program += 1
                plain_eqs.append(f"(= {x_f} {symbol('c!' + name)})")
                if name in keyed:
                    x_pf = symbol(f"{name}!p!f{f}")
                    doc.declarations.append(f"(declare-fun {x_pf} () {sort})")
                    doc.assertions.append(f"(assert (= {x_pf} {self.term(exprs[name], assignment, primed=True)}))")
                    program += 1
                    primed_eqs.append(f"(= {x_pf} {symbol('c!' + name)})")
                else:
                    primed_eqs.append(plain_eqs[-1])

            for tag, eqs, target in (("I", plain_eqs, sums), ("I!p", primed_eqs, primed_sums)):
                indicator = symbol(f"{tag}!f{f}")
                doc.declarations.append(f"(declare-fun {indicator} () Int)")
                doc.assertions.append(f"(assert (= {indicator} (ite {conjunction(eqs)} 1 0)))")
                indicators += 1
                target.append(indicator)

        doc.assertions.append(f"(assert (distinct {summation(sums)} {summation(primed_sums)}))")
        doc.manifest = {
            "observables": members,
            "width": self.width,
            "public": public,
            "private": private,
            "random": randoms,
            "keyed": keyed,
            "assignments": space,
            "census": {"program": program, "indicators": indicators, "disequality": 1},
            "answers": {answer: verdict.value for answer, verdict in ANSWERS.items()},
        }
        logger.debug(f"SMT encoding for {members}: {len(doc.assertions)} assertions")
        return doc

    def _definitions(self, doc: SmtDocument, exprs: Mapping[str, Expr]) -> None:
        nodes = topological_nodes(exprs.values())
        sort = bvsort(self.width)
        for table in sorted({n.table for n in nodes if n.kind == ExprKind.TABLE}):
            entries = self.tables[table].entries
            body = bvconst(entries[-1], self.width)
            for value in range(len(entries) - 2, -1, -1):
                body = f"(ite (= a {bvconst(value, self.width)}) {bvconst(entries[value], self.width)} {body})"
            doc.definitions.append(fun(symbol(f"T!{table}"), [("a", sort)], sort, body))

        if any(n.op == Op.GMUL for n in nodes):
            top = self.width - 1
            reduction = polynomial_for(self.width) & ((1 << self.width) - 1)
            shifted = f"(bvshl a {bvconst(1, self.width)})"
            xtime = f"(ite (= ((_ extract {top} {top}) a) #b1) (bvxor {shifted} {bvconst(reduction, self.width)}) {shifted})"
            doc.definitions.append(fun(symbol("xtime"), [("a", sort)], sort, xtime))
            terms = []
            multiple = "a"
            for bit in range(self.width):
                terms.append(f"(ite (= ((_ extract {bit} {bit}) b) #b1) {multiple} {bvconst(0, self.width)})")
                multiple = f"({symbol('xtime')} {multiple})"
            body = terms[0] if len(terms) == 1 else sexpr(["bvxor", *terms])
            doc.definitions.append(fun(symbol("gmul"), [("a", sort), ("b", sort)], sort, body))

    def term(self, expr: Expr, assignment: Mapping[str, int], primed: bool) -> str:
        """SMT term of `expr` with random variables fixed by `assignment`."""
        rendered: Dict[int, str] = {}
        for node in topological_nodes((expr,)):
            if node.kind == ExprKind.CONST:
                text = bvconst(node.value, self.width)
            elif node.kind == ExprKind.VAR:
                if node.var_kind.is_random:
                    text = bvconst(assignment[node.name], self.width)
                elif node.var_kind == VarKind.PRIVATE and primed:
                    text = symbol(node.name + "!p")
                else:
                    text = symbol(node.name)
            elif node.kind == ExprKind.NOT:
                text = f"(bvnot {rendered[node.left.id]})"
            elif node.kind == ExprKind.TABLE:
                text = f"({symbol('T!' + node.table)} {rendered[node.left.id]})"
            elif node.kind == ExprKind.SHIFT:
                text = f"({_BV_OPS[node.op]} {rendered[node.left.id]} {bvconst(node.amount, self.width)})"
            elif node.op == Op.GMUL:
                text = f"({symbol('gmul')} {rendered[node.left.id]} {rendered[node.right.id]})"
            else:
                text = f"({_BV_OPS[node.op]} {rendered[node.left.id]} {rendered[node.right.id]})"
            rendered[node.id] = text
        return rendered[expr.id]


def write_document(doc: SmtDocument, directory: str, stem: str) -> Path:
    """Write `<stem>.smt2` and its `<stem>.json` manifest; returns the formula path."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    path = target / f"{stem}.smt2"
    path.write_text(doc.text(), encoding="utf-8")
    (target / f"{stem}.json").write_text(json.dumps(doc.manifest, indent=2), encoding="utf-8")
    logger.info(f"SMT encoding written to {path}")
    return path


class Z3SmtSolver(SmtSolver):
    """In-process z3 backend"""

    def __init__(self, timeout_ms: Optional[int] = None):
        self.timeout_ms = timeout_ms

    @property
    def name(self) -> str:
        return "z3"

    def check(self, script: str) -> str:
        import z3

        solver = z3.Solver()
        if self.timeout_ms:
            solver.set("timeout", self.timeout_ms)
        try:
            solver.from_string(script)
            result = solver.check()
        except z3.Z3Exception as exc:
            raise SolverError(f"z3 rejected the encoding: {exc}") from exc
        return str(result)


class SubprocessSmtSolver(SmtSolver):
    """External solver binary reading an SMT-LIB 2 file.

    The command may contain `{file}`; otherwise the file path is appended.
    """

    def __init__(self, command: str, timeout: Optional[float] = None):
        if not command.strip():
            raise SolverError("solver command is empty")
        self.command = command
        self.timeout = timeout

    @property
    def name(self) -> str:
        return shlex.split(self.command)[0]

    def check(self, script: str) -> str:
        handle, path = tempfile.mkstemp(suffix=".smt2")
        try:
            with os.fdopen(handle, "w", encoding="utf-8") as fh:
                fh.write("(set-logic ALL)\n" + script + "(check-sat)\n")
            if "{file}" in self.command:
                args = shlex.split(self.command.replace("{file}", shlex.quote(path)))
            else:
                args = shlex.split(self.command) + [path]
            try:
                completed = subprocess.run(args, capture_output=True, text=True, timeout=self.timeout)
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise SolverError(f"solver command failed: {exc}") from exc
        finally:
            os.unlink(path)

        for line in completed.stdout.splitlines():
            answer = line.strip()
            if answer in ANSWERS:
                return answer
            if answer:
                break
        raise SolverError(f"unreadable solver answer: {completed.stdout.strip() or completed.stderr.strip()}")


def solver_for(command: str) -> SmtSolver:
    """`z3` selects the in-process backend; anything else is run as a command."""
    if command.strip() == "z3":
        return Z3SmtSolver()
    return SubprocessSmtSolver(command)

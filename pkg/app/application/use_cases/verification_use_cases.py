"""
The verification pipeline: parse and elaborate, explore with the type
system, then resolve every potential leaky set through the pattern store,
model counting and, past the counting budget, the SMT encoding.
"""

import itertools
import logging
import time
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple

from app.application.use_cases.counting_use_cases import CountingUseCases
from app.application.use_cases.elaboration_use_cases import ElaborationUseCases
from app.application.use_cases.exploration_use_cases import ExplorationUseCases, ProgressCallback
from app.application.use_cases.expression_use_cases import ComputationMap
from app.application.use_cases.pattern_use_cases import PatternUseCases
from app.core.exceptions import BudgetExceededError, SolverError
from app.domain.entities.distribution import DistType
from app.domain.entities.expr import Expr
from app.domain.entities.exploration import ExplorationResult, PotentialLeak
from app.domain.entities.histogram import CountingBackend
from app.domain.entities.pattern import PatternEntry
from app.domain.entities.program import Program
from app.domain.entities.report import LeakRecord, Report, RunConfig, RunMode
from app.domain.ports.pattern_repository import PatternRepository
from app.domain.ports.smt_solver import SmtSolver
from app.infrastructure.services.parser_service import parse
from app.infrastructure.services.smt_service import (
    ANSWERS,
    SmtEmitter,
    solver_for,
    write_document,
)

logger = logging.getLogger(__name__)


class VerificationUseCases:
    """Business logic for running a complete verification."""

    def __init__(
        self,
        pattern_store: Optional[PatternRepository] = None,
        smt_solver: Optional[SmtSolver] = None,
    ):
        self.pattern_store = pattern_store
        self.smt_solver = smt_solver

    # Input

    def load(self, config: RunConfig, text: Optional[str] = None) -> Program:
        """Parse and elaborate the program named by `config.path` (or given as `text`)."""
        if text is None:
            if config.path is None:
                raise ValueError("no input program given")
            text = Path(config.path).read_text(encoding="utf-8")
        source = parse(text, config.path)
        return ElaborationUseCases().elaborate(source, config.width)

    def _solver(self, config: RunConfig) -> Optional[SmtSolver]:
        if self.smt_solver is not None:
            return self.smt_solver
        if not config.solver:
            return None
        return solver_for(config.solver)

    # Pipeline

    def run(
        self,
        config: RunConfig,
        text: Optional[str] = None,
        progress: Optional[ProgressCallback] = None,
    ) -> Report:
        timings: Dict[str, float] = {}
        started = time.perf_counter()
        program = self.load(config, text)
        timings["elaborate"] = time.perf_counter() - started

        started = time.perf_counter()
        explorer = ExplorationUseCases(program, workers=config.workers, progress=progress)
        result = explorer.home(config.order)
        timings["explore"] = time.perf_counter() - started
        logger.info(f"Type phase: {len(result.pls)} potential leaky sets of order {config.order}")

        started = time.perf_counter()
        resolver = _Resolver(self, config, program, explorer)
        if config.mode == RunMode.TYPES:
            records = [
                LeakRecord(self._ordered(explorer, leak), DistType.UNKNOWN, leak.level, judgement=leak.judgement)
                for leak in result.pls
            ]
        else:
            records = [resolver.resolve(leak) for leak in result.pls]
        timings["resolve"] = time.perf_counter() - started

        report = Report(
            source=config.path or "<input>",
            order=config.order,
            width=config.width,
            mode=config.mode,
            x_check=result.x_check,
            records=records,
            stats=self._stats(result, resolver, records),
            timings=timings,
            proofs=[
                {"observables": sorted(names), "judgement": judgement.to_dict()}
                for names, judgement in sorted(result.judgements.items(), key=lambda item: sorted(item[0]))
            ],
            patterns=resolver.patterns.summary() if resolver.patterns is not None else [],
        )
        if hasattr(self.pattern_store, "flush"):
            self.pattern_store.flush()
        logger.info(
            f"Verdict {report.verdict.value}: {len(report.genuine)} genuine, "
            f"{len(report.spurious)} spurious, {len(report.undecided)} undecided"
        )
        return report

    @staticmethod
    def _ordered(explorer: ExplorationUseCases, leak: PotentialLeak) -> Tuple[str, ...]:
        return tuple(sorted(leak.observables, key=explorer.rank.__getitem__))

    @staticmethod
    def _stats(result: ExplorationResult, resolver: "_Resolver", records: List[LeakRecord]) -> Dict[str, int]:
        stats = {
            "x_check": len(result.x_check),
            "potential_sets": len(result.pls),
            "tuples_covered": len(result.covered),
            **result.stats.to_dict(),
            "pattern_hits": resolver.patterns.hits if resolver.patterns is not None else 0,
            "pattern_misses": resolver.patterns.misses if resolver.patterns is not None else 0,
            "counting_calls": resolver.counting.calls,
            "smt_calls": resolver.smt_calls,
            "genuine": sum(1 for r in records if r.genuine),
            "spurious": sum(1 for r in records if r.status.is_secure),
            "undecided": sum(1 for r in records if r.undecided),
        }
        return stats


class _Resolver:
    """Resolution of potential leaky sets for one run"""

    def __init__(self, owner: VerificationUseCases, config: RunConfig, program: Program, explorer: ExplorationUseCases):
        self.config = config
        self.program = program
        self.explorer = explorer
        self.counting = CountingUseCases(program.width, program.tables, bit_budget=config.bit_budget)
        self.solver = owner._solver(config)
        self.smt_calls = 0
        self.patterns: Optional[PatternUseCases] = None
        if owner.pattern_store is not None:
            self.patterns = PatternUseCases(
                owner.pattern_store, program.width, program.tables, transforms=explorer.transforms
            )

    def resolve(self, leak: PotentialLeak) -> LeakRecord:
        members = VerificationUseCases._ordered(self.explorer, leak)
        lam = {name: self.explorer.typer.expression(name) for name in members}
        record = LeakRecord(members, DistType.UNKNOWN, leak.level, judgement=leak.judgement)

        def count() -> DistType:
            self._count(lam, record)
            return record.status

        if self.patterns is None:
            count()
            return record

        transformed, _ = self.explorer.transforms.escalate(list(lam.values()), leak.level)
        provenance = f"{self.config.path or '<input>'}:{','.join(members)}"

        def matched(entry: PatternEntry) -> None:
            record.note = f"matched stored pattern {entry.id} ({entry.provenance or 'no provenance'})"

        verdict = self.patterns.lookup_or_insert(transformed, count, provenance, on_hit=matched)
        if record.backend is None and verdict is not None:
            record.status = verdict
            record.backend = CountingBackend.PATTERN
        return record

    def _count(self, lam: Dict[str, Expr], record: LeakRecord) -> None:
        try:
            verdict = self.counting.decide(lam, self.config.workers)
        except BudgetExceededError as exc:
            logger.warning(f"Counting {list(record.observables)} exceeds the {exc.budget} budget: {exc}")
            record.note = str(exc)
            self._smt(lam, record)
            return
        record.status = verdict.dist_type
        record.backend = verdict.backend
        record.witness = verdict.witness

    def _smt(self, lam: Dict[str, Expr], record: LeakRecord) -> None:
        if self.config.smt_dir is None and self.solver is None:
            return
        try:
            doc = SmtEmitter(self.program.width, self.program.tables).emit(lam)
        except BudgetExceededError as exc:
            logger.warning(f"SMT encoding of {list(record.observables)} skipped: {exc}")
            record.note = f"{record.note}; {exc}"
            return
        self.smt_calls += 1
        if self.config.smt_dir is not None:
            write_document(doc, self.config.smt_dir, f"set{self.smt_calls:04d}")
        if self.solver is None:
            return
        try:
            answer = self.solver.check(doc.script())
        except SolverError as exc:
            logger.warning(f"Solver failed on {list(record.observables)}: {exc}")
            record.note = f"{record.note}; {exc}"
            return
        record.status = ANSWERS[answer]
        record.backend = CountingBackend.SMT


def exhaustive_leaks(program: Program, order: int, counting: Optional[CountingUseCases] = None) -> List[FrozenSet[str]]:
    """
    Every leaky observable set of size `order` by counting all of them.

    Only observables depending on more than public inputs are combined;
    smaller programs contribute the single set of all of them.
    """
    cm = ComputationMap(program)
    counting = counting or CountingUseCases(program.width, program.tables)
    x_p = program.x_p
    candidates = [x for x in program.observables if not cm[x].vars <= x_p]
    size = min(order, len(candidates))
    leaks: List[FrozenSet[str]] = []
    for combo in itertools.combinations(candidates, size):
        if counting.bf_decide(cm.get_many(combo)).leaky:
            leaks.append(frozenset(combo))
    return leaks

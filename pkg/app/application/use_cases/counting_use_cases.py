"""
Exact model counting: joint histograms over every random assignment and
the comparison of those histograms across secrets.
"""

import concurrent.futures as cf
import itertools
import logging
import threading
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.application.use_cases.expression_use_cases import Evaluator
from app.core.config import settings
from app.core.exceptions import BudgetExceededError, VariableError
from app.domain.entities.bijective_table import BijectiveTable
from app.domain.entities.distribution import DistType
from app.domain.entities.expr import Expr, VarKind
from app.domain.entities.histogram import MAX_INDEX_BITS, CountingBackend, CountVerdict, Histogram, LeakWitness

logger = logging.getLogger(__name__)

CHUNK_BITS = 16

Tile = Tuple[np.ndarray, np.ndarray]


class CountingUseCases:
    """
    Brute-force and tiled resolution of Ω^O over a set of computations.

    Members are passed as `Mapping[name, Expr]`; public and private inputs
    are read from the variable kinds of the expressions, and every random
    (or collapsed) variable is enumerated.
    """

    def __init__(
        self,
        width: int,
        tables: Optional[Mapping[str, BijectiveTable]] = None,
        bit_budget: Optional[int] = None,
        tile_bits: Optional[int] = None,
        dense_bits: Optional[int] = None,
    ):
        self.width = width
        self.evaluator = Evaluator(width, tables)
        self.bit_budget = bit_budget if bit_budget is not None else settings.BIT_BUDGET
        if not 1 <= self.bit_budget <= MAX_INDEX_BITS:
            raise ValueError(f"bit budget must be between 1 and {MAX_INDEX_BITS}, got {self.bit_budget}")
        self.tile_bits = tile_bits if tile_bits is not None else settings.TILE_BITS
        self.dense_bits = dense_bits if dense_bits is not None else settings.DENSE_HISTOGRAM_BITS
        self.calls = 0
        self._calls_lock = threading.Lock()

    # Variable classes

    @staticmethod
    def _inputs(exprs: Sequence[Expr]) -> Tuple[List[str], List[str], List[str]]:
        kinds: Dict[str, VarKind] = {}
        for expr in exprs:
            kinds.update(expr.var_kinds)
        public = sorted(n for n, k in kinds.items() if k == VarKind.PUBLIC)
        private = sorted(n for n, k in kinds.items() if k == VarKind.PRIVATE)
        randoms = sorted(n for n, k in kinds.items() if k.is_random)
        return public, private, randoms

    def check_budget(self, exprs: Sequence[Expr]) -> None:
        """Raise when the histogram, the random space or the valuation space is too large."""
        public, private, randoms = self._inputs(exprs)
        checks = (
            ("histogram", len(exprs) * self.width),
            ("enumeration", len(randoms) * self.width),
            ("valuations", (len(public) + len(private)) * self.width),
        )
        for budget, bits in checks:
            if bits > self.bit_budget:
                raise BudgetExceededError(
                    f"{budget} needs {bits} bits, budget is {self.bit_budget}", budget=budget
                )

    # Histograms

    def count_joint(self, exprs: Sequence[Expr], eta: Mapping[str, int]) -> Histogram:
        """
        Joint histogram of `exprs` for one public/private valuation.

        Args:
            exprs: members of the observable set, in tuple order.
            eta: values of every public and private variable they use.

        Returns:
            Histogram over all |𝕀|^R random assignments.
        """
        exprs = list(exprs)
        self.check_budget(exprs)
        _, _, randoms = self._inputs(exprs)
        self._require(exprs, eta)
        space = 1 << (self.width * len(randoms))
        tiles = [self._tile(exprs, randoms, eta, start, stop) for start, stop in self._chunks(space, CHUNK_BITS)]
        return self._merge(len(exprs), tiles)

    def _require(self, exprs: Sequence[Expr], eta: Mapping[str, int]) -> None:
        public, private, _ = self._inputs(exprs)
        missing = [n for n in public + private if n not in eta]
        if missing:
            raise VariableError(f"valuation does not cover {', '.join(missing)}")

    @staticmethod
    def _chunks(space: int, bits: int) -> Iterator[Tuple[int, int]]:
        step = 1 << bits
        for start in range(0, space, step):
            yield start, min(space, start + step)

    def _tile(self, exprs: Sequence[Expr], randoms: Sequence[str], eta: Mapping[str, int], start: int, stop: int) -> Tile:
        """Sparse partial histogram of the random assignments start..stop-1."""
        mask = np.uint64((1 << self.width) - 1)
        assignment = np.arange(start, stop, dtype=np.uint64)
        values: Dict[str, object] = {name: np.uint64(value) for name, value in eta.items()}
        for i, name in enumerate(randoms):
            values[name] = (assignment >> np.uint64(self.width * i)) & mask

        index = np.zeros(stop - start, dtype=np.uint64)
        for i, column in enumerate(self.evaluator.evaluate_many(exprs, values)):
            column = np.broadcast_to(np.asarray(column, dtype=np.uint64), index.shape)
            index |= column << np.uint64(self.width * i)
        return np.unique(index, return_counts=True)

    def _merge(self, arity: int, tiles: Sequence[Tile]) -> Histogram:
        if arity * self.width <= self.dense_bits:
            dense = np.zeros(1 << (arity * self.width), dtype=np.int64)
            for keys, counts in tiles:
                np.add.at(dense, keys.astype(np.int64), counts)
            return Histogram.from_dense(self.width, arity, dense)
        keys = np.concatenate([t[0] for t in tiles])
        counts = np.concatenate([t[1] for t in tiles]).astype(np.int64)
        unique, inverse = np.unique(keys, return_inverse=True)
        merged = np.zeros(len(unique), dtype=np.int64)
        np.add.at(merged, inverse, counts)
        return Histogram(self.width, arity, unique, merged)

    # Decisions

    def _valuations(self, names: Sequence[str]) -> Iterator[Dict[str, int]]:
        for values in itertools.product(range(1 << self.width), repeat=len(names)):
            yield dict(zip(names, values))

    def _leak(
        self,
        members: Tuple[str, ...],
        eta_p: Dict[str, int],
        eta_ref: Dict[str, int],
        eta_k: Dict[str, int],
        reference: Histogram,
        histogram: Histogram,
    ) -> LeakWitness:
        values, ref_count, count = reference.first_difference(histogram)
        return LeakWitness(eta_p, eta_ref, eta_k, members, values, ref_count, count)

    def _count_call(self) -> None:
        with self._calls_lock:
            self.calls += 1

    def bf_decide(self, exprs: Mapping[str, Expr]) -> CountVerdict:
        """
        Ω^O by exhaustive enumeration.

        For every public valuation the histogram of the first private
        valuation is the reference; any other private valuation producing a
        different histogram makes the set leaky.
        """
        members = tuple(exprs)
        roots = [exprs[m] for m in members]
        self.check_budget(roots)
        self._count_call()
        public, private, _ = self._inputs(roots)
        histograms = 0

        for eta_p in self._valuations(public):
            reference: Optional[Histogram] = None
            eta_ref: Dict[str, int] = {}
            for eta_k in self._valuations(private):
                histogram = self.count_joint(roots, {**eta_p, **eta_k})
                histograms += 1
                if reference is None:
                    reference, eta_ref = histogram, eta_k
                    if not private:
                        break
                    continue
                if histogram != reference:
                    witness = self._leak(members, eta_p, eta_ref, eta_k, reference, histogram)
                    logger.debug(f"{list(members)} leaky at {witness.to_dict()}")
                    return CountVerdict(DistType.LEAKY, CountingBackend.ENUMERATION, witness, histograms)
            if not private:
                break

        return CountVerdict(DistType.SECRET_INDEPENDENT, CountingBackend.ENUMERATION, None, histograms)

    def parallel_decide(self, exprs: Mapping[str, Expr], workers: int) -> CountVerdict:
        """
        Ω^O with the random space split into tiles counted by a worker pool.

        Tiles are merged in submission order, so verdicts and witnesses are
        identical to `bf_decide`. The first mismatch cancels pending tiles.
        """
        members = tuple(exprs)
        roots = [exprs[m] for m in members]
        self.check_budget(roots)
        self._count_call()
        public, private, randoms = self._inputs(roots)
        space = 1 << (self.width * len(randoms))
        tile_bits = min(self.width * len(randoms), self.tile_bits)
        chunks = list(self._chunks(space, tile_bits))
        private_space = list(self._valuations(private)) if private else [{}]
        cancel_event = threading.Event()
        histograms = 0

        def count_tile(eta: Dict[str, int], start: int, stop: int) -> Optional[Tile]:
            if cancel_event.is_set():
                return None
            return self._tile(roots, randoms, eta, start, stop)

        with cf.ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
            try:
                for eta_p in self._valuations(public):
                    pending = [
                        [ex.submit(count_tile, {**eta_p, **eta_k}, start, stop) for start, stop in chunks]
                        for eta_k in private_space
                    ]
                    reference: Optional[Histogram] = None
                    eta_ref: Dict[str, int] = {}
                    for eta_k, futures in zip(private_space, pending):
                        histogram = self._merge(len(roots), [f.result() for f in futures])
                        histograms += 1
                        if reference is None:
                            reference, eta_ref = histogram, eta_k
                            continue
                        if histogram != reference:
                            cancel_event.set()
                            for batch in pending:
                                for fut in batch:
                                    fut.cancel()
                            witness = self._leak(members, eta_p, eta_ref, eta_k, reference, histogram)
                            return CountVerdict(DistType.LEAKY, CountingBackend.PARALLEL, witness, histograms)
                    if not private:
                        break
            finally:
                ex.shutdown(cancel_futures=True)

        return CountVerdict(DistType.SECRET_INDEPENDENT, CountingBackend.PARALLEL, None, histograms)

    def decide(self, exprs: Mapping[str, Expr], workers: int = 1) -> CountVerdict:
        if workers > 1:
            return self.parallel_decide(exprs, workers)
        return self.bf_decide(exprs)

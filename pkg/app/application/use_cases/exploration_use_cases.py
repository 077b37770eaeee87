import concurrent.futures as cf
import itertools
import logging
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from app.application.use_cases.expression_use_cases import ComputationMap
from app.application.use_cases.transform_use_cases import TransformUseCases
from app.application.use_cases.type_inference_use_cases import CheckSession, TypeInferenceUseCases
from app.domain.entities.distribution import Judgement
from app.domain.entities.exploration import (
    AnalysisCache,
    ExplorationResult,
    ExplorationStats,
    ExploreItem,
    PotentialLeak,
    PotentialLeakSet,
)
from app.domain.entities.program import Program

logger = logging.getLogger(__name__)

Items = List[ExploreItem]
ProgressCallback = Callable[[ExplorationStats, int], None]

PROGRESS_EVERY = 500


class _Branch:
    """State owned by one exploration branch: its Check cache, counters and covered sets"""

    def __init__(self, typer: TypeInferenceUseCases):
        self.stats = ExplorationStats()
        self.session = CheckSession(typer, self.stats)
        self.covered: List[FrozenSet[str]] = []
        self.judgements: Dict[FrozenSet[str], Judgement] = {}
        self.calls = 0


class ExplorationUseCases:
    """
    Divide-and-conquer enumeration of all size-d observable sets.

    Chooses a candidate subset per block, greedily grows it while Check
    succeeds, records failures as potential leaks and recurses over every
    way of moving order budget into the unchosen remainder of each block.
    """

    def __init__(
        self,
        program: Program,
        cm: Optional[ComputationMap] = None,
        transforms: Optional[TransformUseCases] = None,
        workers: int = 1,
        progress: Optional[ProgressCallback] = None,
    ):
        self.program = program
        self.cm = cm or ComputationMap(program)
        self.transforms = transforms or TransformUseCases(program.width, program.tables)
        self.workers = max(1, workers)
        self.progress = progress

        self.analysis = self.analyse()
        self.typer = TypeInferenceUseCases(program, self.cm, self.analysis, self.transforms)
        self.x_check = self._x_check()
        self.rank = {name: i for i, name in enumerate(self.x_check)}

    # Preprocessing

    def analyse(self) -> AnalysisCache:
        """λ and π for every intermediate."""
        cache = AnalysisCache()
        for name in self.program.intermediates:
            original = self.cm[name]
            (simplified,), _ = self.transforms.simplify_alg([original])
            if simplified is not original:
                cache.lam[name] = simplified
            cache.pi[name] = simplified.dominators
        for name in self.program.random:
            cache.pi[name] = frozenset((name,))
        return cache

    def _x_check(self) -> Tuple[str, ...]:
        """Observables depending on more than public inputs, leaf to root: smaller computations first."""
        order = self.program.order_index()
        x_p = self.program.x_p
        names = [x for x in self.program.observables if not self.cm[x].vars <= x_p]
        return tuple(sorted(names, key=lambda x: (self.cm[x].size, order[x])))

    # Algorithm

    def home(self, order: int) -> ExplorationResult:
        if order < 1:
            raise ValueError("order must be at least 1")
        pls = PotentialLeakSet()
        result = ExplorationResult(order, self.x_check, pls, ExplorationStats())
        logger.info(f"Exploring order {order} over {len(self.x_check)} checkable observables")

        if not self.x_check:
            return result

        root = _Branch(self.typer)
        if len(self.x_check) < order:
            # Fewer checkable observables than the order: the whole set is the only candidate
            judgement = root.session.check(self.x_check)
            if judgement.is_secure:
                root.covered.append(frozenset(self.x_check))
                root.judgements[frozenset(self.x_check)] = judgement
            else:
                pls.add(PotentialLeak(frozenset(self.x_check), judgement.level, judgement))
            self._collect(result, [root])
            return result

        start = [ExploreItem(order, frozenset(self.x_check))]
        branches = self._explore_call(start, root, pls, order)
        if self.workers == 1 or len(branches) <= 1:
            self._run(branches, root, pls, order)
            self._collect(result, [root])
        else:
            self._collect(result, [root] + self._fan_out(branches, pls, order))

        logger.info(
            f"Exploration done: {result.stats.checks} checks, {result.stats.extension_checks} extension checks, "
            f"{len(pls)} potential leaky sets"
        )
        return result

    def _fan_out(self, branches: List[Items], pls: PotentialLeakSet, order: int) -> List[_Branch]:
        """Run the top-level recursive calls concurrently, each with a branch-local Check cache."""
        states = [_Branch(self.typer) for _ in branches]
        with cf.ThreadPoolExecutor(max_workers=self.workers) as ex:
            futures = [ex.submit(self._run, [items], state, pls, order) for items, state in zip(branches, states)]
            try:
                for future in futures:
                    future.result()
            finally:
                ex.shutdown(cancel_futures=True)
        return states

    def _run(self, branches: List[Items], state: _Branch, pls: PotentialLeakSet, order: int) -> None:
        stack = list(reversed(branches))
        while stack:
            items = stack.pop()
            stack.extend(reversed(self._explore_call(items, state, pls, order)))

    def _explore_call(self, items: Items, state: _Branch, pls: PotentialLeakSet, order: int) -> List[Items]:
        """One Explore(Y) call; returns the recursive calls it would make, in order."""
        self._assert_items(items, order)
        state.calls += 1
        if self.progress is not None and state.calls % PROGRESS_EVERY == 0:
            self.progress(state.stats, len(pls))

        chosen: List[List[str]] = [self._ordered(item.block)[: item.order] for item in items]
        current = [name for block in chosen for name in block]
        judgement = state.session.check(current)

        if judgement.is_secure:
            for index, item in enumerate(items):
                if item.order == 0:
                    continue
                for x in self._ordered(item.block - set(chosen[index])):
                    extended = state.session.check(current + [x], base=frozenset(current))
                    if extended.is_secure:
                        chosen[index].append(x)
                        current.append(x)
                        judgement = extended
            state.covered.append(frozenset(current))
            state.judgements[frozenset(current)] = judgement
        else:
            pls.add(PotentialLeak(frozenset(current), judgement.level, judgement))
            logger.debug(f"Potential leak {sorted(current)}")

        splittable = [i for i, item in enumerate(items) if len(item.block) > item.order and item.order != 0]
        if not splittable:
            return []

        ranges = [range(min(items[i].order, len(items[i].block) - len(chosen[i])) + 1) for i in splittable]
        calls: List[Items] = []
        for split in itertools.product(*ranges):
            if sum(split) == 0:
                continue
            moved = dict(zip(splittable, split))
            next_items: Items = []
            for index, item in enumerate(items):
                if index not in moved:
                    next_items.append(item)
                    continue
                taken = frozenset(chosen[index])
                rest = item.block - taken
                next_items.append(ExploreItem(item.order - moved[index], taken))
                if rest:
                    next_items.append(ExploreItem(moved[index], rest))
            calls.append(next_items)
        return calls

    def _ordered(self, names) -> List[str]:
        return sorted(names, key=self.rank.__getitem__)

    def _assert_items(self, items: Sequence[ExploreItem], order: int) -> None:
        total = sum(item.order for item in items)
        blocks = [item.block for item in items]
        union = frozenset().union(*blocks)
        assert total == order, f"order budgets sum to {total}, expected {order}"
        assert sum(len(b) for b in blocks) == len(union) == len(self.x_check), "blocks do not partition X_check"

    @staticmethod
    def _collect(result: ExplorationResult, states: List[_Branch]) -> None:
        for state in states:
            result.stats.merge(state.stats)
            result.covered.extend(state.covered)
            result.judgements.update(state.judgements)
        result.covered.sort(key=lambda s: tuple(sorted(s)))

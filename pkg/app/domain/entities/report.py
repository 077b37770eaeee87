from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from app.core.config import settings
from app.domain.entities.distribution import DistType, Judgement, TransformLevel
from app.domain.entities.histogram import MAX_INDEX_BITS, CountingBackend, LeakWitness

REPORT_SCHEMA_VERSION = 1
SUPPORTED_WIDTHS = (1, 2, 4, 8, 16)


class RunMode(str, Enum):
    """`types` stops after exploration; `full` resolves every potential leak"""
    FULL = "full"
    TYPES = "types"


class Verdict(str, Enum):
    SECURE = "secure"
    LEAKY = "leaky"
    UNDECIDED = "undecided"

    @property
    def exit_code(self) -> int:
        return {Verdict.SECURE: 0, Verdict.LEAKY: 1, Verdict.UNDECIDED: 2}[self]


@dataclass
class RunConfig:
    """Options of one verification run"""

    path: Optional[str] = None
    order: int = 1
    width: int = 8
    mode: RunMode = RunMode.FULL
    workers: int = 1
    bit_budget: int = 32
    smt_dir: Optional[str] = None
    solver: Optional[str] = None
    patterns: Optional[str] = None
    report_format: str = "text"

    def __post_init__(self):
        self.mode = RunMode(self.mode)
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if self.width not in SUPPORTED_WIDTHS:
            raise ValueError(f"width must be one of {', '.join(map(str, SUPPORTED_WIDTHS))}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not 1 <= self.bit_budget <= MAX_INDEX_BITS:
            raise ValueError(f"bit budget must be between 1 and {MAX_INDEX_BITS}")
        if self.report_format not in ("text", "json"):
            raise ValueError("report format must be 'text' or 'json'")

    @classmethod
    def from_settings(cls, **overrides) -> "RunConfig":
        """Defaults from the environment, overridden by explicit (non-None) values."""
        values = {
            "order": settings.ORDER,
            "width": settings.WIDTH,
            "mode": settings.MODE,
            "workers": settings.WORKERS,
            "bit_budget": settings.BIT_BUDGET,
            "smt_dir": settings.SMT_DIR,
            "solver": settings.SOLVER_CMD,
            "report_format": settings.REPORT_FORMAT,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class LeakRecord:
    """One potential leaky set and how it was resolved"""

    observables: Tuple[str, ...]
    status: DistType
    level: TransformLevel
    backend: Optional[CountingBackend] = None
    witness: Optional[LeakWitness] = None
    note: str = ""
    judgement: Optional[Judgement] = None

    @property
    def genuine(self) -> bool:
        return self.status == DistType.LEAKY

    @property
    def undecided(self) -> bool:
        return self.status == DistType.UNKNOWN

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {
            "observables": list(self.observables),
            "status": self.status.value,
            "level": self.level.value,
            "backend": self.backend.value if self.backend is not None else None,
        }
        if self.witness is not None:
            data["witness"] = self.witness.to_dict()
        if self.note:
            data["note"] = self.note
        if self.judgement is not None:
            data["proof"] = self.judgement.to_dict()
        return data


@dataclass
class Report:
    """Outcome of a verification run"""

    source: str
    order: int
    width: int
    mode: RunMode
    x_check: Tuple[str, ...]
    records: List[LeakRecord] = field(default_factory=list)
    stats: Dict[str, int] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    proofs: List[Dict[str, object]] = field(default_factory=list)
    patterns: List[Dict[str, object]] = field(default_factory=list)

    @property
    def genuine(self) -> List[LeakRecord]:
        return [r for r in self.records if r.genuine]

    @property
    def undecided(self) -> List[LeakRecord]:
        return [r for r in self.records if r.undecided]

    @property
    def spurious(self) -> List[LeakRecord]:
        return [r for r in self.records if r.status.is_secure]

    @property
    def verdict(self) -> Verdict:
        if self.genuine:
            return Verdict.LEAKY
        if self.undecided:
            return Verdict.UNDECIDED
        return Verdict.SECURE

    @property
    def exit_code(self) -> int:
        return self.verdict.exit_code

    def to_dict(self) -> Dict[str, object]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "source": self.source,
            "order": self.order,
            "width": self.width,
            "mode": self.mode.value,
            "verdict": self.verdict.value,
            "genuine_leaks": [r.to_dict() for r in self.genuine],
            "spurious_count": len(self.spurious),
            "undecided": [r.to_dict() for r in self.undecided],
            "potential_leaks": [list(r.observables) for r in self.records],
            "x_check": list(self.x_check),
            "stats": dict(self.stats),
            "timings": {phase: round(seconds, 6) for phase, seconds in self.timings.items()},
            "patterns": list(self.patterns),
            "proofs": list(self.proofs),
        }

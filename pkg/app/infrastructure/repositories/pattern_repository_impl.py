import json
import logging
import threading
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

from app.core.exceptions import PatternStoreError
from app.domain.entities.distribution import DistType
from app.domain.entities.pattern import PatternEntry
from app.domain.ports.pattern_repository import PatternRepository
from app.infrastructure.models.pattern_model import PatternModel
from app.infrastructure.services import expr_codec

logger = logging.getLogger(__name__)

Bucket = Tuple[int, str]


class _Buckets:
    """In-memory fingerprint index shared by both store backends"""

    def __init__(self):
        self.entries: List[PatternEntry] = []
        self.index: Dict[Bucket, List[PatternEntry]] = defaultdict(list)
        self.lock = threading.Lock()

    def put(self, entry: PatternEntry) -> None:
        self.entries.append(entry)
        self.index[(entry.width, entry.fingerprint)].append(entry)

    def find(self, width: int, fingerprint: str) -> List[PatternEntry]:
        return list(self.index.get((width, fingerprint), ()))


class PatternRepositoryImpl(PatternRepository):
    """SQLAlchemy implementation of the PatternRepository interface."""

    def __init__(self, db: Session):
        self.db = db
        self._buckets = _Buckets()
        for model in self.db.query(PatternModel).order_by(PatternModel.id).all():
            self._buckets.put(self._to_entity(model))
        logger.info(f"Loaded {len(self._buckets.entries)} patterns from the database")

    # Mappers

    def _to_entity(self, model: Optional[PatternModel]) -> Optional[PatternEntry]:
        """Convert ORM model to domain entity."""
        if model is None:
            return None
        return PatternEntry(
            id=model.id,
            fingerprint=model.fingerprint,
            width=model.width,
            exprs=tuple(expr_codec.loads(model.exprs, model.width)),
            verdict=model.verdict,
            table_tags=json.loads(model.table_tags or "{}"),
            provenance=model.provenance or "",
            hits=model.hits,
            created_at=model.created_at,
        )

    def _to_model(self, entity: PatternEntry) -> PatternModel:
        """Convert domain entity to ORM model."""
        return PatternModel(
            id=entity.id,
            fingerprint=entity.fingerprint,
            width=entity.width,
            exprs=expr_codec.dumps(entity.exprs),
            verdict=entity.verdict,
            table_tags=json.dumps(entity.table_tags, sort_keys=True),
            provenance=entity.provenance,
            hits=entity.hits,
            created_at=entity.created_at,
        )

    # Store operations

    def add(self, entry: PatternEntry) -> PatternEntry:
        """Persist a new pattern and index it."""
        with self._buckets.lock:
            try:
                db_pattern = self._to_model(entry)
                self.db.add(db_pattern)
                self.db.commit()
                self.db.refresh(db_pattern)
            except SQLAlchemyError as exc:
                self.db.rollback()
                raise PatternStoreError(f"could not store pattern: {exc}") from exc
            entry.id = db_pattern.id
            self._buckets.put(entry)
            return entry

    def find_by_fingerprint(self, width: int, fingerprint: str) -> List[PatternEntry]:
        return self._buckets.find(width, fingerprint)

    def record_hit(self, entry: PatternEntry) -> None:
        """Increment the served-set counter of a pattern."""
        with self._buckets.lock:
            entry.hits += 1
            db_pattern = self.db.query(PatternModel).filter(PatternModel.id == entry.id).first()
            if db_pattern is None:
                return
            db_pattern.hits = entry.hits
            try:
                self.db.commit()
            except SQLAlchemyError as exc:
                self.db.rollback()
                raise PatternStoreError(f"could not update pattern {entry.id}: {exc}") from exc

    def get_all(self) -> List[PatternEntry]:
        return list(self._buckets.entries)

    def count(self) -> int:
        return len(self._buckets.entries)


class JsonLinesPatternRepository(PatternRepository):
    """Line-delimited JSON pattern file.

    Every insert appends a line; hit counters are kept in memory and
    written back by `flush`.
    """

    def __init__(self, path: str):
        self.path = Path(path)
        self._buckets = _Buckets()
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise PatternStoreError(f"could not read {self.path}: {exc}") from exc
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                self._buckets.put(self._decode(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise PatternStoreError(f"{self.path}:{number}: malformed pattern: {exc}") from exc
        logger.info(f"Loaded {len(self._buckets.entries)} patterns from {self.path}")

    @staticmethod
    def _encode(entry: PatternEntry) -> Dict[str, object]:
        return {
            "id": entry.id,
            "fingerprint": entry.fingerprint,
            "width": entry.width,
            "exprs": [expr_codec.encode(e) for e in entry.exprs],
            "verdict": entry.verdict.value,
            "table_tags": entry.table_tags,
            "provenance": entry.provenance,
            "hits": entry.hits,
        }

    @staticmethod
    def _decode(data: Dict[str, object]) -> PatternEntry:
        width = int(data["width"])
        return PatternEntry(
            id=data.get("id"),
            fingerprint=data["fingerprint"],
            width=width,
            exprs=tuple(expr_codec.decode(item, width) for item in data["exprs"]),
            verdict=DistType(data["verdict"]),
            table_tags=dict(data.get("table_tags") or {}),
            provenance=data.get("provenance") or "",
            hits=int(data.get("hits", 0)),
        )

    def add(self, entry: PatternEntry) -> PatternEntry:
        with self._buckets.lock:
            entry.id = len(self._buckets.entries) + 1
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(self._encode(entry), sort_keys=True) + "\n")
            except OSError as exc:
                raise PatternStoreError(f"could not append to {self.path}: {exc}") from exc
            self._buckets.put(entry)
            return entry

    def find_by_fingerprint(self, width: int, fingerprint: str) -> List[PatternEntry]:
        return self._buckets.find(width, fingerprint)

    def record_hit(self, entry: PatternEntry) -> None:
        with self._buckets.lock:
            entry.hits += 1

    def flush(self) -> None:
        """Rewrite the file with current hit counters."""
        with self._buckets.lock:
            text = "".join(json.dumps(self._encode(e), sort_keys=True) + "\n" for e in self._buckets.entries)
            try:
                self.path.write_text(text, encoding="utf-8")
            except OSError as exc:
                raise PatternStoreError(f"could not write {self.path}: {exc}") from exc

    def get_all(self) -> List[PatternEntry]:
        return list(self._buckets.entries)

    def count(self) -> int:
        return len(self._buckets.entries)

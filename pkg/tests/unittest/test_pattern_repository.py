"""
Unit tests for the pattern store repositories.

Both backends are covered: the SQLAlchemy repository against an in-memory
SQLite database and the line-delimited JSON file. Each test works on a
fresh store so results are isolated and deterministic.

Framework: unittest (Python Standard Library)
"""

import json
import shutil
import tempfile
import unittest
from pathlib import Path

from sqlalchemy.orm import sessionmaker

from app.core.database import Base, build_engine
from app.core.exceptions import PatternStoreError
from app.domain.entities.distribution import DistType
from app.domain.entities.expr import POOL, Op, VarKind
from app.domain.entities.pattern import PatternEntry
from app.infrastructure.repositories.pattern_repository_impl import (
    JsonLinesPatternRepository,
    PatternRepositoryImpl,
)


def build_test_entry(**overrides) -> PatternEntry:
    """
    Factory helper to build a `PatternEntry` for `{k ^ r, r}` with default fields.

    Args:
        **overrides: Key-value pairs to override default entry attributes.

    Returns:
        PatternEntry: An entry not yet stored.
    """
    k = POOL.var("k", VarKind.PRIVATE)
    r = POOL.var("r", VarKind.RANDOM)
    defaults = {
        "fingerprint": "a" * 64,
        "width": 8,
        "exprs": (POOL.binary(Op.XOR, k, r), r),
        "verdict": DistType.LEAKY,
        "provenance": "test",
    }
    defaults.update(overrides)
    return PatternEntry(**defaults)


class TestSqlPatternRepository(unittest.TestCase):
    """
    Unit tests for `PatternRepositoryImpl`.

    Verifies that entries are persisted with their expressions, indexed by
    (width, fingerprint), reloaded by a new repository and that hit counters
    are written back to the database.
    """

    def setUp(self):
        """
        Create an in-memory database with the pattern table.
        """
        self.engine = build_engine("sqlite:///:memory:")
        Base.metadata.create_all(bind=self.engine)
        self.session = sessionmaker(bind=self.engine)()
        self.repository = PatternRepositoryImpl(self.session)

    def tearDown(self):
        """
        Close the session and drop the schema.
        """
        self.session.close()
        Base.metadata.drop_all(bind=self.engine)

    # ----------------------------------------------------------
    def test_add_assigns_id_and_indexes(self):
        """
        Test that `add` populates the ID and makes the entry findable.
        """
        entry = self.repository.add(build_test_entry())

        self.assertIsNotNone(entry.id)
        self.assertEqual(self.repository.count(), 1)
        self.assertEqual(self.repository.find_by_fingerprint(8, "a" * 64), [entry])
        self.assertEqual(self.repository.find_by_fingerprint(4, "a" * 64), [])
        self.assertEqual(self.repository.find_by_fingerprint(8, "b" * 64), [])

    # ----------------------------------------------------------
    def test_reload_restores_expressions(self):
        """
        Test that a new repository on the same database sees stored entries
        with identical (hash-consed) expressions and their table tags.
        """
        stored = self.repository.add(build_test_entry(table_tags={"sbox": "abc"}))

        reloaded = PatternRepositoryImpl(self.session)
        (entry,) = reloaded.get_all()
        self.assertEqual(entry.id, stored.id)
        self.assertIs(entry.exprs[0], stored.exprs[0])
        self.assertEqual(entry.verdict, DistType.LEAKY)
        self.assertEqual(entry.table_tags, {"sbox": "abc"})
        self.assertEqual(entry.provenance, "test")

    # ----------------------------------------------------------
    def test_record_hit_is_persisted(self):
        """
        Test that hit counters survive a reload.
        """
        entry = self.repository.add(build_test_entry())
        self.repository.record_hit(entry)
        self.repository.record_hit(entry)

        self.assertEqual(entry.hits, 2)
        self.assertEqual(PatternRepositoryImpl(self.session).get_all()[0].hits, 2)


class TestJsonLinesPatternRepository(unittest.TestCase):
    """
    Unit tests for `JsonLinesPatternRepository`.
    """

    def setUp(self):
        """
        Create a temporary directory holding the store file.
        """
        self.test_dir = Path(tempfile.mkdtemp())
        self.path = self.test_dir / "nested" / "patterns.jsonl"

    def tearDown(self):
        """
        Clean up temporary directory after each test.
        """
        shutil.rmtree(self.test_dir, ignore_errors=True)

    # ----------------------------------------------------------
    def test_missing_file_is_an_empty_store(self):
        """
        Test that a store starts empty when its file does not exist yet.
        """
        repository = JsonLinesPatternRepository(str(self.path))
        self.assertEqual(repository.count(), 0)
        self.assertFalse(self.path.exists())

    # ----------------------------------------------------------
    def test_add_appends_a_line(self):
        """
        Test that every insert appends one JSON object and creates parent directories.
        """
        repository = JsonLinesPatternRepository(str(self.path))
        repository.add(build_test_entry())
        repository.add(build_test_entry(fingerprint="b" * 64, verdict=DistType.UNIFORM))

        lines = self.path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(lines), 2)
        first = json.loads(lines[0])
        self.assertEqual(first["id"], 1)
        self.assertEqual(first["verdict"], "leaky")
        self.assertEqual(len(first["exprs"]), 2)

    # ----------------------------------------------------------
    def test_flush_writes_hit_counters(self):
        """
        Test that hits are kept in memory until `flush` rewrites the file.
        """
        repository = JsonLinesPatternRepository(str(self.path))
        entry = repository.add(build_test_entry())
        repository.record_hit(entry)

        self.assertEqual(JsonLinesPatternRepository(str(self.path)).get_all()[0].hits, 0)
        repository.flush()
        reloaded = JsonLinesPatternRepository(str(self.path)).get_all()[0]
        self.assertEqual(reloaded.hits, 1)
        self.assertIs(reloaded.exprs[1], entry.exprs[1])

    # ----------------------------------------------------------
    def test_malformed_line_is_reported(self):
        """
        Test that a corrupt store names the offending line.
        """
        self.path.parent.mkdir(parents=True)
        self.path.write_text("\n{not json}\n", encoding="utf-8")

        with self.assertRaises(PatternStoreError) as ctx:
            JsonLinesPatternRepository(str(self.path))
        self.assertIn(":2:", str(ctx.exception))


if __name__ == "__main__":
    unittest.main()

"""
Unit tests for the ReportGenerator service.

These tests render hand-built reports and check the text layout and the
JSON document produced for each verdict.
"""

import json
import unittest

from app.domain.entities.distribution import DistType, TransformLevel
from app.domain.entities.histogram import CountingBackend, LeakWitness
from app.domain.entities.report import LeakRecord, Report, RunMode
from app.infrastructure.services.report_generator import ReportGenerator


def build_test_report(*records: LeakRecord) -> Report:
    """
    Factory helper to build a second-order report over two observables.
    """
    return Report(
        source="goubin.mask",
        order=2,
        width=1,
        mode=RunMode.FULL,
        x_check=("y0", "y3"),
        records=list(records),
        stats={"potential_sets": len(records), "counting_calls": 1},
        timings={"explore": 0.5},
    )


class TestReportGenerator(unittest.TestCase):
    """
    Unit tests for text and JSON rendering of verification reports.
    """

    def setUp(self):
        """
        Prepare a genuine leak with a witness and an undecided set.
        """
        witness = LeakWitness(
            public={},
            private_reference={"k": 0},
            private={"k": 1},
            members=("y0", "y3"),
            values=(0, 0),
            reference_count=2,
            count=0,
        )
        self.leak = LeakRecord(
            ("y0", "y3"), DistType.LEAKY, TransformLevel.COL, CountingBackend.ENUMERATION, witness
        )
        self.undecided = LeakRecord(("y0",), DistType.UNKNOWN, TransformLevel.COL, note="histogram budget")

    # ----------------------------------------------------------
    def test_text_report_of_secure_program(self):
        """
        Test the summary of a report without leaks.
        """
        text = ReportGenerator.generate_text(build_test_report())

        self.assertTrue(text.startswith("goubin.mask: order 2, width 1, mode full\nverdict: secure\n"))
        self.assertIn("genuine leaks: none", text)
        self.assertIn("spurious potential leaks: 0", text)
        self.assertIn("timings (s):", text)
        self.assertTrue(text.endswith("\n"))

    # ----------------------------------------------------------
    def test_text_report_lists_witness(self):
        """
        Test that genuine leaks show the backend and the distinguishing valuations.

        Verifies:
        - the set and backend line
        - both private valuations
        - the differing tuple with its counts
        """
        text = ReportGenerator.generate_text(build_test_report(self.leak))

        self.assertIn("verdict: leaky", text)
        self.assertIn("  {y0, y3} [enumeration]", text)
        self.assertIn("    public:  -", text)
        self.assertIn("    private: k=0 vs k=1", text)
        self.assertIn("    (y0=0, y3=0) counted 2 vs 0", text)

    # ----------------------------------------------------------
    def test_text_report_lists_undecided_with_note(self):
        """
        Test that undecided sets carry their note.
        """
        text = ReportGenerator.generate_text(build_test_report(self.undecided))

        self.assertIn("verdict: undecided", text)
        self.assertIn("  {y0} (histogram budget)", text)

    # ----------------------------------------------------------
    def test_json_report(self):
        """
        Test that the JSON rendering is the report dictionary.
        """
        report = build_test_report(self.leak, self.undecided)
        data = json.loads(ReportGenerator.generate_json(report))

        self.assertEqual(data, json.loads(json.dumps(report.to_dict())))
        self.assertEqual(data["verdict"], "leaky")
        self.assertEqual(data["genuine_leaks"][0]["witness"]["reference_count"], 2)
        self.assertEqual(data["undecided"][0]["note"], "histogram budget")


if __name__ == "__main__":
    unittest.main()

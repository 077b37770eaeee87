import json
from typing import Any, Dict, List

from app.domain.entities.report import LeakRecord, Report


class ReportGenerator:
    """Utility class for rendering verification reports as text or JSON."""

    # === JSON REPORT ===
    @staticmethod
    def generate_json(report: Report) -> str:
        """
        Render a report as JSON.

        Keys keep the order of `Report.to_dict`, so two runs with the same
        configuration differ only in their timings.
        """
        return json.dumps(report.to_dict(), indent=2)

    # === TEXT REPORT ===
    @staticmethod
    def generate_text(report: Report) -> str:
        """
        Render a report for the terminal.

        Args:
            report: Outcome of a verification run.

        Returns:
            Multi-line summary ending with a newline.
        """
        lines: List[str] = [
            f"{report.source}: order {report.order}, width {report.width}, mode {report.mode.value}",
            f"verdict: {report.verdict.value}",
            "",
        ]

        # === Leaks ===
        if report.genuine:
            lines.append(f"genuine leaks ({len(report.genuine)}):")
            for record in report.genuine:
                lines.extend(ReportGenerator._leak_lines(record))
        else:
            lines.append("genuine leaks: none")
        lines.append(f"spurious potential leaks: {len(report.spurious)}")
        if report.undecided:
            lines.append(f"undecided ({len(report.undecided)}):")
            for record in report.undecided:
                note = f" ({record.note})" if record.note else ""
                lines.append(f"  {{{', '.join(record.observables)}}}{note}")

        # === Statistics ===
        lines.append("")
        lines.append("statistics:")
        lines.extend(ReportGenerator._table(report.stats))
        if report.timings:
            lines.append("timings (s):")
            lines.extend(ReportGenerator._table({k: f"{v:.3f}" for k, v in report.timings.items()}))
        if report.patterns:
            lines.append("patterns:")
            for item in report.patterns:
                lines.append(f"  {item['sets']:>6}  {item['verdict']}  {item['pattern']}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def _leak_lines(record: LeakRecord) -> List[str]:
        backend = record.backend.value if record.backend is not None else "-"
        lines = [f"  {{{', '.join(record.observables)}}} [{backend}]"]
        witness = record.witness
        if witness is not None:
            lines.append(f"    public:  {ReportGenerator._assignment(witness.public)}")
            lines.append(
                f"    private: {ReportGenerator._assignment(witness.private_reference)}"
                f" vs {ReportGenerator._assignment(witness.private)}"
            )
            values = ", ".join(f"{m}={v}" for m, v in zip(witness.members, witness.values))
            lines.append(f"    ({values}) counted {witness.reference_count} vs {witness.count}")
        elif record.note:
            lines.append(f"    {record.note}")
        return lines

    @staticmethod
    def _assignment(values: Dict[str, int]) -> str:
        return ", ".join(f"{k}={v}" for k, v in values.items()) or "-"

    @staticmethod
    def _table(rows: Dict[str, Any]) -> List[str]:
        if not rows:
            return []
        pad = max(len(k) for k in rows)
        return [f"  {k:<{pad}}  {v}" for k, v in rows.items()]

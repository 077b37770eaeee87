from app.domain.entities.distribution import DistType, TransformLevel
from app.domain.entities.histogram import CountingBackend, LeakWitness
from app.domain.entities.report import LeakRecord, Report, RunMode, Verdict


def _report(*records):
    return Report(source="p.mask", order=2, width=1, mode=RunMode.FULL, x_check=("a", "b"), records=list(records))


def test_verdict_precedence():
    """
    Test that a genuine leak outranks undecided sets, which outrank spurious ones.
    """
    spurious = LeakRecord(("a",), DistType.UNIFORM, TransformLevel.PLAIN)
    unknown = LeakRecord(("b",), DistType.UNKNOWN, TransformLevel.COL)
    leaky = LeakRecord(("a", "b"), DistType.LEAKY, TransformLevel.PLAIN)

    assert _report().verdict == Verdict.SECURE
    assert _report(spurious).exit_code == 0
    assert _report(spurious, unknown).verdict == Verdict.UNDECIDED
    assert _report(spurious, unknown).exit_code == 2
    assert _report(spurious, unknown, leaky).verdict == Verdict.LEAKY
    assert _report(spurious, unknown, leaky).exit_code == 1


def test_record_partition():
    """
    Test that every record is exactly one of genuine, spurious or undecided.
    """
    records = [
        LeakRecord(("a",), DistType.SECRET_INDEPENDENT, TransformLevel.DOM),
        LeakRecord(("b",), DistType.LEAKY, TransformLevel.PLAIN),
        LeakRecord(("a", "b"), DistType.UNKNOWN, TransformLevel.COL),
    ]
    report = _report(*records)

    assert [r.observables for r in report.spurious] == [("a",)]
    assert [r.observables for r in report.genuine] == [("b",)]
    assert [r.observables for r in report.undecided] == [("a", "b")]


def test_leak_record_to_dict():
    """
    Test that witnesses and notes appear only when present.
    """
    witness = LeakWitness(
        public={}, private_reference={"k": 0}, private={"k": 1},
        members=("a", "b"), values=(0, 0), reference_count=2, count=0,
    )
    record = LeakRecord(("a", "b"), DistType.LEAKY, TransformLevel.PLAIN, CountingBackend.ENUMERATION, witness)

    data = record.to_dict()
    assert data["backend"] == "enumeration"
    assert data["witness"]["tuple"] == {"a": 0, "b": 0}
    assert "note" not in data

    plain = LeakRecord(("a",), DistType.UNKNOWN, TransformLevel.COL, note="over budget").to_dict()
    assert plain["backend"] is None
    assert plain["note"] == "over budget"
    assert "witness" not in plain


def test_report_to_dict_rounds_timings():
    """
    Test that the serialised report carries schema version and rounded timings.
    """
    report = _report(LeakRecord(("a",), DistType.UNIFORM, TransformLevel.PLAIN))
    report.timings = {"explore": 0.12345678}

    data = report.to_dict()
    assert data["schema_version"] == 1
    assert data["mode"] == "full"
    assert data["timings"] == {"explore": 0.123457}
    assert data["potential_leaks"] == [["a"]]

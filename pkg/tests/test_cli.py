import json

from click.testing import CliRunner

from app.presentation.cli import cli, main
from tests.conftest import fixture_path

GOUBIN = fixture_path("goubin.mask")


def verify(*args, tmp_path=None):
    argv = ["verify", *args]
    if tmp_path is not None:
        argv += ["--patterns", str(tmp_path / "patterns.jsonl")]
    return main(argv)


def test_help_lists_options():
    result = CliRunner().invoke(cli, ["verify", "--help"])
    assert result.exit_code == 0
    assert "--order" in result.output
    assert "--emit-ssa" in result.output


def test_unsupported_width_is_a_usage_error(capsys):
    assert verify(GOUBIN, "--width", "3") == 3
    assert "Invalid value" in capsys.readouterr().err


def test_runner_reports_exit_code(tmp_path):
    result = CliRunner().invoke(
        cli, ["verify", GOUBIN, "-k", "2", "--patterns", str(tmp_path / "p.jsonl")], standalone_mode=True
    )
    assert result.exit_code == 0
    assert "verdict: secure" in result.output


def test_secure_program_exits_zero(tmp_path, capsys):
    assert verify(GOUBIN, "--order", "1", "--width", "2", tmp_path=tmp_path) == 0
    out = capsys.readouterr().out
    assert "verdict: secure" in out
    assert "genuine leaks: none" in out


def test_leaky_program_exits_one(tmp_path, capsys):
    assert verify(GOUBIN, "-d", "2", "-k", "1", tmp_path=tmp_path) == 1
    out = capsys.readouterr().out
    assert "verdict: leaky" in out
    assert any("y0" in line and "y3" in line for line in out.splitlines() if line.startswith("  {"))


def test_types_mode_exits_two(capsys):
    assert verify(GOUBIN, "--mode", "types", "--width", "2") == 2
    assert "undecided (1):" in capsys.readouterr().out


def test_json_report(tmp_path, capsys):
    assert verify(GOUBIN, "--width", "2", "--format", "json", tmp_path=tmp_path) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["verdict"] == "secure"
    assert data["order"] == 1
    assert data["potential_leaks"] == [["A"]]


def test_report_written_to_file(tmp_path, capsys):
    target = tmp_path / "report.json"
    code = verify(GOUBIN, "-k", "2", "--format", "json", "-o", str(target), tmp_path=tmp_path)
    assert code == 0
    assert capsys.readouterr().out == ""
    assert json.loads(target.read_text(encoding="utf-8"))["width"] == 2


def test_pattern_store_is_reused(tmp_path, capsys):
    verify(GOUBIN, "-d", "2", "-k", "1", "--format", "json", tmp_path=tmp_path)
    capsys.readouterr()
    verify(GOUBIN, "-d", "2", "-k", "1", "--format", "json", tmp_path=tmp_path)
    data = json.loads(capsys.readouterr().out)
    assert data["stats"]["pattern_misses"] == 0
    assert data["stats"]["counting_calls"] == 0


def test_emit_ssa(capsys):
    assert verify(GOUBIN, "--emit-ssa") == 0
    out = capsys.readouterr().out
    assert out.startswith("#private k;\n#random r, r';\n#preshare {\n")
    assert "return A;" in out


def test_parse_error_exits_three(capsys):
    assert verify(fixture_path("bad_operator.mask")) == 3
    err = capsys.readouterr().err
    assert "bad_operator.mask:4:" in err
    assert "error:" in err


def test_missing_file_exits_three(tmp_path, capsys):
    assert verify(str(tmp_path / "missing.mask")) == 3
    assert "missing.mask: error:" in capsys.readouterr().err


def test_invalid_order_exits_three(capsys):
    assert verify(GOUBIN, "--order", "0") == 3
    assert "order must be at least 1" in capsys.readouterr().err

import os
import shutil

import pytest

from flatcheck.cli import (EXIT_INPUT, EXIT_NEGATIVE, EXIT_OK, SysFileError, format_machine, format_system,
                           load_system, main, parse_machine, parse_system_text)
from flatcheck.fixtures import NAMES, path as fixture_path
from flatcheck.flatness import DimensionMismatch
from flatcheck.symrat import UndeclaredIdentifier

SIMPLE = """\
[system]
states = [x1, x2, x3, x4]
inputs = [u1, u2]
f  = ["x2", "0", "x4", "0"]
g1 = ["0", "1", "0", "0"]
g2 = ["0", "0", "0", "1"]
"""


def test_parse_simple():
    sf = parse_system_text(SIMPLE)
    assert sf.sys.n == 4 and sf.candidate is None and sf.seed is None


def test_three_inputs():
    text = SIMPLE.replace("[u1, u2]", "[u1, u2, u3]")
    with pytest.raises(DimensionMismatch):
        parse_system_text(text)


def test_length_mismatch():
    with pytest.raises(DimensionMismatch):
        parse_system_text(SIMPLE.replace('g2 = ["0", "0", "0", "1"]', 'g2 = ["0", "1"]'))


def test_undeclared_identifier_position():
    text = SIMPLE.replace('f  = ["x2", "0"', 'f  = ["x2", "z"')
    with pytest.raises(UndeclaredIdentifier) as info:
        parse_system_text(text, "demo.sys")
    err = info.value
    assert err.name == "z" and err.line == 4
    assert text.splitlines()[3][err.column - 1] == "z"
    assert str(err).startswith("demo.sys:4:%d:" % err.column)


def test_syntax_error_position():
    text = SIMPLE.replace('"x4", "0"]', '"x4 +", "0"]')
    with pytest.raises(SysFileError) as info:
        parse_system_text(text)
    assert info.value.line == 4 and "expected" in str(info.value)


@pytest.mark.parametrize("bad", ["[system]\nstates = [x1\n", "[nosuch]\n", "[system]\nstates = [x1]\n"])
def test_malformed(bad):
    with pytest.raises(SysFileError):
        parse_system_text(bad)


def test_missing_file(tmp_path):
    with pytest.raises(SysFileError):
        load_system(tmp_path / "none.sys")


@pytest.mark.parametrize("name", NAMES)
def test_format_round_trip(name):
    sf = load_system(fixture_path(name))
    text = format_system(sf.sys, sf.candidate, sf.seed, sf.float_mode, title=name)
    back = parse_system_text(text)
    assert back.sys.states == sf.sys.states and back.sys.inputs == sf.sys.inputs
    assert back.sys.constants == sf.sys.constants
    for a, b in ((back.sys.f, sf.sys.f), (back.sys.g1, sf.sys.g1), (back.sys.g2, sf.sys.g2)):
        assert list(a) == list(b)
    if sf.candidate is not None:
        assert list(back.candidate) == list(sf.candidate)


def test_machine_round_trip():
    report = {"a": {"b": [1, 2, {"c": "x y"}], "e": [], "f": {}}, "g": None, "h": True, "q": 'say "hi"'}
    text = format_machine(report)
    assert "a.b.0 = 1" in text and "a.b.2.c = \"x y\"" in text
    assert parse_machine(text) == report


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_motor(capsys):
    code, out, _ = run_cli(capsys, "verify", fixture_path("motor"), "--format", "machine")
    rep = parse_machine(out)
    assert code == EXIT_OK and rep["exit_code"] == 0
    res = rep["result"]
    assert res["status"] == "flat"
    assert (res["K"], res["R"], res["d"], res["n"]) == ([3, 2], [4, 3], 1, 6)


def test_verify_not_flat(capsys):
    code, out, _ = run_cli(capsys, "verify", fixture_path("motor"), "--phi1", "omega", "--format", "machine")
    assert code == EXIT_NEGATIVE


def test_theorem1_dim5(capsys):
    code, out, _ = run_cli(capsys, "theorem1", fixture_path("dim5"), "--format", "machine")
    rep = parse_machine(out)
    assert code == EXIT_NEGATIVE and rep["result"]["status"] == "not_integrable"
    assert rep["result"]["failing"] == [[1, 1]]
    assert rep["result"]["levels"][1]["Q"][2] == "dx3 + u1*dx4"


def test_input_error(capsys, tmp_path):
    p = tmp_path / "bad.sys"
    p.write_text(SIMPLE.replace('"x2"', '"w"'))
    code, _, err = run_cli(capsys, "verify", p)
    assert code == EXIT_INPUT and "bad.sys:4:" in err


def test_bad_arguments(capsys):
    with pytest.raises(SystemExit) as info:
        main(["nosuch", "file.sys"])
    assert info.value.code == EXIT_INPUT
    with pytest.raises(SystemExit) as info:
        main(["verify", "file.sys", "--seed", "xyz"])
    assert info.value.code == EXIT_INPUT
    with pytest.raises(SystemExit):
        main(["verify"])
    capsys.readouterr()


def test_missing_candidate(capsys):
    code, _, err = run_cli(capsys, "verify", fixture_path("nonaccessible"))
    assert code == EXIT_INPUT and "candidate" in err


def test_normalform_output(capsys, tmp_path):
    target = tmp_path / "nf.sys"
    code, out, _ = run_cli(capsys, "normalform", fixture_path("chained"), "-o", target)
    assert code == EXIT_OK and "[system]" in out
    sf = load_system(target)
    assert sf.sys.states == ("z1", "z2", "z3", "z4", "z5")


def test_candidates_text(capsys):
    code, out, _ = run_cli(capsys, "candidates", fixture_path("motor"))
    assert code == EXIT_OK and "case" in out


def test_all(capsys, tmp_path):
    for name in ("brunovsky", "dim5"):
        shutil.copy(fixture_path(name), tmp_path / (name + ".sys"))
    (tmp_path / "broken.sys").write_text("[system]\n")
    code, out, _ = run_cli(capsys, "theorem1", "--all", tmp_path, "--format", "machine")
    rep = parse_machine(out)
    codes = [f["exit_code"] for f in rep["files"]]
    assert [os.path.basename(f["file"]) for f in rep["files"]] == ["broken.sys", "brunovsky.sys", "dim5.sys"]
    assert codes == [3, 0, 1] and code == 3

import json
from pathlib import Path

import jsonschema
import pytest

from regulus.cli import main, run
from regulus.terms import evaluate, parse

SCHEMA = json.loads(
    (Path(__file__).resolve().parent.parent / "docs" / "schema.json")
    .read_text())


@pytest.fixture
def curve_file(tmp_path):
    path = tmp_path / "curve.json"
    path.write_text(json.dumps({
        "n": 2,
        "functions": ["(- x2 (exp x1))"],
        "target": "(- x2 (exp x1))",
    }))
    return str(path)


@pytest.fixture
def product_file(tmp_path):
    path = tmp_path / "product.json"
    path.write_text(json.dumps({"n": 2, "functions": ["(* x1 x2)"]}))
    return str(path)


@pytest.fixture
def circle_file(tmp_path):
    path = tmp_path / "circle.json"
    path.write_text(json.dumps({
        "n": 2,
        "functions": ["(- (+ (^ x1 2) (^ x2 2)) 1)"],
    }))
    return str(path)


def invoke(argv):
    code, report = run(argv)
    jsonschema.validate(report, SCHEMA)
    return code, report


class TestCommands:
    def test_qwitness_prints_expected_term(self, curve_file):
        code, report = invoke(["qwitness", curve_file])
        assert code == 0
        assert report["result"]["term"] == "(+ (^ (exp x1) 2) 1)"

    def test_diff(self, product_file):
        code, report = invoke(["diff", product_file, "--fn", "1", "--wrt", "2"])
        assert code == 0
        assert report["result"]["term"] == "x1"

    def test_grad(self, curve_file):
        code, report = invoke(["grad", curve_file, "--fn", "1"])
        assert code == 0
        assert len(report["result"]["terms"]) == 2

    def test_jac(self, circle_file):
        code, report = invoke(["jac", circle_file])
        assert code == 0
        assert report["result"]["rows"] == [["(* 2 x1)", "(* 2 x2)"]]

    def test_augment(self, curve_file):
        code, report = invoke(["augment", curve_file])
        assert code == 0
        assert report["result"]["n"] == 3
        assert len(report["result"]["functions"]) == 2

    def test_verify_regular(self, curve_file):
        code, report = invoke(["verify-regular", curve_file, "--point", "0,1"])
        assert code == 0
        assert report["result"]["regular"] is True
        assert report["result"]["witness_value"] == 2

    def test_find_zero(self, circle_file):
        code, report = invoke(["find-zero", circle_file])
        assert code == 0
        zeros = report["result"]["zeros"]
        assert zeros
        for z in zeros:
            assert abs(z[0] ** 2 + z[1] ** 2 - 1) <= 1e-8

    def test_regularize(self, curve_file):
        code, report = invoke(["regularize", curve_file,
                               "--target", "(- x2 (exp x1))"])
        assert code == 0
        result = report["result"]
        jsonschema.validate(
            result, {**SCHEMA, "$ref": "#/definitions/regularizeResult"})
        assert result["m"] == 0
        assert result["margins"]["q_value"] >= 1e-6
        for source in result["functions"]:
            parse(source)

    def test_control(self, curve_file):
        code, report = invoke(["control", curve_file, "--fn", "1",
                               "--order", "3"])
        assert code == 0
        assert len(report["result"]["coefficients"]) == 4

    def test_verify_control(self, curve_file):
        code, report = invoke(["verify-control", curve_file, "--fn", "1",
                               "--order", "3", "--samples", "25",
                               "--seed", "42"])
        assert code == 0
        result = report["result"]
        jsonschema.validate(
            result, {**SCHEMA, "$ref": "#/definitions/controlReport"})
        assert result["passed"] is True

    def test_flat_probe(self, curve_file):
        code, report = invoke(["flat-probe", curve_file, "--fn", "1",
                               "--point", "0,1", "--order", "3"])
        assert code == 0
        assert report["result"]["flat"] is False


class TestRoundTrip:
    def test_printed_terms_reparse_identically(self, circle_file):
        _, report = invoke(["qwitness", circle_file])
        source = report["result"]["term"]
        reparsed = parse(source)
        for point in ((0.5, -0.25), (1.5, 2.0)):
            assert evaluate(reparsed, point) == evaluate(parse(source), point)


class TestDeterminism:
    def test_identical_invocations_byte_identical(self, circle_file, capsys):
        main(["regularize", circle_file, "--target",
              "(- (+ (^ x1 2) (^ x2 2)) 1)", "--seed", "42"])
        first = capsys.readouterr().out
        main(["regularize", circle_file, "--target",
              "(- (+ (^ x1 2) (^ x2 2)) 1)", "--seed", "42"])
        second = capsys.readouterr().out
        assert first == second

    def test_seed_env_fallback(self, curve_file, monkeypatch):
        monkeypatch.setenv("REGULUS_SEED", "7")
        code, report = invoke(["verify-control", curve_file, "--fn", "1",
                               "--order", "2", "--samples", "10"])
        assert code == 0


class TestErrors:
    def test_domain_error_exit_one(self, tmp_path):
        path = tmp_path / "nozero.json"
        path.write_text(json.dumps({"n": 1, "functions": ["(+ (^ x1 2) 1)"]}))
        code, report = invoke(["regularize", str(path),
                               "--target", "(+ (^ x1 2) 1)"])
        assert code == 1
        assert report["error"]["kind"] == "NoZeroFound"

    def test_parse_error_reports_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 1, "functions": ["(^ x1 (/ 3 2))"]}))
        code, report = invoke(["qwitness", str(path)])
        assert code == 1
        assert "position" in report["error"]["message"]

    def test_unknown_name_is_domain_error(self, tmp_path):
        path = tmp_path / "unknown.json"
        path.write_text(json.dumps({"n": 1, "functions": ["(tanh x1)"]}))
        code, report = invoke(["qwitness", str(path)])
        assert code == 1

    def test_missing_flag_is_usage_error(self, curve_file):
        code, report = invoke(["diff", curve_file])
        assert code == 2
        assert report["error"]["kind"] == "usage"

    def test_unknown_command_exits_two(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate", "whatever.json"])
        assert info.value.code == 2

    def test_missing_file(self):
        code, report = invoke(["qwitness", "/nonexistent/sys.json"])
        assert code == 1
        assert report["error"]["kind"] == "io"

    def test_empty_zero_list_is_success(self, tmp_path):
        path = tmp_path / "pos.json"
        path.write_text(json.dumps({"n": 1, "functions": ["(+ (^ x1 2) 1)"]}))
        code, report = invoke(["find-zero", str(path)])
        assert code == 0
        assert report["result"]["zeros"] == []


class TestConsoleScript:
    def test_main_returns_exit_code(self, curve_file, capsys):
        assert main(["qwitness", curve_file]) == 0
        out = capsys.readouterr().out
        parsed = json.loads(out)
        assert parsed["result"]["term"] == "(+ (^ (exp x1) 2) 1)"

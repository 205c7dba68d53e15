import json
import subprocess
import sys

import jsonschema
import pytest

from cli_cases import CASES
from modprime.cli import RunConfig, build_parser, main

CELL = {
    "anyOf": [
        {"type": ["number", "string", "null"]},
        {"type": "object", "required": ["re", "im"], "properties": {"re": {"type": ["number", "string"]}, "im": {"type": ["number", "string"]}}},
    ]
}
SCHEMA = {
    "type": "object",
    "required": ["meta", "rows"],
    "additionalProperties": False,
    "properties": {
        "meta": {
            "type": "object",
            "required": ["command", "params", "version"],
            "properties": {"command": {"type": "string"}, "params": {"type": "object"}, "version": {"type": "string"}},
        },
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["param", "measured", "reference", "diff", "budget"],
                "additionalProperties": False,
                "properties": {
                    "param": {"type": "string"},
                    "measured": CELL,
                    "reference": CELL,
                    "diff": CELL,
                    "budget": CELL,
                },
            },
        },
    },
}


def run_cli(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_phi_zero(capsys):
    code, out, _ = run_cli(["phi", "--z", "0", "--x", "1000", "--ref-limit", "1e4", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["rows"][0]["measured"] == 1.0


def test_moment_rational(capsys):
    code, out, _ = run_cli(["moments", "--x", "3", "--k", "2", "--weight", "one", "--format", "json"], capsys)
    assert code == 0
    row = json.loads(out)["rows"][0]
    assert row["param"] == "k=2" and row["measured"] == "5/12"


def test_gamma_f_csv(capsys):
    code, out, _ = run_cli(["gamma-f", "--grid", "1e4,1e5,1e6", "--format", "csv"], capsys)
    assert code == 0
    last = out.strip().splitlines()[-1].split(",")
    assert last[0] == "extrapolated"
    assert abs(float(last[1]) + 0.108) < 0.005


@pytest.mark.parametrize("args", CASES, ids=lambda a: "-".join(a[:3]))
def test_json_schema(args, capsys):
    code, out, _ = run_cli(args + ["--format", "json"], capsys)
    assert code == 0
    data = json.loads(out)
    jsonschema.validate(data, SCHEMA)
    assert data["meta"]["command"] == args[0]


def test_csv_header(capsys):
    code, out, _ = run_cli(["truncation", "--x", "100"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "param,measured,reference,diff,budget"


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["phi", "--bogus", "1"])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert "--ref-limit" in err and "--bogus" in err
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["moments", "--k", "two"])
    assert exc.value.code == 2


def test_numeric_error_exit_code(capsys):
    code, _, err = run_cli(["phi", "--z", "5", "--x", "100", "--ref-limit", "1e3"], capsys)
    assert code == 3
    assert "DomainError" in err and "envelope" in err
    code, _, err = run_cli(["appendix-b", "--k", "3", "--T", "1e4"], capsys)
    assert code == 3 and "regime" in err


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["charfun", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "--nodes-per-period" in out and "default" in out


@pytest.mark.parametrize("args", CASES, ids=lambda a: "-".join(a[:3]))
def test_round_trip(args):
    cfg = RunConfig.parse(args + ["--format", "json", "--threads", "2"])
    again = RunConfig.from_canonical(cfg.canonical())
    assert again == cfg
    assert again.canonical() == cfg.canonical()


def test_output_file_and_threads(tmp_path, capsys):
    paths = []
    for threads in ("1", "4", "4"):
        p = tmp_path / f"out-{len(paths)}.json"
        assert main(["clt", "--grid", "1e2,1e3", "--samples", "20000", "--seed", "9", "--format", "json", "--threads", threads, "--output", str(p)]) == 0
        paths.append(p)
    capsys.readouterr()
    data = [p.read_bytes() for p in paths]
    assert data[0] == data[1] == data[2]


def test_subprocess_entry_point(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"m{i}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "modprime", "mv-check", "--T", "1e3,2e3", "--M", "8", "--draws", "2", "--output", str(p)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_parser_knows_every_command():
    assert set(build_parser().commands) == {
        "sieve", "phi", "gamma-f", "moments", "charfun", "cumulants", "truncation",
        "clt", "ldp", "mv-check", "appendix-b", "sigma-star",
    }

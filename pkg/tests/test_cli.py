import subprocess
import sys

import pytest

from goalfuzz import data_path
from goalfuzz.cli import main

GRAMMAR = str(data_path("euclid.bnf"))
SEEDS = str(data_path("euclid_seeds"))


def run_args(out, *extra):
    return ["run", "--grammar", GRAMMAR, "--seeds", SEEDS, "--subject", "builtin:euclid",
            "--out", str(out), *extra]


def test_run_smoke(tmp_path, capsys):
    code = main(run_args(tmp_path, "--mode", "single:exceptions", "--generations", "50",
                         "--inputs-per-gen", "5", "--random-seed", "1"))
    assert code == 0
    for name in ("campaign.jsonl", "summary.csv", "final_grammar.bnf", "inputs/gen49.txt"):
        assert (tmp_path / name).is_file()
    assert "DivisionByZero" in capsys.readouterr().out


def test_unknown_flag_is_usage_error(capsys):
    assert main(["run", "--frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [
    ["--mode", "single:speed"], ["--generations", "0"], ["--timeout-ms", "-5"],
])
def test_flag_validation(tmp_path, extra):
    assert main(run_args(tmp_path, *extra)) == 2
    assert not (tmp_path / "summary.csv").exists()


def test_subject_validation(tmp_path):
    base = ["run", "--grammar", GRAMMAR, "--seeds", SEEDS, "--out", str(tmp_path)]
    assert main(base + ["--subject", "builtin:nope"]) == 2
    assert main(base + ["--subject", "exec:cat"]) == 2  # --total-units missing
    assert main(base + ["--subject", "whatever"]) == 2
    assert main(["run", "--grammar", "missing.bnf", "--seeds", SEEDS, "--subject",
                 "builtin:euclid", "--out", str(tmp_path)]) == 2


def test_runtime_failure_exit_code(tmp_path):
    code = main(run_args(tmp_path, "--generations", "1")[:-4] + [
        "--subject", "exec:/definitely/missing", "--total-units", "3", "--out", str(tmp_path)])
    assert code == 1


def test_learn(tmp_path, capsys):
    assert main(["learn", "--grammar", GRAMMAR, "--seeds", SEEDS]) == 0
    assert "integer = @0.125000000 digit | @0.875000000 nzdigit number" in capsys.readouterr().out
    out = tmp_path / "learned.bnf"
    assert main(["learn", "--grammar", GRAMMAR, "--seeds", SEEDS, "--out", str(out)]) == 0
    assert out.read_bytes().startswith(b"start = ")


def test_generate(tmp_path):
    assert main(["generate", "--grammar", GRAMMAR, "--policy", "inverse", "--count", "7",
                 "--random-seed", "3", "--out", str(tmp_path)]) == 0
    files = sorted(tmp_path.iterdir())
    assert len(files) == 7 and all(f.read_bytes().startswith(b"euclid(") for f in files)


def test_baseline_and_stats(tmp_path, capsys):
    for k, policy in enumerate(("inverse", "uniform")):
        assert main(["baseline", "--grammar", GRAMMAR, "--seeds", SEEDS, "--subject",
                     "builtin:euclid", "--policy", policy, "--count", "250",
                     "--random-seed", str(k), "--out", str(tmp_path / policy)]) == 0
    summary = (tmp_path / "inverse" / "summary.csv").read_text().splitlines()
    assert summary[0] == "gen,fitness,coverage,mappings,exceptions,unique_exceptions,runtime_total"
    assert int(summary[-1].split(",")[4]) >= 1
    capsys.readouterr()
    code = main(["stats", "--a", str(tmp_path / "inverse" / "summary.csv"),
                 "--b", str(tmp_path / "uniform" / "summary.csv"),
                 "--table", "2", "3", "4", "1"])
    assert code == 0
    out = capsys.readouterr().out
    assert "runtime_total" in out and "odds ratio = 0.1667" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "goalfuzz", "--help"], capture_output=True)
    assert proc.returncode == 0 and b"generate" in proc.stdout

import subprocess
import sys

from replisim.cli import main
from replisim.trace import Trace


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_writes_a_parseable_trace(tmp_path, capsys):
    trace_path = tmp_path / "t.log"
    code, out, _ = run_cli(
        ["run", "intro", "--model", "cm0", "--seed", "7", "--trace", str(trace_path)], capsys
    )
    assert code == 0
    assert "completed=true" in out
    parsed = Trace.from_text(trace_path.read_text())
    assert parsed.is_complete()
    # intro programs issue 1 + 1 + 2 + 2 requests
    assert len(parsed.requests()) == 6


def test_run_check_round_trip(tmp_path, capsys):
    trace_path = tmp_path / "t.log"
    code, _, _ = run_cli(
        ["run", "counterexample", "--model", "cm0", "--seed", "3", "--trace", str(trace_path)],
        capsys,
    )
    assert code == 0
    code, out, _ = run_cli(
        ["check", "counterexample", "compatible", "--trace", str(trace_path)], capsys
    )
    assert code == 0
    assert "verdict=COMPATIBLE" in out


def test_search_finds_anomaly_and_check_rejects_it(tmp_path, capsys):
    trace_path = tmp_path / "w.log"
    code, out, _ = run_cli(
        [
            "search",
            "counterexample",
            "--model",
            "cm2",
            "--predicate",
            "anomaly-read-stale",
            "--trace",
            str(trace_path),
        ],
        capsys,
    )
    assert code == 0
    assert "verdict=WITNESS" in out
    code, out, _ = run_cli(
        ["check", "counterexample", "compatible", "--trace", str(trace_path)], capsys
    )
    assert code == 0
    assert "verdict=INCOMPATIBLE exhaustive=true" in out
    code, out, _ = run_cli(
        ["check", "counterexample", "serialisable", "--trace", str(trace_path)], capsys
    )
    assert code == 0
    assert "verdict=NOT_SERIALISABLE exhaustive=true" in out


def test_validation_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("cluster.datacentres = not-a-number\n")
    code, _, err = run_cli(["run", str(bad), "--model", "cm0", "--seed", "0"], capsys)
    assert code == 2
    assert "error" in err


def test_unsatisfiable_policy_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text(
        """cluster.datacentres = 2
cluster.relation.x.arity = 1
cluster.relation.x.coarity = 1
policy.read = THREE
policy.write = ONE
agent.a1.home = 1
agent.a1.program = read x true
"""
    )
    code, _, err = run_cli(["run", str(bad), "--model", "cm1", "--seed", "0"], capsys)
    assert code == 2


def test_search_budget_exhaustion_exits_3(capsys):
    code, out, _ = run_cli(
        ["search", "intro", "--model", "cm2", "--predicate", "anomaly-read-stale", "--budget", "3"],
        capsys,
    )
    assert code == 3
    assert "exhaustive=false" in out


def test_exhausted_search_without_witness_exits_0(capsys):
    code, out, _ = run_cli(
        ["search", "anomaly_one_one", "--model", "cm0", "--predicate", "anomaly-read-stale"],
        capsys,
    )
    assert code == 0
    assert "verdict=NO_WITNESS exhaustive=true" in out


def test_custom_predicate_file(tmp_path, capsys):
    pred = tmp_path / "pred.py"
    pred.write_text("def predicate(trace, scenario):\n    return len(trace.events) > 0\n")
    code, out, _ = run_cli(
        ["search", "counterexample", "--model", "cm0", "--predicate", f"custom-file:{pred}"],
        capsys,
    )
    assert code == 0
    assert "verdict=WITNESS" in out


def test_scenarios_listing(capsys):
    code, out, _ = run_cli(["scenarios"], capsys)
    assert code == 0
    assert "intro" in out and "counterexample" in out


def test_budget_env_override(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("REPLISIM_BUDGET", "3")
    code, out, _ = run_cli(
        ["search", "intro", "--model", "cm2", "--predicate", "anomaly-read-stale"], capsys
    )
    assert code == 3


def test_cli_subprocess_smoke(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "replisim", "run", "counterexample", "--model", "cm2", "--seed", "1"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert result.returncode == 0
    assert "completed=true" in result.stdout

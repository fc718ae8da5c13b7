import json

import pytest

from teamgames import builtins as bi
from teamgames.cli import run
from teamgames.model import dump_spec, load_spec
from teamgames.serialize import DocumentError, load_solution, load_strategies, solution_document
from teamgames.solver import solve_cib
from teamgames.verifier import nash_gap

NONEX = ["--builtin", "nonexistence", "--param", "eps=0.1"]


def _solve(tmp_path, name, *argv):
    out = tmp_path / name
    code = run(["solve", *argv, "--out", str(out)])
    return code, out


def test_cib_on_nonexistence_exits_three_with_stage_three(tmp_path, capsys):
    code, out = _solve(tmp_path, "report.json", *NONEX, "--mode", "cib")
    assert code == 3
    report = json.loads(out.read_text())
    assert report["obstruction"]["stage"] == 3
    assert report["obstruction"]["status"] == "CERTIFIED_NONE"
    assert "t=3" in capsys.readouterr().out


def test_spib_then_verify(tmp_path):
    code, prof = _solve(tmp_path, "p.json", *NONEX, "--mode", "spib")
    assert code == 0
    cert = tmp_path / "cert.json"
    assert run(["verify", *NONEX, "--profile", str(prof), "--out", str(cert)]) == 0
    eps = json.loads(cert.read_text())["epsilon"]
    assert eps <= 1e-6
    assert abs(eps - json.loads(prof.read_text())["verifier_report"]["epsilon"]) <= 1e-12


@pytest.mark.parametrize("argv", [
    ["--builtin", "guessing", "--mode", "cib"],
    ["--builtin", "random-signaling-free", "--param", "seed=2", "--mode", "signaling-free"],
    ["--builtin", "random-layered", "--param", "seed=1", "--mode", "layered"],
])
def test_verify_reproduces_the_embedded_epsilon(tmp_path, argv):
    code, sol = _solve(tmp_path, "s.json", *argv)
    assert code == 0
    src = argv[: argv.index("--mode")]
    cert = tmp_path / "c.json"
    assert run(["verify", *src, "--profile", str(sol), "--out", str(cert)]) == 0
    embedded = json.loads(sol.read_text())["verifier_report"]["epsilon"]
    assert abs(json.loads(cert.read_text())["epsilon"] - embedded) <= 1e-12


@pytest.mark.parametrize("mode", ["cib", "spib"])
def test_same_argv_gives_identical_bytes(tmp_path, mode):
    argv = ["--builtin", "guessing", "--mode", mode, "--seed", "3"]
    _, a = _solve(tmp_path, "a.json", *argv)
    _, b = _solve(tmp_path, "b.json", *argv)
    assert a.read_bytes() == b.read_bytes()


def test_usage_errors_exit_one(tmp_path, capsys):
    assert run([]) == 1
    assert run(["bogus"]) == 1
    assert run(["solve", "--builtin", "guessing", "--mode", "nope"]) == 1
    assert run(["solve", "--builtin", "guessing", "--param", "novalue"]) == 1
    assert run(["verify", "--builtin", "guessing", "--profile", str(tmp_path / "missing.json")]) == 1
    assert run(["simulate", "--builtin", "guessing", "--profile", str(tmp_path / "x"), "-n", "0"]) == 1
    capsys.readouterr()


def test_bad_spec_and_mismatched_documents_exit_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"horizon": 0}')
    assert run(["analyze", "--spec", str(bad)]) == 2
    assert run(["solve", "--builtin", "nonexistent-game"]) == 2
    _, sol = _solve(tmp_path, "g.json", "--builtin", "guessing", "--mode", "cib")
    assert run(["verify", *NONEX, "--profile", str(sol)]) == 2
    junk = tmp_path / "junk.json"
    junk.write_text("not json")
    assert run(["verify", "--builtin", "guessing", "--profile", str(junk)]) == 2


def test_analyze_guessing(capsys):
    assert run(["analyze", "--builtin", "guessing"]) == 0
    captured = capsys.readouterr()
    info = json.loads(captured.out)
    assert info["delay"] == 2 and info["separable"] is True and len(info["teams"]) == 2
    assert "d=2" in captured.err and "separable=true" in captured.err


def test_examples_list_and_emit(tmp_path, capsys):
    assert run(["examples"]) == 0
    listed = json.loads(capsys.readouterr().out)["builtins"]
    assert {"guessing", "guessing-communication", "nonexistence"} <= set(listed)
    out = tmp_path / "n.json"
    assert run(["examples", "nonexistence", "--param", "eps=0.2", "--out", str(out)]) == 0
    spec = load_spec(out.read_text())
    assert spec == bi.nonexistence(0.2)
    assert run(["analyze", "--spec", str(out)]) == 0


def test_enumerate_and_simulate_from_the_cli(tmp_path):
    out = tmp_path / "eq.json"
    assert run(["enumerate-bne", *NONEX, "--certify", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["equilibria"]) == 1
    p, q = doc["equilibria"][0]["parameters"]["p"], doc["equilibria"][0]["parameters"]["q"]
    assert p == pytest.approx([1 / 3, 1 / 3], abs=1e-9) and q == pytest.approx([1 / 3 + 0.1, 1 / 3 - 0.1], abs=1e-9)
    assert doc["certification"]["status"] == "CERTIFIED_NONE"
    _, sol = _solve(tmp_path, "g.json", "--builtin", "guessing", "--mode", "cib")
    sim = tmp_path / "sim.json"
    assert run(["simulate", "--builtin", "guessing", "--profile", str(sol), "-n", "2000", "--out", str(sim)]) == 0
    res = json.loads(sim.read_text())
    assert res["mean"][0] == pytest.approx(0.0, abs=5 * res["stderr"][0] + 1e-12)
    assert res["mean"][1] == pytest.approx(1.0, abs=5 * res["stderr"][1] + 1e-12)


def test_spec_round_trip_keeps_the_hash():
    for spec in (bi.guessing(), bi.guessing_communication(), bi.random_layered(seed=3)):
        again = load_spec(dump_spec(spec))
        assert again.hash == spec.hash and again == spec


def test_solution_document_round_trip():
    spec = bi.guessing()
    sol = solve_cib(spec)
    doc = json.loads(json.dumps(solution_document(sol)))
    back = load_solution(spec, doc)
    assert len(back.cells) == len(sol.reachable()) and back.root == 0
    assert nash_gap(spec, load_strategies(spec, doc)).epsilon == pytest.approx(sol.verifier_report["epsilon"], abs=1e-12)
    doc["kind"] = "something-else"
    with pytest.raises(DocumentError):
        load_strategies(spec, doc)

import json
import subprocess
import sys

import numpy as np
import pytest

from femtogame import io
from femtogame.cli import main


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    d = tmp_path_factory.mktemp("scen")
    assert main(["generate", "--ample", "--N", "2", "--M", "2", "--out", str(d)]) == 0
    return str(d / "scenario.json")


def _report(d):
    return json.loads((d / "report.json").read_text())


def test_generate_writes_a_loadable_file(small):
    s = io.load_scenario(small)
    assert (s.K, s.N, list(s.M)) == (2, 2, [2, 2])
    doc = json.loads(open(small).read())
    assert doc["caps"]["unit"] == "mW" and doc["requirements"]["unit"] == "kbps"


def test_generate_to_stdout(capsys):
    assert main(["generate", "--example", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["dimensions"]["K"] == 2


def test_pareto_then_verify(small, tmp_path):
    out = tmp_path / "p"
    assert main(["pareto", small, "--variant", "3m", "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["solver"] == "search_algo3M_weighted_alpha"
    trace = io.read_trace(out / "trace.jsonl")
    assert [r["iteration"] for r in trace] == list(range(len(trace)))
    assert main(["verify", small, "--report", str(out / "report.json"), "--out", str(out)]) == 0
    assert all(c["passed"] for c in _report_file(out / "verify.json")["checks"])


def _report_file(path):
    return json.loads(path.read_text())


def test_verify_flags_a_dominated_point(small, tmp_path):
    out = tmp_path / "p"
    assert main(["pareto", small, "--variant", "3m", "--out", str(out)]) == 0
    rep = _report(out)
    rep["strategy_indices"] = [0, 0]
    (out / "report.json").write_text(json.dumps(rep))
    assert main(["verify", small, "--report", str(out / "report.json")]) == 6


def test_cce_meets_requirements_on_ample_scenario(small, tmp_path):
    out = tmp_path / "c"
    assert main(["cce", small, "--out", str(out)]) == 0
    rep = _report(out)
    assert np.all(np.array(rep["point"]["alpha"]) >= 1 - 1e-6)
    assert main(["verify", small, "--report", str(out / "report.json")]) == 0


def test_powergame_and_verify(small, tmp_path):
    out = tmp_path / "g"
    assert main(["powergame", small, "--alloc", "0,1;0,1", "--out", str(out)]) == 0
    assert _report(out)["status"] == "converged"
    assert main(["verify", small, "--report", str(out / "report.json")]) == 0


def test_discrete_powergame(small, tmp_path):
    out = tmp_path / "d"
    assert main(["powergame", small, "--discrete", "--epsilon-w", "1e-3", "--out", str(out)]) == 0
    assert _report(out)["solver"] == "better_response"


@pytest.mark.parametrize("argv, code", [
    (["nbs", "SMALL", "--alpha-hat", "2,2"], 3),
    (["pareto", "SMALL", "--budget", "10"], 5),
    (["pareto", "no-such-scenario.json"], 1),
    (["cce", "SMALL", "--epsilon", "0.7"], 2),
    (["pareto", "SMALL", "--beta", "1,2,3"], 2),
    (["pareto", "SMALL", "--bogus"], 2),
    (["powergame", "SMALL", "--alloc", "0,1"], 2),
])
def test_exit_codes(small, tmp_path, argv, code):
    argv = [small if a == "SMALL" else a for a in argv] + ["--out", str(tmp_path)]
    assert main(argv) == code


def test_bad_scenario_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1}')
    assert main(["cce", str(bad), "--out", str(tmp_path)]) == 1


def test_reruns_are_byte_identical(small, tmp_path):
    argv = ["cce", small, "--mode", "monte_carlo", "--samples", "32", "--max-iters", "150", "--seed", "3"]
    for d in ("a", "b"):
        assert main(argv + ["--out", str(tmp_path / d)]) in (0, 4)
    for name in ("report.json", "trace.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "femtogame", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "powergame" in res.stdout

import json

import numpy as np
import pytest

from femtogame import io
from femtogame.scenarios import GeneratorSpec, example_scenario, generate_scenario

from helpers import desk_scenario, voice_scenario


def _same(a, b):
    assert (a.K, a.N, tuple(a.M)) == (b.K, b.N, tuple(b.M))
    for k in range(a.K):
        np.testing.assert_allclose(a.G[k], b.G[k], rtol=1e-15)
        np.testing.assert_allclose(a.I[k], b.I[k], rtol=1e-15)
        np.testing.assert_allclose(a.Rreq[k], b.Rreq[k], rtol=1e-15)
        for l in range(a.K):
            if l != k:
                np.testing.assert_allclose(a.Gc[l][k], b.Gc[l][k], rtol=1e-15)
    np.testing.assert_allclose(a.Pmax, b.Pmax, rtol=1e-15)
    assert a.user_class == b.user_class
    assert (a.sigma2, a.B, a.Gamma, a.rho) == (b.sigma2, b.B, b.Gamma, b.rho)


@pytest.mark.parametrize("units", [("W", "bps"), ("mW", "kbps")])
def test_scenario_round_trip(tmp_path, units):
    for s in (desk_scenario(seed=3), voice_scenario(1)):
        path = tmp_path / "s.json"
        io.save_scenario(s, path, *units)
        _same(s, io.load_scenario(path))


def test_bundled_example_loads_with_its_dimensions():
    s = example_scenario(1)
    assert (s.K, s.N, list(s.M)) == (2, 4, [2, 2])


def test_milliwatts_are_converted(tmp_path):
    doc = io.scenario_to_dict(desk_scenario(), "mW", "kbps")
    doc["caps"]["Pmax"][0][0] = 2.1
    doc["requirements"]["Rreq"][0][0] = 64
    s = io.scenario_from_dict(doc)
    assert s.Pmax[0, 0] == pytest.approx(0.0021)
    assert s.Rreq[0][0] == pytest.approx(64e3)


@pytest.mark.parametrize("drop", ["gains.G", "physics.B_hz", "caps.Pmax", "dimensions.M"])
def test_missing_key_is_named(drop):
    doc = io.scenario_to_dict(desk_scenario())
    section, key = drop.split(".")
    del doc[section][key]
    with pytest.raises(io.ScenarioFileError) as err:
        io.scenario_from_dict(doc)
    assert err.value.key == drop


def test_bad_unit_and_version():
    doc = io.scenario_to_dict(desk_scenario())
    doc["caps"]["unit"] = "dBm"
    with pytest.raises(io.ScenarioFileError, match="caps.unit"):
        io.scenario_from_dict(doc)
    doc = io.scenario_to_dict(desk_scenario())
    doc["schema_version"] = 99
    with pytest.raises(io.ScenarioFileError, match="schema_version"):
        io.scenario_from_dict(doc)


def test_dimension_mismatch():
    doc = io.scenario_to_dict(desk_scenario())
    doc["dimensions"]["N"] = 5
    with pytest.raises(io.ScenarioFileError, match="dimensions"):
        io.scenario_from_dict(doc)


def test_malformed_json_reports_its_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "a": 1,\n  oops\n}\n')
    with pytest.raises(io.ScenarioFileError, match="line 3"):
        io.load_scenario(path)


def test_trace_round_trip(tmp_path):
    recs = [{"iteration": n, "solver": "x", "value": float(n) / 3, "v": np.arange(2)} for n in range(5)]
    path = tmp_path / "t.jsonl"
    io.write_trace(recs, path)
    back = io.read_trace(path)
    assert [r["iteration"] for r in back] == list(range(5))
    assert all(r["schema_version"] == io.SCHEMA_VERSION for r in back)
    assert back[1]["value"] == 1 / 3 and back[4]["v"] == [0, 1]


def test_report_encodes_infinities(tmp_path):
    io.write_report({"value": -np.inf, "x": np.float64(2.5)}, tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc == {"schema_version": io.SCHEMA_VERSION, "value": "-inf", "x": 2.5}


def test_generator_is_reproducible_and_chi_square():
    spec = GeneratorSpec(K=2, N=250, M=(200, 200))
    a, b = generate_scenario(spec, 9), generate_scenario(spec, 9)
    np.testing.assert_array_equal(a.Gc[0][1], b.Gc[0][1])
    assert not np.array_equal(a.G[0], generate_scenario(spec, 10).G[0])
    cross = np.concatenate([a.Gc[0][1].ravel(), a.Gc[1][0].ravel()])
    assert cross.size == 100_000 and np.all(cross >= 0)
    # squared standard normal: mean 1, standard error sqrt(2/n)
    assert abs(cross.mean() - 1.0) < 4 * np.sqrt(2 / cross.size)
    # direct gains use mean 1 before squaring: E = 1 + 1
    direct = np.concatenate([g.ravel() for g in a.G])
    assert abs(direct.mean() - 2.0) < 4 * np.sqrt(6 / direct.size)

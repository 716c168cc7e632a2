"""Scenario files, trace files and solver reports (all JSON, versioned)."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import Scenario, ScenarioError

SCHEMA_VERSION = 1

POWER_UNITS = {"W": 1.0, "mW": 1e-3}
RATE_UNITS = {"bps": 1.0, "kbps": 1e3, "Mbps": 1e6}
GAIN_UNITS = {"linear": 1.0}


class ScenarioFileError(ScenarioError):
    """Schema violation in a scenario file, carrying the offending key path."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _get(doc, path: str):
    node = doc
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ScenarioFileError(path, "missing required key")
        node = node[part]
    return node


def _scale(section: dict, key: str, units: dict, default: str) -> float:
    unit = section.get("unit", default)
    if unit not in units:
        raise ScenarioFileError(f"{key}.unit", f"unsupported unit {unit!r}; expected one of {sorted(units)}")
    return units[unit]


def _scaled(value, factor):
    if isinstance(value, list):
        return [_scaled(v, factor) for v in value]
    if value is None:
        return None
    return float(value) * factor


def scenario_from_dict(doc: dict) -> Scenario:
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioFileError("schema_version", f"unsupported version {version}")
    K, N, M = _get(doc, "dimensions.K"), _get(doc, "dimensions.N"), _get(doc, "dimensions.M")
    if len(M) != K:
        raise ScenarioFileError("dimensions.M", f"expected {K} entries")
    physics = _get(doc, "physics")
    gains = _get(doc, "gains")
    g = _scale(gains, "gains", GAIN_UNITS, "linear")
    G = _scaled(_get(doc, "gains.G"), g)
    Gc = _scaled(_get(doc, "gains.Gc"), g)
    inter = _get(doc, "interference")
    I = _scaled(_get(doc, "interference.I"), _scale(inter, "interference", POWER_UNITS, "W"))
    caps = _get(doc, "caps")
    Pmax = _scaled(_get(doc, "caps.Pmax"), _scale(caps, "caps", POWER_UNITS, "W"))
    req = _get(doc, "requirements")
    Rreq = _scaled(_get(doc, "requirements.Rreq"), _scale(req, "requirements", RATE_UNITS, "bps"))
    defaults = doc.get("solver_defaults", {})
    try:
        s = Scenario(
            G=G, Gc=Gc, I=I, Pmax=Pmax, Rreq=Rreq,
            sigma2=_get(doc, "physics.sigma2_w"),
            Gamma=physics.get("gamma", 1.0),
            B=_get(doc, "physics.B_hz"),
            user_class=doc.get("user_classes"),
            rho=defaults.get("rho", 15.0),
            beta=defaults.get("beta"),
            alpha_hat=defaults.get("alpha_hat"),
            c_nbs=defaults.get("c_nbs", 1.0),
            name=doc.get("name", ""),
            seed=doc.get("seed", 0),
        )
    except ScenarioFileError:
        raise
    except (ScenarioError, TypeError, ValueError) as exc:
        raise ScenarioFileError("scenario", str(exc)) from exc
    if s.K != K or s.N != N or list(s.M) != list(M):
        raise ScenarioFileError("dimensions", f"declared (K={K}, N={N}, M={M}) but matrices give "
                                              f"(K={s.K}, N={s.N}, M={list(s.M)})")
    return s


def scenario_to_dict(s: Scenario, power_unit: str = "W", rate_unit: str = "bps") -> dict:
    p, r = 1.0 / POWER_UNITS[power_unit], 1.0 / RATE_UNITS[rate_unit]
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "seed": s.seed,
        "dimensions": {"K": s.K, "N": s.N, "M": list(s.M)},
        "physics": {"B_hz": s.B, "gamma": s.Gamma, "sigma2_w": s.sigma2},
        "gains": {
            "unit": "linear",
            "G": [g.tolist() for g in s.G],
            "Gc": [[None if l == k else s.Gc[l][k].tolist() for k in range(s.K)] for l in range(s.K)],
        },
        "interference": {"unit": power_unit, "I": [(i * p).tolist() for i in s.I]},
        "caps": {"unit": power_unit, "Pmax": (s.Pmax * p).tolist()},
        "requirements": {"unit": rate_unit, "Rreq": [(q * r).tolist() for q in s.Rreq]},
        "user_classes": [list(c) for c in s.user_class],
        "solver_defaults": {
            "rho": s.rho,
            "beta": s.beta.tolist(),
            "alpha_hat": s.alpha_hat.tolist(),
            "c_nbs": s.c_nbs,
        },
    }


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"line {exc.lineno}", exc.msg) from exc
    if not isinstance(doc, dict):
        raise ScenarioFileError("<root>", "expected a JSON object")
    return scenario_from_dict(doc)


def save_scenario(s: Scenario, path, power_unit: str = "W", rate_unit: str = "bps") -> None:
    Path(path).write_text(dumps(scenario_to_dict(s, power_unit, rate_unit)))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(doc) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"


def write_trace(records, path) -> None:
    """One JSON object per line, each tagged with the schema version."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(_plain({"schema_version": SCHEMA_VERSION, **rec}), sort_keys=True))
            fh.write("\n")


def read_trace(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps({"schema_version": SCHEMA_VERSION, **report}))


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())

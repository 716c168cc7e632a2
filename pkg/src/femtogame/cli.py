"""Command-line front end: load or generate a scenario, run a solver, write report and trace.

Every solver command writes ``report.json`` and ``trace.jsonl`` into ``--out``
(default: the current directory). Output depends only on the scenario and the
flags, so repeated runs produce byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import cce, io, model, oracle, powergame, scenarios, search
from .model import NONE, JointStrategy, ScenarioError
from .strategy import DEFAULT_BUDGET, BudgetExceeded, enumerate_spaces, joint_strategy

EXIT_OK = 0
EXIT_SCENARIO = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_CONVERGED = 4
EXIT_BUDGET = 5
EXIT_VERIFY_FAILED = 6

BUNDLED = ("example1", "example2", "example3", "ample")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# scenario and strategy-space plumbing

def resolve_scenario(name: str) -> model.Scenario:
    """A file path, or the name of a bundled scenario."""
    path = Path(name)
    if path.exists():
        return io.load_scenario(path)
    if name in BUNDLED:
        text = resources.files("femtogame").joinpath(f"data/{name}.json").read_text()
        return io.scenario_from_dict(json.loads(text))
    raise ScenarioError(f"{name}: no such file and not a bundled scenario ({', '.join(BUNDLED)})")


def _with_overrides(s: model.Scenario, args) -> model.Scenario:
    changes = {}
    if getattr(args, "rho", None) is not None:
        changes["rho"] = args.rho
    if getattr(args, "alpha_hat", None) is not None:
        changes["alpha_hat"] = _floats(args.alpha_hat, s.K, "--alpha-hat")
    if getattr(args, "c", None) is not None:
        changes["c_nbs"] = args.c
    if getattr(args, "beta", None) is not None:
        changes["beta"] = _floats(args.beta, s.K, "--beta")
    return s.replace(**changes) if changes else s


def _floats(text: str, n: int, flag: str) -> list:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None
    if len(vals) == 1:
        vals = vals * n
    if len(vals) != n:
        raise UsageError(f"{flag}: expected {n} values, got {len(vals)}")
    return vals


def _filter(name: str):
    return None if name == "any" else name


def _spaces(s, args):
    return enumerate_spaces(s, args.levels, _filter(args.filter), args.budget)


def _parse_allocs(text: str | None, s: model.Scenario) -> np.ndarray:
    """``"0,0,1,1;1,0,1,-1"`` (one row per FC) or, by default, round-robin."""
    if text is None:
        return np.array([[i % s.M[k] for i in range(s.N)] for k in range(s.K)])
    try:
        rows = [[int(v) for v in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise UsageError(f"--alloc: cannot parse {text!r}") from None
    allocs = np.array(rows)
    if allocs.shape != (s.K, s.N):
        raise UsageError(f"--alloc: expected {s.K} rows of {s.N} entries")
    for k in range(s.K):
        if np.any((allocs[k] < NONE) | (allocs[k] >= s.M[k])):
            raise UsageError(f"--alloc: FC {k} refers to a user outside 0..{s.M[k] - 1}")
    return allocs


# ---------------------------------------------------------------------------
# report assembly

def fairness(alpha) -> dict:
    a = np.asarray(alpha, dtype=float)
    return {"sum_alpha": float(a.sum()), "max_alpha_gap": float(a.max() - a.min())}


def describe_point(s: model.Scenario, x: JointStrategy) -> dict:
    rates = [model.user_rates(s, x, k) for k in range(s.K)]
    alpha = [model.alpha(s, x, k) for k in range(s.K)]
    return {
        "powers_w": x.powers,
        "allocations": x.allocs,
        "user_rates_bps": rates,
        "rate_fractions": [r / q for r, q in zip(rates, s.Rreq)],
        "alpha": alpha,
        "total_power_w": [st.total_power for st in x],
        "fairness": fairness(alpha),
    }


def _config(args) -> dict:
    skip = {"func", "out", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, report: dict, trace: list) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_report(report, out / "report.json")
    io.write_trace(trace, out / "trace.jsonl")


def _cce_report(s, args, rep: cce.CceReport, spaces) -> dict:
    doc = {
        "solver": rep.solver,
        "status": rep.status,
        "config": _config(args),
        "scenario": s.name,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "strategy_indices": rep.indices,
        "cce_gap": rep.gap,
        "point": describe_point(s, rep.profile),
        "mixed": rep.mixed,
    }
    if rep.cce_profile is not None:
        doc["cce_point"] = describe_point(s, rep.cce_profile)
    if rep.power_game is not None:
        doc["power_game"] = {"status": rep.power_game.status, "rounds": rep.power_game.rounds,
                             "infeasible_fc": rep.power_game.infeasible_fc,
                             "infeasible_users": rep.power_game.infeasible_users}
    if s.has_voice:
        doc["voice_satisfied"] = [bool(model.voice_satisfied(s, k, model.user_rates(s, rep.profile, k)))
                                  for k in range(s.K)]
    return doc


def _cce_trace(rep: cce.CceReport) -> list:
    trace = list(rep.trace)
    if rep.power_game is not None:
        offset = rep.iterations
        for rec in rep.power_game.trace:
            trace.append({**rec, "iteration": offset + rec["iteration"]})
    return trace


def _cce_exit(status: str) -> int:
    if status == "infeasible":
        return EXIT_INFEASIBLE
    if status in ("max_iters", "power_game_max_rounds"):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _stop(args) -> cce.StopRule:
    return cce.StopRule(max_iters=args.max_iters or 5000, tol=args.tol, window=args.window)


# ---------------------------------------------------------------------------
# commands

def cmd_cce(args) -> int:
    s = _with_overrides(resolve_scenario(args.scenario), args)
    spaces = _spaces(s, args)
    rep = cce.run_allocation_algorithm_1(s, spaces, args.epsilon, _stop(args), trim=args.trim,
                                         schedule=args.schedule, mode=args.mode,
                                         samples=args.samples, seed=args.seed, budget=args.budget)
    _emit(args, _cce_report(s, args, rep, spaces), _cce_trace(rep))
    return _cce_exit(rep.status)


def cmd_cce2a(args) -> int:
    s = _with_overrides(resolve_scenario(args.scenario), args)
    spaces = _spaces(s, args)
    rep = cce.run_algorithm_2A(s, spaces, args.epsilon, _stop(args), schedule=args.schedule,
                               mode=args.mode, samples=args.samples, seed=args.seed,
                               budget=args.budget)
    _emit(args, _cce_report(s, args, rep, spaces), _cce_trace(rep))
    return _cce_exit(rep.status)


def cmd_cce_vd(args) -> int:
    s = _with_overrides(resolve_scenario(args.scenario), args)
    if not s.has_voice:
        raise ScenarioError("cce-vd needs a scenario with voice users (user_classes)")
    spaces = _spaces(s, args)
    rep = cce.run_voice_data_cce(s, spaces, args.epsilon, _stop(args), cost=args.cost,
                                 schedule=args.schedule, mode=args.mode, samples=args.samples,
                                 seed=args.seed, budget=args.budget)
    _emit(args, _cce_report(s, args, rep, spaces), _cce_trace(rep))
    return _cce_exit(rep.status)


def _search_config(args, objective: str) -> search.SearchConfig:
    return search.SearchConfig(
        objective=objective,
        variant="algo3M" if args.variant == "3m" else "algo3",
        N1=args.n1,
        max_iters=args.max_iters or 100_000,
        seed=args.seed,
        trace=args.trace,
    )


def _search_report(s, args, st: search.SearchState) -> dict:
    return {
        "solver": f"search_{st.variant}_{st.objective}",
        "status": st.status,
        "config": _config(args),
        "scenario": s.name,
        "objective": st.objective,
        "variant": st.variant,
        "iterations": st.iteration,
        "accepted_moves": st.accepted,
        "objective_value": st.value,
        "fc_payoffs": st.payoffs,
        "joint_count": st.joint_count,
        "prop1_bound": st.prop1_bound,
        "strategy_indices": st.indices,
        "point": describe_point(s, st.profile),
    }


def cmd_pareto(args) -> int:
    s = _with_overrides(resolve_scenario(args.scenario), args)
    if args.objective == "nbs":
        raise UsageError("use the nbs command for the bargaining objective")
    if args.objective.startswith("voice") and not s.has_voice:
        raise ScenarioError(f"objective {args.objective} needs voice users")
    spaces = _spaces(s, args)
    st = search.run_search(s, spaces, _search_config(args, args.objective), args.budget)
    _emit(args, _search_report(s, args, st), st.trace)
    return EXIT_OK


def cmd_nbs(args) -> int:
    s = _with_overrides(resolve_scenario(args.scenario), args)
    spaces = _spaces(s, args)
    st = search.run_nbs(s, spaces, _search_config(args, "nbs"), args.budget)
    doc = _search_report(s, args, st)
    doc["alpha_hat"] = s.alpha_hat
    doc["c_nbs"] = s.c_nbs
    _emit(args, doc, st.trace)
    return EXIT_INFEASIBLE if st.status == "infeasible" else EXIT_OK


def cmd_powergame(args) -> int:
    s = _with_overrides(resolve_scenario(args.scenario), args)
    if args.discrete:
        spaces = _spaces(s, args)
        res = powergame.epsilon_better_response(s, spaces, args.epsilon_w,
                                                max_steps=args.max_iters or 100_000)
        doc = {"solver": "better_response", "status": res.status, "config": _config(args),
               "scenario": s.name, "steps": res.steps, "strategy_indices": res.indices,
               "potential": res.potential_trace[-1] if res.potential_trace else None}
        if res.profile is not None:
            doc["point"] = describe_point(s, res.profile)
        _emit(args, doc, res.trace)
        if res.status in ("no_feasible_profile", "infeasible_start"):
            return EXIT_INFEASIBLE
        return EXIT_OK if res.converged else EXIT_NOT_CONVERGED
    allocs = _parse_allocs(args.alloc, s)
    init = None if args.init == "caps" else np.zeros((s.K, s.N))
    st = powergame.run_power_game(s, allocs, init, args.tol_w, args.max_iters or 500)
    doc = {"solver": "powergame", "status": st.status, "config": _config(args), "scenario": s.name,
           "rounds": st.rounds, "infeasible_fc": st.infeasible_fc,
           "infeasible_users": st.infeasible_users, "point": describe_point(s, st.joint())}
    _emit(args, doc, st.trace)
    if st.status == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_OK if st.converged else EXIT_NOT_CONVERGED


def _verify_search(s, report, spaces, check) -> None:
    objective = report["objective"]
    params = search.ObjectiveParams.resolve(s)
    joint = oracle.JointSpace(spaces)
    x = joint_strategy(spaces, report["strategy_indices"])
    ok, witness = oracle.is_pareto(s, joint, x, oracle.objective_payoffs(objective, params))
    check("pareto", ok, "no dominating profile" if ok else "dominated by " + str(witness.powers.tolist()))
    _, best, idx = oracle.global_optimum(s, joint, objective, params)
    value = search.social_value(s, x, objective, params)
    optimal = value >= best - 1e-9 or (best == value)
    check("global_optimum", optimal, f"value {value!r}, oracle optimum {best!r} at {list(idx)}")


def _verify_cce(s, report, spaces, check) -> None:
    solver = report["solver"]
    fn = {"alg1": model.squared_alpha_cost, "alg2a": model.normalized_penalty_cost}.get(solver)
    if solver == "cce_vd":
        fn = {"gated": model.voice_gated_cost,
              "penalty": model.normalized_penalty_cost}[report["config"]["cost"]]
    mixed = [np.asarray(m, dtype=float) for m in report["mixed"]]
    gap = oracle.exact_cce_gap(s, spaces, mixed, fn)
    check("cce_gap", gap <= 0.05, f"exhaustive gap {gap:.6g}")


def _verify_powergame(s, report, check) -> None:
    point = report["point"]
    powers = np.array(point["powers_w"], dtype=float)
    allocs = np.array(point["allocations"], dtype=int)
    worst = 0.0
    for k in range(s.K):
        br = powergame.best_response_power(s, k, allocs[k], powers)
        worst = max(worst, float(np.abs(br.power - powers[k]).max()))
    check("fixed_point", worst <= 1e-9, f"largest best-response move {worst:.3g} W")
    alpha = np.array(point["alpha"])
    check("requirements_met", bool(np.all(alpha >= 1 - 1e-6)), f"alpha {alpha.tolist()}")


def cmd_verify(args) -> int:
    """Re-check a saved report against the brute-force oracle."""
    s = resolve_scenario(args.scenario)
    report = io.read_report(args.report)
    cfg = report.get("config", {})
    s = _with_overrides(s, argparse.Namespace(**{k: cfg.get(k) for k in ("rho", "alpha_hat", "c", "beta")}))
    results = []

    def check(name, ok, detail):
        ok = bool(ok)
        results.append({"check": name, "passed": ok, "detail": detail})
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    solver = report.get("solver", "")
    if solver == "powergame":
        _verify_powergame(s, report, check)
    else:
        spaces = enumerate_spaces(s, cfg.get("levels", 3), _filter(cfg.get("filter", "any")),
                                  args.budget)
        if solver.startswith("search_"):
            _verify_search(s, report, spaces, check)
        elif solver in ("alg1", "alg2a", "cce_vd"):
            _verify_cce(s, report, spaces, check)
        else:
            raise UsageError(f"cannot verify reports from solver {solver!r}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        io.write_report({"solver": "verify", "verified_solver": solver, "checks": results},
                        out / "verify.json")
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_VERIFY_FAILED


def cmd_generate(args) -> int:
    if args.example is not None:
        s = scenarios.example_scenario(args.example, args.seed)
    elif args.ample:
        s = scenarios.ample_power_scenario(args.N, args.M, args.headroom)
    else:
        spec = scenarios.GeneratorSpec(
            K=args.K, N=args.N, M=(args.M,) * args.K,
            Pmax=np.full((args.K, args.N), args.pmax_mw * 1e-3),
            Rreq=[np.full(args.M, args.rreq_kbps * 1e3) for _ in range(args.K)],
        )
        s = scenarios.generate_scenario(spec, args.seed)
    s = _with_overrides(s, args)
    text = io.dumps(io.scenario_to_dict(s, "mW", "kbps"))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "scenario.json").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _common(p, *, solver=True):
    p.add_argument("scenario", help=f"scenario file or bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="enumeration size limit")
    if not solver:
        return
    p.add_argument("--levels", type=int, default=3, help="power levels per channel (incl. 0)")
    p.add_argument("--filter", choices=("any", "all_assigned"), default="any",
                   help="allocation maps to enumerate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--rho", type=float, default=None, help="penalty weight per bit/s of deficit")


def _cce_flags(p):
    p.add_argument("--epsilon", type=float, default=0.1, help="multiplicative-weights step in (0, 0.5)")
    p.add_argument("--schedule", choices=("simultaneous", "sequential"), default="simultaneous")
    p.add_argument("--mode", choices=("exact", "monte_carlo"), default="exact")
    p.add_argument("--samples", type=int, default=256, help="Monte Carlo opponent draws per round")
    p.add_argument("--tol", type=float, default=1e-4, help="L1 convergence threshold")
    p.add_argument("--window", type=int, default=10, help="rounds the threshold must hold")


def _search_flags(p):
    p.add_argument("--variant", choices=("3", "3m"), default="3", help="local (3) or global (3m)")
    p.add_argument("--n1", type=int, default=None, help="plateau length that stops the search")
    p.add_argument("--trace", choices=("full", "accepted", "none"), default="full")
    p.add_argument("--beta", default=None, help="per-FC weights, comma separated")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="femtogame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cce", help="CCE with the squared alpha cost, then the power game")
    _common(p)
    _cce_flags(p)
    p.add_argument("--trim", action="store_true", help="trim over-served users when QoS is unmet")
    p.set_defaults(func=cmd_cce)

    p = sub.add_parser("cce2a", help="CCE with the normalized power-plus-penalty cost")
    _common(p)
    _cce_flags(p)
    p.set_defaults(func=cmd_cce2a)

    p = sub.add_parser("cce-vd", help="CCE for voice and data users")
    _common(p)
    _cce_flags(p)
    p.add_argument("--cost", choices=("gated", "penalty"), default="gated")
    p.set_defaults(func=cmd_cce_vd)

    p = sub.add_parser("pareto", help="stochastic search for a weighted-sum Pareto point")
    _common(p)
    _search_flags(p)
    p.add_argument("--objective", choices=[o for o in search.OBJECTIVES if o != "nbs"],
                   default="weighted_alpha")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("nbs", help="stochastic search for the Nash bargaining point")
    _common(p)
    _search_flags(p)
    p.add_argument("--alpha-hat", default=None, help="disagreement point, comma separated")
    p.add_argument("--c", type=float, default=None, help="offset inside the logarithm")
    p.set_defaults(func=cmd_nbs)

    p = sub.add_parser("powergame", help="continuous best-response power game for fixed allocations")
    _common(p)
    p.add_argument("--alloc", default=None, help='allocations, e.g. "0,0,1,1;1,1,0,0"')
    p.add_argument("--init", choices=("caps", "zero"), default="caps")
    p.add_argument("--tol-w", type=float, default=1e-9, help="per-round power change that stops")
    p.add_argument("--discrete", action="store_true", help="epsilon-better response on the grid")
    p.add_argument("--epsilon-w", type=float, default=1e-4, help="minimum power saving per move (W)")
    p.set_defaults(func=cmd_powergame)

    p = sub.add_parser("verify", help="check a saved report against the brute-force oracle")
    p.add_argument("scenario")
    p.add_argument("--report", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("generate", help="write a scenario file")
    p.add_argument("--example", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("--ample", action="store_true", help="flat-gain instance with spare power")
    p.add_argument("--headroom", type=float, default=0.9)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--pmax-mw", type=float, default=15.0)
    p.add_argument("--rreq-kbps", type=float, default=150.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--out", default=None, help="directory for scenario.json (default: stdout)")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"femtogame: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"femtogame: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ScenarioError as exc:
        print(f"femtogame: scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except ValueError as exc:
        print(f"femtogame: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Experiment harness CLI.

Subcommands:

* ``solve``         one seeded instance with one scheme, printed report
* ``sweep``         Monte-Carlo sweep over gamma or N from a YAML plan, CSV out
* ``oracle-check``  paired decomposition-vs-enumeration harness
* ``dump-channels`` write one channel realization to JSON

Exit codes: 0 success, 2 infeasible, 3 numerical failure, 4 bad config.
"""

from __future__ import annotations

import argparse
import importlib.resources
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from . import baselines, gbd, oracle
from .channel import ScenarioConfig, generate_channels, save_channels
from .conic import NumericalFailure
from .reformulation import build_reformulated, sinr

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_BAD_CONFIG = 4

SCHEMES = ("GBD", "Oracle", "RandomPhase", "AlternatingOpt", "PenaltySCA")

CSV_HEADER = "sweep_value,trial,scheme,status,power_dBm,iterations,wall_ms"


class BadConfig(ValueError):
    pass


# ---------------------------------------------------------------------------
# unit helpers
# ---------------------------------------------------------------------------

def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watts_to_dbm(watts: float) -> float:
    if not (watts > 0) or not math.isfinite(watts):
        return math.nan
    return 10.0 * math.log10(watts * 1000.0)


# ---------------------------------------------------------------------------
# configuration loading
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {"M", "K", "N", "L", "gamma_dB", "sigma2_dBm", "D", "r", "L0",
                "alpha_BI", "alpha_IU", "beta_BI", "beta_IU", "seed"}

_DEFAULT_CONFIG = {"M": 3, "K": 2, "N": 4, "L": 2, "gamma_dB": 5.0,
                   "sigma2_dBm": -117.0, "seed": 0}


def load_profile(name: str) -> dict:
    path = importlib.resources.files("irsopt") / "profiles" / f"{name}.yaml"
    if not path.is_file():
        raise BadConfig(f"unknown profile {name!r}")
    return yaml.safe_load(path.read_text())


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Build a scenario from plain keys; SINR targets are given in dB and
    noise power in dBm (scalar, broadcast to all users, or per-user lists)."""
    raw = dict(raw or {})
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise BadConfig(f"unknown config keys: {sorted(unknown)}")
    merged = {**_DEFAULT_CONFIG, **raw}
    try:
        K = int(merged["K"])
        gamma = db_to_linear(np.atleast_1d(np.asarray(merged.pop("gamma_dB"), dtype=float)))
        sigma2 = dbm_to_watts(np.atleast_1d(np.asarray(merged.pop("sigma2_dBm"), dtype=float)))
        if gamma.size == 1:
            gamma = np.full(K, gamma[0])
        if sigma2.size == 1:
            sigma2 = np.full(K, sigma2[0])
        return ScenarioConfig(gamma=gamma, sigma2=sigma2, **merged)
    except (TypeError, ValueError) as exc:
        raise BadConfig(str(exc)) from exc


def load_config(path: str | None, profile: str | None, overrides: dict) -> ScenarioConfig:
    raw: dict = {}
    if profile:
        raw.update(load_profile(profile))
    if path:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise BadConfig(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise BadConfig(f"config {path} must be a mapping")
        raw.update(loaded)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# scheme runners
# ---------------------------------------------------------------------------

@dataclass
class SchemeOutcome:
    status: str          # "Optimal" | "Infeasible" | "Failed"
    power: float         # watts
    iterations: int
    selection: tuple | None = None
    detail: str = ""


def run_scheme(scheme: str, cfg: ScenarioConfig, delta: float | None = None,
               oracle_budget: int = oracle.DEFAULT_BUDGET, mu: float = 1.0,
               draws: int = 1) -> SchemeOutcome:
    data = build_reformulated(generate_channels(cfg), cfg.L)
    try:
        if scheme == "GBD":
            state = gbd.run(data, cfg, delta=delta)
            if state.status == "InfeasibleEverywhere":
                return SchemeOutcome("Infeasible", math.inf, state.iteration)
            if not state.converged:
                return SchemeOutcome("Failed", math.inf, state.iteration,
                                     detail="did not converge")
            sel = state.incumbent_selection
            return SchemeOutcome("Optimal", state.ub, state.iteration, sel.levels)
        if scheme == "Oracle":
            res = oracle.enumerate_selections(data, cfg, budget=oracle_budget)
            if not res.clean:
                return SchemeOutcome("Failed", math.inf, res.n_failed,
                                     detail=f"{res.n_failed} selections failed numerically")
            total = res.n_feasible + res.n_infeasible
            if not res.feasible:
                return SchemeOutcome("Infeasible", math.inf, total)
            return SchemeOutcome("Optimal", res.objective, total, res.selection.levels)
        if scheme == "RandomPhase":
            res = baselines.random_phase_baseline(data, cfg, seed=cfg.seed, draws=draws)
        elif scheme == "AlternatingOpt":
            res = baselines.alternating_opt_baseline(data, cfg)
        elif scheme == "PenaltySCA":
            res = baselines.penalty_sca_baseline(data, cfg, mu=mu)
        else:
            raise BadConfig(f"unknown scheme {scheme!r}")
        if not res.feasible:
            return SchemeOutcome("Infeasible", math.inf, res.subproblems,
                                 res.selection.levels if res.selection else None)
        return SchemeOutcome("Optimal", res.objective, res.subproblems, res.selection.levels)
    except oracle.BudgetExceeded as exc:
        raise BadConfig(str(exc)) from exc
    except (NumericalFailure, gbd.GbdNumericalError) as exc:
        return SchemeOutcome("Failed", math.inf, 0, detail=str(exc))


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def load_plan(path: str) -> dict:
    try:
        with open(path) as fh:
            plan = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise BadConfig(f"cannot read plan {path}: {exc}") from exc
    if not isinstance(plan, dict):
        raise BadConfig("plan file must be a mapping")
    for key in ("base", "output"):
        if key not in plan:
            raise BadConfig(f"plan is missing the {key!r} key")
    plan.setdefault("trials", 1)
    plan.setdefault("schemes", ["GBD"])
    plan.setdefault("sweep", "single")
    plan.setdefault("workers", 1)
    plan.setdefault("oracle_budget", oracle.DEFAULT_BUDGET)
    if int(plan["trials"]) < 1:
        raise BadConfig("trials must be >= 1")
    bad = [s for s in plan["schemes"] if s not in SCHEMES]
    if bad:
        raise BadConfig(f"unknown schemes {bad}; valid: {list(SCHEMES)}")
    return plan


def _sweep_points(plan: dict, base: ScenarioConfig) -> list[tuple[object, ScenarioConfig]]:
    sweep = plan["sweep"]
    if sweep == "single" or sweep is None:
        return [("single", base)]
    if not isinstance(sweep, dict) or len(sweep) != 1:
        raise BadConfig("sweep must be 'single' or a one-key mapping "
                        "{gamma_dB: [...]} or {N: [...]}")
    key, values = next(iter(sweep.items()))
    points = []
    if key == "gamma_dB":
        for v in values:
            gamma = np.full(base.K, db_to_linear(float(v)))
            points.append((v, base.with_(gamma=gamma)))
    elif key == "N":
        for v in values:
            points.append((v, base.with_(N=int(v))))
    else:
        raise BadConfig(f"unsupported sweep key {key!r}")
    return points


def run_plan(plan: dict) -> tuple[list[dict], list[dict]]:
    """Execute a sweep plan; returns (rows, summary rows)."""
    base = config_from_dict(plan["base"])
    points = _sweep_points(plan, base)
    trials = int(plan.get("trials", 1))
    schemes = list(plan.get("schemes", ["GBD"]))
    budget = int(plan.get("oracle_budget", oracle.DEFAULT_BUDGET))
    workers = int(plan.get("workers", 1))
    delta = plan.get("delta")

    if "Oracle" in schemes:
        for _, cfg in points:
            if cfg.L ** cfg.N > budget:
                raise BadConfig(
                    f"plan includes the Oracle scheme but L**N = {cfg.L ** cfg.N} "
                    f"exceeds the oracle budget of {budget}")

    def run_trial(args):
        value, cfg_point, trial = args
        cfg = cfg_point.with_(seed=cfg_point.seed + trial)
        out = []
        for scheme in schemes:
            start = time.perf_counter()
            try:
                outcome = run_scheme(scheme, cfg, delta=delta, oracle_budget=budget)
            except BadConfig:
                raise
            except Exception as exc:  # a scheme hard-failure never aborts the sweep
                outcome = SchemeOutcome("Failed", math.inf, 0, detail=str(exc))
            wall_ms = (time.perf_counter() - start) * 1000.0
            out.append({
                "sweep_value": value, "trial": trial, "scheme": scheme,
                "status": outcome.status, "power_dBm": watts_to_dbm(outcome.power),
                "iterations": outcome.iterations, "wall_ms": wall_ms,
                "power_watts": outcome.power,
            })
        return out

    jobs = [(value, cfg, trial) for value, cfg in points for trial in range(trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(run_trial, jobs))
    else:
        nested = [run_trial(job) for job in jobs]
    rows = [row for batch in nested for row in batch]  # already (sweep, trial, scheme) order

    summary = []
    for value, _ in points:
        for scheme in schemes:
            sub = [r for r in rows if r["sweep_value"] == value and r["scheme"] == scheme]
            feas = [r["power_watts"] for r in sub if r["status"] == "Optimal"]
            mean_w = float(np.mean(feas)) if feas else math.nan
            summary.append({
                "sweep_value": value, "scheme": scheme, "trials": len(sub),
                "feasible": len(feas),
                "infeasible": sum(r["status"] == "Infeasible" for r in sub),
                "failed": sum(r["status"] == "Failed" for r in sub),
                "mean_power_dBm": watts_to_dbm(mean_w),
            })
    return rows, summary


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def write_rows_csv(rows: list[dict], path: str) -> None:
    cols = CSV_HEADER.split(",")
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")


def write_summary_csv(summary: list[dict], path: str) -> None:
    cols = ["sweep_value", "scheme", "trials", "feasible", "infeasible",
            "failed", "mean_power_dBm"]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in summary:
            fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")


def summary_path(output: str) -> str:
    stem, dot, ext = output.rpartition(".")
    return f"{stem}_summary.{ext}" if dot else f"{output}_summary"


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    cfg = load_config(args.config, args.profile, _config_overrides(args))
    outcome = run_scheme(args.scheme, cfg, delta=args.delta, mu=args.mu,
                         draws=args.draws, oracle_budget=args.oracle_budget)
    print(f"scheme    : {args.scheme}")
    print(f"instance  : M={cfg.M} K={cfg.K} N={cfg.N} L={cfg.L} seed={cfg.seed}")
    print(f"status    : {outcome.status}" + (f" ({outcome.detail})" if outcome.detail else ""))
    if outcome.status == "Optimal":
        print(f"power     : {outcome.power:.6e} W  ({watts_to_dbm(outcome.power):.3f} dBm)")
        print(f"levels    : {' '.join(str(v) for v in outcome.selection)}")
        _print_achieved_sinr(cfg, outcome)
    print(f"iterations: {outcome.iterations}")
    if outcome.status == "Infeasible":
        return EXIT_INFEASIBLE
    if outcome.status == "Failed":
        return EXIT_NUMERICAL
    return EXIT_OK


def _print_achieved_sinr(cfg: ScenarioConfig, outcome: SchemeOutcome) -> None:
    from .gbd import solve_primal
    from .reformulation import PhaseSelection

    data = build_reformulated(generate_channels(cfg), cfg.L)
    res = solve_primal(data, PhaseSelection(tuple(outcome.selection)), cfg)
    if not res.feasible:
        return
    for k in range(cfg.K):
        achieved = sinr(res.design.X, data.channels, cfg.sigma2, k)
        print(f"user {k}    : SINR {10 * math.log10(achieved):.3f} dB "
              f"(target {10 * math.log10(cfg.gamma[k]):.3f} dB)")


def cmd_sweep(args) -> int:
    plan = load_plan(args.plan)
    if args.output:
        plan["output"] = args.output
    if args.workers:
        plan["workers"] = args.workers
    rows, summary = run_plan(plan)
    write_rows_csv(rows, plan["output"])
    write_summary_csv(summary, summary_path(plan["output"]))
    n_failed = sum(r["status"] == "Failed" for r in rows)
    print(f"wrote {len(rows)} rows to {plan['output']} "
          f"({n_failed} failed rows); summary in {summary_path(plan['output'])}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    cfg0 = load_config(args.config, args.profile, _config_overrides(args))
    matches = 0
    worst = 0.0
    for trial in range(args.instances):
        cfg = cfg0.with_(seed=cfg0.seed + trial)
        data = build_reformulated(generate_channels(cfg), cfg.L)
        res = oracle.enumerate_selections(data, cfg, budget=args.oracle_budget)
        state = gbd.run(data, cfg)
        both_infeasible = (not res.feasible) and state.status == "InfeasibleEverywhere"
        if both_infeasible:
            rel = 0.0
        elif res.feasible and state.converged:
            rel = abs(state.ub - res.objective) / max(res.objective, 1e-300)
        else:
            rel = math.inf
        ok = rel <= 1e-5
        matches += ok
        worst = max(worst, rel if math.isfinite(rel) else 1.0)
        print(f"trial {trial:3d}: {'match' if ok else 'MISMATCH'}  rel_gap={rel:.3e}")
    print(f"summary: {matches}/{args.instances} matches (worst rel gap {worst:.3e})")
    return EXIT_OK if matches == args.instances else 1


def cmd_dump_channels(args) -> int:
    cfg = load_config(args.config, args.profile, _config_overrides(args))
    channels = generate_channels(cfg)
    save_channels(args.output, channels)
    print(f"wrote {cfg.N}x{cfg.M} + {cfg.K}x{cfg.N} channels to {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML scenario config")
    p.add_argument("--profile", help="shipped profile name (e.g. 'paper')")
    for flag, typ in (("--M", int), ("--K", int), ("--N", int), ("--L", int),
                      ("--seed", int), ("--gamma-db", float), ("--sigma2-dbm", float)):
        p.add_argument(flag, type=typ)
    p.add_argument("--oracle-budget", type=int, default=oracle.DEFAULT_BUDGET)


def _config_overrides(args) -> dict:
    return {"M": args.M, "K": args.K, "N": args.N, "L": args.L, "seed": args.seed,
            "gamma_dB": args.gamma_db, "sigma2_dBm": args.sigma2_dbm}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irsopt",
        description="Globally optimal joint beamforming and discrete IRS phase selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one seeded instance with one scheme")
    _add_config_flags(p)
    p.add_argument("--scheme", choices=SCHEMES, default="GBD")
    p.add_argument("--delta", type=float, help="absolute convergence gap in watts")
    p.add_argument("--mu", type=float, default=1.0, help="penalty weight for PenaltySCA")
    p.add_argument("--draws", type=int, default=1, help="draws for RandomPhase")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("sweep", help="run a Monte-Carlo sweep plan (YAML)")
    p.add_argument("plan")
    p.add_argument("--output", help="override the plan's output CSV path")
    p.add_argument("--workers", type=int, help="parallel trials")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("oracle-check", help="paired solver-vs-enumeration harness")
    _add_config_flags(p)
    p.add_argument("--instances", type=int, default=5)
    p.set_defaults(fn=cmd_oracle_check)

    p = sub.add_parser("dump-channels", help="write one channel realization to JSON")
    _add_config_flags(p)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_dump_channels)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BadConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (NumericalFailure, gbd.GbdNumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

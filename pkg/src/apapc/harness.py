"""Command-line front end: ``apapc solve|bench|verify|rates``.

A run configuration is a JSON document::

    {
      "problem": {"generator": {"name": "quadratic_regS", "n": 30, "m": 20}},
      "algorithm": "apapc",
      "schedule": "auto",
      "stepsize": {"rule": "corollary_S"},
      "max_iters": 10000,
      "check_level": "lyapunov",
      "output": {"trace": "trace.csv", "summary": "summary.json"}
    }

``problem`` is either ``{"generator": {...}}``, ``{"path": "instance.json"}``
or a bare generator spec ``{"name": ...}``. ``stepsize`` is a symbolic
rule or explicit ``{"gamma": ..., "tau": ...}``. Resolution of symbolic
rules and schedules is a pure function of the configuration and the
instance; every derived constant is reported in the summary under
``"resolution"``.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 I/O error. ``APAPC_MAX_WORKERS`` caps the number of concurrent bench
rows.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import (
    ConfigurationError,
    InputError,
    InsufficientDataError,
    IterationError,
    OracleError,
    VerificationError,
)
from .problems import ProblemInstance, generate
from .schedules import MomentumSchedule
from .solvers import ALGORITHMS, SolveConfig, run

__all__ = [
    "RunConfig",
    "resolve_stepsizes",
    "resolve_schedule",
    "resolve",
    "execute",
    "summarize",
    "run_bench",
    "main",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_VERIFY",
    "EXIT_IO",
    "WORKERS_ENV",
]

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3
WORKERS_ENV = "APAPC_MAX_WORKERS"
RULES = ("corollary_apgd", "corollary_S", "corollary_B", "corollary_C", "papc", "cv", "default")


@dataclass
class RunConfig:
    problem: dict
    algorithm: str = "apapc"
    schedule: object = "auto"
    stepsize: dict = field(default_factory=lambda: {"rule": "default"})
    nu: float = 1.0
    max_iters: int = 1000
    check_level: str = "lyapunov"
    stop: dict | None = None
    strict: bool = False
    seed: int | None = None
    output: dict = field(default_factory=dict)
    base_dir: str | None = None

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigurationError("configuration must be a JSON object", "<root>")
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys {sorted(unknown)}", sorted(unknown)[0])
        if "problem" not in d:
            raise ConfigurationError("configuration lacks 'problem'", "problem")
        cfg = cls(**d, base_dir=None if base_dir is None else str(base_dir))
        if cfg.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}, got {cfg.algorithm!r}", "algorithm")
        if not 0 < float(cfg.nu) <= 1:
            raise ConfigurationError(f"nu must lie in (0, 1], got {cfg.nu}", "nu")
        if int(cfg.max_iters) < 0:
            raise ConfigurationError("max_iters must be >= 0", "max_iters")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})", "<file>") from None
        return cls.from_dict(data, base_dir=path.parent)


# -- resolution ------------------------------------------------------------------------------


def load_problem(spec: dict, base_dir=None, seed=None) -> ProblemInstance:
    if not isinstance(spec, dict):
        raise ConfigurationError("problem must be an object", "problem")
    if "path" in spec:
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return ProblemInstance.load(path)
    gen = dict(spec.get("generator", spec))
    if seed is not None and "seed" not in gen:
        gen["seed"] = seed
    return generate(gen)


def _default_rule(algorithm, problem):
    if algorithm in ("pgd", "apgd", "fista"):
        return "corollary_apgd"
    if algorithm in ("papc", "cv"):
        return algorithm
    return {"regS": "corollary_S", "regB": "corollary_B", "regC": "corollary_C"}.get(problem.regime_tag, "corollary_S")


def resolve_stepsizes(algorithm: str, problem: ProblemInstance, stepsize: dict, nu: float = 1.0) -> dict:
    """Turn a stepsize spec into ``{"gamma", "tau", "rule", ...}``.

    Rules:
      ``corollary_apgd``  gamma = 1/L_f
      ``corollary_S``     gamma = min(1/L_f, sqrt(mu_h*/L_f)/||K||), tau = 1/(gamma ||K||^2)
      ``corollary_B/C``   gamma = 1/(2 L_f) unless given, tau = nu/(gamma ||K||^2)
      ``papc``            gamma = 1/(L_f + mu_g), tau = 1/(gamma ||K||^2)
      ``cv``              gamma = 1/L_f, tau = (1/gamma - L_f/2)/||K||^2
    """
    c = problem.constants
    L = c["L_f"]
    rule = stepsize.get("rule")
    explicit_gamma = stepsize.get("gamma")
    if rule is None and explicit_gamma is not None:
        tau = stepsize.get("tau")
        return {"rule": "explicit", "gamma": float(explicit_gamma), "tau": None if tau is None else float(tau)}
    if rule in (None, "default"):
        rule = _default_rule(algorithm, problem)
    if rule not in RULES:
        raise ConfigurationError(f"unknown stepsize rule {rule!r}", "stepsize.rule")
    nk = c.get("op_norm_sq")
    if rule != "corollary_apgd" and nk is None:
        raise ConfigurationError(f"rule {rule} needs an operator K", "stepsize.rule")
    out = {"rule": rule}
    if rule == "corollary_apgd":
        out["gamma"], out["tau"] = 1.0 / L, None
    elif rule == "corollary_S":
        if problem.h is None or not problem.h.mu_conj > 0:
            raise ConfigurationError("corollary_S needs mu_h* > 0", "stepsize.rule")
        muh = problem.h.mu_conj
        gamma = min(1.0 / L, math.sqrt(muh / L) / math.sqrt(nk))
        out.update(gamma=gamma, tau=1.0 / (gamma * nk), mu_hconj=muh)
    elif rule in ("corollary_B", "corollary_C"):
        lam = c["lam_min"] if rule == "corollary_B" else c["lam_min_plus"]
        if not lam > 0:
            raise ConfigurationError(f"{rule} needs a positive lambda, got {lam}", "stepsize.rule")
        lo, hi = math.sqrt(lam / nk) / (2.0 * L), 1.0 / (2.0 * L)
        gamma = hi if explicit_gamma is None else float(explicit_gamma)
        if not lo * (1 - 1e-12) <= gamma <= hi * (1 + 1e-12):
            raise ConfigurationError(f"{rule}: gamma = {gamma:.6g} outside [{lo:.6g}, {hi:.6g}]", "stepsize.gamma")
        out.update(gamma=gamma, tau=nu / (gamma * nk), nu=nu, lam=lam)
    elif rule == "papc":
        gamma = 1.0 / (L + problem.mu_g)
        out.update(gamma=gamma, tau=1.0 / (gamma * nk))
    else:
        gamma = 1.0 / L
        out.update(gamma=gamma, tau=(1.0 / gamma - L / 2.0) / nk)
    return out


def resolve_schedule(algorithm: str, problem: ProblemInstance, spec, steps: dict, nu: float = 1.0):
    """Build the momentum schedule; ``spec`` is "auto", a regime name or a dict."""
    if algorithm in ("pgd", "papc", "cv"):
        return None
    c = problem.constants
    if isinstance(spec, str):
        spec = {"regime": spec}
    spec = dict(spec or {"regime": "auto"})
    regime = spec.get("regime", "auto")
    if regime == "auto":
        if algorithm in ("apgd", "fista"):
            regime = "apgd_capped" if problem.g.mu > 0 else "apgd_sublinear"
        else:
            base = problem.regime_tag if problem.regime_tag in ("regS", "regB", "regC") else "regS"
            regime = base + ("_capped" if problem.mu_g > 0 else "")
    base = regime.replace("_capped", "")
    params = {}
    if base.startswith("apgd"):
        params = {"L_f": c["L_f"], "mu_g": problem.g.mu}
    elif base == "regS":
        params = {"tau": steps["tau"], "mu_hconj": problem.h.mu_conj, "L_f": c["L_f"], "mu_g": problem.mu_g}
    elif base in ("regB", "regC"):
        lam = c["lam_min"] if base == "regB" else c["lam_min_plus"]
        params = {"gamma": steps["gamma"], "L_f": c["L_f"], "lam": lam, "K_norm_sq": c["op_norm_sq"],
                  "mu_g": problem.mu_g, "nu": nu}
        if problem.mu_g > c["L_f"] / 2.0:
            raise ConfigurationError(f"{base} needs mu_g <= L_f/2", "problem.mu_g")
    params.update(spec.get("params", {}))
    return MomentumSchedule(regime, params, spec.get("form", "recursive"))


def resolve(cfg: RunConfig, problem: ProblemInstance):
    """Resolve stepsizes and schedule; returns ``(SolveConfig, audit)``."""
    steps = resolve_stepsizes(cfg.algorithm, problem, dict(cfg.stepsize or {}), float(cfg.nu))
    schedule = resolve_schedule(cfg.algorithm, problem, cfg.schedule, steps, float(cfg.nu))
    stop = cfg.stop or {}
    unknown = set(stop) - {"gap_below"}
    if unknown:
        raise ConfigurationError(f"unknown stop criteria {sorted(unknown)}", "stop")
    solve_cfg = SolveConfig(
        gamma=steps["gamma"],
        tau=steps.get("tau"),
        schedule=schedule,
        max_iters=int(cfg.max_iters),
        stop_gap=stop.get("gap_below"),
        check_level=cfg.check_level,
        strict=bool(cfg.strict),
        keep_states="last",
    )
    audit = {**steps, **{k: v for k, v in problem.constants.items()}, "mu_g": problem.mu_g,
             "algorithm": cfg.algorithm, "regime_tag": problem.regime_tag}
    if problem.h is not None:
        audit["mu_hconj"] = problem.h.mu_conj
    if schedule is not None:
        audit["schedule"] = schedule.to_dict()
        audit["a_sharp"] = schedule.a_sharp
        audit["a0"] = schedule.initial()
        audit["cap_index"] = schedule.cap_index(limit=max(int(cfg.max_iters), 1))
    if steps.get("tau") is not None and problem.constants.get("op_norm_sq") is not None:
        audit["gamma_tau_K2"] = steps["gamma"] * steps["tau"] * problem.constants["op_norm_sq"]
    return solve_cfg, _jsonable(audit)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# -- execution ------------------------------------------------------------------------------


def summarize(trace, audit: dict, window: int | None = None) -> dict:
    recs = trace.records
    final = recs[-1] if recs else None
    rates = None
    if len(recs) >= 10:
        w = window or len(recs)
        try:
            g0 = recs[0].lag_gap
            fit = dg.fit_rate(recs, min(w, len(recs)), scale=g0 if math.isfinite(g0) and g0 > 0 else None)
            rates = {"sublinear_exponent": fit.sublinear_exponent, "linear_factor": fit.linear_factor,
                     "window": min(w, len(recs))}
        except (InsufficientDataError, InputError):
            rates = None
    out = {
        "algorithm": trace.algorithm,
        "iterations": trace.final.t,
        "stopped_early": trace.stopped_early,
        "final": None if final is None else {k: v for k, v in zip(dg.CSV_COLUMNS, final.row())},
        "initial": None if not recs else {k: v for k, v in zip(dg.CSV_COLUMNS, recs[0].row())},
        "rates": rates,
        "lyapunov_monotone": trace.lyapunov_monotone,
        "violations": [{"t": v.t, "check": v.check, "slack": v.slack, "scale": v.scale} for v in trace.violations[:100]],
        "n_violations": len(trace.violations),
        "wall_time": trace.wall_time,
        "resolution": audit,
    }
    return _jsonable(out)


def execute(cfg: RunConfig, trace_path=None, summary_path=None) -> dict:
    problem = load_problem(cfg.problem, cfg.base_dir, cfg.seed)
    solve_cfg, audit = resolve(cfg, problem)
    trace = run(cfg.algorithm, problem, solve_cfg)
    summary = summarize(trace, audit)
    if trace_path is not None:
        dg.write_trace_csv(trace.records, trace_path)
    if summary_path is not None:
        Path(summary_path).write_text(json.dumps(summary, indent=2))
    return summary


def _iterations_to(records, eps):
    for r in records:
        if r.lag_gap <= eps:
            return r.t
    return None


def _bench_row(row: dict, eps: float, out_dir):
    name = row.get("name", "row")
    started = time.perf_counter()
    try:
        body = {k: v for k, v in row.items() if k not in ("name", "base_dir")}
        body.setdefault("stop", {"gap_below": eps})
        cfg = RunConfig.from_dict(body, base_dir=row.get("base_dir"))
        problem = load_problem(cfg.problem, cfg.base_dir, cfg.seed)
        solve_cfg, audit = resolve(cfg, problem)
        trace = run(cfg.algorithm, problem, solve_cfg)
        summary = summarize(trace, audit)
        if out_dir is not None:
            dg.write_trace_csv(trace.records, Path(out_dir) / f"{name}.csv")
        rates = summary["rates"] or {}
        return {
            "name": name,
            "algorithm": cfg.algorithm,
            "status": "ok",
            "iterations_to_eps": _iterations_to(trace.records, eps),
            "final_gap": summary["final"]["lag_gap"] if summary["final"] else None,
            "sublinear_exponent": rates.get("sublinear_exponent"),
            "linear_factor": rates.get("linear_factor"),
            "wall_time": time.perf_counter() - started,
            "error": None,
        }
    except (ConfigurationError, InputError, OracleError, VerificationError, IterationError, OSError) as exc:
        return {"name": name, "algorithm": row.get("algorithm"), "status": "failed", "iterations_to_eps": None,
                "final_gap": None, "sublinear_exponent": None, "linear_factor": None,
                "wall_time": time.perf_counter() - started, "error": f"{type(exc).__name__}: {exc}"}


def max_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}", WORKERS_ENV) from None
    if n < 1:
        raise ConfigurationError(f"{WORKERS_ENV} must be >= 1", WORKERS_ENV)
    return n


def run_bench(suite: dict, out_dir=None, workers: int | None = None) -> list[dict]:
    """Run every row of a suite ``{"epsilon": 1e-9, "rows": [config, ...]}``.

    Rows are independent; failures are recorded per row and the suite
    continues.
    """
    rows = suite.get("rows", [])
    if not isinstance(rows, list):
        raise ConfigurationError("suite 'rows' must be a list", "rows")
    eps = float(suite.get("epsilon", 1e-9))
    workers = max_workers() if workers is None else workers
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    if workers <= 1 or len(rows) <= 1:
        return [_bench_row(r, eps, out_dir) for r in rows]
    with ProcessPoolExecutor(max_workers=min(workers, len(rows))) as pool:
        return list(pool.map(_bench_row, rows, [eps] * len(rows), [out_dir] * len(rows)))


BENCH_COLUMNS = ("name", "algorithm", "status", "iterations_to_eps", "final_gap", "sublinear_exponent",
                 "linear_factor", "wall_time", "error")


def write_bench(rows, csv_path, json_path):
    import csv

    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for r in rows:
            w.writerow(["" if r[c] is None else r[c] for c in BENCH_COLUMNS])
    Path(json_path).write_text(json.dumps(_jsonable(rows), indent=2))


# -- CLI ------------------------------------------------------------------------------------


def _cmd_solve(args) -> int:
    cfg = RunConfig.load(args.config)
    out = dict(cfg.output or {})
    base = Path(args.config).parent
    trace_path = args.trace or out.get("trace") or "trace.csv"
    summary_path = args.summary or out.get("summary") or "summary.json"
    trace_path = Path(trace_path) if Path(trace_path).is_absolute() or args.trace else base / trace_path
    summary_path = Path(summary_path) if Path(summary_path).is_absolute() or args.summary else base / summary_path
    summary = execute(cfg, trace_path, summary_path)
    print(json.dumps({k: summary[k] for k in ("iterations", "final", "rates", "lyapunov_monotone", "wall_time")}))
    if cfg.strict and summary["n_violations"]:
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_bench(args) -> int:
    path = Path(args.suite)
    try:
        suite = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})", "<file>") from None
    for r in suite.get("rows", []):
        r.setdefault("base_dir", str(path.parent))
    out_dir = Path(args.out or suite.get("output", path.with_suffix("").name + "_bench"))
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir
    rows = run_bench(suite, out_dir)
    for r in rows:
        r.pop("base_dir", None)
    write_bench(rows, out_dir / "bench.csv", out_dir / "bench.json")
    for r in rows:
        print(f"{r['name']:<30} {r['status']:<7} iters_to_eps={r['iterations_to_eps']}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .acceptance import run_suite

    results = run_suite(args.level, printer=print)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _cmd_rates(args) -> int:
    recs = dg.read_trace_csv(args.trace)
    window = args.window if args.window is not None else len(recs)
    fit = dg.fit_rate(recs, window)
    print(json.dumps(_jsonable({"sublinear_exponent": fit.sublinear_exponent, "linear_factor": fit.linear_factor,
                                "n_points": fit.n_points, "window": window})))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apapc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="run one configuration, write trace CSV and summary JSON")
    p.add_argument("config")
    p.add_argument("--trace", help="trace CSV path (overrides config)")
    p.add_argument("--summary", help="summary JSON path (overrides config)")
    p.set_defaults(func=_cmd_solve)
    p = sub.add_parser("bench", help="run a suite of configurations")
    p.add_argument("suite")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_bench)
    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.set_defaults(func=_cmd_verify)
    p = sub.add_parser("rates", help="fit empirical rates on a trace CSV")
    p.add_argument("trace")
    p.add_argument("--window", type=int)
    p.set_defaults(func=_cmd_rates)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ConfigurationError, InputError, InsufficientDataError, OracleError) as exc:
        where = getattr(exc, "field", None)
        print(f"configuration error{f' [{where}]' if where else ''}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

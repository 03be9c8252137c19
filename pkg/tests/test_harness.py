import json
import subprocess
import sys

import numpy as np
import pytest

from apapc import acceptance, harness
from apapc.errors import ConfigurationError
from apapc.harness import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_VERIFY,
    RunConfig,
    execute,
    load_problem,
    main,
    max_workers,
    resolve,
    run_bench,
)

REGS = {"generator": {"name": "quadratic_regS", "n": 20, "m": 10, "seed": 0}}


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return path


# -- configuration and resolution ---------------------------------------------------------------


def test_minimal_config_zero_iterations():
    s = execute(RunConfig.from_dict({"problem": REGS, "max_iters": 0}))
    assert s["iterations"] == 0
    assert s["initial"]["lag_gap"] > 0
    assert s["final"] == s["initial"]
    assert s["rates"] is None


def test_regime_S_summary_monotone():
    s = execute(RunConfig.from_dict({"problem": REGS, "max_iters": 2000, "stepsize": {"rule": "corollary_S"}}))
    assert s["lyapunov_monotone"] is True
    assert s["n_violations"] == 0
    res = s["resolution"]
    assert res["rule"] == "corollary_S"
    assert res["gamma_tau_K2"] == pytest.approx(1.0)
    assert res["schedule"]["regime"] == "regS"


def test_oversized_gamma_rejected_before_run():
    p = {"generator": {"name": "strongly_convex", "n": 10, "cond": 100.0}}
    cfg = RunConfig.from_dict({"problem": p, "algorithm": "apgd", "stepsize": {"gamma": 3.0}})
    problem = load_problem(cfg.problem)
    solve_cfg, _ = resolve(cfg, problem)
    with pytest.raises(ConfigurationError, match="1/L_f"):
        harness.run("apgd", problem, solve_cfg)


def test_resolution_is_pure():
    cfg = RunConfig.from_dict({"problem": {"generator": {"name": "linconstrained", "n": 12, "m_rank": 4}},
                               "nu": 0.5})
    p = load_problem(cfg.problem)
    (c1, a1), (c2, a2) = resolve(cfg, p), resolve(cfg, p)
    assert a1 == a2
    assert (c1.gamma, c1.tau) == (c2.gamma, c2.tau)
    assert a1["rule"] == "corollary_C"
    assert a1["gamma"] == pytest.approx(1 / (2 * a1["L_f"]))
    assert a1["tau"] == pytest.approx(0.5 / (a1["gamma"] * a1["op_norm_sq"]))


@pytest.mark.parametrize("rule", ["papc", "cv"])
def test_baseline_rules(rule):
    cfg = RunConfig.from_dict({"problem": REGS, "algorithm": rule, "max_iters": 50})
    p = load_problem(cfg.problem)
    c, a = resolve(cfg, p)
    assert c.schedule is None and a["rule"] == rule
    harness.run(rule, p, c)


@pytest.mark.parametrize(
    "doc",
    [
        {"problem": REGS, "bogus": 1},
        {"algorithm": "apapc"},
        {"problem": REGS, "algorithm": "newton"},
        {"problem": REGS, "nu": 0.0},
        {"problem": REGS, "stop": {"after": 3}},
        {"problem": REGS, "stepsize": {"rule": "magic"}},
        {"problem": {"generator": {"name": "unknown"}}},
    ],
)
def test_invalid_configs(doc):
    with pytest.raises(ConfigurationError):
        execute(RunConfig.from_dict(doc))


def test_problem_from_path(tmp_path):
    p = load_problem(REGS)
    p.save(tmp_path / "inst.json")
    cfg_path = _write(tmp_path, "cfg.json", {"problem": {"path": "inst.json"}, "max_iters": 5})
    s = execute(RunConfig.load(cfg_path))
    assert s["iterations"] == 5


# -- bench -------------------------------------------------------------------------------------


def _suite(pairs, seeds=(0,)):
    rows = []
    for seed in seeds:
        for name, alg, prob in pairs:
            rows.append({"name": f"{name}-{alg}-{seed}", "algorithm": alg, "problem": {"generator": prob},
                         "seed": seed, "max_iters": 20_000, "check_level": "off"})
    return {"epsilon": 1e-9, "rows": rows}


def test_bench_apgd_beats_pgd(tmp_path):
    prob = {"name": "strongly_convex", "n": 30, "cond": 1e3}
    rows = run_bench(_suite([("sc", "apgd", prob), ("sc", "pgd", prob)]), tmp_path, workers=1)
    it = {r["algorithm"]: r["iterations_to_eps"] for r in rows}
    assert all(r["status"] == "ok" for r in rows)
    assert it["apgd"] < it["pgd"]
    assert (tmp_path / "sc-apgd-0.csv").exists()


def test_bench_apapc_beats_papc():
    prob = {"name": "quadratic_regS", "n": 30, "m": 20, "mu_g": 0.01, "cond_f": 1e4}
    rows = run_bench(_suite([("s", "apapc", prob), ("s", "papc", prob)]), workers=1)
    it = {r["algorithm"]: r["iterations_to_eps"] for r in rows}
    assert it["apapc"] < it["papc"]


def test_bench_empty_suite(tmp_path):
    assert run_bench({"rows": []}, tmp_path) == []
    harness.write_bench([], tmp_path / "b.csv", tmp_path / "b.json")
    assert (tmp_path / "b.csv").read_text().startswith("name,algorithm")
    assert json.loads((tmp_path / "b.json").read_text()) == []


def test_bench_failed_row_recorded():
    suite = {"rows": [{"name": "bad", "problem": {"generator": {"name": "nope"}}}]}
    (row,) = run_bench(suite, workers=1)
    assert row["status"] == "failed" and "ConfigurationError" in row["error"]


def test_bench_parallel_matches_serial():
    prob = {"name": "strongly_convex", "n": 10, "cond": 100.0}
    suite = _suite([("p", "apgd", prob), ("p", "pgd", prob)], seeds=(0, 1))
    serial = run_bench(suite, workers=1)
    parallel = run_bench(suite, workers=2)
    key = lambda rows: [(r["name"], r["iterations_to_eps"], r["final_gap"]) for r in rows]  # noqa: E731
    assert key(serial) == key(parallel)


def test_worker_env(monkeypatch):
    monkeypatch.setenv("APAPC_MAX_WORKERS", "3")
    assert max_workers() == 3
    monkeypatch.setenv("APAPC_MAX_WORKERS", "zero")
    with pytest.raises(ConfigurationError):
        max_workers()
    monkeypatch.setenv("APAPC_MAX_WORKERS", "0")
    with pytest.raises(ConfigurationError):
        max_workers()
    monkeypatch.delenv("APAPC_MAX_WORKERS")
    assert max_workers() >= 1


# -- CLI exit codes -----------------------------------------------------------------------------


def test_cli_solve_and_rates(tmp_path, capsys):
    cfg = _write(tmp_path, "cfg.json", {"problem": REGS, "max_iters": 300,
                                        "output": {"trace": "t.csv", "summary": "s.json"}})
    assert main(["solve", str(cfg)]) == EXIT_OK
    assert (tmp_path / "t.csv").exists()
    summary = json.loads((tmp_path / "s.json").read_text())
    assert summary["iterations"] == 300
    capsys.readouterr()
    assert main(["rates", str(tmp_path / "t.csv"), "--window", "200"]) == EXIT_OK
    fit = json.loads(capsys.readouterr().out)
    assert fit["window"] == 200 and fit["sublinear_exponent"] < 0


def test_cli_config_errors(tmp_path):
    assert main(["solve", str(_write(tmp_path, "a.json", "{not json"))]) == EXIT_CONFIG
    assert main(["solve", str(_write(tmp_path, "b.json", {"problem": REGS, "x": 1}))]) == EXIT_CONFIG
    assert main(["rates", str(_write(tmp_path, "c.csv", "t,gap\n1,2\n"))]) == EXIT_CONFIG
    assert main(["bench", str(_write(tmp_path, "d.json", "[["))]) == EXIT_CONFIG


def test_cli_rates_insufficient_data(tmp_path):
    from apapc.diagnostics import TraceRecord, write_trace_csv

    write_trace_csv([TraceRecord(t, 1.0, 0.0, 0.0) for t in range(20)], tmp_path / "z.csv")
    assert main(["rates", str(tmp_path / "z.csv")]) == EXIT_CONFIG


def test_cli_io_errors(tmp_path):
    assert main(["solve", str(tmp_path / "missing.json")]) == EXIT_IO
    assert main(["rates", str(tmp_path / "missing.csv")]) == EXIT_IO
    cfg = _write(tmp_path, "cfg.json", {"problem": REGS, "max_iters": 1})
    assert main(["solve", str(cfg), "--trace", str(tmp_path / "no" / "dir" / "t.csv")]) == EXIT_IO


def test_cli_verification_failure(monkeypatch, capsys):
    failed = acceptance.CriterionResult(99, "probe", False, {"x": 1.0}, {"x": 0.0})
    monkeypatch.setattr(acceptance, "run_suite", lambda level, printer=None: [failed])
    assert main(["verify", "--level", "fast"]) == EXIT_VERIFY


def test_cli_strict_violation(monkeypatch, tmp_path):
    from apapc.errors import VerificationError

    def boom(*args, **kwargs):
        raise VerificationError("lyapunov check failed at iteration 3", iteration=3)

    monkeypatch.setattr(harness, "run", boom)
    cfg = _write(tmp_path, "cfg.json", {"problem": REGS, "strict": True})
    assert main(["solve", str(cfg)]) == EXIT_VERIFY


def test_cli_bench_writes_tables(tmp_path, monkeypatch):
    monkeypatch.setenv("APAPC_MAX_WORKERS", "1")
    suite = _suite([("b", "apgd", {"name": "strongly_convex", "n": 8, "cond": 50.0})])
    path = _write(tmp_path, "suite.json", suite)
    assert main(["bench", str(path), "--out", str(tmp_path / "out")]) == EXIT_OK
    rows = json.loads((tmp_path / "out" / "bench.json").read_text())
    assert rows[0]["status"] == "ok"


def test_console_script_subprocess(tmp_path):
    cfg = _write(tmp_path, "cfg.json", {"problem": REGS, "max_iters": 10})
    ok = subprocess.run([sys.executable, "-m", "apapc.harness", "solve", str(cfg)], capture_output=True, text=True)
    assert ok.returncode == EXIT_OK, ok.stderr
    bad = subprocess.run([sys.executable, "-m", "apapc.harness", "solve", str(tmp_path / "nope.json")],
                         capture_output=True, text=True)
    assert bad.returncode == EXIT_IO
    assert "I/O error" in bad.stderr

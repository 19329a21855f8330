"""Command-line entry point.

Subcommands: ``validate`` (structural checks), ``verify`` (drift-condition
report), ``simulate`` (ensemble run + estimator CSVs), ``martingale``
(exceedance test), ``theorems`` (the full verification battery with a
pass/fail matrix).  Exit codes: 0 success, 1 verification failure, 2
usage/configuration error.  Every run writes ``run_config.json`` into the
output directory; a run is reproducible from that file alone.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import lyapunov, stats
from .ensemble import PathStatus
from .model import (
    ConfigError,
    Model,
    ProbeGrid,
    load_model,
    scenario,
    scenario_names,
    validate_model,
)
from .simulate import (
    IntegrandSpec,
    PathConfig,
    RngStream,
    simulate_ensemble,
    simulate_path,
)

THEOREM_ROWS = (
    "jump_suppression",
    "brownian_suppression",
    "pth_moment",
    "time_avg_moment",
    "product_moment",
    "growth_exponent",
    "lyapunov_exponent",
    "martingale_bound",
)


def _fmt(v) -> str:
    return repr(float(v))


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="TOML model configuration file")
    group.add_argument(
        "--scenario", choices=scenario_names(), help="built-in scenario name"
    )


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default="levylv_out", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)


def _resolve_model(args) -> Model:
    if getattr(args, "config", None):
        return load_model(args.config)
    return scenario(args.scenario)


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}: {exc}") from exc


def _parse_integrand(text: str) -> IntegrandSpec:
    if text == "zero":
        return IntegrandSpec("zero", 0.0)
    for prefix, kind in (("constant:", "constant"), ("norm:", "state_norm")):
        if text.startswith(prefix):
            try:
                return IntegrandSpec(kind, float(text[len(prefix):]))
            except ValueError as exc:
                raise ConfigError(f"bad integrand coefficient in {text!r}") from exc
    raise ConfigError(
        f"integrand {text!r} not understood; use zero, constant:<c>, or norm:<c>"
    )


def _write_run_config(outdir: str, command: str, args) -> None:
    payload = {"command": command}
    for key, value in sorted(vars(args).items()):
        if key in ("func",) or value is None:
            continue
        payload[key] = value
    with open(os.path.join(outdir, "run_config.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    model = _resolve_model(args)
    outdir = _ensure_outdir(args)
    report = validate_model(model)
    payload = {
        "h2_holds": report.h2_holds,
        "h1_pointwise_ok": report.h1_pointwise_ok,
        "h1_violations": [list(v) for v in report.h1_violations],
        "zero_state_ok": report.zero_state_ok,
        "lipschitz_probe": {str(k): v for k, v in report.lipschitz_probe.items()},
        "x0_positive": report.x0_positive,
        "notes": report.notes,
    }
    with open(os.path.join(outdir, "validation.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_config(outdir, "validate", args)
    print(f"h2_holds={report.h2_holds} h1_pointwise_ok={report.h1_pointwise_ok}")
    return 0


def cmd_verify(args) -> int:
    model = _resolve_model(args)
    outdir = _ensure_outdir(args)
    pvec = _parse_vector(args.pvec) if args.pvec else None
    report = lyapunov.check_conditions(model, p=args.p, pvec=pvec)
    with open(os.path.join(outdir, "conditions.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["condition", "verdict", "holds", "coef", "exponent", "residual", "note"]
        )
        for name, verdict, coef, exponent, residual, note in report.rows():
            writer.writerow(
                [name, verdict, str(verdict == "holds").lower(),
                 _fmt(coef), _fmt(exponent), _fmt(residual), note]
            )
    _write_run_config(outdir, "verify", args)
    for name, verdict, *_ in report.rows():
        print(f"{name}: {verdict}")
    return 0


def _dump_paths(model: Model, cfg: PathConfig, n_paths: int, outdir: str) -> None:
    pdir = os.path.join(outdir, "paths")
    os.makedirs(pdir, exist_ok=True)
    names = {
        PathStatus.COMPLETED: "Completed",
        PathStatus.EXPLODED: "Exploded",
        PathStatus.HIT_ZERO: "HitZero",
    }
    for idx in range(n_paths):
        path = simulate_path(model, cfg, RngStream(cfg.seed, idx))
        jump_times = {float(event.time) for event in path.jumps}
        rows: list[tuple[float, int, list, str]] = []
        for t, state in zip(path.times, path.states):
            t = float(t)
            if t in jump_times:
                continue  # the jump row below carries the same post-jump state
            rows.append((t, 1, list(state), "step"))
        for event in path.jumps:
            rows.append((float(event.time), 0, list(event.post), f"jump:{event.mark}"))
        rows.sort(key=lambda row: (row[0], row[1]))
        with open(os.path.join(pdir, f"path_{idx:05d}.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x{i+1}" for i in range(model.n)] + ["event"])
            for t, _, state, event in rows:
                writer.writerow([_fmt(t)] + [_fmt(v) for v in state] + [event])
            writer.writerow(
                [_fmt(path.terminal_time)]
                + [_fmt(v) for v in path.terminal_state]
                + [f"end:{names[path.status]}"]
            )


def cmd_simulate(args) -> int:
    model = _resolve_model(args)
    outdir = _ensure_outdir(args)
    cfg = PathConfig(
        horizon=args.horizon, dt_max=args.dt_max, seed=args.seed,
        record_stride=args.record_stride,
    )
    grid = np.linspace(0.0, args.horizon, args.grid)
    summary = simulate_ensemble(model, cfg, args.paths, grid, threads=args.threads)

    stats.write_statuses_csv(os.path.join(outdir, "statuses.csv"), summary)
    report = stats.positivity_report(summary)
    if report.exploded < summary.n_paths:
        curve = stats.estimate_moment(summary, args.p)
    else:
        # nothing survived; the status census is the result and the moment
        # estimate is undefined
        nan_col = np.full(grid.size, math.nan)
        curve = stats.MomentCurve(
            times=grid.copy(), estimates=nan_col, stderrs=nan_col.copy(),
            p=float(args.p), n_excluded=summary.n_paths,
        )
    stats.write_moments_csv(os.path.join(outdir, "moments.csv"), curve)
    lyap = stats.sample_lyapunov_exponent(summary)
    if summary.horizon > 1.0:
        growth = stats.pathwise_growth_exponent(summary)
    else:
        growth = stats.ExponentSummary(
            values=np.full(summary.n_paths, math.nan),
            max=math.nan, q99=math.nan, median=math.nan,
            n_excluded=lyap.n_excluded, n_flagged=lyap.n_flagged,
        )
    stats.write_exponents_csv(os.path.join(outdir, "exponents.csv"), growth, lyap)
    if args.dump_paths:
        _dump_paths(model, cfg, args.paths, outdir)
    _write_run_config(outdir, "simulate", args)

    print(
        f"paths={summary.n_paths} completed={report.completed} "
        f"exploded={report.exploded} hit_zero={report.hit_zero} "
        f"nonpositive_states={report.nonpositive_states}"
    )
    return 0


def cmd_martingale(args) -> int:
    model = _resolve_model(args)
    outdir = _ensure_outdir(args)
    cfg = PathConfig(horizon=args.horizon, dt_max=args.dt_max, seed=args.seed)
    result = stats.martingale_exceedance_test(
        model, cfg, args.paths, args.alpha, args.beta,
        _parse_integrand(args.g), _parse_integrand(args.h), threads=args.threads,
    )
    stats.write_martingale_csv(os.path.join(outdir, "martingale.csv"), [result])
    _write_run_config(outdir, "martingale", args)
    print(
        f"alpha={result.alpha} beta={result.beta} "
        f"exceed_freq={result.exceed_freq:.6f} bound={result.bound:.6f} "
        f"pass={result.passed}"
    )
    return 0 if result.passed else 1


# ---------------------------------------------------------------------------
# Theorem battery
# ---------------------------------------------------------------------------

def _battery_jump_suppression(seed: int, threads: int, cache: dict):
    model = scenario("jump_suppressed")
    cfg = PathConfig(horizon=5.0, dt_max=1e-3, seed=seed)
    summary = simulate_ensemble(model, cfg, 1000, np.linspace(0.0, 5.0, 11),
                                threads=threads)
    report = stats.positivity_report(summary)
    cond = lyapunov.check_conditions(model, p=0.5)
    alpha = cond.fitted_alpha
    ok = (
        report.exploded == 0
        and report.nonpositive_states == 0
        and cond.jump_dominance.holds
        and 2.9 <= alpha <= 3.1
    )
    detail = (
        f"exploded={report.exploded}/1000 nonpositive={report.nonpositive_states} "
        f"fitted_alpha={alpha:.4f}"
    )
    return ok, detail


def _battery_brownian_suppression(seed: int, threads: int, cache: dict):
    model = scenario("brownian_suppressed")
    cfg = PathConfig(horizon=5.0, dt_max=1e-3, seed=seed)
    summary = simulate_ensemble(model, cfg, 1000, np.linspace(0.0, 5.0, 11),
                                threads=threads)
    report = stats.positivity_report(summary)
    ok = report.exploded == 0 and report.nonpositive_states == 0
    detail = f"exploded={report.exploded}/1000 nonpositive={report.nonpositive_states}"
    return ok, detail


def _moment_run(seed: int, threads: int, cache: dict):
    if "moment_summary" not in cache:
        model = scenario("jump_suppressed")
        cfg = PathConfig(horizon=20.0, dt_max=1e-3, seed=seed)
        cache["moment_summary"] = simulate_ensemble(
            model, cfg, 10_000, np.linspace(0.0, 20.0, 81), threads=threads
        )
    return cache["moment_summary"]


def _battery_pth_moment(seed: int, threads: int, cache: dict):
    summary = _moment_run(seed, threads, cache)
    curve = stats.estimate_moment(summary, 0.5)
    t = curve.times
    late = float(np.max(curve.estimates[(t >= 10.0) & (t <= 20.0)]))
    mid = float(np.max(curve.estimates[(t >= 5.0) & (t <= 10.0)]))
    ok = late <= 1.5 * mid
    return ok, f"max[T/2,T]={late:.4f} vs 1.5*max[T/4,T/2]={1.5 * mid:.4f}"


def _battery_time_avg(seed: int, threads: int, cache: dict):
    summary = _moment_run(seed, threads, cache)
    curve = stats.time_avg_moment(summary, 2.5)
    v_half = float(curve.estimates[np.argmin(np.abs(curve.times - 10.0))])
    v_full = float(curve.estimates[np.argmin(np.abs(curve.times - 20.0))])
    rel = abs(v_full - v_half) / abs(v_half)
    return rel <= 0.25, f"avg(T/2)={v_half:.4f} avg(T)={v_full:.4f} rel_diff={rel:.3f}"


def _battery_product_moment(seed: int, threads: int, cache: dict):
    model = scenario("product_lyapunov")
    pvec = np.array([0.25, 0.25])
    grid_probe = ProbeGrid(radii=np.logspace(-2.0, 3.0, 64))
    c1 = -math.inf
    for x in grid_probe.points(model.n):
        w = float(np.prod(x**pvec))
        c1 = max(c1, lyapunov.eval_Lprod(model, x, pvec).total / w)
    cfg = PathConfig(horizon=5.0, dt_max=1e-3, seed=seed)
    summary = simulate_ensemble(model, cfg, 2000, np.array([0.0, 5.0]),
                                threads=threads)
    included = summary.statuses != PathStatus.EXPLODED
    vals = np.prod(summary.terminal_states[included] ** pvec, axis=1)
    mean = float(np.mean(vals))
    bound = math.exp(c1 * 5.0) * float(np.prod(model.x0**pvec))
    ok = bool(np.isfinite(mean)) and mean <= bound and int(np.count_nonzero(~included)) == 0
    return ok, f"mean_product={mean:.4f} bound=e^(C1*T)*W(x0)={bound:.4f} C1={c1:.4f}"


def _exponent_run(seed: int, threads: int, cache: dict):
    if "exponent_summary" not in cache:
        model = scenario("jump_suppressed")
        cfg = PathConfig(horizon=100.0, dt_max=1e-3, seed=seed)
        cache["exponent_summary"] = simulate_ensemble(
            model, cfg, 1000, np.array([0.0, 100.0]), threads=threads
        )
    return cache["exponent_summary"]


def _battery_growth_exponent(seed: int, threads: int, cache: dict):
    summary = _exponent_run(seed, threads, cache)
    growth = stats.pathwise_growth_exponent(summary)
    limit = 4.0 * math.e / 0.5
    ok = summary.status_counts()[PathStatus.EXPLODED] == 0 and growth.q99 <= limit
    return ok, f"q99(ln|X|/lnT)={growth.q99:.4f} limit={limit:.4f}"


def _battery_lyapunov_exponent(seed: int, threads: int, cache: dict):
    summary = _exponent_run(seed, threads, cache)
    lyap = stats.sample_lyapunov_exponent(summary)
    ok = summary.status_counts()[PathStatus.EXPLODED] == 0 and lyap.q99 <= 0.05
    return ok, f"q99(ln|X|/T)={lyap.q99:.4f} limit=0.05"


def _battery_martingale(seed: int, threads: int, cache: dict):
    from .model import ConstantJump, JumpKernel

    model = Model(
        n=1, b=[0.0], A=[[0.0]], sigma=[[0.0]],
        kernel=JumpKernel(((1.0, ConstantJump(c=[0.5])),)), x0=[1.0],
    )
    cfg = PathConfig(horizon=1.0, dt_max=1e-3, seed=seed)
    cases = []
    for alpha, beta in ((1.0, 2.0), (1.0, 3.0), (2.0, 1.0)):
        for g_spec, h_spec in (
            (IntegrandSpec("constant", 1.0), IntegrandSpec("zero")),
            (IntegrandSpec("zero"), IntegrandSpec("constant", 1.0)),
        ):
            cases.append(
                stats.martingale_exceedance_test(
                    model, cfg, 10_000, alpha, beta, g_spec, h_spec, threads=threads
                )
            )
    ok = all(case.passed for case in cases)
    worst = max(cases, key=lambda c: c.exceed_freq - c.bound)
    detail = (
        f"{sum(c.passed for c in cases)}/{len(cases)} cases pass; worst "
        f"(alpha={worst.alpha}, beta={worst.beta}): freq={worst.exceed_freq:.4f} "
        f"bound={worst.bound:.4f}"
    )
    return ok, detail


_BATTERY = {
    "jump_suppression": _battery_jump_suppression,
    "brownian_suppression": _battery_brownian_suppression,
    "pth_moment": _battery_pth_moment,
    "time_avg_moment": _battery_time_avg,
    "product_moment": _battery_product_moment,
    "growth_exponent": _battery_growth_exponent,
    "lyapunov_exponent": _battery_lyapunov_exponent,
    "martingale_bound": _battery_martingale,
}


def cmd_theorems(args) -> int:
    outdir = _ensure_outdir(args)
    rows = THEOREM_ROWS if args.only is None else (args.only,)
    cache: dict = {}
    results = []
    for name in rows:
        ok, detail = _BATTERY[name](args.seed, args.threads, cache)
        results.append((name, ok, detail))
        print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    with open(os.path.join(outdir, "theorems.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theorem", "passed", "detail"])
        for name, ok, detail in results:
            writer.writerow([name, str(ok).lower(), detail])
    _write_run_config(outdir, "theorems", args)
    return 0 if all(ok for _, ok, _ in results) else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levylv",
        description=(
            "Simulation and drift-condition verification for stochastic "
            "Lotka-Volterra dynamics with Brownian and jump noise."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="structural model checks")
    _add_model_args(p_val)
    _add_common(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_ver = sub.add_parser("verify", help="drift-condition report")
    _add_model_args(p_ver)
    _add_common(p_ver)
    p_ver.add_argument("--p", type=float, default=0.5)
    p_ver.add_argument("--pvec", help="comma-separated product exponents")
    p_ver.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="ensemble simulation + estimator CSVs")
    _add_model_args(p_sim)
    _add_common(p_sim)
    p_sim.add_argument("--paths", type=int, default=100)
    p_sim.add_argument("--horizon", type=float, default=10.0)
    p_sim.add_argument("--dt-max", dest="dt_max", type=float, default=1e-3)
    p_sim.add_argument("--p", type=float, default=0.5)
    p_sim.add_argument("--grid", type=int, default=101, help="number of grid times")
    p_sim.add_argument("--record-stride", dest="record_stride", type=int, default=1)
    p_sim.add_argument("--dump-paths", action="store_true",
                       help="write one CSV per path under <out>/paths/")
    p_sim.set_defaults(func=cmd_simulate)

    p_mart = sub.add_parser("martingale", help="exponential-martingale exceedance test")
    _add_model_args(p_mart)
    _add_common(p_mart)
    p_mart.add_argument("--paths", type=int, default=10_000)
    p_mart.add_argument("--horizon", type=float, default=1.0)
    p_mart.add_argument("--dt-max", dest="dt_max", type=float, default=1e-3)
    p_mart.add_argument("--alpha", type=float, default=1.0)
    p_mart.add_argument("--beta", type=float, default=2.0)
    p_mart.add_argument("--g", default="constant:1.0",
                        help="Brownian integrand: zero | constant:<c> | norm:<c>")
    p_mart.add_argument("--h", default="zero",
                        help="jump integrand: zero | constant:<c> | norm:<c>")
    p_mart.set_defaults(func=cmd_martingale)

    p_thm = sub.add_parser("theorems", help="run the verification battery")
    _add_common(p_thm)
    p_thm.add_argument("--only", choices=THEOREM_ROWS, help="run one battery row")
    p_thm.set_defaults(func=cmd_theorems)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Ensemble estimators and verification statistics.

Everything here is a deterministic reduction of an EnsembleSummary: moment
curves, time-averaged moments, pathwise growth and Lyapunov exponents, the
exponential-martingale exceedance test, and the positivity census.  All
reductions happen after the ensemble arrays are assembled in path order, so
results are independent of how many threads produced the ensemble.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleSummary, PathStatus
from .model import Model
from .simulate import IntegrandSpec, MartingaleSpec, PathConfig, simulate_ensemble

__all__ = [
    "MomentCurve",
    "ExponentSummary",
    "MartingaleTestResult",
    "PositivityReport",
    "estimate_moment",
    "time_avg_moment",
    "pathwise_growth_exponent",
    "sample_lyapunov_exponent",
    "martingale_exceedance_test",
    "positivity_report",
    "write_moments_csv",
    "write_exponents_csv",
    "write_martingale_csv",
    "write_statuses_csv",
]


@dataclass(frozen=True)
class MomentCurve:
    """Empirical E|X(t)|^p along the grid with normal-approximation errors.

    Exploded paths are excluded from the average; their count is reported
    and flags the estimate as biased (the excluded paths are exactly the
    large-|X| ones).
    """

    times: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    p: float
    n_excluded: int

    @property
    def bias_flagged(self) -> bool:
        return self.n_excluded > 0


def _included_norms(summary: EnsembleSummary) -> tuple[np.ndarray, int]:
    """Per-time state norms of non-exploded paths, shape (g, n_included)."""
    included = summary.statuses != PathStatus.EXPLODED
    n_inc = int(np.count_nonzero(included))
    if n_inc == 0:
        raise ValueError("every path exploded; no moment estimate is possible")
    return np.linalg.norm(summary.states[:, included, :], axis=2), n_inc


def estimate_moment(summary: EnsembleSummary, p: float) -> MomentCurve:
    """Sample mean of |X(t)|^p per grid time, with standard errors."""
    if summary.n_paths == 0 or summary.time_grid.size == 0:
        raise ValueError("ensemble has no paths or no grid times")
    p = float(p)
    if p < 0.0:
        raise ValueError("p must be non-negative")
    norms, n_inc = _included_norms(summary)
    vals = norms**p
    est = vals.mean(axis=1)
    if n_inc > 1:
        std = vals.std(axis=1, ddof=1)
        # a constant sample has exactly zero spread; rounding in the mean
        # would otherwise leave an ulp-sized residue here
        std[np.ptp(vals, axis=1) == 0.0] = 0.0
        stderr = std / math.sqrt(n_inc)
    else:
        stderr = np.zeros_like(est)
    n_excluded = summary.n_paths - n_inc
    return MomentCurve(
        times=summary.time_grid.copy(),
        estimates=est,
        stderrs=stderr,
        p=p,
        n_excluded=n_excluded,
    )


def time_avg_moment(summary: EnsembleSummary, q: float) -> MomentCurve:
    """Running time average (1/t) * integral_0^t of empirical E|X(s)|^q ds.

    Trapezoidal quadrature on the grid, so the grid should start at 0 for
    the average to cover the full window.  Grid entries at t = 0 are
    skipped in the output (the average is undefined there).
    """
    if float(q) <= 0.0:
        raise ValueError("q must be positive")
    inner = estimate_moment(summary, q)
    t = inner.times
    keep = t > 0.0
    if not np.any(keep):
        raise ValueError("time grid has no positive times")
    seg = 0.5 * (inner.estimates[1:] + inner.estimates[:-1]) * np.diff(t)
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    seg_err = 0.5 * (inner.stderrs[1:] + inner.stderrs[:-1]) * np.diff(t)
    cum_err = np.concatenate(([0.0], np.cumsum(seg_err)))
    return MomentCurve(
        times=t[keep],
        estimates=cum[keep] / t[keep],
        stderrs=cum_err[keep] / t[keep],
        p=float(q),
        n_excluded=inner.n_excluded,
    )


@dataclass(frozen=True)
class ExponentSummary:
    """Per-path terminal exponents with summary quantiles.

    ``values`` is aligned with path indices; exploded paths hold NaN and are
    excluded from the quantiles.  Zero-hit paths contribute their last
    recorded positive state and are counted in ``n_flagged``.
    """

    values: np.ndarray
    max: float
    q99: float
    median: float
    n_excluded: int
    n_flagged: int


def _terminal_exponents(summary: EnsembleSummary, denom: float) -> ExponentSummary:
    values = np.full(summary.n_paths, math.nan)
    included = summary.statuses != PathStatus.EXPLODED
    norms = summary.terminal_norms
    with np.errstate(divide="ignore"):
        values[included] = np.log(norms[included]) / denom
    finite = values[included]
    if finite.size:
        vmax = float(np.max(finite))
        q99 = float(np.percentile(finite, 99))
        median = float(np.median(finite))
    else:
        # every path exploded: per-path values are all NaN and the summary
        # quantiles are undefined
        vmax = q99 = median = math.nan
    return ExponentSummary(
        values=values,
        max=vmax,
        q99=q99,
        median=median,
        n_excluded=int(np.count_nonzero(~included)),
        n_flagged=int(np.count_nonzero(summary.statuses == PathStatus.HIT_ZERO)),
    )


def pathwise_growth_exponent(summary: EnsembleSummary) -> ExponentSummary:
    """Per-path ln|X(T)| / ln T; requires T > 1."""
    if summary.horizon <= 1.0:
        raise ValueError("growth exponents need horizon > 1")
    return _terminal_exponents(summary, math.log(summary.horizon))


def sample_lyapunov_exponent(summary: EnsembleSummary) -> ExponentSummary:
    """Per-path ln|X(T)| / T; requires T > 0."""
    if summary.horizon <= 0.0:
        raise ValueError("Lyapunov exponents need horizon > 0")
    return _terminal_exponents(summary, summary.horizon)


@dataclass(frozen=True)
class MartingaleTestResult:
    """Outcome of one exponential-martingale exceedance run.

    ``passed`` is exceed_freq <= exp(-alpha beta) + 3 binomial standard
    errors computed at the theoretical bound.
    """

    alpha: float
    beta: float
    exceed_freq: float
    bound: float
    passed: bool
    n_paths_used: int
    n_excluded: int


def martingale_exceedance_test(
    model: Model,
    cfg: PathConfig,
    n_paths: int,
    alpha: float,
    beta: float,
    g_spec: IntegrandSpec,
    h_spec: IntegrandSpec,
    threads: int = 1,
) -> MartingaleTestResult:
    """Estimate P(sup_{t<=T} S(t) > beta) and compare with exp(-alpha beta).

    S is accumulated along each simulated path (see MartingaleSpec for the
    statistic); exploded paths are excluded and counted.
    """
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    spec = MartingaleSpec(alpha=alpha, g=g_spec, h=h_spec)
    summary = simulate_ensemble(
        model, cfg, n_paths, np.empty(0), threads=threads, martingale=spec
    )
    included = summary.statuses != PathStatus.EXPLODED
    n_used = int(np.count_nonzero(included))
    if n_used == 0:
        raise ValueError("every path exploded; exceedance frequency undefined")
    sup = summary.sup_martingale[included]
    freq = float(np.count_nonzero(sup > beta)) / n_used
    bound = math.exp(-alpha * beta)
    se = math.sqrt(bound * (1.0 - bound) / n_used)
    return MartingaleTestResult(
        alpha=float(alpha),
        beta=float(beta),
        exceed_freq=freq,
        bound=bound,
        passed=freq <= bound + 3.0 * se,
        n_paths_used=n_used,
        n_excluded=summary.n_paths - n_used,
    )


@dataclass(frozen=True)
class PositivityReport:
    """Status census plus a count of non-positive recorded states.

    ``nonpositive_states`` scans the grid states and terminal states of all
    non-zero-hit paths (zero hits legitimately end at the threshold) and
    must be 0: positivity is structural in the integrator.
    """

    completed: int
    exploded: int
    hit_zero: int
    nonpositive_states: int


def positivity_report(summary: EnsembleSummary) -> PositivityReport:
    counts = summary.status_counts()
    scan = summary.statuses != PathStatus.HIT_ZERO
    bad = 0
    if summary.time_grid.size:
        grid_vals = summary.states[:, scan, :]
        bad += int(np.count_nonzero(np.any(grid_vals <= 0.0, axis=2)))
    bad += int(np.count_nonzero(np.any(summary.terminal_states[scan] <= 0.0, axis=1)))
    return PositivityReport(
        completed=counts[PathStatus.COMPLETED],
        exploded=counts[PathStatus.EXPLODED],
        hit_zero=counts[PathStatus.HIT_ZERO],
        nonpositive_states=bad,
    )


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------
# Floats are written with repr(float(v)): the shortest string that round-trips
# to the same double, making file content a pure function of the values.


def _fmt(v) -> str:
    return repr(float(v))


def write_moments_csv(path, curve: MomentCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "estimate", "stderr", "p"])
        for t, est, err in zip(curve.times, curve.estimates, curve.stderrs):
            writer.writerow([_fmt(t), _fmt(est), _fmt(err), _fmt(curve.p)])


def write_exponents_csv(path, growth: ExponentSummary, lyap: ExponentSummary) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "growth_exp", "lyap_exp"])
        for i, (g, l) in enumerate(zip(growth.values, lyap.values)):
            writer.writerow([i, _fmt(g), _fmt(l)])


def write_martingale_csv(path, results: list[MartingaleTestResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "beta", "exceed_freq", "bound", "pass"])
        for r in results:
            writer.writerow(
                [_fmt(r.alpha), _fmt(r.beta), _fmt(r.exceed_freq), _fmt(r.bound),
                 str(r.passed).lower()]
            )


def write_statuses_csv(path, summary: EnsembleSummary) -> None:
    names = {
        PathStatus.COMPLETED: "Completed",
        PathStatus.EXPLODED: "Exploded",
        PathStatus.HIT_ZERO: "HitZero",
    }
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "status", "status_time", "status_component", "jumps"])
        for i in range(summary.n_paths):
            writer.writerow(
                [
                    i,
                    names[PathStatus(summary.statuses[i])],
                    _fmt(summary.status_times[i]),
                    int(summary.status_components[i]),
                    int(summary.jump_counts[i]),
                ]
            )

"""Ensemble statistics: moment curves, exponents, exceedance tests, CSV output."""

import csv
import math

import numpy as np
import pytest

from levylv import (
    EnsembleSummary,
    IntegrandSpec,
    Model,
    PathConfig,
    PathStatus,
    estimate_moment,
    martingale_exceedance_test,
    pathwise_growth_exponent,
    positivity_report,
    sample_lyapunov_exponent,
    scenario,
    simulate_ensemble,
    time_avg_moment,
    write_exponents_csv,
    write_martingale_csv,
    write_moments_csv,
    write_statuses_csv,
)

CONSTANT_MODEL = Model(n=1, b=[0.0], A=[[0.0]], sigma=[[0.0]], x0=[2.0])


def make_summary(times, norms, statuses=None, horizon=None, terminal=None):
    """Hand-built single-species summary: norms has shape (g, n_paths)."""
    times = np.asarray(times, dtype=np.float64)
    norms = np.asarray(norms, dtype=np.float64)
    g, n_paths = norms.shape
    if statuses is None:
        statuses = np.full(n_paths, PathStatus.COMPLETED, dtype=np.int64)
    else:
        statuses = np.asarray(statuses, dtype=np.int64)
    if terminal is None:
        terminal = norms[-1] if g else np.ones(n_paths)
    if horizon is None:
        horizon = float(times[-1]) if times.size else 1.0
    return EnsembleSummary(
        time_grid=times,
        states=norms[:, :, None],
        statuses=statuses,
        status_times=np.full(n_paths, math.nan),
        status_components=np.full(n_paths, -1, dtype=np.int64),
        terminal_states=np.asarray(terminal, dtype=np.float64)[:, None],
        terminal_times=np.full(n_paths, horizon),
        jump_counts=np.zeros(n_paths, dtype=np.int64),
        horizon=horizon,
        seed=0,
    )


@pytest.fixture(scope="module")
def constant_summary():
    grid = np.linspace(0.0, 2.0, 5)
    return simulate_ensemble(CONSTANT_MODEL, PathConfig(horizon=2.0, seed=0), 50, grid)


# ---------------------------------------------------------------------------
# Moment curves
# ---------------------------------------------------------------------------

class TestEstimateMoment:
    def test_constant_ensemble_exact_value_zero_stderr(self, constant_summary):
        curve = estimate_moment(constant_summary, 0.5)
        np.testing.assert_allclose(curve.estimates, np.full(5, 2.0**0.5),
                                   rtol=1e-14)
        np.testing.assert_array_equal(curve.stderrs, np.zeros(5))
        assert curve.n_excluded == 0
        assert not curve.bias_flagged

    def test_p_zero_gives_ones(self, constant_summary):
        curve = estimate_moment(constant_summary, 0.0)
        np.testing.assert_array_equal(curve.estimates, np.ones(5))

    def test_negative_p_rejected(self, constant_summary):
        with pytest.raises(ValueError):
            estimate_moment(constant_summary, -0.5)

    def test_exploded_paths_excluded_and_flagged(self):
        norms = np.array([[1.0, 5.0, 3.0], [2.0, 5.0, 4.0]])
        statuses = [PathStatus.COMPLETED, PathStatus.EXPLODED, PathStatus.COMPLETED]
        curve = estimate_moment(make_summary([0.0, 1.0], norms, statuses), 1.0)
        np.testing.assert_allclose(curve.estimates, [2.0, 3.0])
        assert curve.n_excluded == 1
        assert curve.bias_flagged

    def test_all_exploded_raises(self):
        statuses = [PathStatus.EXPLODED, PathStatus.EXPLODED]
        summary = make_summary([0.0, 1.0], np.ones((2, 2)), statuses)
        with pytest.raises(ValueError, match="exploded"):
            estimate_moment(summary, 1.0)

    def test_empty_grid_rejected(self):
        summary = make_summary(np.empty(0), np.empty((0, 3)))
        with pytest.raises(ValueError):
            estimate_moment(summary, 1.0)

    def test_stderr_matches_manual_formula(self):
        norms = np.array([[1.0, 2.0, 3.0, 4.0]])
        curve = estimate_moment(make_summary([1.0], norms), 2.0)
        vals = norms[0] ** 2
        assert curve.estimates[0] == vals.mean()
        assert math.isclose(
            curve.stderrs[0], vals.std(ddof=1) / 2.0, rel_tol=1e-15
        )


class TestTimeAvgMoment:
    def test_constant_ensemble_average_is_constant(self, constant_summary):
        curve = time_avg_moment(constant_summary, 2.5)
        np.testing.assert_allclose(curve.estimates, np.full(4, 2.0**2.5), rtol=1e-12)
        assert curve.times[0] > 0.0  # t = 0 dropped

    def test_linear_norm_averages_to_half_t(self):
        times = np.linspace(0.0, 2.0, 21)
        norms = np.tile(times[:, None], (1, 3))
        curve = time_avg_moment(make_summary(times, norms), 1.0)
        # (1/t) * integral of s ds = t/2, and trapezoid is exact on linear
        np.testing.assert_allclose(curve.estimates, curve.times / 2.0, rtol=1e-12)
        assert math.isclose(curve.estimates[-1], 1.0, rel_tol=1e-12)

    def test_nonpositive_q_rejected(self, constant_summary):
        with pytest.raises(ValueError):
            time_avg_moment(constant_summary, 0.0)

    def test_needs_positive_times(self):
        summary = make_summary([0.0], np.ones((1, 2)))
        with pytest.raises(ValueError, match="positive"):
            time_avg_moment(summary, 1.0)


# ---------------------------------------------------------------------------
# Terminal exponents
# ---------------------------------------------------------------------------

class TestExponents:
    def test_constant_unit_paths_have_zero_exponents(self):
        summary = make_summary([0.0, 10.0], np.ones((2, 4)), horizon=10.0)
        growth = pathwise_growth_exponent(summary)
        lyap = sample_lyapunov_exponent(summary)
        np.testing.assert_array_equal(growth.values, np.zeros(4))
        np.testing.assert_array_equal(lyap.values, np.zeros(4))
        assert growth.max == growth.q99 == growth.median == 0.0

    def test_exponential_decay_oracle(self):
        # X(T) = e^{-T} at T = e: lyapunov exponent -1, growth exponent -e
        T = math.e
        terminal = np.full(3, math.exp(-T))
        summary = make_summary([0.0, T], np.ones((2, 3)), terminal=terminal)
        assert math.isclose(sample_lyapunov_exponent(summary).median, -1.0,
                            rel_tol=1e-12)
        assert math.isclose(pathwise_growth_exponent(summary).median, -T,
                            rel_tol=1e-12)

    def test_polynomial_growth_oracle(self):
        # X(T) = T^2 gives growth exponent exactly 2 for any T > 1
        summary = make_summary([0.0, 10.0], np.ones((2, 2)),
                               terminal=np.full(2, 100.0))
        growth = pathwise_growth_exponent(summary)
        np.testing.assert_allclose(growth.values, [2.0, 2.0], rtol=1e-12)

    def test_lyapunov_equals_growth_times_logT_over_T(self):
        rng = np.random.default_rng(1)
        terminal = rng.uniform(0.5, 5.0, size=8)
        summary = make_summary([0.0, 7.0], np.ones((2, 8)), terminal=terminal)
        growth = pathwise_growth_exponent(summary).values
        lyap = sample_lyapunov_exponent(summary).values
        np.testing.assert_allclose(lyap, growth * math.log(7.0) / 7.0, rtol=1e-12)

    def test_quantiles_match_numpy(self):
        terminal = np.exp([1.0, 2.0, 3.0])  # lyapunov exponents 1, 2, 3 at T=1
        summary = make_summary([0.0, 1.0], np.ones((2, 3)), terminal=terminal)
        lyap = sample_lyapunov_exponent(summary)
        assert lyap.max == 3.0
        assert lyap.median == 2.0
        assert math.isclose(lyap.q99, np.percentile([1.0, 2.0, 3.0], 99))

    def test_exploded_paths_are_nan_and_excluded(self):
        statuses = [PathStatus.COMPLETED, PathStatus.EXPLODED, PathStatus.HIT_ZERO]
        terminal = np.array([math.e**2, 1e12, 1e-12])
        summary = make_summary([0.0, 2.0], np.ones((2, 3)), statuses,
                               terminal=terminal)
        lyap = sample_lyapunov_exponent(summary)
        assert math.isnan(lyap.values[1])
        assert lyap.n_excluded == 1
        assert lyap.n_flagged == 1
        assert lyap.max == 1.0  # the huge exploded terminal does not leak in

    def test_growth_needs_horizon_above_one(self):
        summary = make_summary([0.0, 1.0], np.ones((2, 2)))
        with pytest.raises(ValueError, match="horizon"):
            pathwise_growth_exponent(summary)


# ---------------------------------------------------------------------------
# Martingale exceedance
# ---------------------------------------------------------------------------

class TestMartingaleExceedance:
    def test_zero_integrands_never_exceed(self):
        result = martingale_exceedance_test(
            CONSTANT_MODEL, PathConfig(horizon=1.0, seed=0), 200,
            alpha=1.0, beta=1.0,
            g_spec=IntegrandSpec("zero"), h_spec=IntegrandSpec("zero"),
        )
        assert result.exceed_freq == 0.0
        assert result.passed
        assert result.n_paths_used == 200
        assert result.n_excluded == 0
        assert math.isclose(result.bound, math.exp(-1.0))

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(ValueError):
            martingale_exceedance_test(
                CONSTANT_MODEL, PathConfig(horizon=1.0, seed=0), 10,
                alpha=1.0, beta=0.0,
                g_spec=IntegrandSpec("zero"), h_spec=IntegrandSpec("zero"),
            )


# ---------------------------------------------------------------------------
# Positivity census
# ---------------------------------------------------------------------------

class TestPositivityReport:
    def test_logistic_all_complete(self):
        grid = np.linspace(0.0, 2.0, 9)
        summary = simulate_ensemble(
            scenario("logistic1d"), PathConfig(horizon=2.0, seed=0), 100, grid
        )
        report = positivity_report(summary)
        assert report.completed == 100
        assert report.exploded == 0
        assert report.hit_zero == 0
        assert report.nonpositive_states == 0

    def test_blowup_all_explode(self):
        summary = simulate_ensemble(
            scenario("cooperative_blowup"), PathConfig(horizon=2.0, seed=0), 10,
            np.empty(0),
        )
        report = positivity_report(summary)
        assert report.exploded == 10
        assert report.completed == 0
        assert report.nonpositive_states == 0


# ---------------------------------------------------------------------------
# CSV writers
# ---------------------------------------------------------------------------

def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestCsvWriters:
    def test_moments_roundtrip(self, tmp_path, constant_summary):
        curve = estimate_moment(constant_summary, 0.5)
        out = tmp_path / "moments.csv"
        write_moments_csv(out, curve)
        rows = read_rows(out)
        assert rows[0] == ["t", "estimate", "stderr", "p"]
        assert len(rows) == 6
        # repr-format floats round-trip exactly
        assert float(rows[1][1]) == curve.estimates[0]
        assert rows[1][3] == "0.5"

    def test_exponents_layout(self, tmp_path):
        summary = make_summary([0.0, 10.0], np.ones((2, 3)), horizon=10.0)
        growth = pathwise_growth_exponent(summary)
        lyap = sample_lyapunov_exponent(summary)
        out = tmp_path / "exponents.csv"
        write_exponents_csv(out, growth, lyap)
        rows = read_rows(out)
        assert rows[0] == ["path", "growth_exp", "lyap_exp"]
        assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
        assert all(r[1] == "0.0" and r[2] == "0.0" for r in rows[1:])

    def test_martingale_pass_column_is_lowercase(self, tmp_path):
        result = martingale_exceedance_test(
            CONSTANT_MODEL, PathConfig(horizon=1.0, seed=0), 50,
            alpha=2.0, beta=1.0,
            g_spec=IntegrandSpec("zero"), h_spec=IntegrandSpec("zero"),
        )
        out = tmp_path / "martingale.csv"
        write_martingale_csv(out, [result])
        rows = read_rows(out)
        assert rows[0] == ["alpha", "beta", "exceed_freq", "bound", "pass"]
        assert rows[1][4] == "true"
        assert float(rows[1][3]) == math.exp(-2.0)

    def test_statuses_names_and_counts(self, tmp_path):
        summary = simulate_ensemble(
            scenario("cooperative_blowup"), PathConfig(horizon=2.0, seed=0), 3,
            np.empty(0),
        )
        out = tmp_path / "statuses.csv"
        write_statuses_csv(out, summary)
        rows = read_rows(out)
        assert rows[0] == ["path", "status", "status_time", "status_component",
                           "jumps"]
        assert all(r[1] == "Exploded" for r in rows[1:])
        assert all(float(r[2]) > 0.0 for r in rows[1:])

    def test_writers_are_deterministic(self, tmp_path, constant_summary):
        curve = estimate_moment(constant_summary, 0.5)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_moments_csv(a, curve)
        write_moments_csv(b, curve)
        assert a.read_bytes() == b.read_bytes()

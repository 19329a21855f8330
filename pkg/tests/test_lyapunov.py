"""Generator-evaluation oracles and drift-condition fitting."""

import math

import numpy as np
import pytest

from levylv import (
    ConstantJump,
    JumpKernel,
    KernelAdmissibilityError,
    Model,
    PolynomialJump,
    ProbeGrid,
    check_conditions,
    eval_Ji,
    eval_Lprod,
    eval_LU,
    eval_LV,
    eval_Q,
    fit_leading_order,
    jump_moment_integrals,
    scenario,
)

LOGISTIC = scenario("logistic1d")
ONE_JUMP = Model(
    n=1, b=[1.0], A=[[-1.0]], sigma=[[0.0]],
    kernel=JumpKernel(((1.0, ConstantJump(c=[1.0])),)), x0=[1.0],
)


def total_close(value, expected, rtol=1e-12):
    assert math.isclose(value.total, expected, rel_tol=rtol, abs_tol=1e-12)


class TestEvalLV:
    def test_zero_at_carrying_balance(self):
        total_close(eval_LV(LOGISTIC, [1.0], 0.5), 0.0)

    def test_drift_oracle_at_x4(self):
        total_close(eval_LV(LOGISTIC, [4.0], 0.5), -3.0)

    def test_jump_oracle_constant_mark(self):
        # one mark with h = 1, rate 1, at x = 1: jump part is 2^0.5 - 1.5
        v = eval_LV(ONE_JUMP, [1.0], 0.5)
        total_close(v, math.sqrt(2.0) - 1.5)
        assert v.parts["continuous"] == 0.0

    def test_total_is_sum_of_parts(self):
        for x in ([0.3], [1.0], [17.0]):
            v = eval_LV(ONE_JUMP, x, 0.7)
            assert v.total == v.parts["continuous"] + v.parts["jump"]

    def test_rejects_nonpositive_state(self):
        with pytest.raises(ValueError, match="positive"):
            eval_LV(LOGISTIC, [0.0], 0.5)

    def test_rejects_p_outside_unit_interval(self):
        for p in (0.0, 1.0, -0.5, 1.5):
            with pytest.raises(ValueError, match="p must lie"):
                eval_LV(LOGISTIC, [1.0], p)

    def test_rejects_inadmissible_kernel(self):
        bad = Model(
            n=1, b=[0.0], A=[[0.0]], sigma=[[0.0]],
            kernel=JumpKernel(((1.0, ConstantJump(c=[-1.0])),)),
        )
        with pytest.raises(KernelAdmissibilityError):
            eval_LV(bad, [1.0], 0.5)


class TestEvalLU:
    def test_zero_at_unit_state(self):
        total_close(eval_LU(LOGISTIC, [1.0], 0.5), 0.0)

    def test_drift_oracle_at_x4(self):
        # 0.5 * [1*(2-1) - (2-1)*(-4)] = 2.5
        total_close(eval_LU(LOGISTIC, [4.0], 0.5), 2.5)

    def test_jump_parts_vanish_without_jumps(self):
        v = eval_LU(LOGISTIC, [4.0], 0.5)
        assert v.parts["jump_power"] == 0.0
        assert v.parts["jump_log"] == 0.0

    def test_jump_log_part_is_nonnegative(self):
        v = eval_LU(ONE_JUMP, [2.0], 0.5)
        assert v.parts["jump_log"] > 0.0
        assert v.parts["jump_power"] < 0.0


class TestEvalLprod:
    def test_single_species_matches_power_sum_generator(self):
        for x in ([0.5], [1.0], [3.0]):
            lv = eval_LV(ONE_JUMP, x, 0.5).total
            lprod = eval_Lprod(ONE_JUMP, x, [0.5]).total
            assert math.isclose(lv, lprod, rel_tol=1e-12, abs_tol=1e-14)

    def test_competitive_balance_point(self):
        m = Model(n=2, b=[1.0, 1.0], A=-np.eye(2), sigma=np.zeros((2, 2)))
        total_close(eval_Lprod(m, [1.0, 1.0], [0.25, 0.25]), 0.0)

    def test_jump_part_zero_for_empty_kernel(self):
        m = scenario("brownian_suppressed", overrides={"kernel": JumpKernel(())})
        assert eval_Lprod(m, [1.0, 2.0], [0.3, 0.3]).parts["jump"] == 0.0

    def test_diffusion_part_nonpositive(self):
        m = scenario("brownian_suppressed")
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.uniform(0.1, 10.0, size=2)
            assert eval_Lprod(m, x, [0.25, 0.25]).parts["diffusion"] <= 0.0

    def test_rejects_pvec_summing_to_one(self):
        m = scenario("brownian_suppressed")
        with pytest.raises(ValueError, match="less than 1"):
            eval_Lprod(m, [1.0, 1.0], [0.5, 0.5])


class TestEvalJi:
    def test_zero_kernel_gives_zero(self):
        assert eval_Ji(LOGISTIC, [2.0], 0.5, 0) == 0.0

    def test_constant_mark_oracle(self):
        assert math.isclose(
            eval_Ji(ONE_JUMP, [1.0], 0.5, 0), math.sqrt(2.0) - 1.5, rel_tol=1e-12
        )

    def test_out_of_range_index(self):
        with pytest.raises(IndexError):
            eval_Ji(LOGISTIC, [1.0], 0.5, 1)


class TestEvalQ:
    def test_identity_for_zero_jump(self):
        m = Model(
            n=2, b=[0.0, 0.0], A=np.zeros((2, 2)), sigma=np.zeros((2, 2)),
            kernel=JumpKernel(((1.0, ConstantJump(c=[0.0, 0.0])),)),
        )
        assert eval_Q(m, [1.0, 2.0], 0, 0.5) == 1.0

    def test_single_species_collapses_to_power(self):
        for x in (0.2, 1.0, 9.0):
            q = eval_Q(ONE_JUMP, [x], 0, 0.5)
            assert math.isclose(q, 2.0**0.5, rel_tol=1e-12)

    def test_common_jump_factor(self):
        m = Model(
            n=2, b=[0.0, 0.0], A=np.zeros((2, 2)), sigma=np.zeros((2, 2)),
            kernel=JumpKernel(((1.0, ConstantJump(c=[0.3, 0.3])),)),
        )
        q = eval_Q(m, [0.7, 2.0], 0, 0.5)
        assert math.isclose(q, 1.3**0.5, rel_tol=1e-12)


class TestJumpMomentIntegrals:
    def test_gap_oracle_for_unit_jump(self):
        jm = jump_moment_integrals(ONE_JUMP, [1.0], p=0.5)
        assert math.isclose(jm.gap[0], 1.0 - math.log(2.0), rel_tol=1e-12)
        assert math.isclose(jm.lin[0], 1.0, rel_tol=1e-12)
        assert math.isclose(jm.log1p_sum[0], math.log(2.0), rel_tol=1e-12)

    def test_zero_jump_aggregates(self):
        total_rate = 3.0
        m = Model(
            n=2, b=[0.0, 0.0], A=np.zeros((2, 2)), sigma=np.zeros((2, 2)),
            kernel=JumpKernel(((total_rate, ConstantJump(c=[0.0, 0.0])),)),
        )
        jm = jump_moment_integrals(m, [1.0, 2.0], p=0.5)
        assert math.isclose(jm.ratio_moment, total_rate, rel_tol=1e-12)
        assert math.isclose(jm.product_balance, total_rate * (1 - m.n), rel_tol=1e-12)
        assert math.isclose(jm.product_balance_shifted, 0.0, abs_tol=1e-12)

    def test_default_pvec_splits_half(self):
        jm = jump_moment_integrals(ONE_JUMP, [1.0])
        np.testing.assert_array_equal(jm.pvec_used, [0.5])


class TestFitLeadingOrder:
    RADII = np.logspace(1.0, 3.0, 25)
    DIRS = ProbeGrid().directions(2)

    def test_recovers_negative_quartic(self):
        fit = fit_leading_order(
            lambda x: -3.0 * np.linalg.norm(x) ** 4 + np.linalg.norm(x) ** 2,
            self.DIRS, self.RADII,
        )
        assert abs(fit.coef - (-3.0)) <= 0.02 * 3.0
        assert abs(fit.exponent - 4.0) <= 0.02 * 4.0
        assert fit.residual < 0.05

    def test_recovers_plain_square(self):
        fit = fit_leading_order(
            lambda x: float(np.dot(x, x)), self.DIRS, self.RADII
        )
        assert abs(fit.coef - 1.0) <= 0.02
        assert abs(fit.exponent - 2.0) <= 0.02 * 2.0

    def test_zero_field_degenerates(self):
        fit = fit_leading_order(lambda x: 0.0, self.DIRS, self.RADII)
        assert fit.coef == 0.0
        assert math.isnan(fit.exponent)

    def test_sign_change_reports_infinite_residual(self):
        fit = fit_leading_order(
            lambda x: float(np.linalg.norm(x) - 500.0), self.DIRS, self.RADII
        )
        assert math.isinf(fit.residual)
        assert math.isnan(fit.exponent)

    def test_rejects_narrow_radius_window(self):
        with pytest.raises(ValueError, match="decades"):
            fit_leading_order(lambda x: 1.0, self.DIRS, np.linspace(1.0, 5.0, 10))


class TestCheckConditions:
    def test_jump_suppressed_dominance_holds(self):
        report = check_conditions(scenario("jump_suppressed"), p=0.5)
        assert report.jump_dominance.holds
        assert report.jump_dominance.coef < 0.0
        assert 2.9 <= report.fitted_alpha <= 3.1
        assert report.log_gap.holds
        assert report.ratio_moment.holds
        assert report.product_balance.holds

    def test_no_jump_model_fails_dominance(self):
        report = check_conditions(LOGISTIC, p=0.5)
        assert report.jump_dominance.verdict == "fails"
        assert "no jumps" in report.jump_dominance.note
        assert report.log_gap.verdict == "indeterminate"
        assert report.ratio_moment.verdict == "indeterminate"
        assert report.product_balance.verdict == "indeterminate"

    def test_bounded_jump_report_structure(self):
        # Constant-size jumps cannot dominate superlinear drift; the report
        # still carries all four verdicts (the Brownian route is judged by
        # validate_model, not here).
        report = check_conditions(scenario("brownian_suppressed"), p=0.5)
        rows = report.rows()
        assert [row[0] for row in rows] == [
            "jump_dominance", "log_gap", "ratio_moment", "product_balance"
        ]
        assert not report.jump_dominance.holds
        assert all(row[1] in {"holds", "fails", "indeterminate"} for row in rows)

    def test_single_species_product_balance_is_identically_zero(self):
        report = check_conditions(scenario("jump_suppressed"), p=0.5)
        assert report.product_balance.verdict == "holds"
        assert report.product_balance.coef == 0.0
        assert "cancel" in report.product_balance.note

    def test_report_records_probe_settings(self):
        report = check_conditions(scenario("jump_suppressed"), p=0.4)
        assert report.p_used == 0.4
        assert report.directions_probed == 1  # n = 1 uses the single axis ray

    def test_rejects_bad_p(self):
        with pytest.raises(ValueError, match="p must lie"):
            check_conditions(LOGISTIC, p=1.2)


class TestBrownianDriftBound:
    def test_continuous_part_decays_quadratically_plus_p(self):
        # With a positive-diagonal sigma the Brownian curvature term drives
        # the power-sum generator to -infinity like |x|^(2+p).
        m = scenario("brownian_suppressed")
        p = 0.5
        fit = fit_leading_order(
            lambda x: eval_LV(m, x, p).parts["continuous"],
            ProbeGrid().directions(2),
            np.logspace(1.0, 3.0, 25),
        )
        assert fit.coef < 0.0
        assert abs(fit.exponent - (2.0 + p)) <= 0.03 * (2.0 + p)

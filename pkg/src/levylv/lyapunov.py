"""Exact Ito-generator evaluation and drift-condition verification.

Three Lyapunov functionals are supported on the positive orthant:

  power sum      V(x)  = sum_i x_i^p                       (0 < p < 1)
  power-log      U(x)  = sum_i (x_i^p - 1 - p ln x_i)
  power product  W(x)  = prod_i x_i^{p_i}                   (sum p_i < 1)

``eval_LV``/``eval_LU``/``eval_Lprod`` return the generator applied to these
functionals at a point, split into named parts.  The remaining functions
quantify the jump field: per-species jump moments, the post-jump mass ratio,
and least-squares fits of the leading power-law order of any scalar field,
used by ``check_conditions`` to test the drift hypotheses under which the
moment and stability theorems apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import JumpKernel, KernelAdmissibilityError, Model, ProbeGrid

__all__ = [
    "GeneratorValue",
    "JumpMoments",
    "LeadingOrderFit",
    "ConditionFit",
    "ConditionReport",
    "eval_LV",
    "eval_LU",
    "eval_Lprod",
    "eval_Ji",
    "eval_Q",
    "jump_moment_integrals",
    "fit_leading_order",
    "check_conditions",
]

# Fitted leading coefficients smaller than this are treated as numerically
# indistinguishable from zero when judging drift conditions.
COEF_RESOLUTION = 1e-12


@dataclass(frozen=True)
class GeneratorValue:
    """Generator applied to a Lyapunov functional at one state.

    ``total`` always equals the sum of ``parts`` values (same additions, same
    order), so the breakdown can be consumed without re-deriving the total.
    """

    total: float
    parts: dict[str, float]


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return p


def _check_state(model: Model, x, positive: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise ValueError(f"x must have shape ({model.n},), got {x.shape}")
    if positive and not np.all(x > 0.0):
        raise ValueError("x must have strictly positive components")
    return x


def _admissible_h(kernel: JumpKernel, x: np.ndarray, mark: int) -> np.ndarray:
    h = kernel.h(x, mark)
    if np.any(1.0 + h <= 0.0):
        raise KernelAdmissibilityError(
            f"mark {mark} drives 1 + h to {float(np.min(1.0 + h))} <= 0 at |x| = "
            f"{float(np.linalg.norm(x)):.6g}"
        )
    return h


def _phi(h: np.ndarray, p: float) -> np.ndarray:
    """(1+h)^p - 1 - p*h, stable for |h| down to the rounding floor.

    Written via expm1/log1p so the concavity gap survives cancellation; the
    result is <= 0 for every admissible h and every p in (0, 1).
    """
    return np.expm1(p * np.log1p(h)) - p * h


def _gap(h: np.ndarray) -> np.ndarray:
    """h - ln(1+h) >= 0, stable near h = 0."""
    return h - np.log1p(h)


def eval_LV(model: Model, x, p: float) -> GeneratorValue:
    """Generator of the power sum V(x) = sum_i x_i^p.

    parts: ``continuous`` collects drift and Brownian curvature; ``jump``
    collects the compensated jump expectation, which is never positive.
    """
    p = _check_p(p)
    x = _check_state(model, x)
    xp = x**p
    ax = model.A @ x
    sx = model.sigma @ x
    continuous = p * float(np.sum((model.b + ax - 0.5 * (1.0 - p) * sx * sx) * xp))
    jump = 0.0
    for k, (rate, _) in enumerate(model.kernel.marks):
        h = _admissible_h(model.kernel, x, k)
        jump += rate * float(np.sum(_phi(h, p) * xp))
    return GeneratorValue(total=continuous + jump, parts={"continuous": continuous, "jump": jump})


def eval_LU(model: Model, x, p: float) -> GeneratorValue:
    """Generator bound for the power-log functional U(x) = sum_i (x_i^p - 1 - p ln x_i).

    parts: ``continuous`` is the drift/diffusion expression; ``jump_power``
    matches the jump part of the power-sum generator; ``jump_log`` carries
    the compensator gap p * sum_k rate_k * (h_i - ln(1+h_i)).
    """
    p = _check_p(p)
    x = _check_state(model, x)
    xp = x**p
    ax = model.A @ x
    sx = model.sigma @ x
    continuous = p * float(
        np.sum(model.b * (xp - 1.0) - (xp - 1.0) * ax + (0.5 * (p - 1.0) * xp + 1.0) * sx * sx)
    )
    jump_power = 0.0
    jump_log = 0.0
    for k, (rate, _) in enumerate(model.kernel.marks):
        h = _admissible_h(model.kernel, x, k)
        jump_power += rate * float(np.sum(_phi(h, p) * xp))
        jump_log += p * rate * float(np.sum(_gap(h)))
    return GeneratorValue(
        total=continuous + jump_power + jump_log,
        parts={"continuous": continuous, "jump_power": jump_power, "jump_log": jump_log},
    )


def eval_Lprod(model: Model, x, pvec) -> GeneratorValue:
    """Generator of the power product W(x) = prod_i x_i^{p_i}.

    Requires every p_i > 0 and sum_i p_i < 1.  parts: ``drift`` is
    W * p.(b + Ax); ``diffusion`` is -W/2 * [sum p_i y_i^2 - (p.y)^2] with
    y = sigma x (non-positive because sum p_i < 1); ``jump`` is
    W * sum_k rate_k [prod_i (1+h_i)^{p_i} - 1 - p.h].
    """
    x = _check_state(model, x)
    pv = np.asarray(pvec, dtype=np.float64)
    if pv.shape != (model.n,):
        raise ValueError(f"pvec must have shape ({model.n},), got {pv.shape}")
    if np.any(pv <= 0.0):
        raise ValueError("pvec entries must be positive")
    if float(np.sum(pv)) >= 1.0:
        raise ValueError("sum of pvec must be strictly less than 1")

    w = float(np.prod(x**pv))
    ax = model.A @ x
    y = model.sigma @ x
    drift = w * float(np.dot(pv, model.b + ax))
    quad = float(np.dot(pv, y * y)) - float(np.dot(pv, y)) ** 2
    diffusion = -0.5 * w * quad
    jump = 0.0
    for k, (rate, _) in enumerate(model.kernel.marks):
        h = _admissible_h(model.kernel, x, k)
        prod_term = math.exp(float(np.dot(pv, np.log1p(h))))
        jump += rate * (prod_term - 1.0 - float(np.dot(pv, h)))
    jump *= w
    return GeneratorValue(
        total=drift + diffusion + jump,
        parts={"drift": drift, "diffusion": diffusion, "jump": jump},
    )


def eval_Ji(model: Model, x, p: float, i: int) -> float:
    """Compensated jump moment of species i: sum_k rate_k [(1+h_i)^p - 1 - p h_i].

    Non-positive for every admissible kernel; its decay order in |x| is what
    the jump-dominance condition constrains.
    """
    p = _check_p(p)
    x = _check_state(model, x, positive=False)
    if not 0 <= i < model.n:
        raise IndexError(f"species index {i} out of range for n = {model.n}")
    total = 0.0
    for k, (rate, _) in enumerate(model.kernel.marks):
        h = model.kernel.h(x, k)
        hi = float(h[i])
        if 1.0 + hi <= 0.0:
            raise KernelAdmissibilityError(
                f"mark {k} drives 1 + h_{i} to {1.0 + hi} <= 0"
            )
        total += rate * (math.expm1(p * math.log1p(hi)) - p * hi)
    return total


def eval_Q(model: Model, x, mark: int, p: float) -> float:
    """Post-jump to pre-jump ratio of the power sum for one mark.

    Q = sum_i (1+h_i)^p x_i^p / sum_i x_i^p.  Strictly positive whenever the
    kernel is admissible at x; equals (1+c)^p when all h_i share the value c.
    """
    p = _check_p(p)
    x = _check_state(model, x)
    if not 0 <= mark < model.kernel.n_marks:
        raise IndexError(f"mark index {mark} out of range")
    h = _admissible_h(model.kernel, x, mark)
    xp = x**p
    return float(np.sum(np.exp(p * np.log1p(h)) * xp) / np.sum(xp))


@dataclass(frozen=True)
class JumpMoments:
    """Named jump-field moments at one state.

    Per-species vectors: ``lin`` = sum_k rate_k h_i; ``log1p_sum`` =
    sum_k rate_k ln(1+h_i); ``gap`` = sum_k rate_k (h_i - ln(1+h_i)).
    Scalars: ``ratio_moment`` = sum_k rate_k [(ln Q_k)^2 + Q_k] at the given
    p; ``product_balance`` = sum_k rate_k [prod_i (1+h_i)^{p_i} -
    sum_i (1+h_i)^{p_i}]; ``product_balance_shifted`` adds rate_k (n-1) per
    mark, the form that appears inside the product-moment generator bound.
    """

    lin: np.ndarray
    log1p_sum: np.ndarray
    gap: np.ndarray
    ratio_moment: float
    product_balance: float
    product_balance_shifted: float
    p_used: float
    pvec_used: np.ndarray


def jump_moment_integrals(model: Model, x, p: float = 0.5, pvec=None) -> JumpMoments:
    """Evaluate the jump-moment aggregates entering the drift conditions."""
    p = _check_p(p)
    x = _check_state(model, x)
    n = model.n
    pv = np.full(n, 0.5 / n) if pvec is None else np.asarray(pvec, dtype=np.float64)
    if pv.shape != (n,) or np.any(pv <= 0.0) or float(np.sum(pv)) >= 1.0:
        raise ValueError("pvec must be positive with sum < 1")

    lin = np.zeros(n)
    logs = np.zeros(n)
    gap = np.zeros(n)
    ratio = 0.0
    balance = 0.0
    shifted = 0.0
    for k, (rate, _) in enumerate(model.kernel.marks):
        h = _admissible_h(model.kernel, x, k)
        lin += rate * h
        logs += rate * np.log1p(h)
        gap += rate * _gap(h)
        q = eval_Q(model, x, k, p)
        ratio += rate * (math.log(q) ** 2 + q)
        prod_term = math.exp(float(np.dot(pv, np.log1p(h))))
        sum_term = float(np.sum(np.exp(pv * np.log1p(h))))
        balance += rate * (prod_term - sum_term)
        shifted += rate * (prod_term - sum_term + (n - 1.0))
    return JumpMoments(
        lin=lin,
        log1p_sum=logs,
        gap=gap,
        ratio_moment=ratio,
        product_balance=balance,
        product_balance_shifted=shifted,
        p_used=p,
        pvec_used=pv,
    )


@dataclass(frozen=True)
class LeadingOrderFit:
    """Power-law fit f(r d) ~ coef * r^exponent on the top probe decade.

    ``residual`` is the largest relative deviation of the averaged fit from
    the probed values; infinite when f changes sign inside the fitting
    window, NaN coef/exponent marking the fit unusable.  An identically zero
    f reports coef 0 with undefined exponent.
    """

    coef: float
    exponent: float
    residual: float


def fit_leading_order(
    f: Callable[[np.ndarray], float], directions: np.ndarray, radii: np.ndarray
) -> LeadingOrderFit:
    """Fit the leading power-law order of a scalar field along ray probes.

    log|f(r d)| is regressed on log r over the largest decade of ``radii``,
    slopes and intercepts averaged across ``directions``; the coefficient
    sign is read off at the largest radius.
    """
    radii = np.sort(np.asarray(radii, dtype=np.float64))
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if radii.size < 3 or radii[0] <= 0.0:
        raise ValueError("radii must be positive with at least 3 entries")
    if radii[-1] / radii[0] < 100.0:
        raise ValueError("radii must span at least two decades")

    top = radii[radii >= radii[-1] / 10.0]
    values = np.empty((directions.shape[0], top.size))
    for d, direction in enumerate(directions):
        for r, radius in enumerate(top):
            values[d, r] = f(radius * direction)
    if not np.all(np.isfinite(values)):
        raise ValueError("f must be finite on all probe points")

    if np.all(values == 0.0):
        return LeadingOrderFit(coef=0.0, exponent=math.nan, residual=math.nan)
    # Require one strict sign throughout the window: zeros or mixed signs
    # mean no single power law describes the decade.
    if np.any(values == 0.0) or (np.any(values > 0.0) and np.any(values < 0.0)):
        return LeadingOrderFit(coef=math.nan, exponent=math.nan, residual=math.inf)

    sign = 1.0 if values[0, -1] > 0.0 else -1.0
    log_r = np.log(top)
    slopes = np.empty(directions.shape[0])
    intercepts = np.empty(directions.shape[0])
    for d in range(directions.shape[0]):
        slope, intercept = np.polyfit(log_r, np.log(np.abs(values[d])), 1)
        slopes[d] = slope
        intercepts[d] = intercept
    exponent = float(np.mean(slopes))
    coef = sign * math.exp(float(np.mean(intercepts)))
    fitted = coef * np.exp(exponent * log_r)
    residual = float(np.max(np.abs(fitted[None, :] - values) / np.abs(values)))
    return LeadingOrderFit(coef=coef, exponent=exponent, residual=residual)


@dataclass(frozen=True)
class ConditionFit:
    """Verdict for one drift condition: fitted law plus classification.

    ``verdict`` is one of ``holds`` / ``fails`` / ``indeterminate``;
    ``holds`` is its boolean shadow (indeterminate counts as not holding).
    """

    verdict: str
    coef: float
    exponent: float
    residual: float
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"


@dataclass(frozen=True)
class ConditionReport:
    """Numeric verdicts on the drift hypotheses behind the main theorems.

    jump_dominance   : worst-species compensated jump moment decays like
                       -delta |x|^alpha with delta > 0, alpha > 2
    log_gap          : compensator gap grows no faster than |x|^beta with
                       beta <= alpha
    ratio_moment     : (ln Q)^2 + Q aggregate grows no faster than |x|^theta
                       with theta <= alpha
    product_balance  : product-vs-sum jump aggregate grows strictly slower
                       than |x|^alpha
    """

    jump_dominance: ConditionFit
    log_gap: ConditionFit
    ratio_moment: ConditionFit
    product_balance: ConditionFit
    p_used: float
    pvec_used: np.ndarray
    directions_probed: int

    @property
    def fitted_delta(self) -> float:
        return -self.jump_dominance.coef

    @property
    def fitted_alpha(self) -> float:
        return self.jump_dominance.exponent

    @property
    def fitted_nu(self) -> float:
        return self.log_gap.coef

    @property
    def fitted_beta(self) -> float:
        return self.log_gap.exponent

    @property
    def fitted_K(self) -> float:
        return self.ratio_moment.coef

    @property
    def fitted_theta(self) -> float:
        return self.ratio_moment.exponent

    @property
    def fitted_beta1(self) -> float:
        return self.product_balance.coef

    @property
    def fitted_beta2(self) -> float:
        return self.product_balance.exponent

    def rows(self) -> list[tuple[str, str, float, float, float, str]]:
        """Flatten to (condition, verdict, coef, exponent, residual, note)."""
        return [
            (name, fit.verdict, fit.coef, fit.exponent, fit.residual, fit.note)
            for name, fit in (
                ("jump_dominance", self.jump_dominance),
                ("log_gap", self.log_gap),
                ("ratio_moment", self.ratio_moment),
                ("product_balance", self.product_balance),
            )
        ]


_EXPONENT_TOL = 0.1  # slack when comparing fitted exponents


def _classify(
    fit: LeadingOrderFit,
    want_negative: bool,
    needs_alpha: float | None,
    strict: bool,
    zero_note_holds: str | None,
) -> ConditionFit:
    """Turn a leading-order fit into a condition verdict.

    ``want_negative``: condition needs a negative leading coefficient with
    exponent > 2 (sets the reference alpha).  Otherwise the condition is an
    upper growth bound measured against ``needs_alpha``; ``strict`` demands
    exponent strictly below alpha instead of <= alpha (within tolerance).
    ``zero_note_holds``: verdict note when f vanishes identically, which
    satisfies any upper bound; None marks identical zero as a failure.
    """
    if math.isinf(fit.residual):
        return ConditionFit(
            "indeterminate", fit.coef, fit.exponent, fit.residual,
            "sign change inside the fitting decade",
        )
    if fit.coef == 0.0 and math.isnan(fit.exponent):
        if zero_note_holds is not None:
            return ConditionFit("holds", 0.0, math.nan, 0.0, zero_note_holds)
        return ConditionFit(
            "fails", 0.0, math.nan, 0.0, "term vanishes identically; no decay to fit"
        )
    if abs(fit.coef) < COEF_RESOLUTION:
        return ConditionFit(
            "indeterminate", fit.coef, fit.exponent, fit.residual,
            "leading coefficient below numeric resolution",
        )

    if want_negative:
        if fit.coef < 0.0 and fit.exponent > 2.0:
            return ConditionFit("holds", fit.coef, fit.exponent, fit.residual)
        note = (
            "leading coefficient is not negative"
            if fit.coef >= 0.0
            else f"fitted exponent {fit.exponent:.3f} does not exceed 2"
        )
        return ConditionFit("fails", fit.coef, fit.exponent, fit.residual, note)

    if needs_alpha is None or math.isnan(needs_alpha):
        return ConditionFit(
            "indeterminate", fit.coef, fit.exponent, fit.residual,
            "no fitted dominance exponent available for comparison",
        )
    if fit.coef < 0.0:
        return ConditionFit(
            "holds", fit.coef, fit.exponent, fit.residual,
            "aggregate is negative at large radius; any growth bound applies",
        )
    if strict:
        ok = fit.exponent < needs_alpha
    else:
        ok = fit.exponent <= needs_alpha + _EXPONENT_TOL
    if ok:
        return ConditionFit("holds", fit.coef, fit.exponent, fit.residual)
    cmp = "<" if strict else "<="
    return ConditionFit(
        "fails", fit.coef, fit.exponent, fit.residual,
        f"fitted exponent {fit.exponent:.3f} not {cmp} dominance exponent {needs_alpha:.3f}",
    )


def check_conditions(
    model: Model,
    p: float = 0.5,
    pvec=None,
    radii: np.ndarray | None = None,
    probe_grid: ProbeGrid | None = None,
) -> ConditionReport:
    """Fit and judge the jump drift conditions on ray probes.

    Each condition's left side is probed along seeded positive-orthant rays
    over ``radii`` (default 25 log-spaced points across [10, 1000]) and fitted
    to a power law; verdicts compare the fitted sign and exponent against the
    theorem requirements, with ``indeterminate`` for anything the fit cannot
    resolve (sign changes, vanishing coefficients, missing reference alpha).
    """
    p = _check_p(p)
    n = model.n
    pv = np.full(n, 0.5 / n) if pvec is None else np.asarray(pvec, dtype=np.float64)
    if pv.shape != (n,) or np.any(pv <= 0.0) or float(np.sum(pv)) >= 1.0:
        raise ValueError("pvec must be positive with sum < 1")
    radii = np.logspace(1.0, 3.0, 25) if radii is None else np.asarray(radii)
    grid = probe_grid if probe_grid is not None else ProbeGrid()
    directions = grid.directions(n)

    if model.kernel.n_marks == 0:
        absent = ConditionFit(
            "indeterminate", math.nan, math.nan, math.nan, "model has no jumps"
        )
        no_jump = ConditionFit(
            "fails", 0.0, math.nan, 0.0, "model has no jumps; no negative jump drift"
        )
        return ConditionReport(
            jump_dominance=no_jump,
            log_gap=absent,
            ratio_moment=absent,
            product_balance=absent,
            p_used=p,
            pvec_used=pv,
            directions_probed=directions.shape[0],
        )

    def worst_ji(x: np.ndarray) -> float:
        return max(eval_Ji(model, x, p, i) for i in range(n))

    def worst_gap(x: np.ndarray) -> float:
        return float(np.max(jump_moment_integrals(model, x, p, pv).gap))

    def ratio_aggregate(x: np.ndarray) -> float:
        return jump_moment_integrals(model, x, p, pv).ratio_moment

    def balance_aggregate(x: np.ndarray) -> float:
        return jump_moment_integrals(model, x, p, pv).product_balance

    dominance_fit = fit_leading_order(worst_ji, directions, radii)
    dominance = _classify(
        dominance_fit, want_negative=True, needs_alpha=None, strict=False,
        zero_note_holds=None,
    )
    alpha = dominance.exponent if dominance.holds else math.nan

    log_gap = _classify(
        fit_leading_order(worst_gap, directions, radii),
        want_negative=False, needs_alpha=alpha, strict=False,
        zero_note_holds="compensator gap vanishes identically",
    )
    ratio = _classify(
        fit_leading_order(ratio_aggregate, directions, radii),
        want_negative=False, needs_alpha=alpha, strict=False,
        zero_note_holds="ratio aggregate vanishes identically",
    )
    balance = _classify(
        fit_leading_order(balance_aggregate, directions, radii),
        want_negative=False, needs_alpha=alpha, strict=True,
        zero_note_holds="product and sum terms cancel identically",
    )
    return ConditionReport(
        jump_dominance=dominance,
        log_gap=log_gap,
        ratio_moment=ratio,
        product_balance=balance,
        p_used=p,
        pvec_used=pv,
        directions_probed=directions.shape[0],
    )

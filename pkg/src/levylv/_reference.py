"""Pure-Python path kernel: the reference implementation.

The compiled kernel in ``_core.pyx`` is a literal transcription of
``run_path`` below.  The two must produce bit-identical output, which pins
down three things:

* draw order — one (exponential, uniform) pair per jump-clock arming, one
  standard normal per diffusion step, nothing else, in loop order;
* arithmetic order — every floating-point expression here is written in the
  exact association the C code uses, so do not "simplify" expressions;
* libm — both sides call the platform exp/log/sqrt (``math`` module here,
  ``libc.math`` there).

State lives in log coordinates between jumps: one step advances
ln x_i by [b_i + (Ax)_i - (sigma x)_i^2/2 - sum_k rate_k h_i(x)] dt
+ (sigma x)_i dW with coefficients frozen at the step's start state, then
exponentiates, so positivity is structural.  Jumps multiply by (1 + h_i)
exactly.  Steps are clamped so they land exactly on jump times, grid times,
and the horizon; at a shared timestamp the jump is applied before the grid
record (the recorded X(t) is the post-jump value).
"""

from __future__ import annotations

import math

import numpy as np

# Status codes shared with the compiled kernel (match ensemble.PathStatus).
RUNNING = -1
COMPLETED = 0
EXPLODED = 1
HIT_ZERO = 2

# Jump-map kind codes shared with backend.PackedModel.
KIND_CONSTANT = 0
KIND_POLY = 1
KIND_CUSTOM = 2

_INF = math.inf


def _exp(v: float) -> float:
    # C exp() semantics: overflow saturates to +inf instead of raising.
    try:
        return math.exp(v)
    except OverflowError:
        return _INF


def _log(v: float) -> float:
    # C log() semantics: log(0) is -inf and log(negative) is NaN.
    if v > 0.0:
        return math.log(v)
    if v == 0.0:
        return -_INF
    return math.nan


def run_path(
    pm,
    x0,
    T: float,
    dt_max: float,
    c_tame: float,
    expl_thr: float,
    zero_thr: float,
    record_stride: int,
    record_path: bool,
    grid,
    bitgen,
    mg_on: bool = False,
    g_kind: int = 0,
    g_coef: float = 0.0,
    h_kind: int = 0,
    h_coef: float = 0.0,
    mg_alpha: float = 1.0,
) -> dict:
    """Simulate one path; see module docstring for the scheme.

    ``pm`` is a backend.PackedModel; ``grid`` is a sorted array of report
    times inside [0, T]; ``bitgen`` is a numpy BitGenerator owned by this
    path.  Returns a dict of plain arrays (times/states/jumps/grid
    states/status/martingale accumulators); Path and EnsembleSummary
    assembly happens in the simulate module.
    """
    gen = np.random.Generator(bitgen)
    n = pm.n
    m = pm.m
    b = pm.b.tolist()
    A = pm.A.tolist()
    S = pm.sigma.tolist()
    rates = pm.rates.tolist()
    kinds = pm.kinds.tolist()
    cmat = pm.cmat.tolist()
    gmat = pm.gmat.tolist()
    pcoef = pm.pcoef.tolist()
    pdeg = pm.pdeg.tolist()
    custom = pm.custom
    eps0 = pm.eps0
    lam = pm.total_rate

    grid = np.ascontiguousarray(grid, dtype=np.float64)
    n_grid = grid.shape[0]
    grid_list = grid.tolist()
    grid_states = np.full((n_grid, n), math.nan)

    x = [float(v) for v in x0]
    lx = [_log(v) for v in x]
    prevx = list(x)
    hbuf = [0.0] * n
    ax = [0.0] * n
    sx = [0.0] * n
    comp = [0.0] * n
    mu = [0.0] * n

    def h_eval(k: int, state: list, norm: float, out: list) -> None:
        kind = kinds[k]
        if kind == KIND_CONSTANT:
            ramp = norm / eps0
            if ramp > 1.0:
                ramp = 1.0
            ck = cmat[k]
            for i in range(n):
                out[i] = ck[i] * ramp
        elif kind == KIND_POLY:
            pc = pcoef[k]
            v = pc[pdeg[k]]
            for j in range(pdeg[k] - 1, -1, -1):
                v = v * norm + pc[j]
            gk = gmat[k]
            for i in range(n):
                out[i] = gk[i] * v
        else:
            arr = custom[k](np.array(state, dtype=np.float64), k)
            for i in range(n):
                out[i] = float(arr[i])

    rec_t: list[float] = [0.0]
    rec_x: list[list[float]] = [list(x)]
    j_t: list[float] = []
    j_mark: list[int] = []
    j_pre: list[list[float]] = []
    j_post: list[list[float]] = []

    g_idx = 0
    while g_idx < n_grid and grid_list[g_idx] <= 0.0:
        for i in range(n):
            grid_states[g_idx, i] = x[i]
        g_idx += 1

    # Arm the jump clock: exponential wait over the total rate, uniform mark
    # selection against cumulative rates.  Both draws always happen together
    # so the stream layout is independent of the mark count.
    if lam > 0.0:
        e = gen.standard_exponential()
        u = gen.random()
        t_jump = 0.0 + e / lam
        target = u * lam
        acc = 0.0
        mark = m - 1
        for k in range(m):
            acc += rates[k]
            if target < acc:
                mark = k
                break
    else:
        t_jump = _INF
        mark = -1

    t = 0.0
    status = RUNNING
    status_time = math.nan
    status_comp = -1
    n_steps = 0
    mart_S = 0.0
    mart_sup = 0.0

    while t < T and status == RUNNING:
        t0 = t
        for i in range(n):
            prevx[i] = x[i]

        # Next event time: horizon, pending jump, or next grid point.
        t_evt = T
        if t_jump < t_evt:
            t_evt = t_jump
        if g_idx < n_grid and grid_list[g_idx] < t_evt:
            t_evt = grid_list[g_idx]

        # Frozen coefficients at the step's start state.
        nrm2 = 0.0
        for i in range(n):
            nrm2 += x[i] * x[i]
        nrm = math.sqrt(nrm2)
        for i in range(n):
            acc_a = 0.0
            acc_s = 0.0
            Ai = A[i]
            Si = S[i]
            for j in range(n):
                acc_a += Ai[j] * x[j]
                acc_s += Si[j] * x[j]
            ax[i] = acc_a
            sx[i] = acc_s
            comp[i] = 0.0
        for k in range(m):
            h_eval(k, x, nrm, hbuf)
            rk = rates[k]
            for i in range(n):
                comp[i] += rk * hbuf[i]
        amax = 0.0
        for i in range(n):
            mui = b[i] + ax[i] - 0.5 * sx[i] * sx[i] - comp[i]
            mu[i] = mui
            amui = -mui if mui < 0.0 else mui
            if amui > amax:
                amax = amui

        # Adaptive cap: bounds the per-step log displacement near explosive
        # states (drift magnitude included, or post-jump compensator spikes
        # overshoot in a single dt_max step).
        dt = dt_max
        cap = c_tame / (1.0 + nrm + amax)
        if cap < dt:
            dt = cap
        clamped = False
        rem = t_evt - t
        if rem <= dt:
            dt = rem
            clamped = True

        z = gen.standard_normal()
        dW = math.sqrt(dt) * z

        if mg_on:
            gs = 0.0
            if g_kind == 1:
                gs = g_coef
            elif g_kind == 2:
                gs = g_coef * nrm
            hterm = 0.0
            if h_kind != 0:
                hval = h_coef if h_kind == 1 else h_coef * nrm
                hterm = lam * (
                    hval + (_exp(mg_alpha * hval) - 1.0 - mg_alpha * hval) / mg_alpha
                )
            mart_S = mart_S + (gs * dW - 0.5 * mg_alpha * (gs * gs) * dt - hterm * dt)
            if mart_S > mart_sup:
                mart_sup = mart_S

        for i in range(n):
            lx[i] = lx[i] + (mu[i] * dt + sx[i] * dW)
            x[i] = _exp(lx[i])
        t = t_evt if clamped else t + dt
        n_steps += 1

        bad = -1  # -1 healthy, -2 exploded, >=0 zero-hit component
        post2 = 0.0
        for i in range(n):
            xi = x[i]
            if xi != xi or xi == _INF:
                bad = -2
                break
            post2 += xi * xi
        if bad == -1:
            if math.sqrt(post2) > expl_thr:
                bad = -2
            else:
                for i in range(n):
                    if x[i] < zero_thr:
                        bad = i
                        break
        if bad != -1:
            status_time = t
            if bad == -2:
                status = EXPLODED
                if rec_t[-1] != t0:
                    rec_t.append(t0)
                    rec_x.append(list(prevx))
            else:
                status = HIT_ZERO
                status_comp = bad
                rec_t.append(t)
                rec_x.append(list(x))
            break

        if t == t_jump:
            pre = list(x)
            jn2 = 0.0
            for i in range(n):
                jn2 += x[i] * x[i]
            jnrm = math.sqrt(jn2)
            h_eval(mark, x, jnrm, hbuf)
            for i in range(n):
                if 1.0 + hbuf[i] <= 0.0:
                    raise_kernel_error(mark, i, hbuf[i], jnrm)
            for i in range(n):
                x[i] = x[i] * (1.0 + hbuf[i])
                lx[i] = _log(x[i])
            j_t.append(t)
            j_mark.append(mark)
            j_pre.append(pre)
            j_post.append(list(x))

            if mg_on and h_kind != 0:
                hval = h_coef if h_kind == 1 else h_coef * jnrm
                mart_S = mart_S + hval
                if mart_S > mart_sup:
                    mart_sup = mart_S

            bad = -1
            post2 = 0.0
            for i in range(n):
                xi = x[i]
                if xi != xi or xi == _INF:
                    bad = -2
                    break
                post2 += xi * xi
            if bad == -1:
                if math.sqrt(post2) > expl_thr:
                    bad = -2
                else:
                    for i in range(n):
                        if x[i] < zero_thr:
                            bad = i
                            break
            if bad != -1:
                status_time = t
                if bad == -2:
                    status = EXPLODED
                    if rec_t[-1] != t:
                        rec_t.append(t)
                        rec_x.append(pre)
                else:
                    status = HIT_ZERO
                    status_comp = bad
                    rec_t.append(t)
                    rec_x.append(list(x))
                break

            e = gen.standard_exponential()
            u = gen.random()
            t_jump = t + e / lam
            target = u * lam
            acc = 0.0
            mark = m - 1
            for k in range(m):
                acc += rates[k]
                if target < acc:
                    mark = k
                    break

        while g_idx < n_grid and grid_list[g_idx] <= t:
            for i in range(n):
                grid_states[g_idx, i] = x[i]
            g_idx += 1

        if record_path and n_steps % record_stride == 0 and rec_t[-1] != t:
            rec_t.append(t)
            rec_x.append(list(x))

    if status == RUNNING:
        status = COMPLETED
    if status == COMPLETED and rec_t[-1] != t:
        rec_t.append(t)
        rec_x.append(list(x))

    # Grid entries past an early termination: NaN after explosion, the final
    # state carried forward after a zero hit (completed paths never get here).
    if g_idx < n_grid and status == HIT_ZERO:
        fill = rec_x[-1]
        while g_idx < n_grid:
            for i in range(n):
                grid_states[g_idx, i] = fill[i]
            g_idx += 1

    return {
        "times": np.array(rec_t),
        "states": np.array(rec_x).reshape(len(rec_t), n),
        "jump_times": np.array(j_t),
        "jump_marks": np.array(j_mark, dtype=np.int64),
        "jump_pre": np.array(j_pre).reshape(len(j_t), n),
        "jump_post": np.array(j_post).reshape(len(j_t), n),
        "status": status,
        "status_time": status_time,
        "status_component": status_comp,
        "grid_states": grid_states,
        "n_steps": n_steps,
        "n_jumps": len(j_t),
        "sup_martingale": mart_sup,
        "final_martingale": mart_S,
    }


def raise_kernel_error(mark: int, component: int, h: float, norm: float):
    from .model import KernelAdmissibilityError

    raise KernelAdmissibilityError(
        f"mark {mark} drives 1 + h_{component} to {1.0 + h} <= 0 at |x| = {norm:.6g}"
    )

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path kernel: a literal transcription of ``_reference.run_path``.

Every floating-point expression keeps the exact association of the reference
implementation and both sides call the platform libm, so the two kernels
produce bit-identical paths from the same BitGenerator state (asserted by the
test suite and the backend benchmark).  Custom jump maps are Python callables
and are not supported here; the backend routes models containing them to the
reference kernel.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY, NAN, exp, log, sqrt
from libc.stdlib cimport free, malloc, realloc
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential,
    random_standard_normal,
    random_standard_uniform,
)

RUNNING = -1
COMPLETED = 0
EXPLODED = 1
HIT_ZERO = 2

cdef enum:
    ST_RUNNING = -1
    ST_COMPLETED = 0
    ST_EXPLODED = 1
    ST_HIT_ZERO = 2


cdef inline void _h_eval(double *out, Py_ssize_t n, signed char kind,
                         const double *cvec, const double *gvec,
                         const double *pc, long long deg,
                         double nrm, double eps0) nogil:
    cdef Py_ssize_t i
    cdef long long j
    cdef double ramp, v
    if kind == 0:
        ramp = nrm / eps0
        if ramp > 1.0:
            ramp = 1.0
        for i in range(n):
            out[i] = cvec[i] * ramp
    else:
        v = pc[deg]
        j = deg - 1
        while j >= 0:
            v = v * nrm + pc[j]
            j -= 1
        for i in range(n):
            out[i] = gvec[i] * v


cdef inline int _push_rec(double **bt, double **bx, size_t *cap, size_t *length,
                          double t, const double *xs, Py_ssize_t n) nogil:
    cdef size_t newcap
    cdef double *nt
    cdef double *nx
    cdef Py_ssize_t i
    if length[0] == cap[0]:
        newcap = cap[0] * 2
        nt = <double *> realloc(bt[0], newcap * sizeof(double))
        if nt == NULL:
            return -1
        bt[0] = nt
        nx = <double *> realloc(bx[0], newcap * (<size_t> n) * sizeof(double))
        if nx == NULL:
            return -1
        bx[0] = nx
        cap[0] = newcap
    bt[0][length[0]] = t
    for i in range(n):
        bx[0][length[0] * (<size_t> n) + (<size_t> i)] = xs[i]
    length[0] += 1
    return 0


def run_path(pm, x0, double T, double dt_max, double c_tame,
             double expl_thr, double zero_thr,
             long long record_stride, bint record_path,
             grid, bitgen,
             bint mg_on=False, int g_kind=0, double g_coef=0.0,
             int h_kind=0, double h_coef=0.0, double mg_alpha=1.0):
    """Simulate one path; same contract and return shape as the reference."""
    if pm.has_custom:
        raise ValueError("compiled kernel cannot evaluate custom jump maps")

    cdef Py_ssize_t n = pm.n
    cdef Py_ssize_t m = pm.m
    cdef const double[::1] b = pm.b
    cdef const double[:, ::1] A = pm.A
    cdef const double[:, ::1] Smat = pm.sigma
    cdef const double[::1] rates_v = pm.rates
    cdef const signed char[::1] kinds_v = pm.kinds
    cdef const double[:, ::1] cmat = pm.cmat
    cdef const double[:, ::1] gmat = pm.gmat
    cdef const double[:, ::1] pcoef = pm.pcoef
    cdef const long long[::1] pdeg_v = pm.pdeg
    cdef double eps0 = pm.eps0
    cdef double lam = pm.total_rate

    grid_arr = np.ascontiguousarray(grid, dtype=np.float64)
    cdef const double[::1] gridv = grid_arr
    cdef Py_ssize_t n_grid = gridv.shape[0]
    grid_states = np.full((n_grid, n), np.nan)
    cdef double[:, ::1] gs_v = grid_states

    x0_arr = np.ascontiguousarray(x0, dtype=np.float64)
    cdef const double[::1] x0v = x0_arr

    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")

    # Scratch state: one block of 8 n-vectors.
    cdef double *block = <double *> malloc(8 * n * sizeof(double))
    if block == NULL:
        raise MemoryError
    cdef double *x = block
    cdef double *lx = block + n
    cdef double *prevx = block + 2 * n
    cdef double *hbuf = block + 3 * n
    cdef double *ax = block + 4 * n
    cdef double *sx = block + 5 * n
    cdef double *comp = block + 6 * n
    cdef double *mu = block + 7 * n

    cdef size_t cap_r = 64, len_r = 0
    cdef size_t cap_j = 16, len_j = 0
    cdef double *rec_t = <double *> malloc(cap_r * sizeof(double))
    cdef double *rec_x = <double *> malloc(cap_r * n * sizeof(double))
    cdef double *j_t = <double *> malloc(cap_j * sizeof(double))
    cdef long long *j_mark = <long long *> malloc(cap_j * sizeof(long long))
    cdef double *j_pre = <double *> malloc(cap_j * n * sizeof(double))
    cdef double *j_post = <double *> malloc(cap_j * n * sizeof(double))
    if rec_t == NULL or rec_x == NULL or j_t == NULL or j_mark == NULL \
            or j_pre == NULL or j_post == NULL:
        free(block); free(rec_t); free(rec_x)
        free(j_t); free(j_mark); free(j_pre); free(j_post)
        raise MemoryError

    cdef Py_ssize_t i, j, k, g_idx = 0
    cdef double t = 0.0, t0, t_evt, t_jump, rem, dt, cap, z, dW
    cdef double nrm, nrm2, acc_a, acc_s, amax, mui, amui, xi, post2
    cdef double e, u, target, acc, jn2, jnrm
    cdef double mart_S = 0.0, mart_sup = 0.0, gs, hterm, hval
    cdef double status_time = NAN
    cdef int status = ST_RUNNING, status_comp = -1, bad
    cdef long long n_steps = 0, mark = -1
    cdef bint clamped
    cdef int memerr = 0, kerr = 0
    cdef Py_ssize_t kerr_mark = 0, kerr_comp = 0
    cdef double kerr_h = 0.0, kerr_nrm = 0.0
    cdef size_t newcap
    cdef double *tmpd
    cdef long long *tmpl

    with nogil:
        for i in range(n):
            x[i] = x0v[i]
            lx[i] = log(x[i])
            prevx[i] = x[i]

        # Initial record at t = 0.
        if _push_rec(&rec_t, &rec_x, &cap_r, &len_r, 0.0, x, n) != 0:
            memerr = 1
        while memerr == 0 and g_idx < n_grid and gridv[g_idx] <= 0.0:
            for i in range(n):
                gs_v[g_idx, i] = x[i]
            g_idx += 1

        if lam > 0.0:
            e = random_standard_exponential(rng)
            u = random_standard_uniform(rng)
            t_jump = 0.0 + e / lam
            target = u * lam
            acc = 0.0
            mark = m - 1
            for k in range(m):
                acc += rates_v[k]
                if target < acc:
                    mark = k
                    break
        else:
            t_jump = INFINITY
            mark = -1

        while memerr == 0 and kerr == 0 and t < T and status == ST_RUNNING:
            t0 = t
            for i in range(n):
                prevx[i] = x[i]

            t_evt = T
            if t_jump < t_evt:
                t_evt = t_jump
            if g_idx < n_grid and gridv[g_idx] < t_evt:
                t_evt = gridv[g_idx]

            nrm2 = 0.0
            for i in range(n):
                nrm2 += x[i] * x[i]
            nrm = sqrt(nrm2)
            for i in range(n):
                acc_a = 0.0
                acc_s = 0.0
                for j in range(n):
                    acc_a += A[i, j] * x[j]
                    acc_s += Smat[i, j] * x[j]
                ax[i] = acc_a
                sx[i] = acc_s
                comp[i] = 0.0
            for k in range(m):
                _h_eval(hbuf, n, kinds_v[k], &cmat[k, 0], &gmat[k, 0],
                        &pcoef[k, 0], pdeg_v[k], nrm, eps0)
                for i in range(n):
                    comp[i] += rates_v[k] * hbuf[i]
            amax = 0.0
            for i in range(n):
                mui = b[i] + ax[i] - 0.5 * sx[i] * sx[i] - comp[i]
                mu[i] = mui
                amui = -mui if mui < 0.0 else mui
                if amui > amax:
                    amax = amui

            dt = dt_max
            cap = c_tame / (1.0 + nrm + amax)
            if cap < dt:
                dt = cap
            clamped = False
            rem = t_evt - t
            if rem <= dt:
                dt = rem
                clamped = True

            z = random_standard_normal(rng)
            dW = sqrt(dt) * z

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
                        hval + (exp(mg_alpha * hval) - 1.0 - mg_alpha * hval) / mg_alpha
                    )
                mart_S = mart_S + (gs * dW - 0.5 * mg_alpha * (gs * gs) * dt - hterm * dt)
                if mart_S > mart_sup:
                    mart_sup = mart_S

            for i in range(n):
                lx[i] = lx[i] + (mu[i] * dt + sx[i] * dW)
                x[i] = exp(lx[i])
            t = t_evt if clamped else t + dt
            n_steps += 1

            bad = -1
            post2 = 0.0
            for i in range(n):
                xi = x[i]
                if xi != xi or xi == INFINITY:
                    bad = -2
                    break
                post2 += xi * xi
            if bad == -1:
                if sqrt(post2) > expl_thr:
                    bad = -2
                else:
                    for i in range(n):
                        if x[i] < zero_thr:
                            bad = <int> i
                            break
            if bad != -1:
                status_time = t
                if bad == -2:
                    status = ST_EXPLODED
                    if rec_t[len_r - 1] != t0:
                        if _push_rec(&rec_t, &rec_x, &cap_r, &len_r, t0, prevx, n) != 0:
                            memerr = 1
                else:
                    status = ST_HIT_ZERO
                    status_comp = bad
                    if _push_rec(&rec_t, &rec_x, &cap_r, &len_r, t, x, n) != 0:
                        memerr = 1
                break

            if t == t_jump:
                # Grow the jump buffers if needed (pre-jump state goes to
                # j_pre directly, so growth happens before the copy).
                if len_j == cap_j:
                    newcap = cap_j * 2
                    tmpd = <double *> realloc(j_t, newcap * sizeof(double))
                    if tmpd == NULL:
                        memerr = 1
                        break
                    j_t = tmpd
                    tmpl = <long long *> realloc(j_mark, newcap * sizeof(long long))
                    if tmpl == NULL:
                        memerr = 1
                        break
                    j_mark = tmpl
                    tmpd = <double *> realloc(j_pre, newcap * n * sizeof(double))
                    if tmpd == NULL:
                        memerr = 1
                        break
                    j_pre = tmpd
                    tmpd = <double *> realloc(j_post, newcap * n * sizeof(double))
                    if tmpd == NULL:
                        memerr = 1
                        break
                    j_post = tmpd
                    cap_j = newcap

                for i in range(n):
                    j_pre[len_j * (<size_t> n) + (<size_t> i)] = x[i]
                jn2 = 0.0
                for i in range(n):
                    jn2 += x[i] * x[i]
                jnrm = sqrt(jn2)
                _h_eval(hbuf, n, kinds_v[mark], &cmat[mark, 0], &gmat[mark, 0],
                        &pcoef[mark, 0], pdeg_v[mark], jnrm, eps0)
                for i in range(n):
                    if 1.0 + hbuf[i] <= 0.0:
                        kerr = 1
                        kerr_mark = mark
                        kerr_comp = i
                        kerr_h = hbuf[i]
                        kerr_nrm = jnrm
                        break
                if kerr:
                    break
                for i in range(n):
                    x[i] = x[i] * (1.0 + hbuf[i])
                    lx[i] = log(x[i])
                j_t[len_j] = t
                j_mark[len_j] = mark
                for i in range(n):
                    j_post[len_j * (<size_t> n) + (<size_t> i)] = x[i]
                len_j += 1

                if mg_on and h_kind != 0:
                    hval = h_coef if h_kind == 1 else h_coef * jnrm
                    mart_S = mart_S + hval
                    if mart_S > mart_sup:
                        mart_sup = mart_S

                bad = -1
                post2 = 0.0
                for i in range(n):
                    xi = x[i]
                    if xi != xi or xi == INFINITY:
                        bad = -2
                        break
                    post2 += xi * xi
                if bad == -1:
                    if sqrt(post2) > expl_thr:
                        bad = -2
                    else:
                        for i in range(n):
                            if x[i] < zero_thr:
                                bad = <int> i
                                break
                if bad != -1:
                    status_time = t
                    if bad == -2:
                        status = ST_EXPLODED
                        if rec_t[len_r - 1] != t:
                            if _push_rec(&rec_t, &rec_x, &cap_r, &len_r, t,
                                         j_pre + (len_j - 1) * (<size_t> n), n) != 0:
                                memerr = 1
                    else:
                        status = ST_HIT_ZERO
                        status_comp = bad
                        if _push_rec(&rec_t, &rec_x, &cap_r, &len_r, t, x, n) != 0:
                            memerr = 1
                    break

                e = random_standard_exponential(rng)
                u = random_standard_uniform(rng)
                t_jump = t + e / lam
                target = u * lam
                acc = 0.0
                mark = m - 1
                for k in range(m):
                    acc += rates_v[k]
                    if target < acc:
                        mark = k
                        break

            while g_idx < n_grid and gridv[g_idx] <= t:
                for i in range(n):
                    gs_v[g_idx, i] = x[i]
                g_idx += 1

            if record_path and n_steps % record_stride == 0 and rec_t[len_r - 1] != t:
                if _push_rec(&rec_t, &rec_x, &cap_r, &len_r, t, x, n) != 0:
                    memerr = 1

        if memerr == 0 and kerr == 0:
            if status == ST_RUNNING:
                status = ST_COMPLETED
            if status == ST_COMPLETED and rec_t[len_r - 1] != t:
                if _push_rec(&rec_t, &rec_x, &cap_r, &len_r, t, x, n) != 0:
                    memerr = 1
            if g_idx < n_grid and status == ST_HIT_ZERO:
                while g_idx < n_grid:
                    for i in range(n):
                        gs_v[g_idx, i] = rec_x[(len_r - 1) * (<size_t> n) + (<size_t> i)]
                    g_idx += 1

    try:
        if memerr:
            raise MemoryError
        if kerr:
            from .model import KernelAdmissibilityError
            raise KernelAdmissibilityError(
                f"mark {kerr_mark} drives 1 + h_{kerr_comp} to {1.0 + kerr_h} <= 0 "
                f"at |x| = {kerr_nrm:.6g}"
            )

        times = np.empty(len_r)
        states = np.empty((len_r, n))
        jt = np.empty(len_j)
        jm = np.empty(len_j, dtype=np.int64)
        jpre = np.empty((len_j, n))
        jpost = np.empty((len_j, n))
        _copy_out(times, states, jt, jm, jpre, jpost,
                  rec_t, rec_x, j_t, j_mark, j_pre, j_post, len_r, len_j, n)
        return {
            "times": times,
            "states": states,
            "jump_times": jt,
            "jump_marks": jm,
            "jump_pre": jpre,
            "jump_post": jpost,
            "status": status,
            "status_time": status_time,
            "status_component": status_comp,
            "grid_states": grid_states,
            "n_steps": n_steps,
            "n_jumps": <Py_ssize_t> len_j,
            "sup_martingale": mart_sup,
            "final_martingale": mart_S,
        }
    finally:
        free(block)
        free(rec_t)
        free(rec_x)
        free(j_t)
        free(j_mark)
        free(j_pre)
        free(j_post)


cdef void _copy_out(double[::1] times, double[:, ::1] states,
                    double[::1] jt, long long[::1] jm,
                    double[:, ::1] jpre, double[:, ::1] jpost,
                    const double *rec_t, const double *rec_x,
                    const double *j_t, const long long *j_mark,
                    const double *j_pre, const double *j_post,
                    size_t len_r, size_t len_j, Py_ssize_t n):
    cdef size_t r
    cdef Py_ssize_t i
    for r in range(len_r):
        times[r] = rec_t[r]
        for i in range(n):
            states[r, i] = rec_x[r * (<size_t> n) + (<size_t> i)]
    for r in range(len_j):
        jt[r] = j_t[r]
        jm[r] = j_mark[r]
        for i in range(n):
            jpre[r, i] = j_pre[r * (<size_t> n) + (<size_t> i)]
            jpost[r, i] = j_post[r * (<size_t> n) + (<size_t> i)]

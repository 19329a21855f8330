"""Path and ensemble simulation.

The integrator realizes the dynamics exactly in the jump structure (compound
Poisson clocks with exponential waits and categorical marks) and first-order
in the continuous part: between events the log-state advances with
coefficients frozen at the step's start, which preserves positivity
structurally and is exact whenever the log-drift is state-independent.
Multiplicative jumps are applied exactly.  See ``_reference`` for the
step-by-step scheme shared by both kernels.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .ensemble import EnsembleSummary, PathStatus
from .model import JumpKernel, KernelAdmissibilityError, Model

__all__ = [
    "PathConfig",
    "Path",
    "JumpEvent",
    "RngStream",
    "IntegrandSpec",
    "MartingaleSpec",
    "next_jump",
    "step_diffusion_log",
    "apply_jump",
    "simulate_path",
    "simulate_ensemble",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PathConfig:
    """Numerical parameters of one simulation run.

    ``dt_max`` caps the diffusion step; near explosive states the effective
    step shrinks to c_tame / (1 + |x| + max_i |log-drift_i|), bounding the
    per-step log displacement.  Paths terminate early with Exploded when the
    state norm passes ``explosion_threshold`` (or the log step overflows)
    and with HitZero when any component falls below ``zero_threshold``.
    """

    horizon: float
    dt_max: float = 1e-3
    seed: int = 0
    explosion_threshold: float = 1e12
    zero_threshold: float = 1e-12
    record_stride: int = 1
    c_tame: float = 1.0

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if not 0.0 < self.dt_max <= self.horizon:
            raise ValueError("dt_max must satisfy 0 < dt_max <= horizon")
        if not self.zero_threshold < 1.0 < self.explosion_threshold:
            raise ValueError("thresholds must satisfy zero < 1 < explosion")
        if self.zero_threshold <= 0.0:
            raise ValueError("zero_threshold must be positive")
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be a positive integer")
        if not self.c_tame > 0.0:
            raise ValueError("c_tame must be positive")


@dataclass(frozen=True)
class JumpEvent:
    """One realized jump: post_i = pre_i * (1 + h_i(pre)) exactly."""

    time: float
    mark: int
    pre: np.ndarray
    post: np.ndarray


@dataclass(frozen=True)
class Path:
    """One simulated trajectory.

    ``times``/``states`` hold the recorded skeleton (every recorded state of
    a non-HitZero path is strictly positive in all components); ``jumps``
    the realized jump events; ``status`` how the path ended, with
    ``status_time`` NaN for completed paths and ``status_component`` the
    offending species for zero hits.
    """

    times: np.ndarray
    states: np.ndarray
    jumps: tuple[JumpEvent, ...]
    status: PathStatus
    status_time: float
    status_component: int
    n_steps: int

    @property
    def terminal_time(self) -> float:
        return float(self.times[-1])

    @property
    def terminal_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream addressed by (seed, path_index).

    Each (seed, path_index) pair keys an independent Philox stream, so paths
    are reproducible individually, ensembles are reproducible regardless of
    execution order, and no seed bookkeeping crosses path boundaries.
    """

    seed: int
    path_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if int(self.path_index) < 0:
            raise ValueError("path_index must be non-negative")

    def bit_generator(self) -> np.random.Philox:
        key = np.array([self.seed & _MASK64, self.path_index & _MASK64], dtype=np.uint64)
        return np.random.Philox(key=key)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(self.bit_generator())


@dataclass(frozen=True)
class IntegrandSpec:
    """Predictable scalar integrand from the closed family.

    kind 'zero' is the constant 0; 'constant' is coef; 'state_norm' is
    coef * |X(t)| with the state frozen at the interval start (and at the
    pre-jump state for jump terms), keeping the integrand predictable.
    """

    kind: str = "zero"
    coef: float = 0.0

    _CODES = {"zero": 0, "constant": 1, "state_norm": 2}

    def __post_init__(self) -> None:
        if self.kind not in self._CODES:
            raise ValueError(f"kind must be one of {sorted(self._CODES)}")

    @property
    def code(self) -> int:
        if self.kind != "zero" and self.coef == 0.0:
            return 0
        return self._CODES[self.kind]


@dataclass(frozen=True)
class MartingaleSpec:
    """Parameters of the exponential-martingale statistic S(t).

    S(t) = int g dW - (alpha/2) int g^2 ds + sum_jumps h
           - int SUM_k rate_k h ds - (1/alpha) int SUM_k rate_k (e^{alpha h} - 1 - alpha h) ds,
    with g, h drawn from the closed integrand family.  The kernels
    accumulate S along the path and report its running supremum.
    """

    alpha: float
    g: IntegrandSpec = IntegrandSpec()
    h: IntegrandSpec = IntegrandSpec()

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")


def _as_generator(stream) -> np.random.Generator:
    if isinstance(stream, RngStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    raise TypeError("stream must be an RngStream or a numpy Generator")


def next_jump(stream, kernel: JumpKernel) -> tuple[float, int | None]:
    """Draw the next jump (wait, mark) of the compound-Poisson clock.

    Wait is Exponential(total rate); the mark is categorical with
    probability rate_k / total, independent of the wait.  A rateless kernel
    returns (inf, None) without consuming draws.
    """
    gen = _as_generator(stream)
    lam = kernel.total_rate
    if lam <= 0.0:
        return (math.inf, None)
    e = float(gen.standard_exponential())
    u = float(gen.random())
    wait = e / lam
    target = u * lam
    acc = 0.0
    mark = kernel.n_marks - 1
    for k, (rate, _) in enumerate(kernel.marks):
        acc += rate
        if target < acc:
            mark = k
            break
    return (wait, mark)


def step_diffusion_log(model: Model, x, dt: float, dW: float) -> np.ndarray:
    """One log-domain diffusion step with coefficients frozen at x.

    ln x'_i = ln x_i + [b_i + (Ax)_i - (sigma x)_i^2 / 2
              - sum_k rate_k h_i(x)] dt + (sigma x)_i dW.
    The subtracted jump term is the compensator of the compensated Poisson
    integral, so diffusion steps plus multiplicative jumps reproduce the
    dynamics exactly in law for piecewise-frozen coefficients.  The result
    is strictly positive; an overflow to non-finite values raises
    OverflowError, which path simulation reports as an explosion.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise ValueError(f"x must have shape ({model.n},)")
    if not np.all(x > 0.0):
        raise ValueError("x must be strictly positive")
    if not dt >= 0.0:
        raise ValueError("dt must be non-negative")
    ax = model.A @ x
    sx = model.sigma @ x
    comp = np.zeros(model.n)
    for k, (rate, _) in enumerate(model.kernel.marks):
        comp += rate * model.kernel.h(x, k)
    mu = model.b + ax - 0.5 * sx * sx - comp
    lx = np.log(x) + (mu * dt + sx * dW)
    with np.errstate(over="ignore"):
        out = np.exp(lx)
    if not np.all(np.isfinite(out)):
        raise OverflowError("diffusion step overflowed; state is exploding")
    return out


def apply_jump(model: Model, x, mark: int) -> np.ndarray:
    """Apply one mark's multiplicative jump: x'_i = x_i * (1 + h_i(x))."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(x > 0.0):
        raise ValueError("x must be strictly positive")
    if not 0 <= mark < model.kernel.n_marks:
        raise IndexError(f"mark index {mark} out of range")
    h = model.kernel.h(x, mark)
    if np.any(1.0 + h <= 0.0):
        raise KernelAdmissibilityError(
            f"mark {mark} drives 1 + h to {float(np.min(1.0 + h))} <= 0"
        )
    return x * (1.0 + h)


_EMPTY_GRID = np.empty(0)


def _run_kernel(model, packed, kern, cfg, stream, record_path, grid, mg):
    if mg is None:
        mg_args = dict(mg_on=False)
    else:
        mg_args = dict(
            mg_on=True,
            g_kind=mg.g.code,
            g_coef=mg.g.coef,
            h_kind=mg.h.code,
            h_coef=mg.h.coef,
            mg_alpha=mg.alpha,
        )
    return kern(
        packed,
        model.x0,
        cfg.horizon,
        cfg.dt_max,
        cfg.c_tame,
        cfg.explosion_threshold,
        cfg.zero_threshold,
        cfg.record_stride,
        record_path,
        grid,
        stream.bit_generator(),
        **mg_args,
    )


def simulate_path(model: Model, cfg: PathConfig, stream: RngStream | None = None) -> Path:
    """Simulate one full-resolution path.

    The stream defaults to RngStream(cfg.seed, 0); pass explicit streams to
    reproduce individual ensemble members.
    """
    if not np.all(model.x0 > 0.0):
        raise ValueError("model.x0 must be strictly positive to simulate")
    if stream is None:
        stream = RngStream(cfg.seed, 0)
    packed = backend.pack_model(model)
    kern = backend.kernel_for(packed)
    res = _run_kernel(model, packed, kern, cfg, stream, True, _EMPTY_GRID, None)
    jumps = tuple(
        JumpEvent(
            time=float(res["jump_times"][j]),
            mark=int(res["jump_marks"][j]),
            pre=res["jump_pre"][j],
            post=res["jump_post"][j],
        )
        for j in range(res["n_jumps"])
    )
    return Path(
        times=res["times"],
        states=res["states"],
        jumps=jumps,
        status=PathStatus(res["status"]),
        status_time=float(res["status_time"]),
        status_component=int(res["status_component"]),
        n_steps=int(res["n_steps"]),
    )


def simulate_ensemble(
    model: Model,
    cfg: PathConfig,
    n_paths: int,
    time_grid,
    threads: int = 1,
    martingale: MartingaleSpec | None = None,
) -> EnsembleSummary:
    """Run independent paths and aggregate them onto a shared time grid.

    Paths use streams (cfg.seed, 0..n_paths-1) and write into per-path slots
    of preallocated arrays, so the result is a pure function of (model, cfg,
    n_paths, time_grid, martingale) — thread count and scheduling cannot
    alter any output bit.  Grid states follow the right-continuous
    convention (post-jump value at jump times); entries after an explosion
    are NaN, after a zero hit the last state is carried forward.
    """
    if int(n_paths) < 1:
        raise ValueError("n_paths must be positive")
    if not np.all(model.x0 > 0.0):
        raise ValueError("model.x0 must be strictly positive to simulate")
    grid = np.ascontiguousarray(time_grid, dtype=np.float64)
    if grid.ndim != 1:
        raise ValueError("time_grid must be one-dimensional")
    if grid.size:
        if np.any(np.diff(grid) <= 0.0):
            raise ValueError("time_grid must be strictly increasing")
        if grid[0] < 0.0 or grid[-1] > cfg.horizon:
            raise ValueError("time_grid must lie within [0, horizon]")
    threads = max(1, int(threads))

    n = model.n
    n_paths = int(n_paths)
    packed = backend.pack_model(model)
    kern = backend.kernel_for(packed)

    states = np.empty((grid.size, n_paths, n))
    statuses = np.empty(n_paths, dtype=np.int8)
    status_times = np.empty(n_paths)
    status_components = np.empty(n_paths, dtype=np.int32)
    terminal_states = np.empty((n_paths, n))
    terminal_times = np.empty(n_paths)
    jump_counts = np.empty(n_paths, dtype=np.int64)
    sup_mart = np.empty(n_paths) if martingale is not None else None

    def run_block(lo: int, hi: int) -> None:
        for idx in range(lo, hi):
            stream = RngStream(cfg.seed, idx)
            res = _run_kernel(model, packed, kern, cfg, stream, False, grid, martingale)
            states[:, idx, :] = res["grid_states"]
            statuses[idx] = res["status"]
            status_times[idx] = res["status_time"]
            status_components[idx] = res["status_component"]
            terminal_states[idx] = res["states"][-1]
            terminal_times[idx] = res["times"][-1]
            jump_counts[idx] = res["n_jumps"]
            if sup_mart is not None:
                sup_mart[idx] = res["sup_martingale"]

    if threads == 1:
        run_block(0, n_paths)
    else:
        bounds = np.linspace(0, n_paths, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run_block, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for fut in futures:
                fut.result()

    return EnsembleSummary(
        time_grid=grid,
        states=states,
        statuses=statuses,
        status_times=status_times,
        status_components=status_components,
        terminal_states=terminal_states,
        terminal_times=terminal_times,
        jump_counts=jump_counts,
        horizon=cfg.horizon,
        seed=cfg.seed,
        sup_martingale=sup_mart,
    )

"""Model definition and structural validation.

A model describes an n-species interacting population whose state X(t) lives
in the positive orthant and evolves as

    dX_i = X_i * [ (b_i + sum_j a_ij X_j) dt
                   + (sum_j sigma_ij X_j) dW
                   + jump terms ],

driven by one scalar Brownian motion shared by all species and by a finite
family of jump marks.  Mark k fires with Poisson rate lambda_k and rescales
each species by (1 + h_i(x)) where h is the mark's jump map evaluated at the
pre-jump state; the compound process is compensated, so the expected jump
drift is folded into the continuous drift by the integrator.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

__all__ = [
    "RAMP_RADIUS",
    "ConstantJump",
    "PolynomialJump",
    "CustomJump",
    "JumpMap",
    "JumpKernel",
    "Model",
    "ProbeGrid",
    "ValidationReport",
    "ConfigError",
    "KernelAdmissibilityError",
    "validate_model",
    "scenario",
    "scenario_names",
    "load_model",
    "model_from_dict",
]

# Radius below which the constant jump map is linearly ramped to zero so that
# h(0) = 0 holds exactly (jumps must vanish at the extinction boundary).
RAMP_RADIUS = 1e-6


class ConfigError(ValueError):
    """Raised for malformed or unknown configuration content."""


class KernelAdmissibilityError(ValueError):
    """Raised when a jump map would drive some component to zero or below.

    Multiplicative jumps require 1 + h_i(x) > 0 for every component; a map
    violating that at a visited state is a modelling error, not a path event.
    """


@dataclass(frozen=True)
class ConstantJump:
    """Jump map with fixed relative sizes away from the origin.

    h_i(x) = c_i * min(1, |x| / RAMP_RADIUS).  The ramp keeps h(0) = 0 exact
    while leaving h == c everywhere a simulation plausibly visits.
    """

    c: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=np.float64)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("constant jump sizes must form a non-empty vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("constant jump sizes must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.c.size

    def __call__(self, x: np.ndarray, norm: float) -> np.ndarray:
        ramp = norm / RAMP_RADIUS
        if ramp > 1.0:
            ramp = 1.0
        return self.c * ramp


@dataclass(frozen=True)
class PolynomialJump:
    """Radially polynomial jump map: h_i(x) = gamma_i * P(|x|).

    P is a scalar polynomial in the state norm, given by ``coeffs`` in
    ascending order of power.  Construction requires degree > 2 with a
    positive leading coefficient and gamma_i > 0 for every species, which is
    the shape needed for jumps to dominate polynomial drift growth.
    """

    gamma: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=np.float64)
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if gamma.ndim != 1 or gamma.size == 0:
            raise ValueError("gamma must be a non-empty vector")
        if np.any(gamma <= 0.0) or not np.all(np.isfinite(gamma)):
            raise ValueError("gamma entries must be positive and finite")
        if coeffs.ndim != 1 or not np.all(np.isfinite(coeffs)):
            raise ValueError("polynomial coefficients must be a finite vector")
        # Strip trailing zeros before judging the degree.
        nz = np.nonzero(coeffs)[0]
        if nz.size == 0:
            raise ValueError("polynomial must not be identically zero")
        degree = int(nz[-1])
        if degree <= 2:
            raise ValueError("polynomial degree must exceed 2")
        if coeffs[degree] <= 0.0:
            raise ValueError("leading polynomial coefficient must be positive")
        coeffs = coeffs[: degree + 1].copy()
        gamma.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.gamma.size

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def radial_value(self, norm: float) -> float:
        """Evaluate P(|x|) by Horner's rule from the leading coefficient."""
        value = float(self.coeffs[-1])
        for j in range(self.coeffs.size - 2, -1, -1):
            value = value * norm + float(self.coeffs[j])
        return value

    def __call__(self, x: np.ndarray, norm: float) -> np.ndarray:
        return self.gamma * self.radial_value(norm)


@dataclass(frozen=True)
class CustomJump:
    """User-supplied jump map ``fn(x, mark) -> h`` for one mark.

    The callable must return a length-n vector with every entry > -1 and must
    vanish at x = 0.  Custom maps are opaque to the compiled kernel, so paths
    using them always run on the pure-Python backend, and they cannot be
    expressed in configuration files.
    """

    fn: Callable[[np.ndarray, int], np.ndarray]
    description: str = ""

    def __call__(self, x: np.ndarray, norm: float, mark: int = 0) -> np.ndarray:
        return np.asarray(self.fn(x, mark), dtype=np.float64)


JumpMap = Union[ConstantJump, PolynomialJump, CustomJump]


@dataclass(frozen=True)
class JumpKernel:
    """Finite family of (rate, jump map) marks driving the jump noise.

    The total rate is finite by construction (finitely many marks, each with
    a finite positive rate), which is what makes the jump clock a compound
    Poisson process with exactly simulable event times.
    """

    marks: tuple[tuple[float, JumpMap], ...] = ()

    def __post_init__(self) -> None:
        marks = tuple((float(rate), jmap) for rate, jmap in self.marks)
        for rate, jmap in marks:
            if not np.isfinite(rate) or rate <= 0.0:
                raise ValueError("every mark rate must be positive and finite")
            if not isinstance(jmap, (ConstantJump, PolynomialJump, CustomJump)):
                raise TypeError(f"unsupported jump map type: {type(jmap).__name__}")
        object.__setattr__(self, "marks", marks)

    @property
    def n_marks(self) -> int:
        return len(self.marks)

    @property
    def rates(self) -> np.ndarray:
        return np.array([rate for rate, _ in self.marks], dtype=np.float64)

    @property
    def total_rate(self) -> float:
        return float(sum(rate for rate, _ in self.marks))

    @property
    def has_custom(self) -> bool:
        return any(isinstance(jmap, CustomJump) for _, jmap in self.marks)

    def h(self, x: np.ndarray, mark: int) -> np.ndarray:
        """Relative jump sizes of ``mark`` at state ``x``."""
        x = np.asarray(x, dtype=np.float64)
        norm = float(np.sqrt(np.dot(x, x)))
        _, jmap = self.marks[mark]
        if isinstance(jmap, CustomJump):
            return jmap(x, norm, mark)
        return jmap(x, norm)

    def h_all(self, x: np.ndarray) -> np.ndarray:
        """Stack of h(x) over marks, shape (n_marks, n)."""
        return np.array([self.h(x, k) for k in range(self.n_marks)])


EMPTY_KERNEL = JumpKernel(())


def _coerce_matrix(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (n, n):
        raise ValueError(f"{name} must have shape ({n}, {n}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _coerce_vector(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class Model:
    """Immutable description of one n-species system.

    Fields
    ------
    n      : number of species
    b      : per-capita intrinsic growth rates, shape (n,)
    A      : interaction matrix, shape (n, n)
    sigma  : Brownian load matrix, shape (n, n); species i is driven by
             (sigma @ x)_i dW with a single shared Brownian motion
    kernel : jump kernel (possibly empty)
    x0     : initial state, shape (n,); positivity is checked by
             validate_model and again at simulation start, not here
    """

    n: int
    b: np.ndarray
    A: np.ndarray
    sigma: np.ndarray
    kernel: JumpKernel = field(default=EMPTY_KERNEL)
    x0: np.ndarray = None

    def __post_init__(self) -> None:
        n = int(self.n)
        if n < 1:
            raise ValueError("n must be at least 1")
        b = _coerce_vector(self.b, n, "b")
        A = _coerce_matrix(self.A, n, "A")
        sigma = _coerce_matrix(self.sigma, n, "sigma")
        x0 = self.x0 if self.x0 is not None else np.ones(n)
        x0 = _coerce_vector(x0, n, "x0")
        for rate, jmap in self.kernel.marks:
            dim = getattr(jmap, "dim", None)
            if dim is not None and dim != n:
                raise ValueError(
                    f"jump map dimension {dim} does not match n = {n}"
                )
        for arr in (b, A, sigma, x0):
            arr.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True)
class ProbeGrid:
    """Deterministic sampling of the positive orthant for validation probes.

    Points are r * d over logarithmically spaced radii r and a fixed number
    of unit directions d drawn once from a seeded generator, so two calls
    with equal parameters probe identical states.
    """

    radii: np.ndarray = field(default_factory=lambda: np.logspace(-3.0, 3.0, 64))
    n_directions: int = 8
    seed: int = 97

    def directions(self, n: int) -> np.ndarray:
        if n == 1:
            return np.ones((1, 1))
        rng = np.random.default_rng(self.seed)
        d = np.abs(rng.standard_normal((self.n_directions, n)))
        d = np.maximum(d, 1e-3)  # keep probes away from the orthant boundary
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def points(self, n: int) -> np.ndarray:
        dirs = self.directions(n)
        pts = self.radii[:, None, None] * dirs[None, :, :]
        return pts.reshape(-1, n)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of structural checks on a model.

    ``h2_holds`` is exact (a sign pattern on sigma); the jump-map checks are
    pointwise over the probe grid and therefore evidence, not proof.
    """

    h2_holds: bool
    h1_pointwise_ok: bool
    h1_violations: tuple[tuple[float, int, int, float], ...]
    zero_state_ok: bool
    lipschitz_probe: dict[float, float]
    x0_positive: bool
    notes: str = ""


def validate_model(model: Model, probe_grid: ProbeGrid | None = None) -> ValidationReport:
    """Check sign structure, jump-map admissibility, and initial state.

    h2_holds requires every diagonal entry of sigma to be positive and every
    off-diagonal entry non-negative.  h1_pointwise_ok requires 1 + h_i(x) > 0
    for every mark and component at every probed state, plus h(0) = 0 exactly.
    The Lipschitz probe estimates, per nested ball radius R, the largest
    observed ratio  sum_k rate_k |h(x,k) - h(y,k)|^2 / |x - y|^2  over probe
    pairs inside the ball — a finite-difference stand-in for the local
    mean-square Lipschitz constant of the jump field.
    """
    grid = probe_grid if probe_grid is not None else ProbeGrid()
    n = model.n
    kernel = model.kernel
    points = grid.points(n)

    violations: list[tuple[float, int, int, float]] = []
    h1_ok = True
    for x in points:
        norm = float(np.linalg.norm(x))
        for k in range(kernel.n_marks):
            h = kernel.h(x, k)
            bad = np.nonzero(1.0 + h <= 0.0)[0]
            for i in bad:
                h1_ok = False
                if len(violations) < 10:
                    violations.append((norm, k, int(i), float(h[i])))

    zero_ok = True
    if kernel.n_marks:
        origin = np.zeros(n)
        for k in range(kernel.n_marks):
            if np.any(kernel.h(origin, k) != 0.0):
                zero_ok = False
                break

    diag = np.diag(model.sigma)
    off = model.sigma - np.diag(diag)
    h2 = bool(np.all(diag > 0.0) and np.all(off >= 0.0))

    lipschitz: dict[float, float] = {}
    if kernel.n_marks:
        rates = kernel.rates
        rng = np.random.default_rng(grid.seed + 1)
        for radius in (1.0, 10.0, 100.0, 1000.0):
            inside = points[np.linalg.norm(points, axis=1) <= radius]
            if len(inside) < 2:
                continue
            worst = 0.0
            n_pairs = min(200, 4 * len(inside))
            idx = rng.integers(0, len(inside), size=(n_pairs, 2))
            pairs = [(inside[a], inside[b]) for a, b in idx if a != b]
            pairs.extend((x, x * (1.0 + 1e-4)) for x in inside)
            for x, y in pairs:
                dx2 = float(np.dot(x - y, x - y))
                if dx2 == 0.0:
                    continue
                dh2 = 0.0
                for k in range(kernel.n_marks):
                    diff = kernel.h(x, k) - kernel.h(y, k)
                    dh2 += float(rates[k]) * float(np.dot(diff, diff))
                worst = max(worst, dh2 / dx2)
            lipschitz[radius] = worst

    x0_pos = bool(np.all(model.x0 > 0.0))
    notes = [] if x0_pos else ["x0 has non-positive components"]
    if not h2:
        notes.append("sigma sign pattern fails (diagonal > 0, off-diagonal >= 0 required)")
    return ValidationReport(
        h2_holds=h2,
        h1_pointwise_ok=bool(h1_ok and zero_ok),
        h1_violations=tuple(violations),
        zero_state_ok=zero_ok,
        lipschitz_probe=lipschitz,
        x0_positive=x0_pos,
        notes="; ".join(notes),
    )


# ---------------------------------------------------------------------------
# Scenario library
# ---------------------------------------------------------------------------

def _scenario_logistic1d() -> dict:
    """Single species, logistic drift, no noise: closed-form sanity baseline."""
    return dict(n=1, b=[1.0], A=[[-1.0]], sigma=[[0.0]], x0=[0.5])


def _scenario_cooperative_blowup() -> dict:
    """Single species with cooperative (superlinear) drift: explodes at ln 2."""
    return dict(n=1, b=[1.0], A=[[1.0]], sigma=[[0.0]], x0=[1.0])


def _scenario_jump_suppressed() -> dict:
    """Cooperative drift tamed by compensated cubic jumps.

    The mark multiplies the state by (1 + |x|^3); the compensated drift the
    integrator carries is -rate * |x|^3, which dominates the quadratic
    cooperative drift at large radius and prevents explosion.
    """
    kernel = JumpKernel(((1.0, PolynomialJump(gamma=[1.0], coeffs=[0.0, 0.0, 0.0, 1.0])),))
    return dict(n=1, b=[1.0], A=[[1.0]], sigma=[[0.0]], kernel=kernel, x0=[1.0])


def _scenario_brownian_suppressed() -> dict:
    """Cooperative two-species drift tamed by state-proportional Brownian noise."""
    kernel = JumpKernel(((1.0, ConstantJump(c=[0.3, -0.2])),))
    return dict(
        n=2,
        b=[1.0, 1.0],
        A=[[0.5, 0.5], [0.5, 0.5]],
        sigma=[[1.0, 0.0], [0.0, 1.0]],
        kernel=kernel,
        x0=[0.5, 0.5],
    )


def _scenario_product_lyapunov() -> dict:
    """Two cooperating species with weak Brownian noise and cubic jumps.

    Exercises the product-form moment machinery: the jump field grows fast
    enough for the fractional-power product moment to stay exponentially
    bounded despite the cooperative drift.
    """
    kernel = JumpKernel(((1.0, PolynomialJump(gamma=[1.0, 1.0], coeffs=[0.0, 0.0, 0.0, 1.0])),))
    return dict(
        n=2,
        b=[1.0, 1.0],
        A=[[0.5, 0.5], [0.5, 0.5]],
        sigma=[[0.2, 0.0], [0.0, 0.2]],
        kernel=kernel,
        x0=[1.0, 1.0],
    )


_SCENARIOS: dict[str, Callable[[], dict]] = {
    "logistic1d": _scenario_logistic1d,
    "cooperative_blowup": _scenario_cooperative_blowup,
    "jump_suppressed": _scenario_jump_suppressed,
    "brownian_suppressed": _scenario_brownian_suppressed,
    "product_lyapunov": _scenario_product_lyapunov,
}


def scenario_names() -> tuple[str, ...]:
    return tuple(sorted(_SCENARIOS))


def scenario(name: str, overrides: dict | None = None) -> Model:
    """Build a named library model, optionally overriding parameters.

    ``overrides`` replaces whole fields (``b``, ``A``, ``sigma``, ``x0``,
    ``kernel``) before construction; unknown keys are rejected.
    """
    try:
        params = _SCENARIOS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; available: {', '.join(scenario_names())}"
        ) from None
    if overrides:
        unknown = set(overrides) - set(params) - {"kernel"}
        if unknown:
            raise ConfigError(f"unknown scenario override keys: {sorted(unknown)}")
        params.update(overrides)
    return Model(**params)


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------

_TOP_KEYS = {"n", "b", "A", "sigma", "x0", "jumps"}
_JUMP_KEYS = {"rate", "kind", "c", "gamma", "poly_coeffs"}


def model_from_dict(doc: dict) -> Model:
    """Build a model from parsed configuration data, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a table")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    for key in ("n", "b", "A", "sigma", "x0"):
        if key not in doc:
            raise ConfigError(f"missing required configuration key: {key!r}")

    marks: list[tuple[float, JumpMap]] = []
    for entry in doc.get("jumps", []):
        if not isinstance(entry, dict):
            raise ConfigError("each jumps entry must be a table")
        unknown = set(entry) - _JUMP_KEYS
        if unknown:
            raise ConfigError(f"unknown jump keys: {sorted(unknown)}")
        kind = entry.get("kind")
        rate = entry.get("rate")
        if rate is None or kind is None:
            raise ConfigError("each jump needs 'rate' and 'kind'")
        if kind == "constant":
            if "c" not in entry:
                raise ConfigError("constant jump needs 'c'")
            if "gamma" in entry or "poly_coeffs" in entry:
                raise ConfigError("constant jump takes only 'c'")
            marks.append((float(rate), ConstantJump(c=entry["c"])))
        elif kind == "poly":
            if "gamma" not in entry or "poly_coeffs" not in entry:
                raise ConfigError("poly jump needs 'gamma' and 'poly_coeffs'")
            if "c" in entry:
                raise ConfigError("poly jump does not take 'c'")
            marks.append(
                (float(rate), PolynomialJump(gamma=entry["gamma"], coeffs=entry["poly_coeffs"]))
            )
        elif kind == "custom":
            raise ConfigError(
                "custom jump maps are code, not data; construct them in Python"
            )
        else:
            raise ConfigError(f"unknown jump kind {kind!r}")

    try:
        return Model(
            n=doc["n"],
            b=doc["b"],
            A=doc["A"],
            sigma=doc["sigma"],
            kernel=JumpKernel(tuple(marks)),
            x0=doc["x0"],
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_model(path) -> Model:
    """Load a model from a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            doc = _toml.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return model_from_dict(doc)

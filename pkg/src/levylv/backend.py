"""Kernel backend selection and model packing.

Two interchangeable path kernels exist: a compiled extension (``_core``) and
a pure-Python reference (``_reference``).  They are bit-identical by
contract, so selection is purely a speed decision: the compiled kernel is
used when it imported successfully and the model contains no custom jump
maps (those are Python callables the C code cannot evaluate).  The
``LEVYLV_BACKEND`` environment variable forces ``python`` or ``compiled``
for benchmarking and debugging.
"""

from __future__ import annotations

import os
import weakref
from dataclasses import dataclass

import numpy as np

from . import _reference
from .model import ConstantJump, CustomJump, Model, PolynomialJump, RAMP_RADIUS

try:
    from . import _core
except ImportError:  # pragma: no cover - depends on build environment
    _core = None

__all__ = ["PackedModel", "pack_model", "kernel_for", "backend_name", "HAVE_COMPILED"]

HAVE_COMPILED = _core is not None

KIND_CONSTANT = 0
KIND_POLY = 1
KIND_CUSTOM = 2


@dataclass(frozen=True)
class PackedModel:
    """Kernel-ready array view of a Model (contiguous float64/int buffers).

    Per mark k: ``kinds[k]`` selects the jump-map formula; constant maps read
    row k of ``cmat``, polynomial maps read row k of ``gmat`` plus the first
    ``pdeg[k]+1`` entries of row k of ``pcoef`` (ascending powers); custom
    maps live in ``custom`` and force the reference kernel.
    """

    n: int
    m: int
    b: np.ndarray
    A: np.ndarray
    sigma: np.ndarray
    rates: np.ndarray
    kinds: np.ndarray
    cmat: np.ndarray
    gmat: np.ndarray
    pcoef: np.ndarray
    pdeg: np.ndarray
    custom: tuple
    total_rate: float
    eps0: float

    @property
    def has_custom(self) -> bool:
        return any(fn is not None for fn in self.custom)


_pack_cache: "weakref.WeakKeyDictionary[Model, PackedModel]" = weakref.WeakKeyDictionary()


def pack_model(model: Model) -> PackedModel:
    """Flatten a Model into contiguous arrays; cached per Model instance."""
    cached = _pack_cache.get(model)
    if cached is not None:
        return cached

    n = model.n
    m = model.kernel.n_marks
    kinds = np.zeros(m, dtype=np.int8)
    cmat = np.zeros((m, n))
    gmat = np.zeros((m, n))
    max_deg = 0
    for _, jmap in model.kernel.marks:
        if isinstance(jmap, PolynomialJump):
            max_deg = max(max_deg, jmap.degree)
    pcoef = np.zeros((m, max_deg + 1))
    pdeg = np.zeros(m, dtype=np.int64)
    custom: list = [None] * m
    for k, (_, jmap) in enumerate(model.kernel.marks):
        if isinstance(jmap, ConstantJump):
            kinds[k] = KIND_CONSTANT
            cmat[k] = jmap.c
        elif isinstance(jmap, PolynomialJump):
            kinds[k] = KIND_POLY
            gmat[k] = jmap.gamma
            pcoef[k, : jmap.coeffs.size] = jmap.coeffs
            pdeg[k] = jmap.degree
        else:
            assert isinstance(jmap, CustomJump)
            kinds[k] = KIND_CUSTOM
            custom[k] = jmap.fn

    packed = PackedModel(
        n=n,
        m=m,
        b=np.ascontiguousarray(model.b),
        A=np.ascontiguousarray(model.A),
        sigma=np.ascontiguousarray(model.sigma),
        rates=np.ascontiguousarray(model.kernel.rates),
        kinds=kinds,
        cmat=cmat,
        gmat=gmat,
        pcoef=pcoef,
        pdeg=pdeg,
        custom=tuple(custom),
        total_rate=model.kernel.total_rate,
        eps0=RAMP_RADIUS,
    )
    _pack_cache[model] = packed
    return packed


def backend_name(packed: PackedModel) -> str:
    """Name of the kernel that will run this model: 'compiled' or 'python'."""
    forced = os.environ.get("LEVYLV_BACKEND", "").strip().lower()
    if forced == "python":
        return "python"
    if forced == "compiled":
        if _core is None:
            raise RuntimeError("LEVYLV_BACKEND=compiled but the extension is not built")
        if packed.has_custom:
            raise RuntimeError("compiled backend cannot run custom jump maps")
        return "compiled"
    if _core is not None and not packed.has_custom:
        return "compiled"
    return "python"


def kernel_for(packed: PackedModel):
    """The run_path callable for this model (see _reference.run_path)."""
    if backend_name(packed) == "compiled":
        return _core.run_path
    return _reference.run_path

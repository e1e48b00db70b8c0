"""
Closed-form proximal operators and a brute-force grid oracle.

For a function h and alpha > 0,

    prox_{alpha h}(x) = argmin_y  h(y) + ||y - x||^2 / (2 alpha).

Every closed form here is checked against :func:`prox_oracle` in the test
suite and by ``proxflow proxtest``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ArgumentError

#: kinds the compiled kernel understands, mapped to their integer codes
KERNEL_CODES = {"zero": 0, "abs": 1, "l1": 1, "huber": 2, "quadratic": 3, "box": 4}

CONVEX_KINDS = frozenset(KERNEL_CODES)


def _check_alpha(alpha):
    if not alpha > 0:
        raise ArgumentError(f"prox parameter alpha must be positive, got {alpha!r}")


# -- closed forms -------------------------------------------------------------

def prox_abs(alpha, x):
    """Soft threshold of a scalar: ``sign(x) * max(|x| - alpha, 0)``."""
    _check_alpha(alpha)
    return float(np.sign(x) * max(abs(x) - alpha, 0.0))


def prox_l1(alpha, x):
    """Componentwise soft threshold, the prox of ``alpha * ||.||_1``."""
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - alpha, 0.0)


def prox_huber(alpha, delta, x):
    """Prox of the Huber function with threshold `delta`, componentwise.

    The Huber function is ``y**2 / 2`` for ``|y| <= delta`` and
    ``delta * |y| - delta**2 / 2`` otherwise. Its prox shrinks by the factor
    ``1 / (1 + alpha)`` in the quadratic zone and shifts by ``alpha * delta``
    in the linear zone; the zones meet at ``|x| = delta * (1 + alpha)``.
    """
    _check_alpha(alpha)
    if not delta > 0:
        raise ArgumentError(f"Huber threshold must be positive, got {delta!r}")
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= delta * (1.0 + alpha),
                   x / (1.0 + alpha),
                   x - alpha * delta * np.sign(x))
    return float(out) if out.ndim == 0 else out


def prox_quadratic(alpha, weight, x):
    """Prox of ``weight/2 * ||y||^2``: a plain shrink by ``1 + alpha*weight``."""
    _check_alpha(alpha)
    if weight < 0:
        raise ArgumentError("quadratic weight must be nonnegative")
    return np.asarray(x, dtype=float) / (1.0 + alpha * weight)


def prox_box(alpha, lo, hi, x):
    """Prox of the indicator of ``[lo, hi]``, i.e. the projection (alpha is unused)."""
    _check_alpha(alpha)
    if not lo <= hi:
        raise ArgumentError("box requires lo <= hi")
    return np.clip(np.asarray(x, dtype=float), lo, hi)


def prox_zero(alpha, x):
    _check_alpha(alpha)
    return np.array(x, dtype=float)


# -- function values ----------------------------------------------------------

def huber_value(delta, y):
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    return np.where(a <= delta, 0.5 * y * y, delta * a - 0.5 * delta * delta)


def box_value(lo, hi, y):
    y = np.asarray(y, dtype=float)
    return np.where((y >= lo) & (y <= hi), 0.0, np.inf)


# -- handles ------------------------------------------------------------------

@dataclass(frozen=True)
class ProxHandle:
    """A nonsmooth block term: its prox and (optionally) its value.

    ``evaluate(alpha, x)`` returns prox_{alpha h}(x) for a vector `x`;
    ``value(y)`` returns h(y), summed over components for separable kinds.
    Kinds other than ``custom`` are convex, so the prox is single-valued.
    For a nonconvex custom handle `evaluate` must return one selection.
    """

    kind: str
    evaluate: Callable[[float, np.ndarray], np.ndarray]
    value: Callable[[np.ndarray], float] | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, alpha, x):
        _check_alpha(alpha)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.atleast_1d(np.asarray(self.evaluate(alpha, x), dtype=float))
        if out.shape != x.shape:
            raise ArgumentError(
                f"prox of kind {self.kind!r} changed shape {x.shape} -> {out.shape}")
        return out

    @property
    def convex(self):
        return self.kind in CONVEX_KINDS

    @property
    def kernel_code(self):
        """``(code, p0, p1)`` for the compiled kernel, or None for custom kinds."""
        if self.kind not in KERNEL_CODES:
            return None
        p = self.params
        if self.kind == "huber":
            return KERNEL_CODES["huber"], float(p["delta"]), 0.0
        if self.kind == "quadratic":
            return KERNEL_CODES["quadratic"], float(p["weight"]), 0.0
        if self.kind == "box":
            return KERNEL_CODES["box"], float(p["lo"]), float(p["hi"])
        return KERNEL_CODES[self.kind], 0.0, 0.0

    def scalar_value(self, y):
        """Per-component value (vectorised over `y`); used by the grid oracle."""
        p = self.params
        y = np.asarray(y, dtype=float)
        if self.kind in ("abs", "l1"):
            return np.abs(y)
        if self.kind == "huber":
            return huber_value(p["delta"], y)
        if self.kind == "quadratic":
            return 0.5 * p["weight"] * y * y
        if self.kind == "box":
            return box_value(p["lo"], p["hi"], y)
        if self.kind == "zero":
            return np.zeros_like(y)
        raise ArgumentError(f"no separable value for kind {self.kind!r}")


def make_prox(kind, **params):
    """Build a :class:`ProxHandle` for one of the built-in kinds.

    Parameters
    ----------
    kind : {"abs", "l1", "huber", "quadratic", "box", "zero"}
    **params
        ``delta`` for huber, ``weight`` for quadratic, ``lo``/``hi`` for box.
    """
    if kind in ("abs", "l1"):
        return ProxHandle(kind, prox_l1, lambda y: float(np.sum(np.abs(y))))
    if kind == "huber":
        delta = float(params.get("delta", 1.0))
        if not delta > 0:
            raise ArgumentError("Huber threshold must be positive")
        return ProxHandle(
            kind,
            lambda a, x: prox_huber(a, delta, x),
            lambda y: float(np.sum(huber_value(delta, y))),
            {"delta": delta},
        )
    if kind == "quadratic":
        weight = float(params.get("weight", 1.0))
        if weight < 0:
            raise ArgumentError("quadratic weight must be nonnegative")
        return ProxHandle(
            kind,
            lambda a, x: prox_quadratic(a, weight, x),
            lambda y: 0.5 * weight * float(np.dot(y, y)),
            {"weight": weight},
        )
    if kind == "box":
        lo, hi = float(params.get("lo", -1.0)), float(params.get("hi", 1.0))
        if not lo <= hi:
            raise ArgumentError("box requires lo <= hi")
        return ProxHandle(
            kind,
            lambda a, x: prox_box(a, lo, hi, x),
            lambda y: float(np.sum(box_value(lo, hi, y))),
            {"lo": lo, "hi": hi},
        )
    if kind == "zero":
        return ProxHandle(kind, prox_zero, lambda y: 0.0)
    raise ArgumentError(f"unknown prox kind {kind!r}")


def custom_prox(evaluate, value=None, **params):
    """Wrap a user-supplied prox (possibly a selection of a set-valued prox)."""
    return ProxHandle("custom", evaluate, value, dict(params))


# -- oracle -------------------------------------------------------------------

def prox_oracle(h_value, alpha, x, lo, hi, step):
    """Brute-force scalar prox: minimise on the grid ``lo, lo+step, ..., <= hi``.

    Ties go to the smallest grid point. `h_value` should accept an array;
    scalar-only callables are vectorised.
    """
    _check_alpha(alpha)
    if not (step > 0 and lo < hi):
        raise ArgumentError("prox_oracle needs lo < hi and step > 0")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    if count < 1:
        raise ArgumentError("empty grid")
    grid = lo + step * np.arange(count)
    try:
        hv = np.asarray(h_value(grid), dtype=float)
        if hv.shape != grid.shape:
            raise TypeError
    except (TypeError, ValueError):
        hv = np.array([h_value(v) for v in grid], dtype=float)
    obj = hv + (grid - x) ** 2 / (2.0 * alpha)
    return float(grid[int(np.argmin(obj))])

"""
Block-structured objectives  Psi(x, y) = f(x) + g(y) + H(x, y).

f and g are nonsmooth (possibly extended-valued, +inf outside their domain)
and accessed through prox handles; H is C^1 with Lipschitz gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ArgumentError, EvaluationError
from .proxlib import ProxHandle


@dataclass(frozen=True)
class PartialLipschitz:
    """Lipschitz constants of grad_x H(., y) (uniform in y) and grad_y H(x, .)."""

    l_x: float
    l_y: float

    def __post_init__(self):
        if not (self.l_x > 0 and self.l_y > 0):
            raise ArgumentError("partial Lipschitz constants must be positive")


# -- smooth couplings ---------------------------------------------------------

@dataclass(frozen=True)
class ResidualSquare:
    """H(z) = weight * (offset - <coeffs, z>)^2 with z = (x, y).

    All the built-in experiments use this form. The gradient is
    ``-2 * weight * r * coeffs`` with ``r = offset - <coeffs, z>``, whose
    Lipschitz constant is ``2 |weight| ||coeffs||^2``.
    """

    weight: float
    offset: float
    coeffs: tuple

    def residual(self, x, y):
        a = self.coeffs
        n = len(x)
        r = self.offset
        for i in range(n):
            r -= a[i] * x[i]
        for j in range(len(y)):
            r -= a[n + j] * y[j]
        return r

    def value(self, x, y):
        r = self.residual(x, y)
        return self.weight * r * r

    def grad_x(self, x, y):
        s = -2.0 * self.weight * self.residual(x, y)
        return np.array([s * c for c in self.coeffs[:len(x)]])

    def grad_y(self, x, y):
        s = -2.0 * self.weight * self.residual(x, y)
        return np.array([s * c for c in self.coeffs[len(x):]])

    @property
    def lipschitz(self):
        return 2.0 * abs(self.weight) * float(np.dot(self.coeffs, self.coeffs))


@dataclass(frozen=True)
class Quadratic:
    """H(z) = 1/2 z^T Q z + q^T z + const with symmetric Q; L = ||Q||_2."""

    Q: np.ndarray
    q: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
            raise ArgumentError("Q must be a symmetric square matrix")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(-1))

    def value(self, x, y):
        z = np.concatenate([x, y])
        return float(0.5 * z @ self.Q @ z + self.q @ z + self.const)

    def _grad(self, x, y):
        z = np.concatenate([x, y])
        return self.Q @ z + self.q

    def grad_x(self, x, y):
        return self._grad(x, y)[:len(x)]

    def grad_y(self, x, y):
        return self._grad(x, y)[len(x):]

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.Q, 2))


# -- the problem --------------------------------------------------------------

@dataclass(frozen=True)
class BlockProblem:
    """Immutable description of Psi = f + g + H.

    `lipschitz` is a declared constant L > 0, a :class:`PartialLipschitz`,
    or the string ``"estimate"``; in the last case `estimate_box` must be
    given and L is estimated once here via :func:`estimate_lipschitz`.
    `coupling`, when it is a :class:`ResidualSquare` or :class:`Quadratic`
    and both prox handles are built-in kinds, lets the compiled kernel
    integrate the problem.
    """

    f_value: Callable
    g_value: Callable
    f_prox: ProxHandle
    g_prox: ProxHandle
    h_value: Callable
    h_grad_x: Callable
    h_grad_y: Callable
    lipschitz: object
    dims: tuple
    name: str = "custom"
    coupling: object = None
    estimate_box: object = None
    estimate_samples: int = 200
    L: float | None = field(default=None, init=False)
    partial: PartialLipschitz | None = field(default=None, init=False)

    def __post_init__(self):
        n, m = self.dims
        if int(n) != n or int(m) != m or n < 1 or m < 1:
            raise ArgumentError(f"dims must be positive integers, got {self.dims!r}")
        object.__setattr__(self, "dims", (int(n), int(m)))
        lip = self.lipschitz
        if isinstance(lip, PartialLipschitz):
            object.__setattr__(self, "partial", lip)
        elif isinstance(lip, str):
            if lip != "estimate":
                raise ArgumentError(f"unknown lipschitz mode {lip!r}")
            if self.estimate_box is None:
                raise ArgumentError("lipschitz='estimate' needs an estimate_box")
            est = estimate_lipschitz(self, self.estimate_box, self.estimate_samples)
            object.__setattr__(self, "L", est)
        else:
            lip = float(lip)
            if not lip > 0:
                raise ArgumentError("declared Lipschitz constant must be positive")
            object.__setattr__(self, "L", lip)

    @classmethod
    def from_parts(cls, f, g, coupling, dims, lipschitz=None, name="custom", **kw):
        """Assemble a problem from two prox handles and a coupling object.

        If `lipschitz` is omitted the coupling's exact constant is used.
        """
        if lipschitz is None:
            lipschitz = coupling.lipschitz
        return cls(
            f_value=f.value, g_value=g.value, f_prox=f, g_prox=g,
            h_value=coupling.value, h_grad_x=coupling.grad_x, h_grad_y=coupling.grad_y,
            lipschitz=lipschitz, dims=dims, name=name, coupling=coupling, **kw,
        )

    def with_lipschitz(self, lipschitz):
        return replace(self, lipschitz=lipschitz)

    def split(self, z):
        z = np.asarray(z, dtype=float)
        n = self.dims[0]
        return z[:n], z[n:]

    def check_point(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape != (self.dims[0],) or y.shape != (self.dims[1],):
            raise ArgumentError(
                f"point has shapes {x.shape}, {y.shape}; problem dims are {self.dims}")
        return x, y

    def grad(self, x, y):
        return np.concatenate([self.h_grad_x(x, y), self.h_grad_y(x, y)])

    @property
    def kernel_ready(self):
        return (isinstance(self.coupling, (ResidualSquare, Quadratic))
                and self.f_prox.kernel_code is not None
                and self.g_prox.kernel_code is not None)


def psi_value(problem, x, y):
    """Psi(x, y) = f(x) + g(y) + H(x, y); +inf when either block is out of domain."""
    x, y = problem.check_point(x, y)
    fv = float(problem.f_value(x))
    gv = float(problem.g_value(y))
    hv = float(problem.h_value(x, y))
    return fv + gv + hv


# -- gradient and Lipschitz services ----------------------------------------------

@dataclass(frozen=True)
class GradCheckReport:
    error_x: float
    error_y: float
    tol: float

    @property
    def max_error(self):
        return max(self.error_x, self.error_y)

    @property
    def passed(self):
        return self.max_error <= self.tol


def _fd_gradient(h, x, y, step):
    gx = np.empty_like(x)
    gy = np.empty_like(y)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = step
        hp, hm = h(x + e, y), h(x - e, y)
        if not (math.isfinite(hp) and math.isfinite(hm)):
            raise EvaluationError("non-finite H near the check point", (x, y))
        gx[i] = (hp - hm) / (2 * step)
    for j in range(len(y)):
        e = np.zeros_like(y)
        e[j] = step
        hp, hm = h(x, y + e), h(x, y - e)
        if not (math.isfinite(hp) and math.isfinite(hm)):
            raise EvaluationError("non-finite H near the check point", (x, y))
        gy[j] = (hp - hm) / (2 * step)
    return gx, gy


def grad_check(problem, point, step=1e-6, tol=1e-5):
    """Compare the analytic partial gradients of H against central differences.

    The per-block error is ``||g - g_fd|| / max(||g||, ||g_fd||, 1)``, i.e.
    relative for gradients of size >= 1 and absolute below that.
    """
    if not 0 < step <= 1e-2:
        raise ArgumentError("finite-difference step must lie in (0, 1e-2]")
    x, y = problem.check_point(*point)
    fx, fy = _fd_gradient(problem.h_value, x, y, step)
    ax = np.asarray(problem.h_grad_x(x, y), dtype=float)
    ay = np.asarray(problem.h_grad_y(x, y), dtype=float)

    def err(a, b):
        return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1.0))

    return GradCheckReport(err(ax, fx), err(ay, fy), tol)


def lipschitz_from_points(problem, points):
    """Largest difference quotient ||grad H(z1) - grad H(z2)|| / ||z1 - z2||
    over all pairs of the given points (rows of `points`)."""
    pts = np.asarray(points, dtype=float)
    n = problem.dims[0]
    grads = np.array([problem.grad(p[:n], p[n:]) for p in pts])
    best = 0.0
    for i in range(1, len(pts)):
        dz = np.linalg.norm(pts[:i] - pts[i], axis=1)
        dg = np.linalg.norm(grads[:i] - grads[i], axis=1)
        ok = dz > 0
        if ok.any():
            best = max(best, float(np.max(dg[ok] / dz[ok])))
    return best


def sample_box(box, samples, seed=0):
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ArgumentError("box must be a sequence of (lo, hi) pairs")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ArgumentError("degenerate box: every coordinate needs lo < hi")
    rng = np.random.default_rng(seed)
    return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((samples, len(box)))


def estimate_lipschitz(problem, box, samples=200, seed=0, safety=1.1):
    """Estimate the Lipschitz constant of grad H by sampling pairs in `box`.

    Returns the largest sampled difference quotient times `safety`. This is
    a lower-bound style estimate and is only meant for problems registered
    with ``lipschitz="estimate"``.
    """
    if samples < 2:
        raise ArgumentError("need at least two samples")
    box = np.asarray(box, dtype=float)
    if box.shape[0] != sum(problem.dims):
        raise ArgumentError("box dimension does not match n + m")
    pts = sample_box(box, samples, seed)
    return safety * lipschitz_from_points(problem, pts)

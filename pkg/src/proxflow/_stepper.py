"""
Pure-Python time steppers (explicit Euler, classical RK4, Dormand-Prince 5(4)).

These work with any right-hand side callable and are the fallback when the
compiled kernel is unavailable. The arithmetic is ordered the same way as in
``_kernels.pyx`` so both backends agree to rounding.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EvaluationError, ProxflowError

STATIONARY, TIME_LIMIT, ERROR = "stationary", "time-limit", "error"

# Dormand-Prince 5(4) tableau
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)

SAFETY, MIN_FACTOR, MAX_FACTOR = 0.9, 0.2, 5.0


def _sumsq(v):
    # plain left-to-right sum (no BLAS/FMA) so the compiled kernel can match it
    s = 0.0
    for a in v.tolist():
        s += a * a
    return s


def _norm(v):
    return math.sqrt(_sumsq(v))


def _rms(v):
    return math.sqrt(_sumsq(v) / len(v))


class _Recorder:
    def __init__(self, record_every):
        self.every = record_every
        self.times, self.states, self.derivs = [], [], []
        self.last = -1

    def push(self, k, t, z, d, force=False):
        if (force or k % self.every == 0) and k != self.last:
            self.times.append(t)
            self.states.append(z.copy())
            self.derivs.append(d.copy())
            self.last = k


def _safe_rhs(rhs, z):
    d = rhs(z)
    if not np.all(np.isfinite(d)):
        raise EvaluationError("non-finite right-hand side", z)
    return d


def run_fixed(rhs, z0, method, step, t_max, stationary_tol, record_every):
    """Fixed-step integration on the grid t_k = k * step (last step clipped)."""
    z = np.array(z0, dtype=float)
    rec = _Recorder(record_every)
    n_steps = int(math.ceil(t_max / step - 1e-9))
    status, message = TIME_LIMIT, ""
    t = 0.0
    k = 0
    try:
        d = _safe_rhs(rhs, z)
        while True:
            if _norm(d) < stationary_tol:
                rec.push(k, t, z, d, force=True)
                status = STATIONARY
                break
            if k >= n_steps:
                rec.push(k, t, z, d, force=True)
                break
            rec.push(k, t, z, d)
            t_next = min((k + 1) * step, t_max)
            h = t_next - t
            if method == "euler":
                z = z + h * d
            else:
                k1 = d
                k2 = _safe_rhs(rhs, z + h / 2 * k1)
                k3 = _safe_rhs(rhs, z + h / 2 * k2)
                k4 = _safe_rhs(rhs, z + h * k3)
                z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = t_next
            k += 1
            d = _safe_rhs(rhs, z)
    except ProxflowError as exc:
        status, message = ERROR, str(exc)
    return rec, status, message


def _initial_step(rhs, z, d, rtol, atol, t_max):
    scale = atol + rtol * np.abs(z)
    d0, d1 = _rms(z / scale), _rms(d / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_max)
    d_new = _safe_rhs(rhs, z + h0 * d)
    d2 = _rms((d_new - d) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t_max)


def run_adaptive(rhs, z0, rtol, atol, t_max, stationary_tol, record_every, h_min=1e-14,
                 h_max=math.inf):
    """Dormand-Prince 5(4) with the usual RMS error norm and FSAL."""
    z = np.array(z0, dtype=float)
    rec = _Recorder(record_every)
    status, message = TIME_LIMIT, ""
    t = 0.0
    k = 0
    try:
        d = _safe_rhs(rhs, z)
        h = _initial_step(rhs, z, d, rtol, atol, t_max) if _norm(d) >= stationary_tol else 0.0
        rejected = False
        while True:
            if _norm(d) < stationary_tol:
                rec.push(k, t, z, d, force=True)
                status = STATIONARY
                break
            if t >= t_max:
                rec.push(k, t, z, d, force=True)
                break
            rec.push(k, t, z, d)
            if h < h_min:
                raise EvaluationError(f"step size underflow at t={t:.6g}", z)
            h = min(h, h_max, t_max - t)
            k1 = d
            k2 = _safe_rhs(rhs, z + h * (A21 * k1))
            k3 = _safe_rhs(rhs, z + h * (A31 * k1 + A32 * k2))
            k4 = _safe_rhs(rhs, z + h * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = _safe_rhs(rhs, z + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = _safe_rhs(rhs, z + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
            z_new = z + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
            k7 = _safe_rhs(rhs, z_new)
            err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            scale = atol + rtol * np.maximum(np.abs(z), np.abs(z_new))
            err = _rms(err_vec / scale)
            if err <= 1.0:
                factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
                if rejected:
                    factor = min(factor, 1.0)
                t_new = t + h
                if t_max - t_new < 1e-12 * max(1.0, t_max):
                    t_new = t_max
                t, z, d = t_new, z_new, k7
                h *= factor
                k += 1
                rejected = False
            else:
                h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
                rejected = True
    except ProxflowError as exc:
        status, message = ERROR, str(exc)
    return rec, status, message

"""
Post-processing of trajectories: the Lyapunov functional, its decrease,
the subgradient bound, criticality of limit points, arc length and
Lojasiewicz-exponent rate fitting.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .dynamics import subgradient_bound_constant
from .errors import ArgumentError, InsufficientDataError
from .problem import psi_value

__all__ = [
    "lyapunov_value", "LyapunovSeries", "monitor_decrease", "subgradient_bound_constant",
    "SubgradientSeries", "subgradient_residual", "CritReport", "verify_critical",
    "arc_length", "arc_length_series", "RateFit", "fit_rate", "classify_theta",
]

EPS = np.finfo(float).eps
THETA_TOL = 0.05


# -- Lyapunov functional ------------------------------------------------------

def lyapunov_value(problem, xy, uv, params):
    """Psi(x, y) + 1/2 (g1 L ||x - u||^2 + g2 L ||y - v||^2); +inf if Psi is."""
    x, y = problem.check_point(*xy)
    u, v = problem.check_point(*uv)
    psi = psi_value(problem, x, y)
    if math.isinf(psi):
        return psi
    dx, dy = x - u, y - v
    return psi + 0.5 * (params.c1 * float(dx @ dx) + params.c2 * float(dy @ dy))


def arc_length_series(times, speed):
    """sigma(t_i) = int_{t_i}^{t_end} ||z'||, trapezoidal on the samples."""
    times = np.asarray(times, dtype=float)
    speed = np.asarray(speed, dtype=float)
    pieces = 0.5 * (speed[1:] + speed[:-1]) * np.diff(times)
    sigma = np.zeros(len(times))
    sigma[:-1] = np.cumsum(pieces[::-1])[::-1]
    return sigma


def arc_length(traj, t):
    """Trapezoidal tail integral of ||z'|| from `t` to the final sample."""
    times = traj.times
    if not times[0] <= t <= times[-1]:
        raise ArgumentError(f"t={t} outside the sampled range [{times[0]}, {times[-1]}]")
    sigma = arc_length_series(times, traj.speed)
    i = int(np.searchsorted(times, t, side="right")) - 1
    if i >= len(times) - 1:
        return 0.0
    # partial first interval, with the speed interpolated linearly
    t0, t1 = times[i], times[i + 1]
    s0, s1 = traj.speed[i], traj.speed[i + 1]
    st = s0 + (s1 - s0) * (t - t0) / (t1 - t0)
    return float(sigma[i + 1] + 0.5 * (st + s1) * (t1 - t))


# -- decrease monitor -----------------------------------------------------------

@dataclass
class LyapunovSeries:
    """Lyapunov values along a trajectory plus the quantities derived from them.

    `dissipation[i]` is ``min(m1, m2) * int_0^{t_i} ||z'||^2`` (trapezoidal).
    `bound_status` is ``"ok"``, ``"violated"`` or ``"inapplicable"`` (the
    latter when the stepsize condition fails). `xi` holds the norms of the
    explicit subgradient element when a problem was supplied.
    """

    times: np.ndarray
    values: np.ndarray
    violations: np.ndarray
    dissipation: np.ndarray
    sigma: np.ndarray
    bound_status: str
    bound_violations: np.ndarray
    tol: float
    m_min: float
    xi: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def nonincreasing(self):
        return len(self.violations) == 0

    def as_dict(self):
        return {
            "samples": int(len(self.times)),
            "tol": self.tol,
            "m_min": self.m_min,
            "decrease_violations": int(len(self.violations)),
            "max_increase": float(np.max(np.diff(self.values), initial=0.0)),
            "integrated_bound": self.bound_status,
            "integrated_bound_violations": int(len(self.bound_violations)),
            "notes": list(self.notes),
        }


def monitor_decrease(traj, params, report, tol=1e-6, problem=None):
    """Check that the Lyapunov values do not increase by more than `tol`.

    When the stepsize condition in `report` holds, also checks

        H(t2) - H(t1) <= -min(m1, m2) int_{t1}^{t2} ||z'||^2 dt + tol (t2 - t1)

    for every pair of samples. Checking consecutive pairs is enough: the
    left side minus the right side is a telescoping sum.
    """
    if not tol >= 0:
        raise ArgumentError("tol must be nonnegative")
    t = traj.times
    H = np.asarray(traj.lyap, dtype=float)
    speed2 = traj.speed ** 2
    m_min = min(report.m1, report.m2)
    diss = np.zeros(len(t))
    if len(t) > 1:
        diss[1:] = m_min * np.cumsum(0.5 * (speed2[1:] + speed2[:-1]) * np.diff(t))
    increases = np.diff(H)
    violations = np.flatnonzero(increases > tol) + 1
    notes = []
    if report.satisfied:
        G = H + diss - tol * t
        bound_viol = np.flatnonzero(np.diff(G) > 0) + 1
        status = "ok" if len(bound_viol) == 0 else "violated"
    else:
        bound_viol = np.zeros(0, dtype=int)
        status = "inapplicable"
        notes.append("stepsize condition not satisfied: integrated decrease bound not asserted")
    xi = subgradient_residual(traj, problem, params).norms if problem is not None else None
    return LyapunovSeries(t, H, violations, diss, arc_length_series(t, traj.speed), status,
                          bound_viol, tol, m_min, xi, notes)


# -- subgradient bound ----------------------------------------------------------

@dataclass
class SubgradientSeries:
    """Norm of the explicit element of the subdifferential of H at each sample
    against ``bound_constant * ||z'||``."""

    norms: np.ndarray
    bounds: np.ndarray
    bound_constant: float
    rtol: float

    @property
    def holds(self):
        return bool(np.all(self.norms <= self.bounds * (1.0 + self.rtol)))

    @property
    def worst_ratio(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(self.bounds > 0, self.norms / self.bounds, 0.0)
        return float(np.max(r, initial=0.0))


def subgradient_residual(traj, problem, params, rtol=1e-12):
    """Evaluate the subgradient element at every sample.

    With ``w = z' + z`` the element is

        (grad_x H(w) - grad_x H(x, (1-mu) w_y + mu y),
         grad_y H(w) - grad_y H((1-lam) w_x + lam x, y),
         -L g1 x', -L g2 y').
    """
    n = problem.dims[0]
    lam, mu = params.lam, params.mu
    c1, c2 = params.c1, params.c2
    k = len(traj)
    norms = np.empty(k)
    for i in range(k):
        z, d = traj.states[i], traj.derivs[i]
        x, y, dx, dy = z[:n], z[n:], d[:n], d[n:]
        wx, wy = x + dx, y + dy
        ex = (np.asarray(problem.h_grad_x(wx, wy))
              - np.asarray(problem.h_grad_x(x, (1.0 - mu) * wy + mu * y)))
        ey = (np.asarray(problem.h_grad_y(wx, wy))
              - np.asarray(problem.h_grad_y((1.0 - lam) * wx + lam * x, y)))
        norms[i] = math.sqrt(float(ex @ ex) + float(ey @ ey)
                             + c1 * c1 * float(dx @ dx) + c2 * c2 * float(dy @ dy))
    const = subgradient_bound_constant(params)
    return SubgradientSeries(norms, const * traj.speed, const, rtol)


# -- criticality ------------------------------------------------------------------

@dataclass(frozen=True)
class CritReport:
    point: tuple
    residual: float
    tol: float
    probe_step: float
    tail_distance: float | None = None

    @property
    def is_critical(self):
        return self.residual < self.tol

    def as_dict(self):
        return {
            "point": [np.asarray(p).tolist() for p in self.point],
            "residual": self.residual,
            "tol": self.tol,
            "probe_step": self.probe_step,
            "is_critical": self.is_critical,
            "tail_distance": self.tail_distance,
        }


def verify_critical(problem, point, probe_step=1e-3, tol=1e-6, traj=None, tail_fraction=0.1):
    """Prox fixed-point residual of a candidate critical point.

    residual = ||z - (prox_{s f}(x - s grad_x H), prox_{s g}(y - s grad_y H))|| / s
    with ``s = probe_step``. If a trajectory is given, the largest distance
    of its final `tail_fraction` (in time) to the point is reported as well.
    """
    if not probe_step > 0:
        raise ArgumentError("probe_step must be positive")
    x, y = problem.check_point(*point)
    s = probe_step
    px = problem.f_prox(s, x - s * np.asarray(problem.h_grad_x(x, y)))
    py = problem.g_prox(s, y - s * np.asarray(problem.h_grad_y(x, y)))
    r = np.concatenate([x - px, y - py])
    residual = float(np.linalg.norm(r)) / s
    dist = None
    if traj is not None:
        t = traj.times
        tail = t >= t[-1] - tail_fraction * (t[-1] - t[0])
        zbar = np.concatenate([x, y])
        dist = float(np.max(np.linalg.norm(traj.states[tail] - zbar, axis=1)))
    return CritReport((x, y), residual, tol, s, dist)


# -- rates ------------------------------------------------------------------------

def classify_theta(theta, tol=THETA_TOL):
    if abs(theta - 0.5) <= tol:
        return "exponential"
    return "finite-time" if theta < 0.5 else "polynomial"


@dataclass
class RateFit:
    """Fitted Lojasiewicz exponent and decay model.

    `theta` comes from the slope of log(H - H_inf) against log ||xi||
    (slope = 1/theta). The arc length sigma(t) is fitted both as
    ``alpha * exp(-beta t)`` and ``(gamma t + delta)^(-p)``; `sigma_model`
    names the one with the smaller log-residual.
    """

    theta: float
    rate_class: str
    residual: float
    samples: int
    exp_fit: tuple | None
    exp_residual: float
    power_fit: tuple | None
    power_residual: float
    sigma_model: str
    notes: list = field(default_factory=list)

    @property
    def constants(self):
        """(alpha, beta) for the exponential class, (gamma, delta) otherwise."""
        if self.rate_class == "exponential":
            return self.exp_fit
        return None if self.power_fit is None else self.power_fit[:2]

    @property
    def consistent(self):
        """Whether the sigma model agrees with the theta class."""
        want = "exponential" if self.rate_class == "exponential" else "power"
        return self.sigma_model == want

    def as_dict(self):
        return {
            "theta": self.theta,
            "rate_class": self.rate_class,
            "residual": self.residual,
            "samples": self.samples,
            "exponential": None if self.exp_fit is None else
            {"alpha": self.exp_fit[0], "beta": self.exp_fit[1], "residual": self.exp_residual},
            "power": None if self.power_fit is None else
            {"gamma": self.power_fit[0], "delta": self.power_fit[1],
             "exponent": self.power_fit[2], "residual": self.power_residual},
            "sigma_model": self.sigma_model,
            "consistent": self.consistent,
            "notes": list(self.notes),
        }


def _fit_exponential(t, s):
    slope, icpt = np.polyfit(t, np.log(s), 1)
    res = float(np.sqrt(np.mean((np.log(s) - (icpt + slope * t)) ** 2)))
    return (float(math.exp(icpt)), float(-slope)), res


def _fit_power(t, s):
    # log s = -p log(t + t0) + c, i.e. s = (gamma t + delta)^(-p)
    logs = np.log(s)
    span = t[-1] - t[0]

    def model(tt, c, p, log_shift):
        return c - p * np.log(tt - t[0] + np.exp(log_shift))

    best = None
    for shift in (1e-2 * span, 1e-1 * span, span, 10 * span):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OptimizeWarning)
                popt, _ = curve_fit(model, t, logs, p0=(logs[0], 1.0, math.log(shift)),
                                    maxfev=5000)
        except (RuntimeError, ValueError):
            continue
        res = float(np.sqrt(np.mean((logs - model(t, *popt)) ** 2)))
        if np.isfinite(res) and (best is None or res < best[1]):
            best = (popt, res)
    if best is None:
        return None, math.inf
    (c, p, log_shift), res = best
    t0 = math.exp(log_shift) - t[0]
    if p <= 0:
        return (math.nan, math.nan, float(p)), res
    gamma = math.exp(-c / p)
    return (float(gamma), float(gamma * t0), float(p)), res


def fit_rate(series, limit_value=None, tail_fraction=0.8, min_samples=10):
    """Estimate the Lojasiewicz exponent on the tail of a converged run.

    Parameters
    ----------
    series : LyapunovSeries
        Must carry `xi` (run :func:`monitor_decrease` with a problem).
    limit_value : float, optional
        H_inf; defaults to the final Lyapunov value.
    tail_fraction : float
        Fraction of the time span (counted from the end) used for fitting.
    """
    if not 0 < tail_fraction < 1:
        raise ArgumentError("tail_fraction must lie in (0, 1)")
    if series.xi is None:
        raise ArgumentError("series has no subgradient norms; pass problem to monitor_decrease")
    t = np.asarray(series.times, dtype=float)
    H = np.asarray(series.values, dtype=float)
    xi = np.asarray(series.xi, dtype=float)
    sigma = np.asarray(series.sigma, dtype=float)
    h_inf = float(H[-1]) if limit_value is None else float(limit_value)
    tail = t >= t[-1] - tail_fraction * (t[-1] - t[0])
    gap = H - h_inf
    floor = 1e2 * EPS * max(1.0, abs(h_inf))
    use = tail & (gap > floor) & (xi > 0) & np.isfinite(gap)
    notes = []
    if use.sum() < min_samples:
        raise InsufficientDataError(
            f"only {int(use.sum())} usable tail samples (need {min_samples})")
    lx, ly = np.log(xi[use]), np.log(gap[use])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (icpt + slope * lx)) ** 2)))
    if slope <= 1.0:
        theta = 1.0 - 1e-12
        notes.append(f"regression slope {slope:.4g} <= 1; theta clipped below 1")
    else:
        theta = float(1.0 / slope)

    s_use = tail & (sigma > floor)
    exp_fit, exp_res, pow_fit, pow_res = None, math.inf, None, math.inf
    if s_use.sum() >= 3:
        ts, ss = t[s_use], sigma[s_use]
        exp_fit, exp_res = _fit_exponential(ts, ss)
        pow_fit, pow_res = _fit_power(ts, ss)
    else:
        notes.append("too few positive arc-length samples for the decay cross-check")
    model = "exponential" if exp_res <= pow_res else "power"
    return RateFit(theta, classify_theta(theta), resid, int(use.sum()), exp_fit, exp_res,
                   pow_fit, pow_res, model, notes)

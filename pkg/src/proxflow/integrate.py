"""
Time integration of the dynamical system and its step-one discretizations.

`integrate` dispatches to the compiled kernel when the problem uses only
built-in prox kinds and couplings and ``mu = 1``; otherwise it runs the
pure-Python stepper on :func:`proxflow.dynamics.make_rhs`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend, _stepper
from .dynamics import DynParams, make_rhs
from .errors import ArgumentError
from .problem import Quadratic, ResidualSquare, psi_value

METHODS = ("euler", "rk4", "adaptive")
REASONS = ("stationary", "time-limit", "oscillation", "error")


@dataclass(frozen=True)
class SolverConfig:
    """Integrator settings.

    Parameters
    ----------
    method : {"euler", "rk4", "adaptive"}
        Fixed-step Euler / RK4 on the grid ``k * step``, or Dormand-Prince 5(4).
    step : float
        Step length of the fixed-step methods.
    rtol, atol : float
        Tolerances of the adaptive method.
    h_max : float
        Largest adaptive step. Near an equilibrium the error estimate
        vanishes and unbounded steps drift to the edge of the stability
        region, where ``||z'||`` stalls around ``rtol * |z|``.
    t_max : float
        Final time.
    stationary_tol : float
        Stop as soon as ``||z'|| < stationary_tol``.
    record_every : int
        Keep every k-th accepted step (the first and last are always kept).
    fp_tol, fp_max_iter, damping
        Fixed-point settings for ``mu < 1`` and the partial-Lipschitz variant.
    """

    method: str = "rk4"
    step: float = 1e-3
    rtol: float = 1e-8
    atol: float = 1e-10
    h_max: float = 0.5
    t_max: float = 100.0
    stationary_tol: float = 1e-9
    record_every: int = 1
    fp_tol: float = 1e-12
    fp_max_iter: int = 200
    damping: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ArgumentError(f"unknown method {self.method!r}; choose from {METHODS}")
        for name in ("step", "rtol", "atol", "h_max", "t_max", "stationary_tol", "fp_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ArgumentError(f"{name} must be a positive finite number, got {v!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ArgumentError("record_every must be a positive integer")
        if not 0 < self.damping <= 1:
            raise ArgumentError("damping must lie in (0, 1]")

    @classmethod
    def acceptance(cls, t_max=100.0, **kw):
        """Adaptive solver with rtol 1e-8, atol 1e-10 (used by the acceptance runs)."""
        return cls(method="adaptive", t_max=t_max, **kw)


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution.

    ``states`` and ``derivs`` are ``(k, n + m)`` arrays; ``derivs`` holds the
    right-hand side at each sample. ``psi`` is Psi at ``z' + z`` and
    ``lyap`` the Lyapunov functional H[(z' + z), z].
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    psi: np.ndarray
    lyap: np.ndarray
    terminated: str
    dims: tuple
    params: DynParams
    config: SolverConfig
    backend: str = "python"
    message: str = ""
    period: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def x(self):
        return self.states[:, :self.dims[0]]

    @property
    def y(self):
        return self.states[:, self.dims[0]:]

    @property
    def xdot(self):
        return self.derivs[:, :self.dims[0]]

    @property
    def ydot(self):
        return self.derivs[:, self.dims[0]:]

    @property
    def speed(self):
        return np.linalg.norm(self.derivs, axis=1)

    @property
    def final_state(self):
        z = self.states[-1]
        return z[:self.dims[0]].copy(), z[self.dims[0]:].copy()

    @property
    def converged(self):
        return self.terminated == "stationary"

    def with_oscillation(self, period):
        """Copy relabelled as an oscillation with the given period estimate."""
        return replace(self, terminated="oscillation", period=period)


# -- Lyapunov evaluation along samples ----------------------------------------

def _psi_rows(problem, W):
    n = problem.dims[0]
    h = problem.coupling
    if problem.kernel_ready:
        # vectorised over samples for the built-in kinds
        X, Y = W[:, :n], W[:, n:]
        fv = np.sum(problem.f_prox.scalar_value(X), axis=1)
        gv = np.sum(problem.g_prox.scalar_value(Y), axis=1)
        if isinstance(h, ResidualSquare):
            r = h.offset - W @ np.asarray(h.coeffs, dtype=float)
            hv = h.weight * r * r
        else:
            hv = 0.5 * np.einsum("ij,jk,ik->i", W, h.Q, W) + W @ h.q + h.const
        return fv + gv + hv
    return np.array([psi_value(problem, w[:n], w[n:]) for w in W])


def _lyap_samples(problem, params, states, derivs):
    n = problem.dims[0]
    with np.errstate(invalid="ignore", over="ignore"):
        psi = _psi_rows(problem, states + derivs)
        dx, dy = derivs[:, :n], derivs[:, n:]
        kin = 0.5 * (params.c1 * np.sum(dx * dx, axis=1) + params.c2 * np.sum(dy * dy, axis=1))
    return psi, psi + kin


# -- kernel plumbing ----------------------------------------------------------

def _kernel_args(problem):
    (fc, f0, f1), (gc, g0, g1) = problem.f_prox.kernel_code, problem.g_prox.kernel_code
    h = problem.coupling
    empty = np.zeros(0)
    if isinstance(h, ResidualSquare):
        return (fc, f0, f1, gc, g0, g1, 0, float(h.weight), float(h.offset),
                np.ascontiguousarray(h.coeffs, dtype=float), empty, empty)
    assert isinstance(h, Quadratic)
    return (fc, f0, f1, gc, g0, g1, 1, 0.0, 0.0, empty,
            np.ascontiguousarray(h.Q, dtype=float).ravel(), np.ascontiguousarray(h.q, dtype=float))


def kernel_eligible(problem, params):
    return problem.kernel_ready and params.mu == 1 and params.partial is None


_KERNEL_STATUS = {
    0: ("stationary", ""),
    1: ("time-limit", ""),
    2: ("error", "non-finite right-hand side"),
    3: ("error", "step size underflow"),
}


def _run_kernel(problem, params, z0, cfg):
    n, m = problem.dims
    a1, a2 = params.alphas
    times, states, derivs, status = _backend._kernels.integrate_builtin(
        z0, n, m, *_kernel_args(problem), a1, a2, params.lam, cfg.method, cfg.step,
        cfg.rtol, cfg.atol, cfg.t_max, cfg.stationary_tol, int(cfg.record_every),
        h_max=cfg.h_max)
    reason, msg = _KERNEL_STATUS[status]
    return times, states, derivs, reason, msg


def _run_python(problem, params, z0, cfg):
    rhs = make_rhs(problem, params, cfg.fp_tol, cfg.fp_max_iter, cfg.damping)
    if cfg.method == "adaptive":
        rec, status, msg = _stepper.run_adaptive(rhs, z0, cfg.rtol, cfg.atol, cfg.t_max,
                                                 cfg.stationary_tol, cfg.record_every,
                                                 h_max=cfg.h_max)
    else:
        rec, status, msg = _stepper.run_fixed(rhs, z0, cfg.method, cfg.step, cfg.t_max,
                                              cfg.stationary_tol, cfg.record_every)
    N = len(z0)
    times = np.array(rec.times, dtype=float)
    states = np.array(rec.states, dtype=float).reshape(-1, N)
    derivs = np.array(rec.derivs, dtype=float).reshape(-1, N)
    return times, states, derivs, status, msg


def integrate(problem, params, x0, y0, config=None, backend=None):
    """Integrate from ``(x0, y0)`` until ``t_max`` or stationarity.

    Parameters
    ----------
    problem : BlockProblem
    params : DynParams
    x0, y0 : array_like
        Initial blocks; shapes must match ``problem.dims``.
    config : SolverConfig, optional
    backend : {"auto", "compiled", "python"}, optional
        The compiled kernel is used only for built-in problems with ``mu = 1``.

    Returns
    -------
    Trajectory
        On an evaluation error the samples recorded so far are kept and
        ``terminated == "error"``.
    """
    cfg = config or SolverConfig()
    x0, y0 = problem.check_point(x0, y0)
    z0 = np.concatenate([x0, y0])
    if not np.all(np.isfinite(z0)):
        raise ArgumentError("initial point must be finite")
    chosen = _backend.resolve(backend)
    if chosen == "compiled" and not kernel_eligible(problem, params):
        if backend == "compiled":
            raise ArgumentError("the compiled kernel needs built-in prox kinds, a "
                                "ResidualSquare/Quadratic coupling and mu = 1")
        chosen = "python"
    run = _run_kernel if chosen == "compiled" else _run_python
    times, states, derivs, reason, msg = run(problem, params, z0, cfg)
    if len(times) == 0:
        # failed before the first sample could be taken
        times, states, derivs = np.zeros(1), z0[None, :].copy(), np.full((1, len(z0)), np.nan)
    psi, lyap = _lyap_samples(problem, params, states, derivs)
    return Trajectory(times, states, derivs, psi, lyap, reason, problem.dims, params, cfg,
                      chosen, msg)


# -- discrete algorithms ------------------------------------------------------

def _discrete(problem, gamma1, gamma2, x0, y0, iters, lam):
    if int(iters) != iters or iters < 0:
        raise ArgumentError("iters must be a nonnegative integer")
    L = problem.L if problem.L is not None else 1.0
    params = DynParams(lam, 1.0, gamma1, gamma2, L)
    x, y = problem.check_point(x0, y0)
    rhs = make_rhs(problem, params)
    z = np.concatenate([x, y])
    out = [z]
    for _ in range(int(iters)):
        w = rhs(z)
        n = problem.dims[0]
        nxt = np.empty_like(z)
        nxt[:n] = w[:n] + z[:n]
        nxt[n:] = w[n:] + z[n:]
        z = nxt
        out.append(z)
    return np.array(out)


def palm_discrete(problem, gamma1, gamma2, x0, y0, iters):
    """PALM iterates (rows ``(x^k, y^k)``, ``k = 0..iters``).

    x^{k+1} = prox_{f/(g1 L)}(x^k - grad_x H(x^k, y^k) / (g1 L)),
    y^{k+1} = prox_{g/(g2 L)}(y^k - grad_y H(x^{k+1}, y^k) / (g2 L)).
    """
    return _discrete(problem, gamma1, gamma2, x0, y0, iters, lam=0.0)


def fb_discrete(problem, gamma1, gamma2, x0, y0, iters):
    """Preconditioned forward-backward iterates: both blocks use (x^k, y^k)."""
    return _discrete(problem, gamma1, gamma2, x0, y0, iters, lam=1.0)


# -- oscillation ----------------------------------------------------------------

def _segment_distance(p, a, b):
    """Distance from point p to each segment [a_i, b_i]."""
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    s = np.einsum("ij,ij->i", p - a, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dd > 0, np.clip(s / dd, 0.0, 1.0), 0.0)
    q = a + s[:, None] * d
    return np.linalg.norm(p - q, axis=1), s


def detect_oscillation(traj, window=20.0, tol=1e-3, leave=None, spread=0.25):
    """Decide whether a trajectory has settled into a periodic cycle.

    True when ``||z'||`` stays above the stationary tolerance over the final
    `window` and the final state is revisited (distance to the sampled
    polyline below `tol`) at least twice after leaving its `leave`-neighbourhood,
    with successive revisit intervals within relative `spread` of their mean.

    Returns
    -------
    (bool, float or None)
        Flag and the mean revisit interval.
    """
    t = traj.times
    if len(t) < 3 or t[-1] - t[0] < 2 * window:
        return False, None
    tail = t >= t[-1] - window
    if not np.all(traj.speed[tail] > traj.config.stationary_tol):
        return False, None
    z = traj.states
    p = z[-1]
    if leave is None:
        extent = float(np.max(np.ptp(z, axis=0)))
        leave = max(10 * tol, 0.1 * extent)
    dist, s = _segment_distance(p, z[:-1], z[1:])
    seg_t = t[:-1] + s * (t[1:] - t[:-1])
    # walk backwards from the end: the final sample is inside by construction
    visits = []
    inside = True
    best_d, best_t = math.inf, t[-1]
    for i in range(len(dist) - 1, -1, -1):
        if inside:
            if dist[i] < best_d:
                best_d, best_t = dist[i], seg_t[i]
            if dist[i] > leave:
                visits.append(best_t)
                inside = False
        elif dist[i] < tol:
            inside = True
            best_d, best_t = dist[i], seg_t[i]
    visits = visits[::-1]
    if len(visits) < 3:
        return False, None
    gaps = np.diff(visits)
    mean = float(np.mean(gaps))
    if mean <= 0 or (np.max(gaps) - np.min(gaps)) > spread * mean:
        return False, None
    return True, mean

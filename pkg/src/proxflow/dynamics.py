"""
Right-hand side of the forward-backward proximal dynamical system

    x' + x = prox_{f/(g1 L)}( x - grad_x H(x, (1-mu)(y'+y) + mu y) / (g1 L) )
    y' + y = prox_{g/(g2 L)}( y - grad_y H((1-lam)(x'+x) + lam x, y) / (g2 L) )

together with the closed-form constants of the stepsize condition.

With ``mu = 1`` the first line is explicit and the second consumes its
result, giving the Lipschitz operator Gamma. For ``mu < 1`` both lines are
coupled and solved by damped Gauss-Seidel fixed-point iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ConvergenceError, EvaluationError
from .problem import PartialLipschitz


@dataclass(frozen=True)
class DynParams:
    """Coupling and stepsize parameters.

    The experiments quote ``c1 = gamma1 * L`` and ``c2 = gamma2 * L``;
    use :meth:`from_c` for that form. `beta` overrides the Lipschitz constant
    of Gamma used by :func:`check_condition` (only needed for ``mu < 1``,
    where no closed form is available). `partial` switches to the
    partial-Lipschitz variant (requires ``lam = mu = 0``).
    """

    lam: float
    mu: float
    gamma1: float
    gamma2: float
    L: float
    partial: PartialLipschitz | None = None
    beta: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0 and 0.0 <= self.mu <= 1.0):
            raise ArgumentError("lambda and mu must lie in [0, 1]")
        if not (self.gamma1 > 0 and self.gamma2 > 0 and self.L > 0):
            raise ArgumentError("gamma1, gamma2 and L must be positive")
        if self.partial is not None and (self.lam != 0 or self.mu != 0):
            raise ArgumentError("the partial-Lipschitz variant needs lambda = mu = 0")

    @classmethod
    def from_c(cls, lam, mu, c1, c2, L, **kw):
        if not (c1 > 0 and c2 > 0 and L > 0):
            raise ArgumentError("c1, c2 and L must be positive")
        return cls(lam, mu, c1 / L, c2 / L, L, **kw)

    @property
    def c1(self):
        return self.gamma1 * self.L

    @property
    def c2(self):
        return self.gamma2 * self.L

    @property
    def alphas(self):
        """Prox parameters (= gradient step lengths) of the two blocks."""
        if self.partial is not None:
            return (1.0 / (self.gamma1 * self.partial.l_x),
                    1.0 / (self.gamma2 * self.partial.l_y))
        return 1.0 / self.c1, 1.0 / self.c2


# -- constants ----------------------------------------------------------------

def beta_constant(lam, gamma1, gamma2):
    """Lipschitz constant of Gamma:
    sqrt(6 + 4/g1^2 + (4 + 24(1-lam)^2)/g2^2 + 16(1-lam)^2/(g1^2 g2^2))."""
    if not 0.0 <= lam <= 1.0:
        raise ArgumentError("lambda must lie in [0, 1]")
    if not (gamma1 > 0 and gamma2 > 0):
        raise ArgumentError("gamma1 and gamma2 must be positive")
    s = (1.0 - lam) ** 2
    g1, g2 = gamma1 * gamma1, gamma2 * gamma2
    return math.sqrt(6.0 + 4.0 / g1 + (4.0 + 24.0 * s) / g2 + 16.0 * s / (g1 * g2))


def m_cap(lam, mu):
    """max{sqrt(1 + lam + mu + lam^2), sqrt(1 + lam + mu + mu^2)}."""
    return math.sqrt(1.0 + lam + mu + max(lam, mu) ** 2)


def m_cap_unrooted(lam, mu):
    return 1.0 + lam + mu + max(lam, mu) ** 2


def subgradient_bound_constant(params):
    """L * sqrt(max{1 + g1^2 + lam^2, 1 + g2^2 + mu^2})."""
    p = params
    return p.L * math.sqrt(max(1.0 + p.gamma1 ** 2 + p.lam ** 2,
                               1.0 + p.gamma2 ** 2 + p.mu ** 2))


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the stepsize condition check.

    `margin` is ``min(g1, g2) - (beta * M + (lam + mu)/2)`` with the
    square-rooted M; `satisfied` is ``margin > 0``. The unrooted M and the
    experiment-section inequality in c-form are evaluated for reference only.
    """

    beta: float
    m_cap: float
    m1: float
    m2: float
    margin: float
    m_cap_unrooted: float
    margin_unrooted: float
    experiment_lhs: float
    experiment_rhs: float
    partial_margins: tuple | None = None
    beta_source: str = "closed-form"
    notes: list = field(default_factory=list)

    @property
    def satisfied(self):
        return self.margin > 0

    @property
    def experiment_satisfied(self):
        return self.experiment_lhs > self.experiment_rhs

    def as_dict(self):
        return {
            "beta": self.beta,
            "beta_source": self.beta_source,
            "M": self.m_cap,
            "m1": self.m1,
            "m2": self.m2,
            "margin": self.margin,
            "satisfied": self.satisfied,
            "M_unrooted": self.m_cap_unrooted,
            "margin_unrooted": self.margin_unrooted,
            "experiment_form": {
                "lhs": self.experiment_lhs,
                "rhs": self.experiment_rhs,
                "satisfied": self.experiment_satisfied,
            },
            "partial_margins": self.partial_margins,
            "notes": list(self.notes),
        }

    def format(self):
        lines = [
            f"beta(lambda, gamma1, gamma2) = {self.beta:.12g}  [{self.beta_source}]",
            f"M (square-root form)         = {self.m_cap:.12g}",
            f"m1 = {self.m1:.12g}   m2 = {self.m2:.12g}",
            f"condition margin             = {self.margin:.12g}  -> "
            f"{'SATISFIED' if self.satisfied else 'NOT satisfied'}",
            f"M without roots              = {self.m_cap_unrooted:.12g}  "
            f"(margin {self.margin_unrooted:.12g}, reference only)",
            f"experiment-section c-form    : {self.experiment_lhs:.12g} > "
            f"{self.experiment_rhs:.12g} -> "
            f"{'holds' if self.experiment_satisfied else 'fails'} (reference only)",
        ]
        if self.partial_margins is not None:
            lines.append(f"partial-Lipschitz margins    = {self.partial_margins[0]:.12g}, "
                         f"{self.partial_margins[1]:.12g}")
        lines.extend(self.notes)
        return "\n".join(lines)


def check_condition(params):
    """Evaluate the stepsize condition (never solved for gamma, only checked)."""
    p = params
    notes = []
    if p.beta is not None:
        beta, source = float(p.beta), "user-supplied"
    else:
        beta, source = beta_constant(p.lam, p.gamma1, p.gamma2), "closed-form"
        if p.mu < 1:
            notes.append("mu < 1: closed-form beta is only proven for mu = 1; "
                         "pass DynParams(beta=...) to override")
    M = m_cap(p.lam, p.mu)
    half = 0.5 * (p.lam + p.mu)
    m1 = p.L * (p.gamma1 - beta * M - half)
    m2 = p.L * (p.gamma2 - beta * M - half)
    gmin = min(p.gamma1, p.gamma2)
    margin = gmin - (beta * M + half)
    Mu = m_cap_unrooted(p.lam, p.mu)
    margin_u = gmin - (beta * Mu + half)

    # c-form exactly as printed in the experiments, kept verbatim
    c1, c2, L, lam = p.c1, p.c2, p.L, p.lam
    s = (1.0 - lam) ** 2
    root = math.sqrt(6.0 + 4.0 / (c1 * c1 * L * L) + (4.0 + 24.0 * s) / (c2 * c2 * L * L)
                     + 16.0 * s / (c1 * c1 * c2 * c2 * L ** 4))
    exp_lhs = min(c1 * L, c2 * L)
    exp_rhs = root * (1.0 + lam + lam * lam) + lam / 2.0

    partial = None
    if p.partial is not None:
        lx, ly = p.partial.l_x, p.partial.l_y
        big = max(lx, ly)
        partial = (p.gamma1 - big * beta / lx, p.gamma2 - big * beta / ly)
    return ConditionReport(beta, M, m1, m2, margin, Mu, margin_u, exp_lhs, exp_rhs,
                           partial, source, notes)


# -- right-hand sides ---------------------------------------------------------

def _finite(arr, what, state):
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"non-finite {what}", state)
    return arr


def _x_line(problem, x, y_arg, alpha):
    g = _finite(np.asarray(problem.h_grad_x(x, y_arg), dtype=float), "grad_x H", (x, y_arg))
    return _finite(problem.f_prox(alpha, x - alpha * g), "prox of f", (x, y_arg)) - x


def _y_line(problem, x_arg, y, alpha):
    g = _finite(np.asarray(problem.h_grad_y(x_arg, y), dtype=float), "grad_y H", (x_arg, y))
    return _finite(problem.g_prox(alpha, y - alpha * g), "prox of g", (x_arg, y)) - y


def gamma_rhs(state, problem, params):
    """Gamma(x, y) = (u, v) for ``mu = 1``; v is computed from the new u."""
    if params.mu != 1:
        raise ArgumentError("gamma_rhs is the mu = 1 system; use implicit_rhs")
    x, y = problem.check_point(*state)
    a1, a2 = params.alphas
    lam = params.lam
    u = _x_line(problem, x, y, a1)
    v = _y_line(problem, (1.0 - lam) * (u + x) + lam * x, y, a2)
    return u, v


def _coupled(x, y, problem, a1, a2, lam, mu, tol, max_iter, damping):
    # start from the mu = 1 point, then Gauss-Seidel sweeps
    u = _x_line(problem, x, y, a1)
    v = _y_line(problem, (1.0 - lam) * (u + x) + lam * x, y, a2)
    change = math.inf
    for _ in range(max_iter):
        u_new = _x_line(problem, x, (1.0 - mu) * (v + y) + mu * y, a1)
        u_next = u + damping * (u_new - u)
        v_new = _y_line(problem, (1.0 - lam) * (u_next + x) + lam * x, y, a2)
        v_next = v + damping * (v_new - v)
        change = math.sqrt(float(np.sum((u_next - u) ** 2) + np.sum((v_next - v) ** 2)))
        u, v = u_next, v_next
        if change < tol:
            return u, v
    raise ConvergenceError(
        f"fixed-point iteration did not converge in {max_iter} sweeps "
        f"(last change {change:.3e}); try larger stepsize parameters or damping < 1",
        residual=change)


def implicit_rhs(state, problem, params, tol=1e-12, max_iter=200, damping=1.0):
    """Solve both coupled lines for (u, v) when ``mu < 1``.

    Delegates to :func:`gamma_rhs` when ``mu = 1``.
    """
    if params.mu == 1:
        return gamma_rhs(state, problem, params)
    if not 0 < damping <= 1:
        raise ArgumentError("damping must lie in (0, 1]")
    x, y = problem.check_point(*state)
    a1, a2 = params.alphas
    return _coupled(x, y, problem, a1, a2, params.lam, params.mu, tol, max_iter, damping)


def palm_variant_rhs(state, problem, params, partial=None, tol=1e-12, max_iter=200,
                     damping=1.0):
    """Partial-Lipschitz variant (lam = mu = 0) with steps 1/(g1 L_x), 1/(g2 L_y).

    The first line reads grad_x H(x, y' + y), so both lines are coupled.
    """
    partial = partial or params.partial or problem.partial
    if partial is None:
        raise ArgumentError("palm_variant_rhs needs partial Lipschitz constants")
    if params.lam != 0 or params.mu != 0:
        raise ArgumentError("the partial-Lipschitz variant needs lambda = mu = 0")
    x, y = problem.check_point(*state)
    a1 = 1.0 / (params.gamma1 * partial.l_x)
    a2 = 1.0 / (params.gamma2 * partial.l_y)
    return _coupled(x, y, problem, a1, a2, 0.0, 0.0, tol, max_iter, damping)


def inclusion_residual(state, uv, problem, params, alphas=None):
    """Norm of the mismatch when (u, v) is substituted back into both lines."""
    x, y = problem.check_point(*state)
    u, v = (np.atleast_1d(np.asarray(w, dtype=float)) for w in uv)
    a1, a2 = alphas if alphas is not None else params.alphas
    lam, mu = params.lam, params.mu
    ru = u - _x_line(problem, x, (1.0 - mu) * (v + y) + mu * y, a1)
    rv = v - _y_line(problem, (1.0 - lam) * (u + x) + lam * x, y, a2)
    return math.sqrt(float(np.sum(ru ** 2) + np.sum(rv ** 2)))


def make_rhs(problem, params, tol=1e-12, max_iter=200, damping=1.0):
    """Flat-vector right-hand side ``z -> z'`` for the integrators."""
    n = problem.dims[0]

    if params.partial is not None:
        def step(x, y):
            return palm_variant_rhs((x, y), problem, params, None, tol, max_iter, damping)
    elif params.mu == 1:
        def step(x, y):
            return gamma_rhs((x, y), problem, params)
    else:
        def step(x, y):
            return implicit_rhs((x, y), problem, params, tol, max_iter, damping)

    def rhs(z):
        u, v = step(z[:n], z[n:])
        return np.concatenate([u, v])

    return rhs

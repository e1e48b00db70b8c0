import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxflow import get_preset
from proxflow.analysis import (LyapunovSeries, arc_length, arc_length_series, classify_theta,
                               fit_rate, lyapunov_value, monitor_decrease,
                               subgradient_bound_constant, subgradient_residual,
                               verify_critical)
from proxflow.dynamics import DynParams, check_condition
from proxflow.errors import ArgumentError, InsufficientDataError
from proxflow.integrate import SolverConfig, integrate
from proxflow.presets import zero_problem
from proxflow.problem import BlockProblem, Quadratic
from proxflow.proxlib import make_prox

ACC = SolverConfig.acceptance()


def ex1_run(lam, gamma=None, c=1.0, start=(1.0, 0.5), cfg=ACC):
    pb = get_preset("example1")
    p = DynParams(lam, 1.0, gamma, gamma, pb.L) if gamma else \
        DynParams.from_c(lam, 1.0, c, c, pb.L)
    return pb, p, integrate(pb, p, *start, cfg)


def test_lyapunov_hand_value():
    pb = get_preset("example1")
    p = DynParams.from_c(0.5, 1.0, 1.0, 1.0, 4.0)
    assert lyapunov_value(pb, (0.0, 0.5), (0.0, 0.0), p) == pytest.approx(0.875, abs=1e-15)


@given(x=st.floats(-3, 3), y=st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_lyapunov_equals_psi_on_diagonal(x, y):
    from proxflow.problem import psi_value
    pb = get_preset("example2")
    p = DynParams.from_c(0.5, 1.0, 0.3, 0.3, pb.L)
    assert lyapunov_value(pb, (x, y), (x, y), p) == psi_value(pb, x, y)


def test_lyapunov_infinite():
    h = Quadratic(np.eye(2), np.zeros(2))
    pb = BlockProblem.from_parts(make_prox("box", lo=0, hi=1), make_prox("zero"), h, (1, 1))
    assert lyapunov_value(pb, (5.0, 0.0), (0.0, 0.0), DynParams(0, 1, 1, 1, 1)) == math.inf


def test_trajectory_lyap_matches_pointwise():
    pb, p, tr = ex1_run(0.5)
    for i in (0, 5, len(tr) - 1):
        z, d = tr.states[i], tr.derivs[i]
        val = lyapunov_value(pb, (z[:1] + d[:1], z[1:] + d[1:]), (z[:1], z[1:]), p)
        assert tr.lyap[i] == pytest.approx(val, rel=1e-14, abs=1e-15)


def test_monitor_condition_satisfying_run():
    pb, p, tr = ex1_run(0.9, gamma=8.0, cfg=SolverConfig.acceptance(t_max=400))
    rep = check_condition(p)
    assert rep.satisfied
    s = monitor_decrease(tr, p, rep, 1e-6, pb)
    assert s.nonincreasing and s.bound_status == "ok"
    assert np.all(np.diff(s.sigma) <= 0) and s.sigma[-1] == 0.0


def test_monitor_example1_lambda_09():
    pb, p, tr = ex1_run(0.9)
    s = monitor_decrease(tr, p, check_condition(p), 1e-6)
    assert len(s.violations) == 0
    assert s.bound_status == "inapplicable" and s.notes


def test_monitor_stationary_start():
    pb, p, tr = ex1_run(0.5, start=(0.25, 0.25))
    s = monitor_decrease(tr, p, check_condition(p))
    assert len(s.violations) == 0 and np.ptp(s.values) == 0


def test_monitor_small_c_inapplicable():
    pb, p, tr = ex1_run(0.2, c=0.5)
    s = monitor_decrease(tr, p, check_condition(p))
    assert s.bound_status == "inapplicable"


def test_monitor_flags_increase():
    pb, p, tr = ex1_run(0.5)
    from dataclasses import replace
    bumped = tr.lyap.copy()
    bumped[3] = bumped[2] + 1e-3
    s = monitor_decrease(replace(tr, lyap=bumped), p, check_condition(p), 1e-6)
    assert 3 in s.violations


def test_subgradient_constants():
    assert subgradient_bound_constant(DynParams(0, 0, 1, 1, 1)) == pytest.approx(math.sqrt(2))
    assert subgradient_bound_constant(DynParams(1, 1, 2, 1, 4)) == pytest.approx(4 * math.sqrt(6))


@pytest.mark.parametrize("lam,c", [(0.1, 1.0), (0.5, 1.0), (0.9, 1.0), (0.2, 0.5)])
def test_subgradient_bound_along_run(lam, c):
    pb, p, tr = ex1_run(lam, c=c)
    sub = subgradient_residual(tr, pb, p)
    assert sub.holds and sub.worst_ratio <= 1 + 1e-12


def test_subgradient_zero_problem():
    pb = zero_problem()
    p = DynParams(0.3, 1.0, 2.0, 3.0, 1.0)
    tr = integrate(pb, p, 1.0, 1.0, SolverConfig(t_max=1.0))
    from dataclasses import replace
    d = np.array([[0.5, -0.25]])
    tr1 = replace(tr, derivs=d, states=tr.states[:1], times=tr.times[:1])
    sub = subgradient_residual(tr1, pb, p)
    assert sub.norms[0] == pytest.approx(math.hypot(2 * 0.5, 3 * 0.25))
    assert sub.holds


def test_verify_critical_examples():
    pb = get_preset("example1")
    assert verify_critical(pb, (0.25, 0.25)).residual < 1e-10
    rep = verify_critical(pb, (1.0, 1.0))
    assert not rep.is_critical and rep.residual > 1.0
    # smooth quadratic: minimiser of 1/2 z'Qz + q'z
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    q = np.array([1.0, -1.0])
    zq = np.linalg.solve(Q, -q)
    pq = BlockProblem.from_parts(make_prox("zero"), make_prox("zero"), Quadratic(Q, q), (1, 1))
    assert verify_critical(pq, (zq[:1], zq[1:])).residual < 1e-10
    # residual -> ||grad|| away from the minimiser
    r = verify_critical(pq, ([0.0], [0.0]), probe_step=1e-6).residual
    assert r == pytest.approx(np.linalg.norm(q), rel=1e-9)
    with pytest.raises(ArgumentError):
        verify_critical(pb, (0.0, 0.0), probe_step=0.0)


def test_verify_critical_tail_distance():
    pb, p, tr = ex1_run(0.5)
    rep = verify_critical(pb, tr.final_state, traj=tr)
    assert rep.is_critical and rep.tail_distance < 1e-2


def test_example2_candidates():
    # hand check with H = -(1 - x - y)^2 / 5: at (5/2, 1) the gradient of H is
    # (-1, -1), cancelled by sign(x) = 1 and Huber'(1) = 1; at (-1/2, 1) it is
    # (1/5, 1/5), which sign(x) = -1 does not cancel
    pb = get_preset("example2")
    assert verify_critical(pb, (0.0, -2 / 3)).residual < 1e-10
    assert verify_critical(pb, (2.5, 1.0)).residual < 1e-10
    assert verify_critical(pb, (-0.5, 1.0)).residual > 1e-3


def test_arc_length():
    pb, p, tr = ex1_run(0.5)
    assert arc_length(tr, tr.times[-1]) == 0.0
    sig = arc_length_series(tr.times, tr.speed)
    assert arc_length(tr, 0.0) == pytest.approx(sig[0])
    assert np.all(np.diff(sig) <= 0)
    end = tr.states[-1]
    dist = np.linalg.norm(tr.states - end, axis=1)
    assert np.all(dist <= sig + 1e-9)
    mid = 0.5 * (tr.times[3] + tr.times[4])
    assert sig[4] <= arc_length(tr, mid) <= sig[3]
    with pytest.raises(ArgumentError):
        arc_length(tr, -1.0)


def _series(t, gap, xi, sigma):
    z = np.zeros(len(t))
    return LyapunovSeries(t, gap, z.astype(int), z, sigma, "ok", z.astype(int), 1e-6, 1.0, xi)


def test_fit_rate_exponential():
    t = np.linspace(0, 10, 200)
    f = fit_rate(_series(t, np.exp(-2 * t), np.exp(-t), np.exp(-t)), 0.0, 0.9)
    assert abs(f.theta - 0.5) <= 0.02 and f.rate_class == "exponential"
    assert f.sigma_model == "exponential" and f.consistent
    assert f.constants[1] == pytest.approx(1.0, rel=1e-6)


def test_fit_rate_recovers_sigma_decay_constant():
    t = np.linspace(0, 10, 200)
    f = fit_rate(_series(t, np.exp(-2 * t), np.exp(-t), 3 * np.exp(-2 * t)), 0.0, 0.9)
    assert f.constants == pytest.approx((3.0, 2.0), rel=1e-6)


def test_fit_rate_polynomial():
    t = np.linspace(0, 100, 400)
    # theta = 3/4: gap^theta ~ xi, sigma ~ (t + 1)^(-(1 - theta)/(2 theta - 1))
    f = fit_rate(_series(t, (1 + t) ** -2.0, (1 + t) ** -1.5, (1 + t) ** -0.5), 0.0, 0.9)
    assert abs(f.theta - 0.75) <= 0.05 and f.rate_class == "polynomial"
    assert f.sigma_model == "power" and f.consistent
    gamma, delta = f.constants
    assert gamma == pytest.approx(1.0, rel=1e-4) and delta == pytest.approx(1.0, rel=1e-4)


def test_fit_rate_finite_time():
    t = np.linspace(0, 9.9, 200)
    f = fit_rate(_series(t, (10 - t) ** 2.0, (10 - t) ** 0.5, (10 - t) ** 1.5), 0.0, 0.9)
    assert abs(f.theta - 0.25) <= 0.05 and f.rate_class == "finite-time"


@given(theta=st.floats(0.3, 0.9), k=st.floats(0.5, 3.0))
@settings(max_examples=30, deadline=None)
def test_fit_rate_recovers_theta(theta, k):
    # gap = s^(1/theta), xi = k s for a decaying parameter s
    t = np.linspace(0, 20, 300)
    s = np.exp(-0.3 * t)
    f = fit_rate(_series(t, s ** (1 / theta), k * s, s), 0.0, 0.9)
    assert abs(f.theta - theta) <= 0.05
    assert f.rate_class == classify_theta(f.theta)


def test_fit_rate_errors():
    t = np.linspace(0, 1, 8)
    with pytest.raises(InsufficientDataError):
        fit_rate(_series(t, np.exp(-t), np.exp(-t), np.exp(-t)), 0.0, 0.9)
    t = np.linspace(0, 10, 100)
    with pytest.raises(ArgumentError):
        fit_rate(_series(t, np.exp(-t), np.exp(-t), np.exp(-t)), 0.0, 1.0)
    s = _series(t, np.exp(-t), np.exp(-t), np.exp(-t))
    s.xi = None
    with pytest.raises(ArgumentError):
        fit_rate(s)


def test_fit_rate_excludes_noise_floor():
    t = np.linspace(0, 10, 100)
    gap = np.exp(-2 * t)
    gap[-30:] = 1e-17
    f = fit_rate(_series(t, gap, np.exp(-t), np.exp(-t)), 0.0, 0.9)
    assert f.samples <= 70 and abs(f.theta - 0.5) < 0.02


@pytest.mark.parametrize("lam", [0.1, 0.5, 0.9])
def test_example1_rate_is_exponential(lam):
    pb, p, tr = ex1_run(lam)
    f = fit_rate(monitor_decrease(tr, p, check_condition(p), 1e-6, pb))
    assert f.rate_class == "exponential" and 0.4 <= f.theta <= 0.6


def test_classify_theta():
    assert classify_theta(0.5) == "exponential"
    assert classify_theta(0.2) == "finite-time"
    assert classify_theta(0.8) == "polynomial"

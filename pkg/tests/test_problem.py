import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxflow import get_preset, make_prox
from proxflow.errors import ArgumentError, EvaluationError
from proxflow.presets import zero_problem
from proxflow.problem import (BlockProblem, PartialLipschitz, Quadratic, ResidualSquare,
                              estimate_lipschitz, grad_check, lipschitz_from_points, psi_value,
                              sample_box)


@pytest.mark.parametrize("x,y,expected", [
    (0.0, 0.5, 0.75),
    (0.0, 0.0, 1.0),
    (1.0, 0.5, 1.75),
])
def test_psi_example1(x, y, expected):
    assert psi_value(get_preset("example1"), x, y) == pytest.approx(expected, abs=1e-15)


def test_psi_example2_candidate():
    # |0| + Huber_2(-2/3) - (1 + 2/3 - 0)^2 / 5
    expected = 0.5 * (2 / 3) ** 2 - (5 / 3) ** 2 / 5
    assert psi_value(get_preset("example2"), 0.0, -2 / 3) == pytest.approx(expected)


def test_psi_infinite_outside_box():
    h = ResidualSquare(1.0, 0.0, (1.0, 1.0))
    pb = BlockProblem.from_parts(make_prox("box", lo=0, hi=1), make_prox("zero"), h, (1, 1))
    assert psi_value(pb, 2.0, 0.0) == np.inf


def test_declared_lipschitz_constants():
    assert get_preset("example1").L == 4.0
    assert get_preset("example1-2d").L == 8.0
    assert get_preset("example2").L == pytest.approx(0.8)
    assert ResidualSquare(1.0, 1.0, (1.0, 1.0)).lipschitz == 4.0
    Q = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert Quadratic(Q, np.zeros(2)).lipschitz == pytest.approx(3.0)


@pytest.mark.parametrize("name", ["example1", "example1-2d", "example2", "example2-alt"])
def test_grad_check_presets(name):
    pb = get_preset(name)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.normal(size=pb.dims[0])
        y = rng.normal(size=pb.dims[1])
        rep = grad_check(pb, (x, y))
        assert rep.passed, rep


def test_grad_check_detects_wrong_gradient():
    h = ResidualSquare(1.0, 1.0, (1.0, 1.0))
    pb = BlockProblem(h.value, h.value, make_prox("abs"), make_prox("abs"),
                      lambda x, y: h.value(x, y), lambda x, y: 2 * h.grad_x(x, y), h.grad_y,
                      4.0, (1, 1))
    assert not grad_check(pb, ([0.3], [0.1])).passed


def test_grad_check_errors():
    pb = get_preset("example1")
    with pytest.raises(ArgumentError):
        grad_check(pb, ([0.0], [0.0]), step=0.1)
    with pytest.raises(ArgumentError):
        grad_check(pb, ([0.0, 1.0], [0.0]))
    bad = BlockProblem(lambda x: 0.0, lambda y: 0.0, make_prox("zero"), make_prox("zero"),
                       lambda x, y: np.nan, lambda x, y: x, lambda x, y: y, 1.0, (1, 1))
    with pytest.raises(EvaluationError):
        grad_check(bad, ([0.0], [0.0]))


def test_estimate_lipschitz_quadratic():
    Q = np.array([[3.0, 1.0], [1.0, 2.0]])
    h = Quadratic(Q, np.array([1.0, -1.0]))
    pb = BlockProblem.from_parts(make_prox("zero"), make_prox("zero"), h, (1, 1),
                                 lipschitz="estimate", estimate_box=[(-1, 1), (-1, 1)])
    exact = np.linalg.norm(Q, 2)
    assert 0.9 * exact <= pb.L / 1.1 <= exact + 1e-12


def test_lipschitz_from_points_lower_bound():
    pb = get_preset("example1")
    pts = sample_box([(-1, 1), (-1, 1)], 50, seed=3)
    est = lipschitz_from_points(pb, pts)
    assert est <= pb.L + 1e-12
    # the extreme direction (1, 1) attains L
    assert lipschitz_from_points(pb, [[0, 0], [1, 1]]) == pytest.approx(4.0)


def test_problem_validation():
    h = ResidualSquare(1.0, 1.0, (1.0, 1.0))
    with pytest.raises(ArgumentError):
        BlockProblem.from_parts(make_prox("abs"), make_prox("abs"), h, (1, 1), lipschitz=0.0)
    with pytest.raises(ArgumentError):
        BlockProblem.from_parts(make_prox("abs"), make_prox("abs"), h, (0, 1))
    with pytest.raises(ArgumentError):
        BlockProblem.from_parts(make_prox("abs"), make_prox("abs"), h, (1, 1),
                                lipschitz="estimate")
    with pytest.raises(ArgumentError):
        PartialLipschitz(1.0, -1.0)
    with pytest.raises(ArgumentError):
        Quadratic(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))
    with pytest.raises(ArgumentError):
        sample_box([(1, 1)], 5)
    with pytest.raises(ArgumentError):
        get_preset("nope")


def test_partial_lipschitz_problem():
    h = ResidualSquare(1.0, 1.0, (1.0, 1.0))
    pb = BlockProblem.from_parts(make_prox("abs"), make_prox("abs"), h, (1, 1),
                                 lipschitz=PartialLipschitz(2.0, 2.0))
    assert pb.partial.l_x == 2.0 and pb.L is None


def test_kernel_ready():
    assert get_preset("example2").kernel_ready
    assert zero_problem(2, 3).dims == (2, 3)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_residual_gradient_matches_fd(v):
    pb = get_preset("example1-2d")
    assert grad_check(pb, (v[:2], v[2:])).passed

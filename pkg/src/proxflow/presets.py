"""Named problems reproducing the numerical experiments, plus a few helpers.

=================  ==========================================  =====
name               objective                                   L
=================  ==========================================  =====
``example1``       |x| + |y| + (1 - x - y)^2                   4
``example1-2d``    ||x||_1 + ||y||_1 + (1 - sum(x) - sum(y))^2 8
``example2``       |x| + Huber_2(y) - (1 - x - y)^2 / 5        0.8
``example2-alt``   |x| + Huber_2(y) + (1 - x - y)^2            4
``zero``           0                                           1
=================  ==========================================  =====

``example2`` and ``example2-alt`` are the two readings of the Huber
experiment; only the first has (0, -2/3) as a critical point.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError
from .problem import BlockProblem, ResidualSquare
from .proxlib import make_prox


def example1():
    h = ResidualSquare(1.0, 1.0, (1.0, 1.0))
    return BlockProblem.from_parts(make_prox("abs"), make_prox("abs"), h, (1, 1),
                                   lipschitz=4.0, name="example1")


def example1_2d():
    h = ResidualSquare(1.0, 1.0, (1.0, 1.0, 1.0, 1.0))
    return BlockProblem.from_parts(make_prox("l1"), make_prox("l1"), h, (2, 2),
                                   lipschitz=8.0, name="example1-2d")


def example2():
    h = ResidualSquare(-0.2, 1.0, (1.0, 1.0))
    return BlockProblem.from_parts(make_prox("abs"), make_prox("huber", delta=2.0), h,
                                   (1, 1), lipschitz=0.8, name="example2")


def example2_alt():
    h = ResidualSquare(1.0, 1.0, (1.0, 1.0))
    return BlockProblem.from_parts(make_prox("abs"), make_prox("huber", delta=2.0), h,
                                   (1, 1), lipschitz=4.0, name="example2-alt")


def zero_problem(n=1, m=1):
    """f = g = 0 and H = 0: every point is stationary."""
    h = ResidualSquare(0.0, 0.0, (0.0,) * (n + m))
    return BlockProblem.from_parts(make_prox("zero"), make_prox("zero"), h, (n, m),
                                   lipschitz=1.0, name="zero")


PRESETS = {
    "example1": example1,
    "example1-2d": example1_2d,
    "example2": example2,
    "example2-alt": example2_alt,
    "zero": zero_problem,
}

#: start points and the plotted region used by the experiments
DEFAULT_START = {
    "example1": (np.array([1.0]), np.array([0.5])),
    "example1-2d": (np.array([-1.0, -2.0]), np.array([-0.5, -4.0])),
    "example2": (np.array([1.0]), np.array([-1.0])),
    "example2-alt": (np.array([1.0]), np.array([-1.0])),
    "zero": (np.array([0.0]), np.array([0.0])),
}

PLOT_BOX = {
    "example1": [(-0.5, 1.5), (-0.5, 1.5)],
    "example1-2d": [(-1.5, 0.5), (-2.5, 0.5), (-1.0, 0.5), (-4.5, 0.5)],
    "example2": [(-1.0, 1.5), (-1.5, 1.0)],
    "example2-alt": [(-1.0, 1.5), (-1.5, 1.0)],
    "zero": [(-1.0, 1.0), (-1.0, 1.0)],
}


def get_preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise ArgumentError(
            f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None

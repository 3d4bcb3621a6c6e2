"""Shared fixtures: canonical domains and a session-wide solve cache."""

import numpy as np
import pytest

import gausseig as g
from gausseig.geometry import rectangle, regular_polygon

_DOMAINS = {
    "unit_square": lambda: g.validate([(0, 0), (1, 0), (1, 1), (0, 1)]),
    "square_origin": lambda: rectangle(1.0, 1.0),
    "square_rot45": lambda: regular_polygon(4, np.sqrt(0.5)),
    "square2": lambda: rectangle(2.0, 2.0),
    "rect2x1": lambda: rectangle(2.0, 1.0),
    "rect3x1": lambda: rectangle(3.0, 1.0),
    "hexagon": lambda: regular_polygon(6, 1.0),
    "gon16": lambda: regular_polygon(16, 1.0),
    "triangle": lambda: g.validate([(0, 0), (1, 0), (0, 1)]),
}


@pytest.fixture(scope="session")
def domain():
    def get(name):
        return _DOMAINS[name]()
    return get


@pytest.fixture(scope="session")
def mesh_cache():
    cache = {}

    def get(name, h):
        key = (name, h)
        if key not in cache:
            cache[key] = g.triangulate(_DOMAINS[name](), h)
        return cache[key]
    return get


@pytest.fixture(scope="session")
def solve_cache():
    """Memoized solve_first_eigenpair keyed by domain name and solver knobs."""
    cache = {}

    def get(name, p, h, n_restarts=0, grad_tol=1e-6, rng_seed=0):
        key = (name, p, h, n_restarts, grad_tol, rng_seed)
        if key not in cache:
            cfg = g.SolverConfig(p=p, n_restarts=n_restarts, grad_tol=grad_tol,
                                 rng_seed=rng_seed)
            cache[key] = g.solve_first_eigenpair(_DOMAINS[name](), cfg, h)
        return cache[key]
    return get

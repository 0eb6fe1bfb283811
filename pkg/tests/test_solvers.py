import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterldp import solvers

from conftest import random_kernel


def test_single_type_closed_forms():
    for kap in (0.3, 1.5, 2.0, 4.0):
        rho = solvers.solve_survival([[kap]], [1.0]).solution[0]
        if kap <= 1:
            assert rho == 0.0
        else:
            assert 1 - rho == pytest.approx(math.exp(-kap * rho), abs=1e-12)
        assert solvers.sigma([[kap]], [1.0]) == pytest.approx(kap, rel=1e-10)


def test_regimes():
    assert solvers.solve_characteristic([[0.5]], [1.0]).regime == "subcritical"
    assert solvers.solve_characteristic([[2.0]], [1.0]).regime == "supercritical"
    assert solvers.regime_of(1.0) == "critical"


def test_characteristic_is_fixed_point(rng):
    for _ in range(10):
        S = int(rng.integers(1, 4))
        kappa = random_kernel(rng, S, 4.0)
        mu = rng.dirichlet(np.ones(S))
        c = solvers.solve_characteristic(kappa, mu).solution
        # c = mu e^{-kappa (mu - c)}
        np.testing.assert_allclose(c, mu * np.exp(-kappa @ (mu - c)), atol=1e-10)
        assert np.all(c <= mu + 1e-15)
        assert solvers.sigma(kappa, c) <= 1 + 1e-8


def test_reducible_kernel_solved_per_class():
    kappa = np.array([[3.0, 0.0], [0.0, 0.5]])
    mu = np.array([0.5, 0.5])
    rho = solvers.solve_survival(kappa, mu).solution
    # class {0}: effective kernel 1.5 is supercritical; class {1} is subcritical
    single = solvers.solve_survival([[1.5]], [1.0]).solution[0]
    assert rho[0] == pytest.approx(single, abs=1e-10)
    assert rho[1] == 0.0


def test_b_star_critical_and_subcritical():
    b = solvers.solve_b_star([[2.0]], [1.0]).solution
    assert b[0] == pytest.approx(0.5, abs=1e-10)
    c = np.array([0.3])
    # subcritical c is its own b*
    assert solvers.solve_b_star([[2.0]], c).solution[0] == pytest.approx(0.3, abs=1e-12)


def test_chi_single_type_matches_closed_form():
    # one type: chi = -log(kappa theta) and theta = c e^{-kappa c} gives s - log s with s = kappa c
    for kap, c in ((0.5, 0.2), (1.0, 0.3), (2.0, 0.05), (2.0, 0.5)):
        kappa = np.array([[kap]])
        theta = solvers.theta_of(kappa, [c])
        s = kap * c
        assert solvers.chi(kappa, theta) == pytest.approx(s - math.log(s), rel=1e-12)
        assert solvers.chi_closed_form(kappa, [c]) == pytest.approx(s - math.log(s), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_chi_at_least_one_and_below_closed_form(seed):
    rng = np.random.default_rng(seed)
    S = int(rng.integers(1, 4))
    kappa = random_kernel(rng, S, 2.0)
    c = rng.uniform(0.1, 1.0, size=S)
    c *= rng.uniform(0.2, 0.9) / solvers.sigma(kappa, c)
    theta = solvers.theta_of(kappa, c)
    value = solvers.chi(kappa, theta, restarts=8)
    assert value >= 1 - 1e-9
    # the multi-type closed form is only an upper bound on the infimum
    assert value <= solvers.chi_closed_form(kappa, c) + 1e-6


def test_non_convergence_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        res = solvers.solve_survival([[1.0 + 1e-3]], [1.0], max_iter=3)
    assert not res.converged
    assert any(issubclass(x.category, solvers.ConvergenceWarning) for x in w)

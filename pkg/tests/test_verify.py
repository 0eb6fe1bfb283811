import json
import math

import numpy as np
import pytest

from clusterldp import verify


def test_giant_lln_small():
    rep = verify.verify_giant_lln([1.0], [[2.0]], 5000, 6, seed=1, threads=2, tol=0.03)
    assert rep.passed
    json.dumps(rep.to_dict())


def test_micro_lln_subcritical():
    rep = verify.verify_micro_lln([1.0], [[0.5]], 20_000, 4, seed=2, kmax=6, tol=0.02)
    assert rep.passed
    assert rep.theoretical["isolated"][0] == pytest.approx(math.exp(-0.5))


def test_fit_log_slope_recovers_line():
    Ns = np.array([10, 20, 30, 40])
    p = np.exp(-0.3 - 0.05 * Ns)
    slope, intercept, se = verify.fit_log_slope(Ns, p, 10**6)
    assert slope == pytest.approx(-0.05) and intercept == pytest.approx(-0.3)


def test_macro_connection_minus_infinity():
    # bipartite kernel and a one-type profile: the rate is -inf and every estimate must vanish
    rep = verify.verify_macro_connection([0.5, 0.0], [[0.0, 4.0], [4.0, 0.0]], [10, 20], 200, seed=3)
    assert rep.theoretical == -math.inf and rep.passed
    assert rep.to_dict()["theoretical"] == "-inf"


def test_connectivity_rate_quick():
    rep = verify.verify_connectivity_rate([1.0], [[6.0]], [30, 50, 70], 20_000, seed=4, threads=2,
                                          tol=0.25)
    assert rep.passed, rep.details

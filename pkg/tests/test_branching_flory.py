import math

import numpy as np
import pytest

from clusterldp import branching, flory, solvers
from clusterldp.measures import ModelError

from conftest import random_kernel


def test_borel_single_type_closed_form():
    # P(E = n) = e^{-kappa n} (kappa n)^{n-1} / n!
    params = branching.BorelParams([[0.7]], [1.0])
    for n in range(1, 15):
        expected = math.exp(-0.7 * n) * (0.7 * n) ** (n - 1) / math.factorial(n)
        assert branching.borel_pmf(params, 0, (n,)) == pytest.approx(expected, rel=1e-12)


def test_borel_table_mass_subcritical_and_supercritical(rng):
    sub = branching.BorelParams([[0.5]], [1.0])
    _, partial, tail, _ = branching.borel_table(sub, 0, 80)
    assert partial <= 1 <= partial + tail + 1e-12
    sup = branching.BorelParams([[2.0]], [1.0])
    _, partial, tail, _ = branching.borel_table(sup, 0, 80)
    rho = solvers.solve_survival([[2.0]], [1.0]).solution[0]
    assert partial <= 1 - rho + 1e-12 <= partial + tail + 2e-12
    kappa = random_kernel(rng, 2, 1.0)
    params = branching.BorelParams(kappa, [0.4, 0.6])
    for r in (0, 1):
        _, partial, tail, _ = branching.borel_table(params, r, 25)
        extinction = 1 - solvers.solve_survival(kappa, [0.4, 0.6]).solution[r]
        assert partial <= extinction + 1e-12


def test_borel_rejects_zero_start():
    params = branching.BorelParams([[1.0, 1.0], [1.0, 1.0]], [1.0, 0.0])
    with pytest.raises(ModelError):
        branching.borel_pmf(params, 1, (1, 1))
    assert branching.borel_pmf(params, 0, (1, 1)) == 0.0


def test_progeny_sampling_two_types_matches_pmf():
    kappa = np.array([[0.2, 0.6], [0.6, 0.3]])
    params = branching.BorelParams(kappa, [0.5, 0.5])
    counts, boom = branching.sample_progeny_many(params, 1, 200_000, seed=3)
    assert not boom.any()
    tv = branching.tv_to_pmf(branching.empirical_pmf(counts, boom), params, 1)
    assert tv < 0.02


def test_progeny_sampling_thread_invariant():
    params = branching.BorelParams([[1.5]], [1.0])
    a = branching.sample_progeny_many(params, 0, 5000, seed=9, threads=1, chunk=1000)
    b = branching.sample_progeny_many(params, 0, 5000, seed=9, threads=3, chunk=1000)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_single_progeny_and_explosion_marker():
    params = branching.BorelParams([[3.0]], [1.0])
    outs = [branching.sample_total_progeny(params, 0, seed=s, cap=200) for s in range(50)]
    assert any(o == branching.EXPLODED for o in outs)
    assert all(o == branching.EXPLODED or (isinstance(o, tuple) and o[0] <= 200) for o in outs)


def test_micro_branching_relation(rng):
    for _ in range(3):
        kappa = random_kernel(rng, 3, 2.0)
        assert branching.check_micro_branching_relation(rng.dirichlet(np.ones(3)), kappa, 4) < 1e-12


def test_flory_multitype_residual(rng):
    kappa = random_kernel(rng, 2, 2.0)
    mu = np.array([0.3, 0.7])
    traj = flory.flory_trajectory(mu, kappa, [0.0, 0.4, 1.5, 3.0], 6)
    assert traj.max_residual.max() < 1e-12
    tc = flory.gelation_time(mu, kappa)
    for t, g in zip(traj.times, traj.gel):
        if t < tc:
            assert np.all(g == 0)
        else:
            assert g.sum() > 0


def test_flory_initial_state_is_singletons():
    st = flory.flory_state([0.3, 0.7], [[1.0, 1.0], [1.0, 1.0]], 0.0, 4)
    assert st.atoms == {(1, 0): 0.3, (0, 1): 0.7}


def test_gel_mass_single_type_is_survival():
    for t in (1.5, 2.0, 5.0):
        g = flory.gel_mass([1.0], [[1.0]], t)[0]
        assert 1 - g == pytest.approx(math.exp(-t * g), abs=1e-12)
    assert flory.gelation_time([1.0], [[2.0]]) == pytest.approx(0.5)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterldp import trees
from clusterldp.measures import (MacroMeasure, MicroMeasure, ModelError, TypeSpace, as_kernel,
                                 as_measure, configs_of_size, configs_up_to, connectable,
                                 integrated_config, irreducible_classes, relative_entropy,
                                 sub_configs)

from conftest import random_kernel


def test_kernel_validation():
    with pytest.raises(ModelError):
        as_kernel([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ModelError):
        as_kernel([[-1.0]])
    with pytest.raises(ModelError):
        as_measure([0.5, -0.1])
    with pytest.raises(ModelError):
        TypeSpace(("a", "a"))


def test_config_enumeration_counts():
    # compositions of n into S parts: C(n + S - 1, S - 1)
    for S in (1, 2, 3):
        for n in range(1, 6):
            assert len(configs_of_size(S, n)) == math.comb(n + S - 1, S - 1)
    assert len(configs_up_to(2, 3)) == 2 + 3 + 4
    assert len(sub_configs((2, 1))) == 6


def test_micro_measure_cleans_and_integrates():
    lam = MicroMeasure({(1, 0): 0.2, (0, 0): 0.0, (1, 2): 0.1, (0, 1): 0.0}, 2)
    assert set(lam.atoms) == {(1, 0), (1, 2)}
    np.testing.assert_allclose(integrated_config(lam), [0.3, 0.2])
    assert lam.restrict(1).atoms == {(1, 0): 0.2}
    with pytest.raises(ModelError):
        MicroMeasure({(0, 0): 0.5}, 2)
    with pytest.raises(ModelError):
        MacroMeasure(([0.0, 0.0],))


def test_irreducible_classes_and_connectable():
    kappa = np.array([[1.0, 0, 0], [0, 0, 2.0], [0, 2.0, 0]])
    assert irreducible_classes(kappa, [0.2, 0.5, 0.3]) == [[0], [1, 2]]
    # types outside the support are dropped
    assert irreducible_classes(kappa, [0.0, 0.5, 0.5]) == [[1, 2]]
    cls = irreducible_classes(kappa, [0.2, 0.5, 0.3])
    assert connectable(MacroMeasure(([0, 0.1, 0.1],)), cls)
    assert not connectable(MacroMeasure(([0.1, 0.1, 0],)), cls)


def test_relative_entropy_zero_at_reference():
    nu = np.array([0.3, 0.7])
    assert abs(relative_entropy(nu, nu)) < 1e-15
    assert relative_entropy([0.5, 0.5], nu) > 0


def test_tau_small_cases():
    # Cayley: n^(n-2) labelled trees
    for n in range(1, 8):
        assert trees.tau_matrix_tree((n,), [[1.0]]).value == pytest.approx(n ** (n - 2))
    # complete bipartite K_{a,b}: a^(b-1) b^(a-1) with unit weights
    kappa = [[0.0, 1.0], [1.0, 0.0]]
    for a, b in [(1, 1), (2, 3), (3, 3), (4, 2)]:
        assert trees.tau_matrix_tree((a, b), kappa).value == pytest.approx(a ** (b - 1) * b ** (a - 1))
    # bipartite kernel cannot connect two vertices of the same type
    assert trees.tau_matrix_tree((2, 0), kappa).value == 0.0


def test_tau_table_consistent_with_matrix_tree(rng):
    kappa = random_kernel(rng, 2, 3.0)
    table = trees.TauTable(kappa)
    for k in configs_up_to(2, 6):
        assert table.tau(k) == pytest.approx(trees.tau_matrix_tree(k, kappa).value, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 6))
def test_tau_methods_agree_property(seed, S, n):
    rng = np.random.default_rng(seed)
    kappa = random_kernel(rng, S, 3.0, zero_prob=0.2)
    k = tuple(int(v) for v in rng.multinomial(n, np.ones(S) / S))
    e = trees.tau_enumerate(k, kappa).value
    m = trees.tau_matrix_tree(k, kappa).value
    assert m == pytest.approx(e, rel=1e-9, abs=1e-300)
    for r in range(S):
        if k[r]:
            assert trees.tau_closed_form(k, kappa, r).value == pytest.approx(e, rel=1e-9, abs=1e-300)


def test_tau_homogeneity(rng):
    # every spanning tree has |k| - 1 edges, so tau scales as a^(|k|-1)
    kappa = random_kernel(rng, 2, 2.0)
    k = (3, 2)
    assert trees.tau_matrix_tree(k, 2.5 * kappa).value == pytest.approx(
        2.5 ** 4 * trees.tau_matrix_tree(k, kappa).value, rel=1e-12)

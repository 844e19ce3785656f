import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import hilbert
from artifact.combinatorics import CapacityError
from artifact.cumulants import (cumulant, reduced_cumulant, reduced_cumulant_subsets,
                                scattering_cumulant, verify_cluster_expansion)
from artifact.dynamics import evolve, random_spec


@pytest.mark.parametrize("s", [1, 2, 3, 4])
def test_cluster_expansion_reference(spec, s):
    assert verify_cluster_expansion(spec, 1.0, range(1, s + 1)) <= 1e-10


def test_cluster_expansion_capacity(spec):
    with pytest.raises(CapacityError):
        verify_cluster_expansion(spec, 1.0, range(1, 6))


def test_first_order_cumulant_is_group(rspec, rng):
    x = hilbert.random_hermitian(4, rng)
    assert np.allclose(cumulant(rspec, 0.5, [(1, 2)], x, 2), evolve(rspec, -0.5, (1, 2), x, 2))


def test_second_order_cumulant_explicit(rspec, rng):
    x = hilbert.random_hermitian(4, rng)
    g12 = evolve(rspec, -0.5, (1, 2), x, 2)
    g1g2 = evolve(rspec, -0.5, (2,), evolve(rspec, -0.5, (1,), x, 2), 2)
    assert np.allclose(cumulant(rspec, 0.5, [(1,), (2,)], x, 2), g12 - g1g2)


def test_free_cumulants_vanish(spec, rng):
    free = spec.with_(Phi2=np.zeros((4, 4)))
    for s in (2, 3):
        x = hilbert.random_hermitian(2 ** s, rng)
        assert hilbert.operator_norm(cumulant(free, 0.8, [(i,) for i in range(1, s + 1)], x, s)) <= 1e-12


@settings(max_examples=15)
@given(st.integers(0, 2 ** 31), st.integers(1, 3), st.floats(0.05, 2.0))
def test_state_cumulant_bound(seed, s, t):
    rng = np.random.default_rng(seed)
    sp = random_spec(2, rng, lam=2.0)
    f = hilbert.random_hermitian(2 ** s, rng)
    val = hilbert.trace_norm(cumulant(sp, t, [(i,) for i in range(1, s + 1)], f, s))
    assert val <= math.factorial(s) * math.e ** s * hilbert.trace_norm(f)


@settings(max_examples=15)
@given(st.integers(0, 2 ** 31), st.integers(0, 2), st.floats(0.05, 2.0))
def test_observable_cumulant_bound(seed, n, t):
    rng = np.random.default_rng(seed)
    sp = random_spec(2, rng, lam=2.0)
    g = hilbert.random_hermitian(2 ** (n + 1), rng)
    val = hilbert.operator_norm(cumulant(sp, t, [(i,) for i in range(1, n + 2)], g, n + 1, direction="forward"))
    assert val <= math.factorial(n) * math.e ** (n + 2) * hilbert.operator_norm(g)


def test_cluster_argument_treats_block_as_one(rspec, rng):
    # A_2(-t, {1,2}, 3) = G(1,2,3) - G(1,2) G(3)
    x = hilbert.random_hermitian(8, rng)
    got = cumulant(rspec, 0.7, [(1, 2), (3,)], x, 3)
    want = evolve(rspec, -0.7, (1, 2, 3), x, 3) - evolve(rspec, -0.7, (3,), evolve(rspec, -0.7, (1, 2), x, 3), 3)
    assert np.allclose(got, want)


def test_scattering_cumulant_free_limit(spec, rng):
    free = spec.with_(Phi2=np.zeros((4, 4)))
    x = hilbert.random_hermitian(4, rng)
    assert np.allclose(scattering_cumulant(free, 0.4, [(1,), (2,)], x, 2), 0, atol=1e-13)


def test_reduced_cumulant_forms_agree(rspec, rng):
    x = hilbert.symmetrize(hilbert.random_hermitian(16, rng), 2)
    a = reduced_cumulant(rspec, 0.6, 2, 2, x)
    b = reduced_cumulant_subsets(rspec, 0.6, 2, 2, x)
    # on symmetric operators the two forms coincide after the tail trace
    assert np.allclose(hilbert.trace_out_last(a, 2, 2), hilbert.trace_out_last(b, 2, 2))


def test_bad_arguments(spec):
    with pytest.raises(ValueError):
        cumulant(spec, 0.1, [], np.eye(2), 1)
    with pytest.raises(ValueError):
        cumulant(spec, 0.1, [(1,)], np.eye(2), 1, flavor="nope")

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import hilbert
from artifact.combinatorics import CapacityError
from artifact.observables import (additive_observable, compact_dual_solution, creation, dual_bbgky_series,
                                  dual_generator, dual_solution, exp_creation, k_ary_observable, mean_value,
                                  marginals_of_observables, number_observable, observables_from_marginals,
                                  one_component, random_observable, verify_duality)
from artifact.sequences import residual
from artifact.states import marginals_oracle, random_grand_canonical


@pytest.fixture(scope="module")
def F0():
    return marginals_oracle(random_grand_canonical(3, 2, np.random.default_rng(9), activity=1.0))


@settings(max_examples=8)
@given(st.integers(0, 2 ** 31), st.floats(0.1, 2.0))
def test_duality(seed, t):
    from artifact.dynamics import reference_fixture
    spec = reference_fixture()
    rng = np.random.default_rng(seed)
    F0 = marginals_oracle(random_grand_canonical(3, 2, rng, activity=1.0))
    assert verify_duality(spec, random_observable(3, 2, rng), F0, t) <= 1e-9


def test_number_observable_is_conserved(rspec):
    B = dual_solution(rspec, number_observable(4, 2), 1.1)
    assert np.allclose(B[1], np.eye(2), atol=1e-12)
    assert all(np.abs(B[s]).max() <= 1e-12 for s in (2, 3, 4))


def test_compact_form(rspec, rng):
    B0 = random_observable(3, 2, rng)
    assert residual(compact_dual_solution(rspec, B0, 0.9), dual_solution(rspec, B0, 0.9)) <= 1e-10
    assert residual(dual_solution(rspec, B0, 0.9, "group_expansion"), dual_solution(rspec, B0, 0.9)) <= 1e-10


def test_exp_creation_inverse(rng):
    B = random_observable(3, 2, rng)
    assert residual(exp_creation(exp_creation(B, 1), -1), B) <= 1e-12


def test_creation_of_one_particle(rng):
    a = hilbert.random_hermitian(2, rng)
    up = creation(one_component(a, 1, 2, 2))
    assert np.allclose(up[2], np.kron(a, np.eye(2)) + np.kron(np.eye(2), a))


def test_marginal_observable_roundtrip(rng):
    A = random_observable(3, 2, rng)
    assert residual(observables_from_marginals(marginals_of_observables(A)), A) <= 1e-12


def test_additive_observable_marginal_is_one_component(rng):
    a = hilbert.random_hermitian(2, rng)
    B = marginals_of_observables(additive_observable(a, 3, 2))
    assert np.allclose(B[1], a)
    assert np.abs(B[2]).max() <= 1e-14 and np.abs(B[3]).max() <= 1e-14
    b2 = hilbert.symmetrize(hilbert.random_hermitian(4, rng), 2)
    B2 = marginals_of_observables(k_ary_observable(b2, 2, 3, 2))
    assert np.allclose(B2[2], b2) and np.abs(B2[3]).max() <= 1e-13


def test_dual_generator_second_order(rspec, rng):
    B0 = random_observable(3, 2, rng)

    def res(h):
        p, m = dual_solution(rspec, B0, 0.5 + h), dual_solution(rspec, B0, 0.5 - h)
        fd = p.map(lambda n, x: (x - m[n]) / (2 * h))
        return residual(fd, dual_generator(rspec, dual_solution(rspec, B0, 0.5)))
    assert res(1e-3) / res(5e-4) == pytest.approx(4.0, rel=0.05)


def test_mean_value_time_zero(F0, rng):
    B0 = random_observable(3, 2, rng)
    from artifact.dynamics import reference_fixture
    assert mean_value(dual_solution(reference_fixture(), B0, 0.0), F0) == pytest.approx(mean_value(B0, F0))


def test_dual_errors(rspec, rng):
    B0 = random_observable(2, 2, rng)
    with pytest.raises(CapacityError):
        dual_bbgky_series(rspec, B0, 0.1, 3)
    with pytest.raises(ValueError):
        dual_bbgky_series(rspec, B0, 0.1, 1, "nope")

import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact import hilbert
from artifact.dynamics import (HamiltonianSpec, build_hamiltonian, evolve, free_evolve, generator_N,
                               generator_Nint, interaction_hamiltonian, random_spec, scatter)


def test_reference_spectrum(spec):
    # K = diag(0,1), Phi = |11><11|: two-particle levels 0, 1, 1, 2 + 1
    assert np.allclose(np.linalg.eigvalsh(spec.hamiltonian(2)), [0, 1, 1, 3])


def test_reference_evolution_frozen(spec):
    f = np.full((2, 2), 0.5, dtype=complex)
    x = np.kron(f, np.diag([1.0, 0.0]))
    y = evolve(spec, -1.0, (1, 2), x, 2)
    assert np.allclose(np.diag(y).real, [0.5, 0.0, 0.5, 0.0], atol=1e-14)
    # coherence of particle 1 rotates with the free frequency when particle 2 is empty
    assert y[0, 2] == pytest.approx(0.5 * np.exp(1j * 1.0))


@given(st.integers(0, 2 ** 31))
def test_hamiltonian_hermitian_and_symmetric(seed):
    s = random_spec(2, np.random.default_rng(seed))
    h = s.hamiltonian(3)
    assert hilbert.is_hermitian(h)
    p = hilbert.permutation_operator((2, 0, 1), 2)
    assert np.allclose(p @ h @ p.T, h)


def test_epsilon_scales_interaction(spec):
    half = spec.with_(epsilon=0.5)
    v1 = interaction_hamiltonian(spec, [(1,), (2,)], 2)
    v2 = interaction_hamiltonian(half, [(1,), (2,)], 2)
    assert np.allclose(v2, 0.5 * v1)


def test_three_body_potential(rng):
    s = random_spec(2, rng)
    w = hilbert.random_hermitian(8, rng)
    w = hilbert.symmetrize(w, 2)
    s3 = s.with_(PhiK={3: w})
    assert np.allclose(build_hamiltonian(s3, 3) - build_hamiltonian(s, 3), w)


def test_group_property(rspec, rng):
    x = hilbert.random_hermitian(8, rng)
    a = evolve(rspec, 0.4, (1, 2, 3), evolve(rspec, 0.3, (1, 2, 3), x, 3), 3)
    assert np.allclose(a, evolve(rspec, 0.7, (1, 2, 3), x, 3))


def test_generator_finite_difference(rspec, rng):
    x = hilbert.random_hermitian(4, rng)
    dt = 1e-5
    fd = (evolve(rspec, dt, (1, 2), x, 2) - evolve(rspec, -dt, (1, 2), x, 2)) / (2 * dt)
    assert np.allclose(fd, generator_N(rspec, 2, x), atol=1e-8)
    assert np.allclose(generator_N(rspec, 2, x, "state"), -generator_N(rspec, 2, x))


def test_free_evolution_factorizes(rspec, rng):
    a, b = hilbert.random_hermitian(2, rng), hilbert.random_hermitian(2, rng)
    got = free_evolve(rspec, 0.6, (1, 2), np.kron(a, b), 2)
    want = np.kron(free_evolve(rspec, 0.6, (1,), a, 1), free_evolve(rspec, 0.6, (1,), b, 1))
    assert np.allclose(got, want)


def test_scattering_generator(rspec, rng):
    f = hilbert.random_hermitian(4, rng)
    t = 1e-4
    fd = (scatter(rspec, t, (1, 2), f, 2) - f) / t
    assert np.allclose(fd, generator_Nint(rspec, [(1,), (2,)], 2, f), atol=1e-3)


def test_spec_validation():
    with pytest.raises(ValueError):
        HamiltonianSpec(d=2, K=np.array([[0, 1], [0, 0]]), Phi2=np.zeros((4, 4)))
    with pytest.raises(ValueError):
        HamiltonianSpec(d=2, K=np.eye(2), Phi2=np.zeros((4, 4)), epsilon=0)
    asym = np.zeros((4, 4))
    asym[1, 1] = 1.0
    with pytest.raises(ValueError):
        HamiltonianSpec(d=2, K=np.eye(2), Phi2=asym)

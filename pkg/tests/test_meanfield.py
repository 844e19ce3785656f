import math

import numpy as np
import pytest

from artifact import hilbert
from artifact.combinatorics import CapacityError
from artifact.meanfield import (LatticeWavefunction, ScalingStudy, correlated_limit_study, dual_vlasov_ode,
                                dual_vlasov_series, fock_marginals, gp_coupling_probe, hartree_nls_solve,
                                hartree_vs_vlasov, lemma_study, limit_mean_value, limit_observable_study,
                                meanfield_state_study, modified_vlasov_solve, nls_energy, nonlinear_vlasov_check,
                                nonlinear_vlasov_solve, plane_wave_residual, poisson_weights, pure_state_bridge,
                                truncated_correlation_decay, vlasov_rhs, vlasov_series, vlasov_solve, vlasov_t0)
from artifact.states import evolve_exact, marginals_oracle, product_state

PLUS = np.full((2, 2), 0.5, dtype=complex)
EPS = (0.4, 0.2, 0.1, 0.05)


def test_vlasov_closed_form(spec):
    # mean-field Hamiltonian diag(0, 1 + 1/2) rotates the coherence at rate 3/2
    ts, traj = vlasov_solve(spec, PLUS, 0.5, dt=1e-3)
    assert traj[-1][0, 1] == pytest.approx(0.5 * np.exp(0.75j), abs=1e-12)
    assert traj[-1][0, 0] == pytest.approx(0.5, abs=1e-14)


def test_vlasov_invariants(rspec, rng):
    f0 = hilbert.random_density(2, rng)
    _, traj = vlasov_solve(rspec, f0, 1.0)
    for f in traj:
        assert abs(np.trace(f) - 1) <= 1e-10
        assert hilbert.is_hermitian(f, 1e-10)
        assert np.linalg.eigvalsh(f).min() >= -1e-10


@pytest.mark.parametrize("stat", ["Bose", "Fermi"])
def test_quantum_statistics_rhs(rspec, rng, stat):
    f = hilbert.random_density(2, rng)
    r = vlasov_rhs(rspec, f, statistics=stat)
    assert abs(np.trace(r)) <= 1e-12
    assert hilbert.is_hermitian(r, 1e-10)


def test_series_matches_timestep(rspec, rng):
    f0 = hilbert.random_density(2, rng)
    t = 0.5 * vlasov_t0(rspec, f0)
    _, traj = vlasov_solve(rspec, f0, t, dt=1e-2)
    assert hilbert.trace_norm(vlasov_series(rspec, f0, t, depth=6) - traj[-1]) <= 1e-6
    assert hilbert.trace_norm(vlasov_series(rspec, f0, t, 3, "quad") - vlasov_series(rspec, f0, t, 3, "ode")) <= 1e-10


def test_modified_vlasov_identity(rspec, rng):
    f0 = hilbert.random_density(2, rng)
    _, a = modified_vlasov_solve(rspec, f0, np.eye(4), 0.8)
    _, b = vlasov_solve(rspec, f0, 0.8)
    assert np.abs(a[-1] - b[-1]).max() <= 1e-12
    with pytest.raises(ValueError):
        modified_vlasov_solve(rspec, f0, np.triu(np.ones((4, 4))), 0.1)


def test_nonlinear_vlasov_chaos(rspec, rng):
    f0 = hilbert.random_density(2, rng)
    _, gs = nonlinear_vlasov_solve(rspec, [f0, np.zeros((4, 4))], 0.6)
    _, vf = vlasov_solve(rspec, f0, 0.6)
    assert np.abs(gs[-1][0] - vf[-1]).max() <= 1e-13
    assert np.abs(gs[-1][1]).max() == 0
    with pytest.raises(CapacityError):
        nonlinear_vlasov_solve(rspec, [f0, np.zeros((4, 4)), np.zeros((8, 8)), np.zeros((16, 16))], 0.1)


def test_dual_vlasov_quadrature_vs_ode(rspec, rng):
    b1 = hilbert.random_hermitian(2, rng)
    ode = dual_vlasov_ode(rspec, {1: b1}, 0.7, 3)
    for s in (1, 2, 3):
        assert np.abs(dual_vlasov_series(rspec, {1: b1}, 0.7, s) - ode[s - 1]).max() <= 1e-10


def test_dual_vlasov_duality(rspec, rng):
    f = 0.1 * hilbert.random_density(2, rng)
    b1 = hilbert.random_hermitian(2, rng)
    bl = dual_vlasov_ode(rspec, {1: b1}, 1.0, 5)
    _, vf = vlasov_solve(rspec, f, 1.0, dt=1e-3)
    assert abs(limit_mean_value(bl, f) - np.trace(b1 @ vf[-1])) <= 1e-6


def test_fock_marginals_match_oracle(spec):
    z, N = 1.5, 3
    D = product_state(PLUS, N, 2)
    D.ops = [z ** n * D.ops[n - 1] for n in range(1, N + 1)]
    Ft = marginals_oracle(evolve_exact(spec.with_(epsilon=0.5), D, 0.8))
    got = fock_marginals(spec.with_(epsilon=0.5), np.array([1, 1]) / math.sqrt(2), z, [0.8], (1, 2),
                         n_max=N, normalize_truncation=True)
    for s in (1, 2):
        assert np.abs(got[(0.8, s)] - Ft[s]).max() <= 1e-13


def test_poisson_weights():
    Ns, w = poisson_weights(10.0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert Ns[np.argmax(w)] in (9, 10)


def test_state_study_frozen(spec):
    st = meanfield_state_study(spec, PLUS, EPS, 0.5)
    assert st.values("state_s1")[0] == pytest.approx(0.024663685857497113, rel=1e-6)
    for q in ("state_s1", "state_s2", "gqke_limit"):
        assert st.decreasing(q)
        assert 0.5 <= st.fitted_order(q) <= 1.5


def test_correlation_vanishing(spec):
    assert nonlinear_vlasov_check(spec, PLUS, (0.4, 0.2, 0.1), 0.5).decreasing("corr_s2")
    assert truncated_correlation_decay(spec, PLUS, EPS, 0.5).decreasing("corr_trunc_s2")


def test_observable_study(spec):
    st = limit_observable_study(spec, np.diag([1.0, -0.5]) + 0.3, EPS, 0.5)
    assert st.decreasing("observable_max")
    assert st.decreasing("observable_s2")


def test_lemma_and_correlated_studies(spec, rng):
    f = hilbert.random_density(8, rng)
    st = lemma_study(spec, f, (0.4, 0.2, 0.1), 0.5, s=2)
    assert st.decreasing("lemma_first") and st.decreasing("lemma_second")
    h2 = np.eye(4) + 0.2 * hilbert.random_hermitian(4, rng)
    cs = correlated_limit_study(spec, h2, 0.3 * hilbert.random_density(2, rng), (0.4, 0.2, 0.1), 0.5)
    assert cs.decreasing("correlated_first") and cs.decreasing("correlated_second")


def test_gp_probe(spec):
    out = gp_coupling_probe(spec, np.eye(4))
    assert set(out) == {"t", "norm", "variation"}
    assert out["variation"] == pytest.approx(0, abs=1e-14)


def test_scaling_study_table(tmp_path):
    st = ScalingStudy([0.2, 0.1], [1.0], ["q"])
    st.add(0.2, 1.0, "q", 0.4)
    st.add(0.1, 1.0, "q", 0.2)
    assert st.fitted_order("q") == pytest.approx(1.0)
    st.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "epsilon,time,quantity,value,fitted_order"
    with pytest.raises(ValueError):
        ScalingStudy([0.1, 0.2], [1.0], ["q"])
    with pytest.raises(ValueError):
        st.add(0.1, 1.0, "q", -1.0)


def _lattice():
    M, h = 16, 0.5
    x = h * np.arange(M)
    psi = (1 + 0.3 * np.cos(2 * np.pi * x / (M * h))) * np.exp(2j * np.pi * x / (M * h))
    return LatticeWavefunction(psi / math.sqrt(h * np.sum(np.abs(psi) ** 2)), h)


@pytest.mark.parametrize("kernel,tol", [("delta", 1e-8), ("smooth", 1e-8)])
def test_nls_conservation(kernel, tol):
    lat = _lattice()
    _, traj = hartree_nls_solve(lat, 1.0, 1e-3, kernel, n_out=5)
    assert max(abs(w.norm() - lat.norm()) for w in traj) <= 1e-10
    e0 = nls_energy(lat, kernel)
    assert max(abs(nls_energy(w, kernel) - e0) for w in traj) <= tol


def test_plane_wave():
    assert plane_wave_residual() <= 1e-8


def test_nls_guards():
    with pytest.raises(ValueError):
        LatticeWavefunction(np.ones(4))
    with pytest.raises(ValueError):
        hartree_nls_solve(_lattice(), 1.0, 0.5, coupling=10.0)


def test_hartree_vs_vlasov():
    psi = np.array([1.0, 0.5 + 0.2j, 0.1, 0.4j])
    lat = LatticeWavefunction(psi / np.linalg.norm(psi), 1.0, allow_small=True)
    assert hartree_vs_vlasov(lat, 1.0) <= 1e-6


def test_pure_state_bridge():
    psi = np.array([1.0, 0.5 + 0.2j, 0.1, 0.4j])
    lat = LatticeWavefunction(psi / np.linalg.norm(psi), 1.0, allow_small=True)
    assert pure_state_bridge(lat, (0.4, 0.2, 0.1), 0.5, s_list=(1,)).decreasing("bridge_s1")

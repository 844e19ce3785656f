import json
import math
import pathlib
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import hilbert
from artifact.combinatorics import CapacityError
from artifact.sequences import OperatorSequence, residual, star_exp, star_ln
from artifact.states import (bbgky_solution, chaos_marginal_correlations, chaos_marginals,
                             cluster_correlations, correlations_from_density, dispersion_from_g,
                             dispersion_functional, evolve_exact, gbig_from_marginals, grel_rhs,
                             marginal_correlations_series, marginal_series_bbgky, marginals_oracle,
                             norm_alpha, product_state, random_grand_canonical,
                             solve_von_neumann_hierarchy, ursell_pair, variance_oracle,
                             von_neumann_generator)

GOLDEN = pathlib.Path(__file__).parent / "golden" / "reference_marginals.json"


@pytest.fixture(scope="module")
def state():
    return random_grand_canonical(3, 2, np.random.default_rng(5), activity=0.8)


def test_oracle_normalization(state):
    F = marginals_oracle(state)
    assert F.scalar0 == 1.0
    # F_1 traces to the mean particle number
    Z = sum(np.trace(state[n]) / math.factorial(n) for n in (1, 2, 3)) + 1
    mean_n = sum(np.trace(state[n]) / math.factorial(n - 1) for n in (1, 2, 3)) / Z
    assert np.trace(F[1]) == pytest.approx(mean_n)


@pytest.mark.parametrize("rep", ["cumulant", "reduced", "second_order"])
def test_bbgky_representations_exact(spec, state, rep):
    F0 = marginals_oracle(state)
    for t in (0.25, 1.0, 2.0):
        Ft = marginals_oracle(evolve_exact(spec, state, t))
        assert residual(bbgky_solution(spec, F0, t, rep), Ft) <= 1e-10


def test_bbgky_iteration_quadrature(rspec, state):
    F0 = marginals_oracle(state)
    Ft = marginals_oracle(evolve_exact(rspec, state, 0.5))
    assert np.abs(marginal_series_bbgky(rspec, F0, 0.5, 1, "iteration") - Ft[1]).max() <= 1e-7


def test_golden_reference_marginals(spec):
    data = json.loads(GOLDEN.read_text())
    D = OperatorSequence.from_json_obj(data["state"])
    Ft = marginals_oracle(evolve_exact(spec, D, data["t"]))
    want = OperatorSequence.from_json_obj(data["marginals"])
    assert residual(Ft, want) <= 1e-12
    F0 = marginals_oracle(D)
    assert residual(bbgky_solution(spec, F0, data["t"]), want) <= 1e-10


def test_series_terms_and_capacity(spec, state):
    F0 = marginals_oracle(state)
    total, terms = marginal_series_bbgky(spec, F0, 0.5, 1, return_terms=True)
    assert len(terms) == 3 and np.allclose(sum(terms), total)
    with pytest.raises(CapacityError):
        marginal_series_bbgky(spec, F0, 0.5, 2, n_max=2)
    with pytest.raises(ValueError):
        marginal_series_bbgky(spec, F0, 0.5, 1, "nope")


def test_norm_alpha_bound(spec):
    alpha = 4.0
    c = math.e ** 2 / (1 - math.e / alpha)
    D = random_grand_canonical(3, 2, np.random.default_rng(3), activity=0.2)
    F0 = marginals_oracle(D)
    Ft = bbgky_solution(spec, F0, 1.5)
    assert norm_alpha(Ft, alpha) <= c * norm_alpha(F0, alpha)


def test_hermiticity_and_positivity_preserved(spec, state):
    Ft = bbgky_solution(spec, marginals_oracle(state), 1.0)
    for s in (1, 2, 3):
        assert hilbert.is_hermitian(Ft[s], 1e-9)
        assert np.linalg.eigvalsh(Ft[s]).min() >= -1e-10


def test_chaos_marginals_match_bbgky_on_chaos_data(spec, rng):
    f = 0.05 * hilbert.random_density(2, rng)
    F0 = product_state(f, 4, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for s in (1, 2):
            got = chaos_marginals(spec, f, 0.7, s, 4 - s)
            assert np.abs(got - marginal_series_bbgky(spec, F0, 0.7, s)).max() <= 1e-14


def test_von_neumann_matches_ln_of_evolved(spec, state):
    g0 = correlations_from_density(state)
    for t in (0.5, 2.0):
        assert residual(solve_von_neumann_hierarchy(spec, g0, t), star_ln(evolve_exact(spec, state, t))) <= 1e-10


def test_von_neumann_generator_second_order(rspec, state):
    g0 = correlations_from_density(state)

    def res(h):
        p = solve_von_neumann_hierarchy(rspec, g0, 0.6 + h)
        m = solve_von_neumann_hierarchy(rspec, g0, 0.6 - h)
        fd = p.map(lambda n, x: (x - m[n]) / (2 * h))
        return residual(fd, von_neumann_generator(rspec, solve_von_neumann_hierarchy(rspec, g0, 0.6)))
    assert res(1e-3) / res(5e-4) == pytest.approx(4.0, rel=0.05)


def test_ursell_steady(spec):
    # K(1)+K(2) commutes with the fixture potential
    g = ursell_pair(spec, 0.7)
    r = von_neumann_generator(spec, g)
    assert max(np.abs(r[1]).max(), np.abs(r[2]).max()) <= 1e-8


def test_cluster_correlation_relation(rspec, rng):
    g0 = correlations_from_density(random_grand_canonical(3, 2, rng, activity=0.6))
    gt = solve_von_neumann_hierarchy(rspec, g0, 0.8)
    for s, n in ((2, 1), (1, 2)):
        assert np.abs(cluster_correlations(rspec, g0, 0.8, s, n) - grel_rhs(gt, s, n)).max() <= 1e-10


def test_nonlinear_series_chaos_vanishing(spec, rng):
    free = spec.with_(Phi2=np.zeros((4, 4)))
    f = 0.02 * hilbert.random_density(2, rng)
    assert np.abs(chaos_marginal_correlations(free, f, 1.0, 2, 2)).max() <= 1e-14


def test_nonlinear_series_against_marginal_cumulants(spec):
    D = random_grand_canonical(3, 2, np.random.default_rng(11), activity=0.02)
    F0 = marginals_oracle(D)
    pad = OperatorSequence(1.0, F0.ops + [np.zeros((16, 16), dtype=complex)], 2)
    G0 = gbig_from_marginals(pad)
    Gt = gbig_from_marginals(marginals_oracle(evolve_exact(spec, D, 1.0)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for s in (1, 2):
            got = marginal_correlations_series(spec, G0, 1.0, s, 4 - s)
            assert np.abs(got - Gt[s]).max() <= 1e-9


def test_smallness_warning(spec, state):
    G0 = gbig_from_marginals(marginals_oracle(state))
    with pytest.warns(RuntimeWarning):
        marginal_correlations_series(spec, G0, 0.1, 1, 1)


def test_dispersion_functional_cases(rng):
    a = hilbert.random_hermitian(2, rng)
    f = hilbert.random_density(2, rng)
    # G_2 = 0: classical formula from G_1 alone
    val = dispersion_functional(a, f, np.zeros((4, 4)))
    mean = np.trace(a @ f).real
    assert val == pytest.approx(np.trace(a @ a @ f).real - mean ** 2)
    assert dispersion_functional(np.eye(2), f, np.zeros((4, 4))) == pytest.approx(0, abs=1e-14)
    with pytest.raises(ValueError):
        dispersion_functional(np.array([[0, 1], [0, 0]]), f, np.zeros((4, 4)))


def test_dispersion_vs_variance(state, rng):
    a = hilbert.random_hermitian(2, rng)
    G = gbig_from_marginals(marginals_oracle(state))
    var, mean = variance_oracle(a, state)
    # the functional as written equals the variance minus <A>^2 Tr G_1
    assert dispersion_functional(a, G[1], G[2]) == pytest.approx(var - mean ** 2 * np.trace(G[1]).real, abs=1e-12)


@settings(max_examples=10)
@given(st.integers(0, 2 ** 31))
def test_dispersion_g_form_on_small_data(seed):
    rng = np.random.default_rng(seed)
    g = OperatorSequence(0.0, [0.1 * hilbert.random_density(2, rng), np.zeros((4, 4)), np.zeros((8, 8))], 2)
    a = hilbert.random_hermitian(2, rng)
    # pure one-particle g: G_1 = g_1 and G_2 = 0
    assert dispersion_from_g(a, g) == pytest.approx(dispersion_functional(a, g[1], np.zeros((4, 4))))


def test_exp_ln_consistency_of_state(state):
    assert residual(star_exp(correlations_from_density(state)), state) <= 1e-12

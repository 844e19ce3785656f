"""State-side hierarchies: correlation operators, marginal density operators
in several solution representations, marginal correlation operators and the
grand-canonical brute-force oracle."""
from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np

from . import combinatorics as cmb
from . import hilbert
from .cumulants import KahanSum, cumulant, reduced_cumulant
from .dynamics import evolve, interaction_hamiltonian
from .hilbert import kron_placed, trace_out_last
from .sequences import OperatorSequence, normalization, star_exp, star_ln, cluster_ln

GL_ORDER = 16


@lru_cache(maxsize=None)
def gauss_legendre(order=GL_ORDER):
    return np.polynomial.legendre.leggauss(order)


def gl_nodes(a, b, order=GL_ORDER):
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1), half * w


# --- grand-canonical states ---------------------------------------------------

def random_grand_canonical(N, d, rng, activity=0.3, rank=None):
    """Truncated grand-canonical sequence D=(1, D_1, ..., D_N) with
    permutation-symmetric positive components and Tr D_n = activity^n."""
    ops = []
    for n in range(1, N + 1):
        rho = hilbert.random_density(d ** n, rng, rank)
        rho = hilbert.symmetrize(rho, d)
        ops.append(activity ** n * rho / np.trace(rho).real)
    return OperatorSequence(1.0, ops, d, symmetric=True)


def product_state(f1, N, d, scalar0=1.0):
    """(1, f, f f, f f f, ...)"""
    ops = []
    cur = np.ones((1, 1), dtype=complex)
    for _ in range(N):
        cur = np.kron(cur, f1)
        ops.append(cur.copy())
    return OperatorSequence(scalar0, ops, d, symmetric=True)


def evolve_exact(spec, D, t):
    """Componentwise D_n -> G_n(-t) D_n (the oracle)."""
    return D.map(lambda n, x: evolve(spec, -t, range(1, n + 1), x, n))


def marginals_oracle(D, s_max=None):
    """F_s = (I,D)^{-1} sum_n 1/n! Tr_{s+1..s+n} D_{s+n}."""
    N = D.N_max
    s_max = N if s_max is None else s_max
    Z = normalization(D)
    ops = []
    for s in range(1, s_max + 1):
        acc = np.zeros((D.d ** s,) * 2, dtype=complex)
        for n in range(0, N - s + 1):
            acc += trace_out_last(D[s + n], n, D.d) / math.factorial(n)
        ops.append(acc / Z)
    return OperatorSequence(1.0, ops, D.d)


def correlations_from_density(D):
    return star_ln(D)


def density_from_correlations(g):
    return star_exp(g)


# --- von Neumann hierarchy ------------------------------------------------------

def _vn_component(spec, g0, t, s):
    d = spec.d
    acc = KahanSum(np.zeros((d ** s,) * 2, dtype=complex))
    for p in cmb.enumerate_partitions(tuple(range(1, s + 1))):
        x = kron_placed([(g0[len(b)], b) for b in p], s, d)
        acc.add(cumulant(spec, t, list(p), x, s))
    return acc.value


def solve_von_neumann_hierarchy(spec, g0, t, N=None):
    """g_s(t) = sum_P A_{|P|}(-t, {X_1},...) prod g0(X_i)."""
    N = g0.N_max if N is None else N
    return OperatorSequence(0.0, [_vn_component(spec, g0, t, s) for s in range(1, N + 1)], g0.d)


def von_neumann_generator(spec, g):
    """Right-hand side of the two-body von Neumann hierarchy."""
    d = spec.d
    out = []
    for s in range(1, g.N_max + 1):
        Y = tuple(range(1, s + 1))
        h = spec.hamiltonian(s)
        r = -1j * (h @ g[s] - g[s] @ h)
        for p in cmb.enumerate_partitions(Y):
            if len(p) != 2:
                continue
            x1, x2 = p
            prod = kron_placed([(g[len(x1)], x1), (g[len(x2)], x2)], s, d)
            v = interaction_hamiltonian(spec, [x1, x2], s)
            r = r - 1j * (v @ prod - prod @ v)
        out.append(r)
    return OperatorSequence(0.0, out, d)


def ursell_pair(spec, beta):
    """(0, e^{-beta K}, e^{-beta(K1+K2)}(e^{-beta eps Phi} - I))"""
    from scipy.linalg import expm
    d = spec.d
    g1 = expm(-beta * spec.K)
    k2 = np.kron(spec.K, np.eye(d)) + np.kron(np.eye(d), spec.K)
    g2 = expm(-beta * k2) @ (expm(-beta * spec.epsilon * spec.Phi2) - np.eye(d * d))
    return OperatorSequence(0.0, [g1, g2], d)


def cluster_correlations(spec, g0, t, s, n):
    """g_{1+n}(t, {Y}, s+1..s+n) by the cluster-argument cumulant expansion."""
    d = spec.d
    m = s + n
    if m > g0.N_max:
        raise cmb.CapacityError("cluster correlation order", m, g0.N_max)
    Y = tuple(range(1, s + 1))
    items = [Y] + [(j,) for j in range(s + 1, m + 1)]
    D0 = star_exp(g0)
    acc = KahanSum(np.zeros((d ** m,) * 2, dtype=complex))
    for p in cmb.partitions_of_list(items):
        blocks = [tuple(sorted(i for c in b for i in c)) for b in p]
        factors = []
        for b, blk in zip(p, blocks):
            if Y in b:
                # initial correlation of the cluster {Y} with the rest of the block
                k = len(b) - 1
                val = cluster_ln(D0.truncate(len(blk)), s, k)
            else:
                val = g0[len(blk)]
            factors.append((val, blk))
        x = kron_placed(factors, m, d)
        acc.add(cumulant(spec, t, blocks, x, m))
    return acc.value


def grel_rhs(g, s, n):
    """Right side of the relation between cluster and particle correlations."""
    D = star_exp(g)
    return cluster_ln(D, s, n)


# --- BBGKY hierarchy -----------------------------------------------------------------

def _tail(s, n):
    return tuple(range(s + 1, s + n + 1))


def _bbgky_cumulant(spec, F0, t, s, n):
    Y = tuple(range(1, s + 1))
    x = cumulant(spec, t, [Y] + [(j,) for j in _tail(s, n)], F0[s + n], s + n)
    return trace_out_last(x, n, spec.d) / math.factorial(n)


def _bbgky_reduced(spec, F0, t, s, n):
    x = reduced_cumulant(spec, t, s, n, F0[s + n])
    return trace_out_last(x, n, spec.d) / math.factorial(n)


def _bbgky_second_order(spec, F0, t, s, n):
    Y = tuple(range(1, s + 1))
    m = s + n
    x = F0[m]
    if n == 0:
        return evolve(spec, -t, Y, x, m)
    acc = KahanSum(x)
    gy = evolve(spec, -t, Y, x, m)
    for z in cmb.enumerate_subsets(_tail(s, n), nonempty_only=True):
        a2 = evolve(spec, -t, Y + z, x, m) - evolve(spec, -t, z, gy, m)
        acc.add((-1) ** (n - len(z)) * a2)
    return trace_out_last(acc.value, n, spec.d) / math.factorial(n)


def collision_map(spec, m, x):
    """sum_{j<=m} Tr_{m+1}(-N_int(j, m+1)) x for x on m+1 particles."""
    v = interaction_hamiltonian(spec, [tuple(range(1, m + 1)), (m + 1,)], m + 1)
    return trace_out_last(-1j * (v @ x - x @ v), 1, spec.d)


def _bbgky_iteration(spec, F0, t, s, n_max, order=GL_ORDER):
    def R(k, tau):
        m = s + k
        base = evolve(spec, -tau, range(1, m + 1), F0[m], m)
        if k == n_max or tau == 0:
            return base
        acc = base.copy()
        nodes, weights = gl_nodes(0.0, tau, order)
        for tp, w in zip(nodes, weights):
            inner = collision_map(spec, m, R(k + 1, tp))
            acc += w * evolve(spec, -(tau - tp), range(1, m + 1), inner, m)
        return acc
    return R(0, t)


def marginal_series_bbgky(spec, F0, t, s, representation="cumulant", n_max=None, return_terms=False):
    """F_s(t) from initial marginals F0 (sequence with scalar 1)."""
    if n_max is None:
        n_max = F0.N_max - s
    if s + n_max > F0.N_max:
        raise cmb.CapacityError("s + n_max", s + n_max, F0.N_max)
    if representation == "iteration":
        return _bbgky_iteration(spec, F0, t, s, n_max)
    fn = {"cumulant": _bbgky_cumulant, "reduced": _bbgky_reduced,
          "second_order": _bbgky_second_order}.get(representation)
    if fn is None:
        raise ValueError(f"unknown representation {representation!r}")
    terms = [fn(spec, F0, t, s, n) for n in range(n_max + 1)]
    total = sum(terms[1:], terms[0].copy())
    if return_terms:
        return total, terms
    return total


def bbgky_solution(spec, F0, t, representation="cumulant"):
    N = F0.N_max
    ops = [marginal_series_bbgky(spec, F0, t, s, representation) for s in range(1, N + 1)]
    return OperatorSequence(1.0, ops, F0.d)


def norm_alpha(F, alpha):
    return abs(F.scalar0) + sum(alpha ** n * hilbert.trace_norm(F[n]) for n in range(1, F.N_max + 1))


# --- marginal correlation operators ----------------------------------------------------

def gbig_from_marginals(F):
    """Cumulants of the marginal density operators."""
    return star_ln(F)


def marginal_correlations_series(spec, G0, t, s, n_max, return_terms=False):
    """G_s(t) by reduced cumulants of the nonlinear groups. G0 must carry
    components up to s + n_max."""
    if s + n_max > G0.N_max:
        raise cmb.CapacityError("s + n_max", s + n_max, G0.N_max)
    if max(hilbert.trace_norm(G0[k]) for k in range(1, G0.N_max + 1)) >= 1 / (2 * math.e ** 3):
        warnings.warn("initial correlations exceed the smallness bound; series may diverge", RuntimeWarning)
    d = spec.d
    terms = []
    for n in range(n_max + 1):
        m = s + n
        acc = KahanSum(np.zeros((d ** m,) * 2, dtype=complex))
        for k in range(n + 1):
            base = s + n - k
            extra = list(range(base + 1, m + 1))
            ck = (-1) ** k * math.comb(n, k)
            for p in cmb.enumerate_partitions(tuple(range(1, base + 1))):
                blocks = list(p)
                for comp in cmb.weak_compositions(k, len(blocks)):
                    w = math.factorial(k)
                    for c in comp:
                        w //= math.factorial(c)
                    factors = []
                    pos = 0
                    for b, c in zip(blocks, comp):
                        run = tuple(extra[pos:pos + c])
                        pos += c
                        factors.append((G0[len(b) + c], tuple(b) + run))
                    x = kron_placed(factors, m, d)
                    acc.add(ck * w * cumulant(spec, t, blocks, x, m))
        terms.append(trace_out_last(acc.value, n, d) / math.factorial(n))
    total = sum(terms[1:], terms[0].copy())
    return (total, terms) if return_terms else total


def chaos_marginal_correlations(spec, G1, t, s, n_max):
    """G_s(t) = sum_n 1/n! Tr A_{s+n}(-t, 1..s+n) prod G1(i)."""
    d = spec.d
    out = np.zeros((d ** s,) * 2, dtype=complex)
    for n in range(n_max + 1):
        m = s + n
        x = kron_placed([(G1, (i,)) for i in range(1, m + 1)], m, d)
        y = cumulant(spec, t, [(i,) for i in range(1, m + 1)], x, m)
        out += trace_out_last(y, n, d) / math.factorial(n)
    return out


def chaos_marginals(spec, F1, t, s, n_max):
    """F_s(t) = sum_n 1/n! Tr A_{1+n}(-t, {Y}, tail) prod F1(i)."""
    d = spec.d
    Y = tuple(range(1, s + 1))
    out = np.zeros((d ** s,) * 2, dtype=complex)
    for n in range(n_max + 1):
        m = s + n
        x = kron_placed([(F1, (i,)) for i in range(1, m + 1)], m, d)
        y = cumulant(spec, t, [Y] + [(j,) for j in _tail(s, n)], x, m)
        out += trace_out_last(y, n, d) / math.factorial(n)
    return out


def marginal_correlations_from_g(g, s, n_max=None):
    """G_s = sum_n 1/n! Tr g_{s+n}."""
    n_max = g.N_max - s if n_max is None else n_max
    out = np.zeros((g.d ** s,) * 2, dtype=complex)
    for n in range(n_max + 1):
        out += trace_out_last(g[s + n], n, g.d) / math.factorial(n)
    return out


# --- dispersion --------------------------------------------------------------

def _check_obs(a1):
    if not hilbert.is_hermitian(a1):
        raise ValueError("observable must be Hermitian")


def dispersion_functional(a1, G1, G2):
    """Tr_1 (a^2 - <A>^2) G_1 + Tr_12 a(1)a(2) G_2 with <A> = Tr a G_1."""
    _check_obs(a1)
    mean = np.trace(a1 @ G1)
    d = a1.shape[0]
    val = np.trace((a1 @ a1 - mean ** 2 * np.eye(d)) @ G1) + np.trace(np.kron(a1, a1) @ G2)
    return float(np.real(val))


def dispersion_from_g(a1, g, n_max=None):
    """The same functional written over correlation operators g_{s+n}."""
    _check_obs(a1)
    G1 = marginal_correlations_from_g(g, 1, n_max and n_max)
    G2 = marginal_correlations_from_g(g, 2, None if n_max is None else n_max - 1)
    return dispersion_functional(a1, G1, G2)


def variance_oracle(a1, D):
    """Grand-canonical variance of the additive observable sum_i a(i)."""
    _check_obs(a1)
    Z = normalization(D)
    d = D.d
    m1 = m2 = 0.0
    for n in range(1, D.N_max + 1):
        A = sum(kron_placed([(a1, (i,))], n, d) for i in range(1, n + 1))
        m1 += np.trace(A @ D[n]) / math.factorial(n)
        m2 += np.trace(A @ A @ D[n]) / math.factorial(n)
    m1, m2 = m1 / Z, m2 / Z
    return float(np.real(m2 - m1 ** 2)), float(np.real(m1))

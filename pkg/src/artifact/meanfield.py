"""Mean-field scaling limits: Vlasov kinetic equation and hierarchies (state,
dual, nonlinear), exact many-body references in bosonic Fock space,
Hartree/NLS lattice integrators and the convergence-rate studies.

Reference family for the state-side limits: a grand-canonical Poisson
(coherent) state D_N = z^N |u^N><u^N| with activity z = 1/eps. Its initial
marginals are exactly z^s f^{(s)} with f = |u><u|, so eps^s F_s(0) = f^{(s)}
and every distance measured at t > 0 is dynamical. Each particle-number
sector is evolved in the symmetric (Fock) subspace, which keeps N ~ 1/eps
affordable."""
from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from . import combinatorics as cmb
from . import hilbert
from .cumulants import cumulant
from .dynamics import HamiltonianSpec, evolve, free_evolve
from .hilbert import Statistics, kron_placed, trace_out_last
from .states import collision_map, gl_nodes

log = logging.getLogger(__name__)

MAX_QUAD_DEPTH = 3
MAX_HIERARCHY_LEVEL = 8


# --- study tables ---------------------------------------------------------------

@dataclass
class ScalingStudy:
    epsilons: list
    times: list
    quantities: list
    results: list = field(default_factory=list)  # (eps, t, quantity, value)

    def __post_init__(self):
        e = list(self.epsilons)
        if any(x <= 0 for x in e) or any(b >= a for a, b in zip(e, e[1:])):
            raise ValueError("epsilons must be positive and strictly decreasing")

    def add(self, eps, t, quantity, value):
        if value < 0 or not np.isfinite(value):
            raise ValueError(f"distance must be finite and nonnegative, got {value}")
        self.results.append((float(eps), float(t), quantity, float(value)))

    def values(self, quantity, t=None):
        t = self.times[-1] if t is None else t
        by = {e: v for e, tt, q, v in self.results if q == quantity and abs(tt - t) < 1e-12}
        return np.array([by[e] for e in self.epsilons])

    def decreasing(self, quantity, t=None):
        v = self.values(quantity, t)
        return bool(np.all(np.diff(v) < 0))

    def fitted_order(self, quantity, t=None):
        v = self.values(quantity, t)
        if np.any(v <= 0):
            return float("nan")
        return float(np.polyfit(np.log(self.epsilons), np.log(v), 1)[0])

    def rows(self):
        orders = {(q, t): self.fitted_order(q, t) for q in self.quantities for t in self.times}
        return [(e, t, q, v, orders[(q, t)]) for e, t, q, v in self.results]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "time", "quantity", "value", "fitted_order"])
            w.writerows(self.rows())


# --- Vlasov kinetic equation ----------------------------------------------------

def _unscaled(spec):
    # the limit equations carry the bare two-body potential
    return spec.with_(epsilon=1.0, PhiK=None)


def dressed_correlation(spec, h2, t):
    """prod G_1(-t) h2 prod G_1(t), as a two-particle multiplier."""
    return free_evolve(spec, -t, (1, 2), np.asarray(h2, dtype=complex), 2)


def vlasov_rhs(spec, f, t=0.0, statistics=None, h2=None):
    """-N(1) f + Tr_2(-N_int(1,2)) [S_2] f f, optionally with the dressed
    correlation factor of the modified equation."""
    bare = _unscaled(spec)
    d = spec.d
    ff = np.kron(f, f)
    stat = Statistics(statistics or spec.statistics)
    if stat != Statistics.MB:
        ff = hilbert.symmetrizer(2, stat, d) @ ff
    if h2 is not None:
        ff = dressed_correlation(spec, h2, t) @ ff
    k = spec.K
    return -1j * (k @ f - f @ k) + collision_map(bare, 1, ff)


def _rk4_path(rhs, y0, t, dt, times=None):
    t = float(t)
    steps = max(1, int(math.ceil(abs(t) / dt - 1e-12)))
    h = t / steps
    out_t, out_y = [0.0], [y0]
    y, tt = y0, 0.0
    for _ in range(steps):
        k1 = rhs(tt, y)
        k2 = rhs(tt + h / 2, y + h / 2 * k1)
        k3 = rhs(tt + h / 2, y + h / 2 * k2)
        k4 = rhs(tt + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        tt += h
        out_t.append(tt)
        out_y.append(y)
    return np.array(out_t), out_y


def vlasov_t0(spec, f0):
    """Series convergence time (2 ||Phi|| ||f0||_1)^{-1}."""
    return 1.0 / (2 * hilbert.operator_norm(spec.Phi2) * hilbert.trace_norm(f0))


def vlasov_solve(spec, f0, t, method="timestep", dt=1e-2, statistics=None, depth=6):
    """Returns (times, trajectory). The series method returns only the end point."""
    f0 = np.asarray(f0, dtype=complex)
    if method == "timestep":
        return _rk4_path(lambda tt, y: vlasov_rhs(spec, y, tt, statistics), f0, t, dt)
    if method == "series":
        if t >= vlasov_t0(spec, f0):
            log.warning("t=%.3g beyond the series convergence time %.3g", t, vlasov_t0(spec, f0))
        return np.array([0.0, t]), [f0, vlasov_series(spec, f0, t, depth)]
    raise ValueError(f"unknown method {method!r}")


def modified_vlasov_solve(spec, f0, h2, t, dt=1e-2):
    h2 = np.asarray(h2, dtype=complex)
    if not hilbert.is_hermitian(h2):
        raise ValueError("h2 must be Hermitian")
    return _rk4_path(lambda tt, y: vlasov_rhs(spec, y, tt, h2=h2), np.asarray(f0, dtype=complex), t, dt)


def _vlasov_hierarchy_quad(bare, f0, t, depth, order=16):
    """Iteration series truncated after `depth` collisions, nested GL."""
    d = bare.d

    def R(k, tau):
        m = 1 + k
        x0 = kron_placed([(f0, (i,)) for i in range(1, m + 1)], m, d)
        base = free_evolve(bare, -tau, range(1, m + 1), x0, m)
        if k == depth or tau == 0:
            return base
        acc = base.copy()
        nodes, weights = gl_nodes(0.0, tau, order)
        for tp, w in zip(nodes, weights):
            inner = collision_map(bare, m, R(k + 1, tp))
            acc += w * free_evolve(bare, -(tau - tp), range(1, m + 1), inner, m)
        return acc
    return R(0, t)


def _vlasov_hierarchy_ode(bare, f0, t, depth, rtol=1e-12, atol=1e-14):
    """Linear Vlasov hierarchy truncated at level 1+depth (top level free)."""
    d = bare.d
    S = 1 + depth
    if S > MAX_HIERARCHY_LEVEL or S > hilbert.MAX_N + 2:
        raise cmb.CapacityError("Vlasov hierarchy level", S, MAX_HIERARCHY_LEVEL)
    sizes = [(d ** s) ** 2 for s in range(1, S + 1)]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    ks = [sum(kron_placed([(bare.K, (i,))], s, d) for i in range(1, s + 1)) for s in range(1, S + 1)]

    def unpack(y):
        return [y[offs[s - 1]:offs[s]].reshape(d ** s, d ** s) for s in range(1, S + 1)]

    def rhs(_, y):
        fs = unpack(y)
        out = []
        for s in range(1, S + 1):
            x = fs[s - 1]
            r = -1j * (ks[s - 1] @ x - x @ ks[s - 1])
            if s < S:
                r = r + collision_map(bare, s, fs[s])
            out.append(r.ravel())
        return np.concatenate(out)

    y0 = np.concatenate([np.asarray(kron_placed([(f0, (i,)) for i in range(1, s + 1)], s, d)).ravel()
                         for s in range(1, S + 1)])
    sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"Vlasov hierarchy integration failed: {sol.message}")
    return unpack(sol.y[:, -1])[0]


def vlasov_series(spec, f0, t, depth=6, method=None):
    """Iteration series of the Vlasov equation truncated at `depth` collisions.
    Nested quadrature up to depth 3, hierarchy time-stepping beyond."""
    bare = _unscaled(spec)
    f0 = np.asarray(f0, dtype=complex)
    method = method or ("quadrature" if depth <= MAX_QUAD_DEPTH else "hierarchy")
    if method == "quadrature":
        if depth > MAX_QUAD_DEPTH:
            raise cmb.CapacityError("nested quadrature depth", depth, MAX_QUAD_DEPTH)
        return _vlasov_hierarchy_quad(bare, f0, t, depth)
    return _vlasov_hierarchy_ode(bare, f0, t, depth)


# --- nonlinear Vlasov hierarchy for correlations ------------------------------------

def _split_pairs(labels, i, j):
    """Two-block partitions of `labels` with i in the first block, j in the second."""
    rest = [x for x in labels if x not in (i, j)]
    for r in range(len(rest) + 1):
        for sub in itertools.combinations(rest, r):
            x1 = tuple(sorted((i,) + sub))
            x2 = tuple(sorted((j,) + tuple(x for x in rest if x not in sub)))
            yield x1, x2


def nonlinear_vlasov_rhs(spec, g):
    """g = [g_1, ..., g_S]; g_{S+1} is taken as zero."""
    bare = _unscaled(spec)
    d = spec.d
    S = len(g)
    out = []
    for s in range(1, S + 1):
        x = g[s - 1]
        ks = sum(kron_placed([(spec.K, (i,))], s, d) for i in range(1, s + 1))
        r = -1j * (ks @ x - x @ ks)
        labels = tuple(range(1, s + 2))
        for i in range(1, s + 1):
            src = g[s] if s < S else np.zeros((d ** (s + 1),) * 2, dtype=complex)
            src = src.copy()
            for x1, x2 in _split_pairs(labels, i, s + 1):
                src += kron_placed([(g[len(x1) - 1], x1), (g[len(x2) - 1], x2)], s + 1, d)
            v = kron_placed([(bare.Phi2, (i, s + 1))], s + 1, d)
            r = r + trace_out_last(-1j * (v @ src - src @ v), 1, d)
        out.append(r)
    return out


def nonlinear_vlasov_solve(spec, g0, t, dt=1e-2):
    g0 = [np.asarray(x, dtype=complex) for x in g0]
    if len(g0) > 3:
        raise cmb.CapacityError("nonlinear Vlasov level", len(g0), 3)
    sizes = [x.shape for x in g0]

    def pack(gs):
        return np.concatenate([x.ravel() for x in gs])

    def unpack(y):
        out, o = [], 0
        for sh in sizes:
            n = sh[0] * sh[1]
            out.append(y[o:o + n].reshape(sh))
            o += n
        return out

    ts, ys = _rk4_path(lambda tt, y: pack(nonlinear_vlasov_rhs(spec, unpack(y))), pack(g0), t, dt)
    return ts, [unpack(y) for y in ys]


# --- dual Vlasov hierarchy --------------------------------------------------------

def _nint_obs(bare, i, j, x, s):
    v = kron_placed([(bare.Phi2, (i, j))], s, bare.d)
    return 1j * (v @ x - x @ v)


def _dual_coupling(bare, b_prev, s):
    """sum_{i != j} N_int(i,j) b_{s-1}(Y minus j)."""
    d = bare.d
    Y = tuple(range(1, s + 1))
    acc = np.zeros((d ** s,) * 2, dtype=complex)
    for j in Y:
        rest = tuple(x for x in Y if x != j)
        placed = kron_placed([(b_prev, rest)], s, d)
        for i in rest:
            acc += _nint_obs(bare, i, j, placed, s)
    return acc


def _b0(b0, s, d):
    x = b0.get(s) if isinstance(b0, dict) else (b0[s] if s <= b0.N_max else None)
    if x is None:
        return np.zeros((d ** s,) * 2, dtype=complex)
    return np.asarray(x, dtype=complex)


def dual_vlasov_series(spec, b0, t, s, order=16):
    """Limit marginal observable b_s(t): nested free groups and two-body
    commutators with n <= s-1 removed particles. b0 maps s -> operator or is
    an OperatorSequence."""
    if s - 1 > MAX_QUAD_DEPTH:
        raise cmb.CapacityError("nested quadrature depth", s - 1, MAX_QUAD_DEPTH)
    bare = _unscaled(spec)
    d = spec.d

    def b(k, tau):
        base = free_evolve(bare, tau, range(1, k + 1), _b0(b0, k, d), k)
        if k == 1 or tau == 0:
            return base
        acc = base.copy()
        nodes, weights = gl_nodes(0.0, tau, order)
        for tp, w in zip(nodes, weights):
            inner = _dual_coupling(bare, b(k - 1, tp), k)
            acc += w * free_evolve(bare, tau - tp, range(1, k + 1), inner, k)
        return acc
    return b(s, t)


def dual_vlasov_ode(spec, b0, t, s_max, rtol=1e-12, atol=1e-14):
    """The dual Vlasov hierarchy as a linear recurrence ODE (any depth)."""
    bare = _unscaled(spec)
    d = spec.d
    sizes = [(d ** s) ** 2 for s in range(1, s_max + 1)]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    ks = [sum(kron_placed([(spec.K, (i,))], s, d) for i in range(1, s + 1)) for s in range(1, s_max + 1)]

    def rhs(_, y):
        bs = [y[offs[s - 1]:offs[s]].reshape(d ** s, d ** s) for s in range(1, s_max + 1)]
        out = []
        for s in range(1, s_max + 1):
            x = bs[s - 1]
            r = 1j * (ks[s - 1] @ x - x @ ks[s - 1])
            if s > 1:
                r = r + _dual_coupling(bare, bs[s - 2], s)
            out.append(r.ravel())
        return np.concatenate(out)

    y0 = np.concatenate([_b0(b0, s, d).ravel() for s in range(1, s_max + 1)])
    sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=rtol, atol=atol)
    y = sol.y[:, -1]
    return [y[offs[s - 1]:offs[s]].reshape(d ** s, d ** s) for s in range(1, s_max + 1)]


def limit_mean_value(b_list, f1):
    """sum_s 1/s! Tr b_s prod f1 over the supplied components (s = 1, 2, ...)."""
    d = f1.shape[0]
    total = 0.0 + 0.0j
    for s, bs in enumerate(b_list, start=1):
        prod = kron_placed([(f1, (i,)) for i in range(1, s + 1)], s, d)
        total += np.trace(bs @ prod) / math.factorial(s)
    return total


# --- bosonic Fock sectors ------------------------------------------------------

class FockSector:
    """Symmetric N-boson subspace over d modes, occupation-number basis."""

    def __init__(self, N, d):
        self.N, self.d = N, d
        self.basis = [occ for occ in _occupations(N, d)]
        self.index = {occ: k for k, occ in enumerate(self.basis)}

    @property
    def dim(self):
        return len(self.basis)


def _occupations(N, d):
    if d == 1:
        yield (N,)
        return
    for n0 in range(N, -1, -1):
        for rest in _occupations(N - n0, d - 1):
            yield (n0,) + rest


_SECTORS = {}


def _sector(N, d):
    key = (N, d)
    if key not in _SECTORS:
        _SECTORS[key] = FockSector(N, d)
    return _SECTORS[key]


@lru_cache(maxsize=1024)
def annihilation(N, d, p):
    """a_p : sector N -> sector N-1 (sparse)."""
    src, dst = _sector(N, d), _sector(N - 1, d)
    rows, cols, vals = [], [], []
    for k, occ in enumerate(src.basis):
        if occ[p] == 0:
            continue
        new = occ[:p] + (occ[p] - 1,) + occ[p + 1:]
        rows.append(dst.index[new])
        cols.append(k)
        vals.append(math.sqrt(occ[p]))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(dst.dim, src.dim), dtype=complex)


def fock_hamiltonian(spec, N):
    """sum K_pq a+_p a_q + eps/2 sum Phi_{pq,rs} a+_p a+_q a_s a_r on sector N."""
    d = spec.d
    dim = _sector(N, d).dim
    H = sparse.csr_matrix((dim, dim), dtype=complex)
    if N == 0:
        return H
    a1 = [annihilation(N, d, p) for p in range(d)]
    for p, q in itertools.product(range(d), repeat=2):
        if spec.K[p, q] != 0:
            H = H + spec.K[p, q] * (a1[p].conj().T @ a1[q])
    if N >= 2:
        a2 = [annihilation(N - 1, d, p) for p in range(d)]
        pair = {(r, s): a2[s] @ a1[r] for r in range(d) for s in range(d)}  # a_s a_r
        phi = spec.Phi2.reshape(d, d, d, d)
        for p, q, r, s in itertools.product(range(d), repeat=4):
            c = phi[p, q, r, s]
            if c != 0:
                H = H + 0.5 * spec.epsilon * c * (pair[(p, q)].conj().T @ pair[(r, s)])
    if spec.PhiK:
        raise NotImplementedError("many-body potentials are not supported in the Fock reference")
    return H.tocsr()


def coherent_component(u, N):
    """Normalized u^{(N)} in the occupation basis."""
    d = len(u)
    sec = _sector(N, d)
    out = np.empty(sec.dim, dtype=complex)
    for k, occ in enumerate(sec.basis):
        c = math.sqrt(math.factorial(N))
        for p, n in enumerate(occ):
            c *= u[p] ** n / math.sqrt(math.factorial(n))
        out[k] = c
    return out


def normal_ordered_marginal(psi, N, d, s):
    """rho^{(s)}_{a,b} = <a+_{b_1}..a+_{b_s} a_{a_s}..a_{a_1}>; trace N!/(N-s)!."""
    if N < s:
        return np.zeros((d ** s,) * 2, dtype=complex)
    vecs = {(): psi}
    for level in range(s):
        nxt = {}
        ops = [annihilation(N - level, d, p) for p in range(d)]
        for key, v in vecs.items():
            for p in range(d):
                nxt[key + (p,)] = ops[p] @ v
        vecs = nxt
    keys = list(itertools.product(range(d), repeat=s))
    V = np.array([vecs[k] for k in keys])
    return (V.conj() @ V.T).T  # entry [a, b] = <V_b|V_a>


def poisson_weights(z, tol=1e-14, n_max=None):
    """(N, w_N) with w_N = e^{-z} z^N / N!, tails below tol dropped."""
    hi = n_max if n_max is not None else int(z + 10 * math.sqrt(z) + 12)
    Ns = np.arange(hi + 1)
    logw = -z + Ns * math.log(z) - np.array([math.lgamma(n + 1) for n in Ns])
    w = np.exp(logw)
    keep = w > tol * w.max()
    return Ns[keep], w[keep]


def fock_marginals(spec, u, z, times, s_list=(1, 2), n_max=None, normalize_truncation=False):
    """Marginals F_s(t) of the Poisson family D_N = z^N |u^N><u^N|.
    With n_max and normalize_truncation the weights match the truncated
    grand-canonical sequence (oracle comparison)."""
    u = np.asarray(u, dtype=complex)
    u = u / np.linalg.norm(u)
    d = spec.d
    Ns, w = poisson_weights(z, n_max=n_max) if n_max is None else (
        np.arange(n_max + 1), np.array([z ** n / math.factorial(n) for n in range(n_max + 1)]))
    if n_max is not None:
        w = w / w.sum() if normalize_truncation else w * math.exp(-z)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = {(float(t), s): np.zeros((d ** s,) * 2, dtype=complex) for t in times for s in s_list}
    for N, wN in zip(Ns, w):
        N = int(N)
        if N < min(s_list):
            continue
        psi0 = coherent_component(u, N)
        H = fock_hamiltonian(spec, N)
        for t in times:
            psi = psi0 if t == 0 else expm_multiply(-1j * t * H, psi0)
            for s in s_list:
                if N >= s:
                    out[(float(t), s)] += wN * normal_ordered_marginal(psi, N, d, s)
    return out


def _pure_vector(f0):
    f0 = np.asarray(f0, dtype=complex)
    if f0.ndim == 1:
        return f0 / np.linalg.norm(f0)
    w, v = np.linalg.eigh(f0)
    if abs(w[-1] - np.trace(f0).real) > 1e-10 or abs(np.trace(f0).real - 1) > 1e-10:
        raise ValueError("the Poisson reference family needs a pure unit-trace f0")
    return v[:, -1]


def _product(f, s):
    d = f.shape[0]
    return kron_placed([(f, (i,)) for i in range(1, s + 1)], s, d)


# --- studies -----------------------------------------------------------------------

def meanfield_state_study(spec, f0, epsilons, t, s_list=(1, 2), dt=1e-2, times=None):
    """||eps^s F_s(t) - prod f_1(t)||_1 for the Poisson family with z = 1/eps.
    Quantity names: "state_s{s}"; s = 1 is also recorded as "gqke_limit"
    (for chaos data the GQKE solution coincides with F_1(t))."""
    u = _pure_vector(f0)
    f0 = np.outer(u, u.conj())
    times = [t] if times is None else list(times)
    study = ScalingStudy(list(epsilons), times, [f"state_s{s}" for s in s_list] + ["gqke_limit"])
    vt, vf = vlasov_solve(spec, f0, max(times), dt=dt)
    for eps in epsilons:
        se = spec.with_(epsilon=eps)
        F = fock_marginals(se, u, 1.0 / eps, times, s_list)
        for tt in times:
            f1 = vf[int(np.argmin(np.abs(vt - tt)))]
            for s in s_list:
                dist = hilbert.trace_norm(eps ** s * F[(float(tt), s)] - _product(f1, s))
                study.add(eps, tt, f"state_s{s}", dist)
                if s == 1:
                    study.add(eps, tt, "gqke_limit", dist)
    return study


def nonlinear_vlasov_check(spec, f0, epsilons, t, s=2):
    """||eps^s G_s(t)||_1 for chaos data (Poisson family); G_2 = F_2 - F_1 F_1,
    G_3 by the cluster formula."""
    u = _pure_vector(f0)
    study = ScalingStudy(list(epsilons), [t], [f"corr_s{s}"])
    for eps in epsilons:
        F = fock_marginals(spec.with_(epsilon=eps), u, 1.0 / eps, [t], tuple(range(1, s + 1)))
        Fs = {k: eps ** k * F[(float(t), k)] for k in range(1, s + 1)}
        study.add(eps, t, f"corr_s{s}", hilbert.trace_norm(_cumulant_from_marginals(Fs, s, spec.d)))
    return study


def _cumulant_from_marginals(F, s, d):
    """Möbius inversion over set partitions of 1..s."""
    acc = np.zeros((d ** s,) * 2, dtype=complex)
    for p in cmb.enumerate_partitions(tuple(range(1, s + 1))):
        w = cmb.mobius_weight(len(p))
        acc += w * kron_placed([(F[len(b)], b) for b in p], s, d)
    return acc


def truncated_correlation_decay(spec, f0, epsilons, t, s=2, n_max=2):
    """||eps^s G_s(t)||_1 from the truncated cumulant expansion with
    G_1^0 = f0 / eps (each retained term vanishes like eps^{s-1})."""
    from .states import chaos_marginal_correlations
    study = ScalingStudy(list(epsilons), [t], [f"corr_trunc_s{s}"])
    for eps in epsilons:
        G = chaos_marginal_correlations(spec.with_(epsilon=eps), f0 / eps, t, s, n_max)
        study.add(eps, t, f"corr_trunc_s{s}", hilbert.trace_norm(eps ** s * G))
    return study


def limit_observable_study(spec, b1, epsilons, t, s_list=(1, 2, 3), k=1):
    """||eps^{-s} B_s(t) - b_s(t)|| (operator norm) for the k-ary family
    B_k^0 = eps^k b_k^0."""
    from .observables import dual_bbgky_series, one_component
    d = spec.d
    s_max = max(s_list)
    study = ScalingStudy(list(epsilons), [t], [f"observable_s{s}" for s in s_list] + ["observable_max"])
    blim = {s: dual_vlasov_series(spec, {k: b1}, t, s) for s in s_list}
    for eps in epsilons:
        se = spec.with_(epsilon=eps)
        B0 = one_component(eps ** k * np.asarray(b1, dtype=complex), k, s_max, d)
        dists = []
        for s in s_list:
            Bs = dual_bbgky_series(se, B0, t, s)
            dists.append(hilbert.operator_norm(Bs / eps ** s - blim[s]))
            study.add(eps, t, f"observable_s{s}", dists[-1])
        study.add(eps, t, "observable_max", max(dists))
    return study


def lemma_study(spec, f, epsilons, t, s=1, order=24):
    """First- and second-order asymptotic perturbation of group cumulants.
    f lives on s+1 particles; the first-order check uses its s-marginal."""
    d = spec.d
    bare = _unscaled(spec)
    fs = trace_out_last(f, 1, d)
    Y = tuple(range(1, s + 1))
    m = s + 1
    # comparator: int_0^t G0(-t+t1) sum_i (-N_int(i,s+1)) G0(-t1) f dt1 on s+1 particles, traced later
    comp = np.zeros_like(f)
    nodes, weights = gl_nodes(0.0, t, order)
    for t1, w in zip(nodes, weights):
        x = free_evolve(bare, -t1, range(1, m + 1), f, m)
        v = sum(kron_placed([(bare.Phi2, (i, m))], m, d) for i in Y)
        x = -1j * (v @ x - x @ v)
        comp += w * free_evolve(bare, -(t - t1), range(1, m + 1), x, m)
    study = ScalingStudy(list(epsilons), [t], ["lemma_first", "lemma_second"])
    for eps in epsilons:
        se = spec.with_(epsilon=eps)
        a1 = evolve(se, -t, Y, fs, s) - free_evolve(se, -t, Y, fs, s)
        study.add(eps, t, "lemma_first", hilbert.trace_norm(a1))
        a2 = cumulant(se, t, [Y, (m,)], f, m) / eps
        study.add(eps, t, "lemma_second", hilbert.trace_norm(a2 - comp))
    return study


def correlated_limit_study(spec, h2, f, epsilons, t):
    """||(G_1(t,{1,2}) - dressed h2) f||_1 and ||G_2(t,{1,2},3) f3||_1 for the
    correlated generated evolution operators."""
    from .kinetic import InitialCorrelations, generated_evolution_G
    d = spec.d
    h = InitialCorrelations({2: h2, 3: np.kron(h2, np.eye(d))})
    f2 = np.kron(f, f)
    f3 = np.kron(f2, f)
    study = ScalingStudy(list(epsilons), [t], ["correlated_first", "correlated_second"])
    for eps in epsilons:
        se = spec.with_(epsilon=eps)
        g1 = generated_evolution_G(se, t, h, (1, 2), (), f2, 2)
        study.add(eps, t, "correlated_first", hilbert.trace_norm(g1 - dressed_correlation(se, h2, t) @ f2))
        g2 = generated_evolution_G(se, t, h, (1, 2), (3,), f3, 3)
        study.add(eps, t, "correlated_second", hilbert.trace_norm(g2))
    return study


def gp_coupling(spec, h2, t):
    """Finite-dimensional coupling b(t) = Phi * (prod G_1(-t) h2 prod G_1(t))."""
    return _unscaled(spec).Phi2 @ dressed_correlation(spec, h2, t)


def gp_coupling_probe(spec, h2, t=10.0, dt=1.0):
    """Reports ||b(t)|| and ||b(t) - b(t - dt)||; no limit is asserted."""
    b, bp = gp_coupling(spec, h2, t), gp_coupling(spec, h2, t - dt)
    return {"t": t, "norm": hilbert.operator_norm(b), "variation": hilbert.operator_norm(b - bp)}


# --- Hartree / NLS on a periodic lattice ------------------------------------------------

@dataclass
class LatticeWavefunction:
    values: np.ndarray
    spacing: float = 1.0
    boundary: str = "periodic"
    allow_small: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are supported")
        if self.M < 8 and not self.allow_small:
            raise ValueError("lattice needs at least 8 sites (allow_small for the bridge)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite wavefunction")

    @property
    def M(self):
        return self.values.shape[0]

    @property
    def x(self):
        return self.spacing * np.arange(self.M)

    def wavenumbers(self):
        return 2 * np.pi * np.fft.fftfreq(self.M, d=self.spacing)

    def norm(self):
        return math.sqrt(self.spacing * np.sum(np.abs(self.values) ** 2))

    def unit_vector(self):
        return math.sqrt(self.spacing) * self.values

    def replace(self, values):
        return LatticeWavefunction(values, self.spacing, self.boundary, self.allow_small)


def _potential(lat, psi, kernel, coupling, W):
    rho = np.abs(psi) ** 2
    if kernel == "delta":
        return coupling * rho
    if kernel == "smooth":
        w = _kernel_values(lat, W)
        return coupling * lat.spacing * np.real(np.fft.ifft(np.fft.fft(w) * np.fft.fft(rho)))
    raise ValueError(f"unknown kernel {kernel!r}")


def _kernel_values(lat, W):
    """W sampled at periodic displacements x_j (minimal image)."""
    M, h = lat.M, lat.spacing
    disp = h * np.minimum(np.arange(M), M - np.arange(M))
    if W is None:
        return np.exp(-disp ** 2)
    return np.asarray(W(disp) if callable(W) else W, dtype=float)


def nls_energy(lat, kernel="delta", coupling=1.0, W=None):
    psi = lat.values
    k = lat.wavenumbers()
    ph = np.fft.fft(psi)
    kin = 0.5 * lat.spacing / lat.M * np.sum(k ** 2 * np.abs(ph) ** 2)
    pot = 0.5 * lat.spacing * np.sum(_potential(lat, psi, kernel, coupling, W) * np.abs(psi) ** 2)
    return float(kin + pot)


def hartree_nls_solve(lat, t, dt=1e-3, kernel="delta", coupling=1.0, W=None, n_out=None):
    """Strang splitting: exact kinetic half-steps in Fourier space, exact
    nonlinear phase full step. Returns (times, list of LatticeWavefunction)."""
    k = lat.wavenumbers()
    steps = max(1, int(math.ceil(abs(t) / dt - 1e-12)))
    h = t / steps
    vmax = np.max(np.abs(_potential(lat, lat.values, kernel, coupling, W)))
    if abs(h) * vmax > 1.0:
        raise ValueError(f"step-bound violation: dt*max|V| = {abs(h) * vmax:.3g} > 1")
    half = np.exp(-0.5j * h * k ** 2 / 2)
    psi = lat.values.copy()
    every = max(1, steps // n_out) if n_out else steps
    times, traj = [0.0], [lat]
    for n in range(1, steps + 1):
        psi = np.fft.ifft(half * np.fft.fft(psi))
        psi = psi * np.exp(-1j * h * _potential(lat, psi, kernel, coupling, W))
        psi = np.fft.ifft(half * np.fft.fft(psi))
        if n % every == 0 or n == steps:
            if times[-1] != n * h:
                times.append(n * h)
                traj.append(lat.replace(psi.copy()))
    return np.array(times), traj


def plane_wave(M, spacing, mode, amplitude):
    x = spacing * np.arange(M)
    k = 2 * np.pi * mode / (M * spacing)
    return LatticeWavefunction(amplitude * np.exp(1j * k * x), spacing), k


def plane_wave_residual(M=16, spacing=0.5, mode=2, amplitude=0.7, t=1.0, dt=1e-3, coupling=1.0):
    """max |psi_num - A e^{i(kx - omega t)}| with omega = k^2/2 + coupling |A|^2."""
    lat, k = plane_wave(M, spacing, mode, amplitude)
    _, traj = hartree_nls_solve(lat, t, dt, "delta", coupling)
    omega = k ** 2 / 2 + coupling * amplitude ** 2
    exact = amplitude * np.exp(1j * (k * lat.x - omega * t))
    return float(np.max(np.abs(traj[-1].values - exact)))


def lattice_kinetic_matrix(M, spacing):
    """Spectral -1/2 Laplacian on the periodic lattice, as an M x M matrix."""
    k = 2 * np.pi * np.fft.fftfreq(M, d=spacing)
    F = np.fft.fft(np.eye(M), axis=0)
    Kmat = np.linalg.solve(F, (k ** 2 / 2)[:, None] * F)
    return (Kmat + Kmat.conj().T) / 2


def lattice_spec(M, spacing=1.0, kernel="delta", coupling=1.0, W=None, epsilon=1.0):
    """One-particle space = lattice sites; Phi diagonal in site pairs so the
    Vlasov mean field equals the Hartree potential."""
    lat = LatticeWavefunction(np.ones(M), spacing, allow_small=True)
    K = lattice_kinetic_matrix(M, spacing)
    if kernel == "delta":
        wmat = np.eye(M) / spacing
    else:
        w = _kernel_values(lat, W)
        wmat = np.array([[w[(a - b) % M] for b in range(M)] for a in range(M)])
    Phi = np.diag(coupling * wmat.reshape(-1)).astype(complex)
    return HamiltonianSpec(d=M, K=K, Phi2=Phi, epsilon=epsilon)


def hartree_vs_vlasov(lat, t, kernel="delta", coupling=1.0, W=None, dt=1e-3):
    """||f_1(t) - |psi_t><psi_t|||_1 with f_1 from the Vlasov solver on the
    shared M-dimensional space."""
    spec = lattice_spec(lat.M, lat.spacing, kernel, coupling, W)
    u = lat.unit_vector()
    if abs(np.linalg.norm(u) - 1) > 1e-12:
        raise ValueError("lattice wavefunction must be normalized")
    _, vf = vlasov_solve(spec, np.outer(u, u.conj()), t, dt=dt)
    _, traj = hartree_nls_solve(lat, t, dt, kernel, coupling, W)
    v = traj[-1].unit_vector()
    return hilbert.trace_norm(vf[-1] - np.outer(v, v.conj()))


def pure_state_bridge(lat, epsilons, t, s_list=(1, 2), kernel="delta", coupling=1.0, W=None, dt=1e-3):
    """||eps^s F_s(t) - |psi_t><psi_t|^{(s)}||_1 with the many-body model on
    the lattice sites and psi_t from the Hartree/NLS integrator."""
    base = lattice_spec(lat.M, lat.spacing, kernel, coupling, W)
    u = lat.unit_vector()
    _, traj = hartree_nls_solve(lat, t, dt, kernel, coupling, W)
    v = traj[-1].unit_vector()
    proj = np.outer(v, v.conj())
    study = ScalingStudy(list(epsilons), [t], [f"bridge_s{s}" for s in s_list])
    for eps in epsilons:
        F = fock_marginals(base.with_(epsilon=eps), u, 1.0 / eps, [t], s_list)
        for s in s_list:
            study.add(eps, t, f"bridge_s{s}", hilbert.trace_norm(eps ** s * F[(float(t), s)] - _product(proj, s)))
    return study

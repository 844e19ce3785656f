"""Generalized quantum kinetic equation: generated evolution operators,
kinetic cluster expansions, GQKE solvers, marginal and correlation
functionals, and the correlated-initial-data variant.

The generated evolution operators are built from the recursion

    A(X') = sum_{Z subset X'} V(X' minus Z) K(Y cup X' minus Z; Z)

where A is a scattering cumulant (or its correlated analogue) and K
distributes the particles of Z over dissection blocks attached to distinct
particles of the remaining set. Solving for V gives an alternating sum over
chains of removed subsets; the k = 0 term of that chain sum is A alone."""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import combinatorics as cmb
from . import hilbert
from .cumulants import KahanSum, cumulant
from .dynamics import evolve, free_evolve, interaction_hamiltonian
from .hilbert import kron_placed, left_mul_subset, trace_out_last

log = logging.getLogger(__name__)

MAX_TAIL = 3


@dataclass
class InitialCorrelations:
    """h_n on n particles for n >= 2; a missing entry means h_n = I."""
    h: dict = field(default_factory=dict)

    def __post_init__(self):
        self.h = {int(k): np.asarray(v, dtype=complex) for k, v in self.h.items()}
        for k, v in self.h.items():
            if k < 2:
                raise ValueError("correlations start at two particles")
            if not hilbert.is_hermitian(v):
                raise ValueError(f"h_{k} must be Hermitian")

    def get(self, n, d):
        if n in self.h:
            return self.h[n]
        return np.eye(d ** n, dtype=complex)

    @property
    def trivial(self):
        return all(np.allclose(v, np.eye(v.shape[0]), atol=0) for v in self.h.values())


@dataclass
class KineticSolution:
    times: np.ndarray
    F1: list
    n_max: int
    tails: list
    method: str = "series"

    @property
    def trace_drift(self):
        tr0 = np.trace(self.F1[0]).real
        return [abs(np.trace(f).real - tr0) for f in self.F1]

    def table(self):
        rows = []
        for t, f, tail in zip(self.times, self.F1, self.tails):
            rows.append((float(t), hilbert.trace_norm(f), float(np.trace(f).real), float(tail)))
        return rows


# --- cumulant flavours --------------------------------------------------------

class Kernel:
    """Block cumulants used by the kinetic recursion.

    kind = "scattering": A-hat (cumulants of scattering operators)
    kind = "group":      A(-t) (cumulants of the interacting groups)
    kind = "correlated": A-breve = A(-t) h prod G_1(t), evaluated via the
                         scattering route A-hat o (dressed h)
    kind = "correlated_group": the same object via the direct group route
    """

    def __init__(self, spec, t, kind="scattering", h=None):
        self.spec, self.t, self.kind = spec, t, kind
        self.h = h if h is not None else InitialCorrelations()

    def _h_on(self, labels, m):
        n = len(labels)
        if n < 2:
            return None
        hn = self.h.h.get(n)
        return hn

    def apply(self, clusters, x, m):
        clusters = [tuple(c) for c in clusters]
        labels = tuple(sorted(i for c in clusters for i in c))
        spec, t = self.spec, self.t
        if self.kind == "scattering":
            return cumulant(spec, t, clusters, x, m, flavor="scattering")
        if self.kind == "group":
            return cumulant(spec, t, clusters, x, m, direction="backward")
        hn = self._h_on(labels, m)
        if self.kind == "correlated":
            if hn is not None:
                ht = free_evolve(spec, -t, tuple(range(1, len(labels) + 1)), hn, len(labels))
                x = left_mul_subset(ht, labels, x, m, spec.d)
            return cumulant(spec, t, clusters, x, m, flavor="scattering")
        if self.kind == "correlated_group":
            y = free_evolve(spec, t, labels, x, m)
            if hn is not None:
                y = left_mul_subset(hn, labels, y, m, spec.d)
            return cumulant(spec, t, clusters, y, m, direction="backward")
        raise ValueError(f"unknown kernel kind {self.kind!r}")


def _k_map(kernel, base, Z, x, m):
    """K(base; Z) x: sum over set partitions D of Z with |D| <= |base| and
    injective attachments i: D -> base of prod_k A_{1+|X_k|}(i_k, X_k)."""
    Z = tuple(Z)
    if not Z:
        return x
    acc = KahanSum(x)
    for D in cmb.enumerate_dissections(Z, max_blocks=len(base)):
        for att in itertools.permutations(base, len(D.blocks)):
            y = x
            for i, blk in zip(att, D.blocks):
                y = kernel.apply([(i,)] + [(j,) for j in blk], y, m)
            acc.add(y)
    return acc.value


def _lead(kernel, y, tail, x, m, theta):
    clusters = ([(i,) for i in y] if theta else [tuple(y)]) + [(j,) for j in tail]
    return kernel.apply(clusters, x, m)


def _v_rec(kernel, y, tail, x, m, theta):
    acc = KahanSum(x)
    acc.add(_lead(kernel, y, tail, x, m, theta))
    for z in cmb.enumerate_subsets(tail, nonempty_only=True):
        rest = tuple(j for j in tail if j not in z)
        base = tuple(y) + rest
        acc.add(-_v_rec(kernel, y, rest, _k_map(kernel, base, z, x, m), m, theta))
    return acc.value


def generated_evolution_V(spec, t, y, tail, x, m=None, theta=False, kernel=None):
    """V_{1+n}(t, {Y}, tail) applied to x (an operator on m particles).
    theta=True declusterizes the first argument (correlation functionals)."""
    y, tail = tuple(y), tuple(tail)
    if len(tail) > MAX_TAIL:
        raise cmb.CapacityError("generated evolution tail", len(tail), MAX_TAIL)
    m = m if m is not None else len(y) + len(tail)
    kernel = kernel or Kernel(spec, t, "scattering")
    return _v_rec(kernel, y, tail, x, m, theta)


def generated_evolution_G(spec, t, h, y, tail, x, m=None, theta=False):
    """Correlated-data analogue (scattering cumulants replaced by A-breve)."""
    return generated_evolution_V(spec, t, y, tail, x, m, theta, Kernel(spec, t, "correlated", h))


def generated_evolution_V_literal(spec, t, s, n, x):
    """Term-by-term assembly of the written alternating multi-index sum with
    fixed label order: consecutive-run dissections, weights n!/(n-sum n_j)!,
    1/|D|! with ordered distinct attachments and prod 1/|X|!. Equals the
    exact operator only under the trace against symmetric product states."""
    m = s + n
    kernel = Kernel(spec, t, "scattering")
    Y = tuple(range(1, s + 1))
    acc = KahanSum(x)
    for k in range(n + 1):
        for ns in _positive_sequences(n, k):
            used = sum(ns)
            w = (-1) ** k * math.factorial(n) / math.factorial(n - used)
            y = x
            hi = s + n
            for nj in ns:
                lo = hi - nj
                Z = tuple(range(lo + 1, hi + 1))
                base = tuple(range(1, lo + 1))
                y = _k_literal(kernel, base, Z, y, m)
                hi = lo
            y = kernel.apply([Y] + [(j,) for j in range(s + 1, s + n - used + 1)], y, m)
            acc.add(w * y)
    return acc.value


def _positive_sequences(n, k):
    if k == 0:
        return [()]
    out = []
    for first in range(1, n + 1):
        for rest in _positive_sequences(n - first, k - 1):
            out.append((first,) + rest)
    return out


def _k_literal(kernel, base, Z, x, m):
    acc = KahanSum(x)
    for blocks in cmb.compositions(Z, len(base)):
        w = 1.0 / math.factorial(len(blocks))
        for b in blocks:
            w /= math.factorial(len(b))
        for att in itertools.permutations(base, len(blocks)):
            y = x
            for i, blk in zip(att, blocks):
                y = kernel.apply([(i,)] + [(j,) for j in blk], y, m)
            acc.add(w * y)
    return acc.value


def verify_kinetic_cluster_expansion(spec, t, s, n, rng=None, probe=None):
    """|| A_{1+n}(-t,{Y},tail) f - sum_Z V(tail minus Z) K(base; Z) f || with
    K built from group cumulants; operator-norm residual on a random probe."""
    if n > MAX_TAIL:
        raise cmb.CapacityError("kinetic cluster expansion order", n, MAX_TAIL)
    rng = rng or np.random.default_rng(0)
    m = s + n
    f = probe if probe is not None else hilbert.random_hermitian(spec.d ** m, rng)
    Y = tuple(range(1, s + 1))
    tail = tuple(range(s + 1, m + 1))
    lhs = cumulant(spec, t, [Y] + [(j,) for j in tail], f, m)
    gk = Kernel(spec, t, "group")
    rhs = KahanSum(f)
    for z in cmb.enumerate_subsets(tail):
        rest = tuple(j for j in tail if j not in z)
        base = Y + rest
        rhs.add(generated_evolution_V(spec, t, Y, rest, _k_group(gk, base, z, f, m), m))
    return float(np.linalg.norm(lhs - rhs.value, 2))


def _k_group(kernel, base, Z, x, m):
    """K(base; Z) with group cumulants, including the one-particle groups on
    base particles that carry no block."""
    acc = KahanSum(x)
    spec, t = kernel.spec, kernel.t
    for D in cmb.enumerate_dissections(Z, max_blocks=len(base)) if Z else [cmb.Dissection(())]:
        for att in itertools.permutations(base, len(D.blocks)):
            y = x
            for i, blk in zip(att, D.blocks):
                y = kernel.apply([(i,)] + [(j,) for j in blk], y, m)
            free = tuple(b for b in base if b not in att)
            y = free_evolve(spec, -t, free, y, m)
            acc.add(y)
    return acc.value


def verify_correlated_cluster_expansion(spec, t, s, n, h, rng=None):
    """Same identity for correlated data: A-breve via the group route on the
    left, G-operators via the scattering route on the right."""
    rng = rng or np.random.default_rng(0)
    m = s + n
    f = hilbert.random_hermitian(spec.d ** m, rng)
    Y = tuple(range(1, s + 1))
    tail = tuple(range(s + 1, m + 1))
    direct = Kernel(spec, t, "correlated_group", h)
    lhs = direct.apply([Y] + [(j,) for j in tail], f, m)
    rhs = KahanSum(f)
    for z in cmb.enumerate_subsets(tail):
        rest = tuple(j for j in tail if j not in z)
        base = Y + rest
        rhs.add(generated_evolution_G(spec, t, h, Y, rest, _k_map(direct, base, z, f, m), m))
    return float(np.linalg.norm(lhs - rhs.value, 2))


# --- functionals -------------------------------------------------------------------

def _product(F1, m, d):
    return kron_placed([(F1, (i,)) for i in range(1, m + 1)], m, d)


def _functional_terms(spec, t, F1, s, n_max, theta=False, h=None):
    d = spec.d
    Y = tuple(range(1, s + 1))
    terms = []
    for n in range(n_max + 1):
        m = s + n
        x = _product(F1, m, d)
        tail = tuple(range(s + 1, m + 1))
        if h is None:
            v = generated_evolution_V(spec, t, Y, tail, x, m, theta)
        else:
            v = generated_evolution_G(spec, t, h, Y, tail, x, m, theta)
        terms.append(trace_out_last(v, n, d) / math.factorial(n))
    return terms


def _smallness(F1, bound, what):
    if hilbert.trace_norm(F1) >= bound:
        warnings.warn(f"{what}: ||F1|| = {hilbert.trace_norm(F1):.3g} exceeds the sufficient "
                      f"convergence bound {bound:.3g}", RuntimeWarning)


def marginal_functional(spec, t, F1_t, s, n_max=3, h=None, return_terms=False):
    """F_s(t | F_1(t)) = sum_n 1/n! Tr V_{1+n}(t,{Y},tail) prod F_1(t)."""
    _smallness(F1_t, math.exp(-(3 * s + 2)), "marginal functional")
    terms = _functional_terms(spec, t, F1_t, s, n_max, h=h)
    total = sum(terms[1:], terms[0].copy())
    return (total, terms) if return_terms else total


def correlation_functional(spec, t, F1_t, s, n_max=3, return_terms=False):
    """G_s(t | F_1(t)) with the declusterized first argument."""
    terms = _functional_terms(spec, t, F1_t, s, n_max, theta=True)
    total = sum(terms[1:], terms[0].copy())
    return (total, terms) if return_terms else total


def collision_integral(spec, t, F1, n_max=3, h=None, return_terms=False):
    """Tr_2(-N_int(1,2)) sum_n 1/n! Tr_{3..n+2} V_{1+n}(t,{1,2},...) prod F1."""
    d = spec.d
    v = interaction_hamiltonian(spec, [(1,), (2,)], 2)
    terms = []
    for x in _functional_terms(spec, t, F1, 2, n_max, h=h):
        terms.append(trace_out_last(-1j * (v @ x - x @ v), 1, d))
    total = sum(terms[1:], terms[0].copy())
    return (total, terms) if return_terms else total


def gqke_collision_integral(spec, t, F1, n_max=3):
    _smallness(F1, math.exp(-8), "collision integral")
    return collision_integral(spec, t, F1, n_max)


def gqke_rhs(spec, t, F1, n_max=3, h=None):
    k = spec.K
    return -1j * (k @ F1 - F1 @ k) + collision_integral(spec, t, F1, n_max, h)


def series_F1(spec, F1_0, t, n_max=3, return_terms=False):
    """F_1(t) = sum_n 1/n! Tr A_{1+n}(-t, 1..n+1) prod F1_0."""
    d = spec.d
    terms = []
    for n in range(n_max + 1):
        m = 1 + n
        y = cumulant(spec, t, [(i,) for i in range(1, m + 1)], _product(F1_0, m, d), m)
        terms.append(trace_out_last(y, n, d) / math.factorial(n))
    total = sum(terms[1:], terms[0].copy())
    return (total, terms) if return_terms else total


def _rk4(rhs, y0, t_end, dt):
    steps = max(1, int(math.ceil(abs(t_end) / dt - 1e-12)))
    h = t_end / steps
    ts, ys = [0.0], [y0]
    y, t = y0, 0.0
    for _ in range(steps):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        ts.append(t)
        ys.append(y)
    return np.array(ts), ys


def solve_gqke(spec, F1_0, t, method="series", n_max=3, dt=1e-2, times=None, h=None):
    """Both solvers return a KineticSolution. The timestep solver reports the
    Richardson difference to a half-step run as its error estimate."""
    if method == "series":
        _smallness(F1_0, 1 / (math.e * (1 + math.e ** 9)), "kinetic series")
        times = np.linspace(0, t, 5) if times is None else np.asarray(times)
        F, tails = [], []
        for tt in times:
            tot, terms = series_F1(spec, F1_0, tt, n_max, return_terms=True)
            F.append(tot)
            tails.append(hilbert.trace_norm(terms[-1]))
        return KineticSolution(times, F, n_max, tails, "series")
    if method == "timestep":
        rhs = lambda tt, y: gqke_rhs(spec, tt, y, n_max, h)
        ts, ys = _rk4(rhs, F1_0, t, dt)
        _, yh = _rk4(rhs, F1_0, t, dt / 2)
        err = hilbert.trace_norm(yh[-1] - ys[-1]) * 16 / 15
        tails = [0.0] * (len(ts) - 1) + [err]
        return KineticSolution(ts, ys, n_max, tails, "timestep")
    raise ValueError(f"unknown method {method!r}")


def scattering_probe(spec, t, F1):
    """Long-time scattering-operator probe of the first collision term."""
    d = spec.d
    v = interaction_hamiltonian(spec, [(1,), (2,)], 2)
    from .dynamics import scatter
    y = scatter(spec, t, (1, 2), _product(F1, 2, d), 2)
    return trace_out_last(-1j * (v @ y - y @ v), 1, d)


def dispersion_from_functionals(spec, t, a1, F1_t, n_max=3):
    """Dispersion functional using G_1 = F_1(t) and G_2(t | F_1(t))."""
    from .states import dispersion_functional
    G2 = correlation_functional(spec, t, F1_t, 2, n_max)
    return dispersion_functional(a1, F1_t, G2)

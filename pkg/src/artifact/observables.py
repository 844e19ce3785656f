"""Observable side: marginal observables, the dual hierarchy solution and the
mean-value functional."""
from __future__ import annotations

import math

import numpy as np

from . import combinatorics as cmb
from . import hilbert
from .cumulants import KahanSum, cumulant
from .dynamics import evolve
from .hilbert import kron_placed
from .sequences import OperatorSequence, sequence_functional


def _place(op, labels, s, d):
    """op (or scalar for empty labels) placed on `labels` inside s particles."""
    return kron_placed([(op, tuple(labels))], s, d)


def marginals_of_observables(A):
    """B_s = sum_{X subset Y} (-1)^{|X|} A_{s-|X|}(Y minus X)."""
    d = A.d
    ops = []
    for s in range(1, A.N_max + 1):
        Y = tuple(range(1, s + 1))
        acc = np.zeros((d ** s,) * 2, dtype=complex)
        for x in cmb.enumerate_subsets(Y):
            rest = tuple(i for i in Y if i not in x)
            acc += (-1) ** len(x) * _place(A[len(rest)], rest, s, d)
        ops.append(acc)
    return OperatorSequence(A.scalar0, ops, d)


def observables_from_marginals(B):
    """Inverse relation A_n = sum_{Z subset (1..n)} B_{|Z|}(Z)."""
    d = B.d
    ops = []
    for n in range(1, B.N_max + 1):
        Y = tuple(range(1, n + 1))
        acc = np.zeros((d ** n,) * 2, dtype=complex)
        for z in cmb.enumerate_subsets(Y):
            acc += _place(B[len(z)], z, n, d)
        ops.append(acc)
    return OperatorSequence(B.scalar0, ops, d)


def additive_observable(a1, N, d):
    """A^{(1)} = (0, a, a(1)+a(2), ...)."""
    ops = [sum(kron_placed([(a1, (i,))], n, d) for i in range(1, n + 1)) for n in range(1, N + 1)]
    return OperatorSequence(0.0, ops, d)


def k_ary_observable(ak, k, N, d):
    """A^{(k)}_n = sum over k-subsets of ak placed on them."""
    import itertools
    ops = []
    for n in range(1, N + 1):
        acc = np.zeros((d ** n,) * 2, dtype=complex)
        for sub in itertools.combinations(range(1, n + 1), k):
            acc += kron_placed([(ak, sub)], n, d)
        ops.append(acc)
    return OperatorSequence(0.0, ops, d)


def one_component(op, k, N, d):
    seq = OperatorSequence.zeros(N, d)
    seq.ops[k - 1] = np.asarray(op, dtype=complex)
    return seq


def number_observable(N, d):
    return one_component(np.eye(d), 1, N, d)


def _dual_cumulant_term(spec, B0, t, s, x):
    Y = tuple(range(1, s + 1))
    rest = tuple(i for i in Y if i not in x)
    if not rest:
        # cumulant of groups acting on a multiple of the identity vanishes
        return np.zeros((spec.d ** s,) * 2, dtype=complex)
    target = _place(B0[len(rest)], rest, s, spec.d)
    return cumulant(spec, t, [rest] + [(j,) for j in x], target, s, direction="forward")


def _dual_group_term(spec, B0, t, s, x):
    """sum_{Z subset X} (-1)^{|X minus Z|} G(t, (Y minus X) cup Z) B0(Y minus X)."""
    Y = tuple(range(1, s + 1))
    rest = tuple(i for i in Y if i not in x)
    target = _place(B0[len(rest)], rest, s, spec.d)
    acc = KahanSum(target)
    for z in cmb.enumerate_subsets(tuple(x)):
        labels = tuple(sorted(rest + z))
        acc.add((-1) ** (len(x) - len(z)) * evolve(spec, t, labels, target, s))
    return acc.value


def dual_bbgky_series(spec, B0, t, s, representation="cumulant"):
    """B_s(t), a finite sum over subsets X of Y."""
    if s > B0.N_max:
        raise cmb.CapacityError("dual order s", s, B0.N_max)
    fn = {"cumulant": _dual_cumulant_term, "group_expansion": _dual_group_term}.get(representation)
    if fn is None:
        raise ValueError(f"unknown representation {representation!r}")
    Y = tuple(range(1, s + 1))
    acc = KahanSum(np.zeros((spec.d ** s,) * 2, dtype=complex))
    for x in cmb.enumerate_subsets(Y):
        acc.add(fn(spec, B0, t, s, x))
    return acc.value


def dual_solution(spec, B0, t, representation="cumulant"):
    ops = [dual_bbgky_series(spec, B0, t, s, representation) for s in range(1, B0.N_max + 1)]
    return OperatorSequence(B0.scalar0, ops, B0.d)


def creation(B):
    """(a^+ g)_s(Y) = sum_j g_{s-1}(Y minus j); the scalar slot becomes 0."""
    d = B.d
    ops = []
    for s in range(1, B.N_max + 1):
        acc = np.zeros((d ** s,) * 2, dtype=complex)
        for j in range(1, s + 1):
            rest = tuple(i for i in range(1, s + 1) if i != j)
            acc += _place(B[s - 1], rest, s, d)
        ops.append(acc)
    return OperatorSequence(0.0, ops, d)


def exp_creation(B, sign=1):
    """e^{sign a^+} B; finite since a^+ raises the degree."""
    out = B.copy()
    term = B
    for k in range(1, B.N_max + 1):
        term = creation(term)
        out = _add(out, term, sign ** k / math.factorial(k))
    return out


def _add(a, b, c=1.0):
    return OperatorSequence(a.scalar0 + c * b.scalar0, [x + c * y for x, y in zip(a.ops, b.ops)], a.d)


def compact_dual_solution(spec, B0, t):
    """e^{-a^+} G(t) e^{a^+} B0."""
    up = exp_creation(B0, 1)
    up = up.map(lambda n, x: evolve(spec, t, range(1, n + 1), x, n))
    return exp_creation(up, -1)


def mean_value(B, F):
    """(B, F) = sum_s 1/s! Tr B_s F_s."""
    return sequence_functional(B, F)


def verify_duality(spec, B0, F0, t, Ft=None):
    """|(B(t), F(0)) - (B(0), F(t))| with both sides from the series."""
    from .states import bbgky_solution
    Bt = dual_solution(spec, B0, t)
    if Ft is None:
        Ft = bbgky_solution(spec, F0, t)
    return abs(mean_value(Bt, F0) - mean_value(B0, Ft))


def dual_generator(spec, B):
    """Right side of the dual hierarchy:
    (N B)_s + sum_{j1 != j2} N_int(j1,j2) B_{s-1}(Y minus j1)."""
    from .dynamics import generator_N, generator_Nint
    d = spec.d
    ops = []
    for s in range(1, B.N_max + 1):
        r = generator_N(spec, s, B[s], "observable")
        for j1 in range(1, s + 1):
            rest = tuple(i for i in range(1, s + 1) if i != j1)
            lower = _place(B[s - 1], rest, s, d)
            for j2 in range(1, s + 1):
                if j2 != j1:
                    r = r + generator_Nint(spec, [(j1,), (j2,)], s, lower, "observable")
        ops.append(r)
    return OperatorSequence(0.0, ops, d)


def random_observable(N, d, rng, scalar0=0.0, scale=1.0):
    from .sequences import random_sequence
    return random_sequence(N, d, rng, scalar0=scalar0, scale=scale)

"""Truncated operator sequences and the star-product algebra."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import combinatorics as cmb
from . import hilbert
from .hilbert import kron_placed, Statistics


@dataclass
class OperatorSequence:
    """(scalar0, f_1, ..., f_Nmax); ops[k] lives on k+1 particles."""
    scalar0: complex
    ops: list
    d: int
    statistics: Statistics = Statistics.MB
    symmetric: bool = False

    def __post_init__(self):
        self.ops = [np.asarray(o, dtype=complex) for o in self.ops]
        for k, o in enumerate(self.ops):
            if o.shape != (self.d ** (k + 1),) * 2:
                raise ValueError(f"component {k + 1} has shape {o.shape}")

    @property
    def N_max(self):
        return len(self.ops)

    def __getitem__(self, n):
        if n == 0:
            return np.array([[self.scalar0]], dtype=complex)
        if n > self.N_max:
            return np.zeros((self.d ** n,) * 2, dtype=complex)
        return self.ops[n - 1]

    def component(self, n):
        return self[n]

    @classmethod
    def zeros(cls, N, d, scalar0=0.0):
        return cls(scalar0, [np.zeros((d ** k,) * 2, dtype=complex) for k in range(1, N + 1)], d)

    @classmethod
    def chaos(cls, f1, N, d, scalar0=0.0):
        """(scalar0, f1, 0, 0, ...)"""
        s = cls.zeros(N, d, scalar0)
        s.ops[0] = np.asarray(f1, dtype=complex)
        return s

    def copy(self):
        return OperatorSequence(self.scalar0, [o.copy() for o in self.ops], self.d,
                                self.statistics, self.symmetric)

    def map(self, fn):
        return OperatorSequence(self.scalar0, [fn(k + 1, o) for k, o in enumerate(self.ops)],
                                self.d, self.statistics, self.symmetric)

    def truncate(self, N):
        ops = [self[k] for k in range(1, N + 1)]
        return OperatorSequence(self.scalar0, ops, self.d, self.statistics, self.symmetric)

    def check_symmetric(self, tol=1e-10):
        for o in self.ops:
            if np.linalg.norm(hilbert.symmetrize(o, self.d) - o) > tol * max(1, np.linalg.norm(o)):
                return False
        return True

    # norms ---------------------------------------------------------------
    def norm_gamma(self, gamma):
        vals = [abs(self.scalar0)] + [gamma ** (k + 1) / math.factorial(k + 1) * hilbert.operator_norm(o)
                                       for k, o in enumerate(self.ops)]
        return max(vals)

    def norm_l1(self):
        return abs(self.scalar0) + sum(hilbert.trace_norm(o) for o in self.ops)

    def allclose(self, other, tol):
        return residual(self, other) <= tol

    def to_json_obj(self):
        return {"scalar0": [float(np.real(self.scalar0)), float(np.imag(self.scalar0))],
                "components": [hilbert.to_json_obj(o, self.d) for o in self.ops],
                "statistics": self.statistics.value}

    @classmethod
    def from_json_obj(cls, obj):
        ops = [hilbert.from_json_obj(c) for c in obj["components"]]
        d = obj["components"][0]["one_particle_dim"] if ops else 1
        return cls(complex(*obj["scalar0"]), ops, d, Statistics(obj.get("statistics", "MB")))


def residual(a, b):
    """max componentwise trace-norm distance."""
    N = max(a.N_max, b.N_max)
    r = abs(a.scalar0 - b.scalar0)
    for n in range(1, N + 1):
        r = max(r, hilbert.trace_norm(a[n] - b[n]))
    return r


def _check(f, g):
    if f.d != g.d:
        raise ValueError("one-particle dimensions differ")


def _part(f, labels, n):
    """factor f_{|labels|} placed on labels (scalar for the empty set)."""
    return (f[len(labels)], labels)


def star_product(f, g, N=None):
    _check(f, g)
    N = N if N is not None else min(f.N_max, g.N_max)
    d = f.d
    out = OperatorSequence.zeros(N, d, f.scalar0 * g.scalar0)
    for n in range(1, N + 1):
        Y = tuple(range(1, n + 1))
        acc = np.zeros((d ** n,) * 2, dtype=complex)
        for z in cmb.enumerate_subsets(Y):
            rest = tuple(i for i in Y if i not in z)
            acc += kron_placed([_part(f, z, n), _part(g, rest, n)], n, d)
        out.ops[n - 1] = acc
    return out


def _partition_sum(h, n, weight):
    d = h.d
    acc = np.zeros((d ** n,) * 2, dtype=complex)
    for p in cmb.enumerate_partitions(tuple(range(1, n + 1))):
        w = weight(len(p))
        if w == 0:
            continue
        acc += w * kron_placed([(h[len(b)], b) for b in p], n, d)
    return acc


def star_exp(h):
    if abs(h.scalar0) > 0:
        raise ValueError("Exp* needs a zero scalar component")
    out = OperatorSequence.zeros(h.N_max, h.d, 1.0)
    for n in range(1, h.N_max + 1):
        out.ops[n - 1] = _partition_sum(h, n, lambda k: 1)
    return out


def star_ln(D):
    if abs(D.scalar0 - 1) > 1e-12:
        raise ValueError("Ln* needs scalar component 1")
    out = OperatorSequence.zeros(D.N_max, D.d, 0.0)
    for n in range(1, D.N_max + 1):
        out.ops[n - 1] = _partition_sum(D, n, cmb.mobius_weight)
    return out


def cluster_ln(D, s, n):
    """Correlation of the cluster {Y}={1..s} with particles s+1..s+n:
    sum over partitions of ({Y}, s+1, ..., s+n) of Mobius-weighted products
    of D on the declusterized blocks."""
    d = D.d
    m = s + n
    Y = tuple(range(1, s + 1))
    items = [Y] + [(j,) for j in range(s + 1, m + 1)]
    acc = np.zeros((d ** m,) * 2, dtype=complex)
    for p in cmb.partitions_of_list(items):
        blocks = [tuple(sorted(i for c in b for i in c)) for b in p]
        acc += cmb.mobius_weight(len(p)) * kron_placed([(D[len(b)], b) for b in blocks], m, d)
    return acc


def shift_map(f, y, cluster=False, N=None):
    """The d_Y mapping. Component n acts on |y|+n particles (y first).

    With cluster=True `f` is read as a correlation sequence g and the result
    is d_{Y} applied with Y treated as one element: g_{1+n}({Y}, ...)."""
    s = len(tuple(y))
    if s == 0:
        return f.copy()
    if N is None:
        N = f.N_max - s
    if N < 0 or s + N > f.N_max:
        raise cmb.CapacityError("shift_map order", s + N, f.N_max)
    if cluster:
        D = star_exp(f)
        comps = [cluster_ln(D, s, n) for n in range(N + 1)]
    else:
        comps = [f[s + n] for n in range(N + 1)]
    return ShiftedSequence(s, comps, f.d)


@dataclass
class ShiftedSequence:
    """Components c_n acting on (Y, s+1..s+n), n = 0..N."""
    s: int
    comps: list
    d: int = 2

    @property
    def N(self):
        return len(self.comps) - 1

    def __getitem__(self, n):
        return self.comps[n]


def shifted_star(f, sh, N=None):
    """(f * d_Y g)_n(X) = sum_{Z subset X} f(Z) g(Y, X minus Z); output acts on (Y, X)."""
    s, d = sh.s, sh.d
    N = sh.N if N is None else N
    out = []
    for n in range(N + 1):
        m = s + n
        Y = tuple(range(1, s + 1))
        X = tuple(range(s + 1, m + 1))
        acc = np.zeros((d ** m,) * 2, dtype=complex)
        for z in cmb.enumerate_subsets(X):
            rest = tuple(i for i in X if i not in z)
            acc += kron_placed([(f[len(z)], z), (sh[len(rest)], Y + rest)], m, d)
        out.append(acc)
    return ShiftedSequence(s, out, d)


def round_star_partition_sum(f, s, n):
    """sum_P (d_{X_1} f * ... * d_{X_|P|} f) over partitions of Y={1..s},
    component n on (Y, s+1..s+n): extra labels are distributed over factors."""
    d = f.d
    m = s + n
    X = tuple(range(s + 1, m + 1))
    acc = np.zeros((d ** m,) * 2, dtype=complex)
    for p in cmb.enumerate_partitions(tuple(range(1, s + 1))):
        k = len(p)
        for assign in itertools.product(range(k), repeat=n):
            blocks = [tuple(b) + tuple(x for x, a in zip(X, assign) if a == i) for i, b in enumerate(p)]
            acc += kron_placed([(f[len(b)], b) for b in blocks], m, d)
    return acc


def sequence_functional(g, f):
    """(g, f) = sum_n 1/n! Tr g_n f_n."""
    N = min(g.N_max, f.N_max)
    val = g.scalar0 * f.scalar0
    for n in range(1, N + 1):
        val += np.trace(g[n] @ f[n]) / math.factorial(n)
    return complex(val)


def normalization(f):
    """(I, f)."""
    val = f.scalar0
    for n in range(1, f.N_max + 1):
        val += np.trace(f[n]) / math.factorial(n)
    return complex(val)


def identity_observable(N, d):
    return OperatorSequence(1.0, [np.eye(d ** k, dtype=complex) for k in range(1, N + 1)], d)


def unit(N, d):
    return OperatorSequence.zeros(N, d, 1.0)


def random_sequence(N, d, rng, scalar0=0.0, scale=1.0, symmetric=True, hermitian=True):
    ops = []
    for k in range(1, N + 1):
        a = hilbert.random_hermitian(d ** k, rng, scale) if hermitian else \
            scale * (rng.normal(size=(d ** k,) * 2) + 1j * rng.normal(size=(d ** k,) * 2))
        if symmetric:
            a = hilbert.symmetrize(a, d)
        ops.append(a)
    return OperatorSequence(scalar0, ops, d, symmetric=symmetric)

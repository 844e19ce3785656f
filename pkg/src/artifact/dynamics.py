"""Hamiltonians, exact evolution groups, generators and scattering operators.

Group convention: ``evolve(spec, tau, labels, x, n)`` returns
e^{i tau H_L} x e^{-i tau H_L} with H_L the Hamiltonian of the particles in
`labels`. The observable picture uses tau = t, the state picture tau = -t."""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

import numpy as np

from . import hilbert
from .hilbert import Statistics, conj_subset, kron_placed


@dataclass
class HamiltonianSpec:
    d: int
    K: np.ndarray
    Phi2: np.ndarray
    PhiK: dict | None = None
    epsilon: float = 1.0
    statistics: Statistics = Statistics.MB
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=complex)
        self.Phi2 = np.asarray(self.Phi2, dtype=complex)
        self.statistics = Statistics(self.statistics)
        d = self.d
        if self.K.shape != (d, d) or self.Phi2.shape != (d * d, d * d):
            raise ValueError("K must be d x d and Phi2 must be d^2 x d^2")
        if not hilbert.is_hermitian(self.K) or not hilbert.is_hermitian(self.Phi2):
            raise ValueError("K and Phi2 must be Hermitian")
        swap = hilbert.permutation_operator((1, 0), d)
        if np.linalg.norm(swap @ self.Phi2 @ swap - self.Phi2) > 1e-10:
            raise ValueError("Phi2 must be swap symmetric")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.PhiK:
            self.PhiK = {int(k): np.asarray(v, dtype=complex) for k, v in self.PhiK.items()}
            for k, v in self.PhiK.items():
                if k < 3 or v.shape != (d ** k, d ** k) or not hilbert.is_hermitian(v):
                    raise ValueError(f"bad {k}-body potential")

    def with_(self, **kw):
        args = dict(d=self.d, K=self.K, Phi2=self.Phi2, PhiK=self.PhiK,
                    epsilon=self.epsilon, statistics=self.statistics)
        args.update(kw)
        return HamiltonianSpec(**args)

    # cached pieces ------------------------------------------------------
    def _get(self, key, make):
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            hit = make()
            with self._lock:
                if len(self._cache) > 4000:
                    # propagators are cheap to rebuild; keep Hamiltonians
                    self._cache = {k: v for k, v in self._cache.items() if k[0] in ("H", "eig")}
                self._cache[key] = hit
        return hit

    def hamiltonian(self, n):
        return self._get(("H", n), lambda: build_hamiltonian(self, n))

    def eig(self, n):
        return self._get(("eig", n), lambda: np.linalg.eigh(self.hamiltonian(n)))

    def propagator(self, n, tau):
        def make():
            w, v = self.eig(n)
            return (v * np.exp(1j * tau * w)) @ v.conj().T
        return self._get(("U", n, float(tau)), make)

    def free_propagator(self, m, tau):
        def make():
            u = self.propagator(1, tau)
            out = np.ones((1, 1), dtype=complex)
            for _ in range(m):
                out = np.kron(out, u)
            return out
        return self._get(("U0", m, float(tau)), make)


def reference_fixture(lam=1.0, epsilon=1.0, d=2):
    """d=2, K=diag(0,1), Phi=lam*|11><11| (generalized to the top level for d>2)."""
    K = np.diag(np.arange(d, dtype=float)) / max(d - 1, 1)
    Phi = np.zeros((d * d, d * d))
    Phi[-1, -1] = lam
    return HamiltonianSpec(d=d, K=K, Phi2=Phi, epsilon=epsilon)


def random_spec(d, rng, lam=1.0, epsilon=1.0):
    K = hilbert.random_hermitian(d, rng, 0.5)
    P = hilbert.random_hermitian(d * d, rng, 0.5 * lam)
    swap = hilbert.permutation_operator((1, 0), d)
    P = (P + swap @ P @ swap) / 2
    return HamiltonianSpec(d=d, K=K, Phi2=P, epsilon=epsilon)


def interaction_hamiltonian(spec, clusters, n):
    """Interaction among the particles of `clusters` counting only potential
    terms whose support meets at least two clusters. A single cluster gives
    the full interaction inside it."""
    clusters = [tuple(c) for c in clusters]
    if len(clusters) == 1:
        clusters = [(i,) for i in clusters[0]]
    owner = {}
    for ci, c in enumerate(clusters):
        for i in c:
            if i < 1 or i > n or i in owner:
                raise ValueError(f"labels {clusters} invalid for n={n}")
            owner[i] = ci
    labels = sorted(owner)
    d = spec.d
    out = np.zeros((d ** n, d ** n), dtype=complex)
    terms = [(2, spec.Phi2, spec.epsilon)]
    for k, v in (spec.PhiK or {}).items():
        terms.append((k, v, spec.epsilon ** (k - 1)))
    for k, v, w in terms:
        for sub in itertools.combinations(labels, k):
            if len({owner[i] for i in sub}) < 2:
                continue
            out += w * kron_placed([(v, sub)], n, d)
    return out


def build_hamiltonian(spec, n):
    hilbert.check_capacity(spec.d, n)
    d = spec.d
    h = np.zeros((d ** n, d ** n), dtype=complex)
    for i in range(1, n + 1):
        h += kron_placed([(spec.K, (i,))], n, d)
    if n >= 2:
        h += interaction_hamiltonian(spec, [tuple(range(1, n + 1))], n)
    return h


# --- groups -----------------------------------------------------------------

def evolve(spec, tau, labels, x, n):
    labels = tuple(labels)
    if not labels or tau == 0:
        return x
    return conj_subset(spec.propagator(len(labels), tau), labels, x, n, spec.d)


def free_evolve(spec, tau, labels, x, n):
    """Product of one-particle groups over `labels`."""
    labels = tuple(labels)
    if not labels or tau == 0:
        return x
    return conj_subset(spec.free_propagator(len(labels), tau), labels, x, n, spec.d)


def heisenberg_group(spec, n, t, x):
    return evolve(spec, t, range(1, n + 1), x, n)


def vonneumann_group(spec, n, t, f):
    return evolve(spec, -t, range(1, n + 1), f, n)


def generator_N(spec, n, x, picture="observable"):
    h = spec.hamiltonian(n)
    c = h @ x - x @ h
    if picture == "observable":
        return 1j * c
    if picture == "state":
        return -1j * c
    raise ValueError(f"unknown picture {picture!r}")


def generator_Nint(spec, clusters, n, f, picture="state"):
    """Interaction-only commutator generator (state picture: -i[V,f])."""
    v = interaction_hamiltonian(spec, clusters, n)
    c = v @ f - f @ v
    if picture == "state":
        return -1j * c
    if picture == "observable":
        return 1j * c
    raise ValueError(f"unknown picture {picture!r}")


def scatter(spec, t, labels, x, n):
    """Scattering operator on `labels`: G(-t) applied after free G_1(t)'s."""
    labels = tuple(labels)
    if len(labels) <= 1 or t == 0:
        return x
    y = free_evolve(spec, t, labels, x, n)
    return evolve(spec, -t, labels, y, n)


def scattering_operator(spec, n, t):
    return lambda f: scatter(spec, t, range(1, n + 1), f, n)

"""Dense operators on tensor products of a d-dimensional one-particle space.

Operators are plain complex numpy arrays of shape (d**n, d**n); particle
labels are 1-based throughout the package."""
from __future__ import annotations

import enum
import itertools
import json
import math
import threading

import numpy as np

from .combinatorics import CapacityError

MAX_D = 4
MAX_N = 6
HERM_TOL = 1e-10


class Statistics(str, enum.Enum):
    MB = "MB"
    BOSE = "Bose"
    FERMI = "Fermi"


def n_particles(x, d):
    dim = x.shape[0]
    n = round(math.log(dim, d)) if dim > 1 else 0
    if d ** n != dim or x.shape != (dim, dim):
        raise ValueError(f"shape {x.shape} is not a square operator on ({d},)^n")
    return n


def check_capacity(d, n, max_d=MAX_D, max_n=MAX_N):
    if d > max_d:
        raise CapacityError("one-particle dimension d", d, max_d)
    if n > max_n:
        raise CapacityError("particle number n", n, max_n)


def is_hermitian(x, tol=HERM_TOL):
    return np.linalg.norm(x - x.conj().T, 2) <= tol * max(1.0, np.linalg.norm(x, 2))


def tensor(a, b, d=None):
    if d is not None:
        n_particles(a, d), n_particles(b, d)
    return np.kron(a, b)


def identity(n, d):
    return np.eye(d ** n, dtype=complex)


def ptrace(x, keep, n, d):
    """Partial trace keeping the (1-based) labels in `keep`."""
    keep = sorted(keep)
    if any(k < 1 or k > n for k in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid keep labels {keep} for n={n}")
    if len(keep) == n:
        return x.copy()
    t = x.reshape((d,) * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in range(n):
        if i + 1 not in keep:
            col[i] = row[i]
    out = "".join(row[k - 1] for k in keep) + "".join(col[k - 1] for k in keep)
    r = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    m = d ** len(keep)
    return r.reshape(m, m)


def trace_out_last(x, k, d):
    """Trace over the last k factors."""
    if k == 0:
        return x
    dim = x.shape[0]
    rest = dim // d ** k
    return np.einsum("aibi->ab", x.reshape(rest, d ** k, rest, d ** k))


def trace_norm(x):
    return float(np.sum(np.linalg.svd(x, compute_uv=False)))


def operator_norm(x):
    return float(np.linalg.norm(x, 2)) if x.size else 0.0


# --- placement of factors -------------------------------------------------

def _perm_to_sorted(order, n, d, arr):
    pos = {lab: i for i, lab in enumerate(order)}
    perm = [pos[j] for j in range(1, n + 1)]
    perm = perm + [n + p for p in perm]
    return arr.reshape((d,) * (2 * n)).transpose(perm).reshape(d ** n, d ** n)


def kron_placed(factors, n, d):
    """Product of operators acting on disjoint label blocks of an n-particle
    space; labels not covered get the identity. `factors` is a list of
    (operator or scalar, labels) with labels listed in the operator's own
    factor order."""
    order = []
    mat = np.ones((1, 1), dtype=complex)
    for op, labels in factors:
        labels = tuple(labels)
        if not labels:
            mat = mat * complex(np.asarray(op).reshape(-1)[0])
            continue
        mat = np.kron(mat, op)
        order.extend(labels)
    missing = [j for j in range(1, n + 1) if j not in set(order)]
    if missing:
        mat = np.kron(mat, np.eye(d ** len(missing)))
        order.extend(missing)
    if len(order) != n or len(set(order)) != n:
        raise ValueError(f"labels {order} do not tile 1..{n}")
    if order == list(range(1, n + 1)):
        return mat
    return _perm_to_sorted(order, n, d, mat)


def embed(op, positions, n, d):
    """`op` acting on the listed particles (in that order), identity elsewhere."""
    positions = tuple(positions)
    if any(p < 1 or p > n for p in positions):
        raise ValueError(f"positions {positions} out of range 1..{n}")
    if n_particles(op, d) != len(positions):
        raise ValueError("operator size does not match number of positions")
    return kron_placed([(op, positions)], n, d)


def conj_subset(p, labels, x, n, d):
    """p X p^dagger with p acting on `labels` (ordered as p's factors)."""
    labels = tuple(labels)
    m = len(labels)
    if m == 0:
        return x
    if m == n and labels == tuple(range(1, n + 1)):
        return p @ x @ p.conj().T
    t = x.reshape((d,) * (2 * n))
    u = p.reshape((d,) * (2 * m))
    ax = [l - 1 for l in labels]
    t = np.tensordot(u, t, axes=(list(range(m, 2 * m)), ax))
    t = np.moveaxis(t, list(range(m)), ax)
    cax = [n + l - 1 for l in labels]
    t = np.tensordot(t, u.conj(), axes=(cax, list(range(m, 2 * m))))
    t = np.moveaxis(t, list(range(2 * n - m, 2 * n)), cax)
    return t.reshape(d ** n, d ** n)


def left_mul_subset(p, labels, x, n, d):
    """p X with p acting on `labels`."""
    labels = tuple(labels)
    m = len(labels)
    if m == 0:
        return p.reshape(()) * x if p.size == 1 else x
    t = x.reshape((d,) * (2 * n))
    u = p.reshape((d,) * (2 * m))
    ax = [l - 1 for l in labels]
    t = np.tensordot(u, t, axes=(list(range(m, 2 * m)), ax))
    t = np.moveaxis(t, list(range(m)), ax)
    return t.reshape(d ** n, d ** n)


# --- unitary groups ---------------------------------------------------------

class EighCache:
    """Hermitian eigendecompositions keyed by matrix bytes."""

    def __init__(self):
        self._lock = threading.Lock()
        self._store = {}

    def get(self, h):
        key = (h.shape, h.tobytes())
        with self._lock:
            hit = self._store.get(key)
        if hit is None:
            hit = np.linalg.eigh(h)
            with self._lock:
                self._store[key] = hit
        return hit


_GLOBAL_CACHE = EighCache()


def unitary(h, tau, cache=None):
    """exp(i tau H) for Hermitian H."""
    w, v = (cache or _GLOBAL_CACHE).get(h)
    return (v * np.exp(1j * tau * w)) @ v.conj().T


def conjugate_by_group(h, t, x, direction="forward", cache=None):
    """forward: e^{itH} X e^{-itH}; backward: e^{-itH} X e^{itH}."""
    if not is_hermitian(h):
        raise ValueError("generator must be Hermitian")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    tau = t if direction == "forward" else -t
    u = unitary(h, tau, cache)
    return u @ x @ u.conj().T


# --- permutations and symmetrizers ------------------------------------------

def permutation_operator(perm, d):
    """Operator sending factor i to slot perm[i] (perm is a 0-based tuple)."""
    n = len(perm)
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i
    eye = np.eye(d ** n).reshape((d,) * (2 * n))
    return eye.transpose(inv + list(range(n, 2 * n))).reshape(d ** n, d ** n).astype(complex)


def _parity(perm):
    perm = list(perm)
    sgn = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sgn = -sgn
    return sgn


def symmetrizer(n, stat, d):
    stat = Statistics(stat)
    if n > MAX_N:
        raise CapacityError("symmetrizer particle number", n, MAX_N)
    out = np.zeros((d ** n, d ** n), dtype=complex)
    for perm in itertools.permutations(range(n)):
        sgn = _parity(perm) if stat == Statistics.FERMI else 1
        out += sgn * permutation_operator(perm, d)
    return out / math.factorial(n)


def symmetrize(x, d):
    """(1/n!) sum_pi P_pi X P_pi^dagger."""
    n = n_particles(x, d)
    out = np.zeros_like(x, dtype=complex)
    for perm in itertools.permutations(range(n)):
        p = permutation_operator(perm, d)
        out += p @ x @ p.T
    return out / math.factorial(n)


# --- serialization ----------------------------------------------------------

def to_json_obj(x, d):
    x = np.asarray(x, dtype=complex)
    return {
        "n_particles": n_particles(x, d),
        "one_particle_dim": d,
        "entries": [[float(z.real), float(z.imag)] for z in x.reshape(-1)],
    }


def from_json_obj(obj):
    d = obj["one_particle_dim"]
    n = obj["n_particles"]
    flat = np.array([complex(a, b) for a, b in obj["entries"]])
    return flat.reshape(d ** n, d ** n)


def dumps(x, d):
    return json.dumps(to_json_obj(x, d))


def loads(s):
    return from_json_obj(json.loads(s))


# --- random fixtures --------------------------------------------------------

def random_hermitian(dim, rng, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + a.conj().T) / 2


def random_density(dim, rng, rank=None):
    rank = rank or dim
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real

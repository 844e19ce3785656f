"""Cumulants of evolution groups over cluster arguments.

One engine serves plain cumulants, cluster-argument cumulants, the dual
(observable side) cumulants, reduced cumulants and scattering cumulants."""
from __future__ import annotations

import logging
import math

import numpy as np

from . import combinatorics as cmb
from .dynamics import evolve, free_evolve, scatter

log = logging.getLogger(__name__)


class KahanSum:
    def __init__(self, like):
        self.s = np.zeros_like(like, dtype=complex)
        self.c = np.zeros_like(like, dtype=complex)

    def add(self, x):
        y = x - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t

    @property
    def value(self):
        return self.s


def _block_op(spec, t, flavor, direction):
    tau = -t if direction == "backward" else t
    if flavor == "group":
        return lambda labels, x, n: evolve(spec, tau, labels, x, n)
    if flavor == "scattering":
        return lambda labels, x, n: scatter(spec, t, labels, x, n)
    raise ValueError(f"unknown flavor {flavor!r}")


def cumulant(spec, t, clusters, x, n, direction="backward", flavor="group"):
    """Sum over partitions P' of the cluster list of
    (-1)^{|P'|-1}(|P'|-1)! prod_B G(theta(B)) applied to x.

    `clusters` is a list of label tuples (each one acting as a single
    element); empty clusters act as identities."""
    clusters = [tuple(c) for c in clusters]
    if not clusters:
        raise ValueError("need at least one cluster")
    op = _block_op(spec, t, flavor, direction)
    if len(clusters) == 1:
        return op(tuple(sorted(clusters[0])), x, n)
    acc = KahanSum(x)
    parts = cmb.partitions_of_list(list(range(len(clusters))))
    for p in parts:
        y = x
        for block in p:
            labels = tuple(sorted(i for b in block for i in clusters[b]))
            y = op(labels, y, n)
        acc.add(cmb.mobius_weight(len(p)) * y)
    log.debug("cumulant order %d: %d terms", len(clusters), len(parts))
    return acc.value


def cumulant_map(spec, t, clusters, n, direction="backward", flavor="group"):
    return lambda x: cumulant(spec, t, clusters, x, n, direction, flavor)


def cluster_arg(y, tail):
    """({Y}, j1, j2, ...) as a cluster list."""
    return [tuple(y)] + [(j,) for j in tail]


def scattering_cumulant(spec, t, clusters, x, n):
    return cumulant(spec, t, clusters, x, n, flavor="scattering")


def verify_cluster_expansion(spec, t, ground, rng=None):
    """|| G_s(-t) f - sum_P prod A_{|X_i|}(-t, X_i) f || on a random probe."""
    ground = tuple(ground)
    s = len(ground)
    if s > 4:
        raise cmb.CapacityError("cluster expansion ground", s, 4)
    rng = rng or np.random.default_rng(0)
    d = spec.d
    from .hilbert import random_hermitian
    f = random_hermitian(d ** s, rng)
    lhs = evolve(spec, -t, range(1, s + 1), f, s)
    acc = KahanSum(f)
    for p in cmb.enumerate_partitions(tuple(range(1, s + 1))):
        # blocks act on disjoint labels; a block cumulant needs every label of
        # the block, applied to the full operator
        y = f
        for block in p:
            y = cumulant(spec, t, [(i,) for i in block], y, s)
        acc.add(y)
    return float(np.linalg.norm(lhs - acc.value, 2))


def reduced_cumulant(spec, t, s, n, x):
    """sum_k (-1)^k C(n,k) G_{s+n-k}(-t, Y, s+1..s+n-k) x, x on s+n particles."""
    acc = KahanSum(x)
    for k in range(n + 1):
        acc.add((-1) ** k * math.comb(n, k) * evolve(spec, -t, range(1, s + n - k + 1), x, s + n))
    return acc.value


def reduced_cumulant_subsets(spec, t, s, n, x):
    """Same object written as sum over Z of the tail with the sign (-1)^{n-|Z|}."""
    acc = KahanSum(x)
    tail = tuple(range(s + 1, s + n + 1))
    for z in cmb.enumerate_subsets(tail):
        acc.add((-1) ** (n - len(z)) * evolve(spec, -t, tuple(range(1, s + 1)) + z, x, s + n))
    return acc.value

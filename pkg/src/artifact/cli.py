"""Command-line driver: configuration, named checks, studies and reports.

Config files are INI-style (configparser) with sections [model],
[truncation], [run], [tolerances] and [output]. Reports are JSON, tables CSV.
Exit codes: 0 all checks pass, 1 a check failed, 2 config or capacity error."""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field

log = logging.getLogger("artifact")

EXPERIMENTS = ("verify", "bbgky", "dual", "correlations", "kinetic", "meanfield", "nls", "all")
CAPS = {"d": 4, "N_max": 6, "n_max": 3}
# "verify" covers every exact identity of the hierarchies
GROUPS = {"verify": ("verify", "bbgky", "dual", "correlations")}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "verify"
    d: int = 2
    fixture: str = "reference"
    lam: float = 1.0
    epsilon: float = 1.0
    statistics: str = "MB"
    K: list | None = None
    Phi: list | None = None
    N_max: int = 4
    n_max: int = 3
    times: tuple = (0.25, 0.5, 1.0, 2.0)
    epsilons: tuple = (0.4, 0.2, 0.1, 0.05)
    tolerances: dict = field(default_factory=dict)
    checks: tuple = ()
    out: str = "results"
    seed: int = 0
    threads: int = 1
    source: str = ""

    def validate(self):
        from .combinatorics import CapacityError
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"[run] experiment: unknown kind {self.experiment!r}")
        for key in ("d", "N_max", "n_max"):
            v = getattr(self, key)
            if v > CAPS[key]:
                raise CapacityError(key, v, CAPS[key])
            if v < (1 if key != "n_max" else 0):
                raise ConfigError(f"{key} must be positive")
        if any(t < 0 for t in self.times):
            raise ConfigError("[run] times must be nonnegative")
        eps = list(self.epsilons)
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("[run] epsilons must be positive and strictly decreasing")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ConfigError(f"[tolerances] {k}: tolerances must be positive")
        if self.epsilon <= 0:
            raise ConfigError("[model] epsilon must be positive")
        return self

    def spec(self):
        import numpy as np
        from .dynamics import HamiltonianSpec, random_spec, reference_fixture
        if self.K is not None or self.Phi is not None:
            if self.K is None or self.Phi is None:
                raise ConfigError("[model] K and Phi must be given together")
            return HamiltonianSpec(d=self.d, K=np.array(self.K, dtype=complex),
                                   Phi2=np.array(self.Phi, dtype=complex),
                                   epsilon=self.epsilon, statistics=self.statistics)
        if self.fixture == "reference":
            return reference_fixture(self.lam, self.epsilon, self.d).with_(statistics=self.statistics)
        if self.fixture == "random":
            rng = np.random.default_rng(self.seed)
            return random_spec(self.d, rng, self.lam, self.epsilon).with_(statistics=self.statistics)
        raise ConfigError(f"[model] fixture: unknown fixture {self.fixture!r}")

    def digest(self):
        payload = json.dumps({k: v for k, v in asdict(self).items() if k != "source"},
                             sort_keys=True, default=str)
        return hashlib.sha256((self.source + payload).encode()).hexdigest()[:16]


def _line_of(text, section, key):
    cur = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip()
        elif cur == section and s.split("=", 1)[0].strip() == key:
            return i
    return None


def _floats(s):
    return tuple(float(x) for x in s.replace(",", " ").split())


def load_config(path=None, text=None):
    """Parse an INI config into ExperimentConfig; errors name the field and line."""
    if text is None:
        if path is None:
            return ExperimentConfig().validate()
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    cfg = ExperimentConfig(source=text)
    spec_fields = {
        ("model", "d"): ("d", int), ("model", "fixture"): ("fixture", str),
        ("model", "lambda"): ("lam", float), ("model", "epsilon"): ("epsilon", float),
        ("model", "statistics"): ("statistics", str), ("model", "K"): ("K", json.loads),
        ("model", "Phi"): ("Phi", json.loads),
        ("truncation", "N_max"): ("N_max", int), ("truncation", "n_max"): ("n_max", int),
        ("run", "experiment"): ("experiment", str), ("run", "times"): ("times", _floats),
        ("run", "epsilons"): ("epsilons", _floats), ("run", "seed"): ("seed", int),
        ("run", "threads"): ("threads", int),
        ("run", "checks"): ("checks", lambda s: tuple(x for x in s.replace(",", " ").split())),
        ("output", "dir"): ("out", str),
    }
    known_sections = {"model", "truncation", "run", "tolerances", "output"}
    for sec in cp.sections():
        if sec not in known_sections:
            raise ConfigError(f"unknown section [{sec}] (line {_line_of(text, sec, '') or '?'})")
        for key, raw in cp.items(sec):
            line = _line_of(text, sec, key)
            if sec == "tolerances":
                try:
                    cfg.tolerances[key] = float(raw)
                except ValueError:
                    raise ConfigError(f"[tolerances] {key} (line {line}): not a number: {raw!r}") from None
                continue
            target = spec_fields.get((sec, key))
            if target is None:
                raise ConfigError(f"[{sec}] {key} (line {line}): unknown field")
            name, conv = target
            try:
                setattr(cfg, name, conv(raw))
            except (ValueError, json.JSONDecodeError) as exc:
                raise ConfigError(f"[{sec}] {key} (line {line}): {exc}") from None
    return cfg.validate()


# --- checks -------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    anchor: str
    group: str
    fn: object
    tolerance: float
    acceptance: int | None = None

    @property
    def label(self):
        return f"{self.name} ({self.anchor})"


@dataclass
class ReportRecord:
    experiment: str
    checks: list
    provenance: dict
    tables: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, default=float)


class Context:
    """Shared lazily-built objects for one run."""

    def __init__(self, cfg, out_dir=None):
        self.cfg = cfg
        self.out_dir = out_dir
        self.tables = []
        self._spec = None

    @property
    def spec(self):
        if self._spec is None:
            self._spec = self.cfg.spec()
        return self._spec

    def rng(self, name):
        import numpy as np
        return np.random.default_rng([self.cfg.seed, zlib.crc32(name.encode())])

    def table(self, name, header, rows):
        self.tables.append(name)
        if self.out_dir:
            with open(os.path.join(self.out_dir, name), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(rows)


REGISTRY: dict[str, Check] = {}


def check(name, anchor, group, tolerance, acceptance=None):
    def deco(fn):
        REGISTRY[name] = Check(name, anchor, group, fn, tolerance, acceptance)
        return fn
    return deco


def list_checks():
    return [c.label for c in REGISTRY.values()]


# The check bodies import lazily so that --threads can take effect before
# numpy initializes its thread pools.

@check("stirling-identity", "Eq. Stirl", "verify", 0.0, acceptance=1)
def _c_stirling(ctx):
    from .combinatorics import alternating_stirling_sum
    return max(abs(alternating_stirling_sum(s) - (1 if s == 1 else 0)) for s in range(1, 9))


@check("bell-census", "Eq. cumulants", "verify", 0.0)
def _c_bell(ctx):
    from .combinatorics import bell, enumerate_partitions
    return max(abs(len(enumerate_partitions(tuple(range(n)))) - bell(n)) for n in range(1, 9))


@check("partial-trace-product", "Eq. averageD", "verify", 1e-12)
def _c_ptrace(ctx):
    import numpy as np
    from . import hilbert
    rng = ctx.rng("ptrace")
    d = ctx.cfg.d
    a, b, c = (hilbert.random_density(d, rng) for _ in range(3))
    x = np.kron(np.kron(a, b), c)
    return float(np.abs(hilbert.ptrace(x, (1, 3), 3, d) - np.kron(a, c)).max())


@check("propagator-unitarity", "Eq. grG", "verify", 1e-12)
def _c_unitary(ctx):
    import numpy as np
    spec = ctx.spec
    worst = 0.0
    for n in range(1, min(ctx.cfg.N_max, 4) + 1):
        u = spec.propagator(n, 0.7)
        worst = max(worst, float(np.abs(u @ u.conj().T - np.eye(u.shape[0])).max()))
    return worst


@check("exp-ln-roundtrip", "Eq. circledLn", "verify", 1e-11, acceptance=2)
def _c_expln(ctx):
    from .sequences import random_sequence, residual, star_exp, star_ln
    rng = ctx.rng("expln")
    worst = 0.0
    for _ in range(5):
        g = random_sequence(min(ctx.cfg.N_max, 4), ctx.cfg.d, rng, scale=0.5)
        worst = max(worst, residual(star_ln(star_exp(g)), g))
    return worst


@check("star-associativity", "Eq. Product", "verify", 1e-11)
def _c_assoc(ctx):
    from .sequences import random_sequence, residual, star_product
    rng = ctx.rng("assoc")
    N, d = min(ctx.cfg.N_max, 4), ctx.cfg.d
    f, g, h = (random_sequence(N, d, rng, scalar0=1.0, scale=0.5) for _ in range(3))
    return residual(star_product(star_product(f, g), h), star_product(f, star_product(g, h)))


@check("cluster-expansion", "Eq. groupKlast", "verify", 1e-10, acceptance=3)
def _c_cluster(ctx):
    from .cumulants import verify_cluster_expansion
    rng = ctx.rng("cluster")
    return max(verify_cluster_expansion(ctx.spec, t, tuple(range(1, s + 1)), rng)
               for s in range(1, 5) for t in (0.5, 1.0))


@check("free-cumulants-vanish", "Eq. cumulant", "verify", 1e-12, acceptance=3)
def _c_free(ctx):
    from . import hilbert
    from .cumulants import cumulant
    spec = ctx.spec.with_(Phi2=0 * ctx.spec.Phi2, PhiK=None)
    rng = ctx.rng("free")
    worst = 0.0
    for s in range(2, 5):
        f = hilbert.random_hermitian(spec.d ** s, rng)
        worst = max(worst, hilbert.operator_norm(cumulant(spec, 0.8, [(i,) for i in range(1, s + 1)], f, s)))
    return worst


def _bound_violations(ctx, picture):
    import numpy as np
    from . import hilbert
    from .cumulants import cumulant
    from .dynamics import random_spec
    rng = ctx.rng("bounds-" + picture)
    bad = 0
    for k in range(100):
        spec = random_spec(2, rng, lam=2.0)
        t = float(rng.uniform(0.1, 2.0))
        if picture == "state":
            s = int(rng.integers(1, 4))
            f = hilbert.random_hermitian(2 ** s, rng)
            val = hilbert.trace_norm(cumulant(spec, t, [(i,) for i in range(1, s + 1)], f, s))
            bound = math.factorial(s) * math.e ** s * hilbert.trace_norm(f)
        else:
            n = int(rng.integers(0, 3))
            g = hilbert.random_hermitian(2 ** (1 + n), rng)
            val = hilbert.operator_norm(cumulant(spec, t, [(i,) for i in range(1, n + 2)], g, n + 1,
                                                 direction="forward"))
            bound = math.factorial(n) * math.e ** (n + 2) * hilbert.operator_norm(g)
        bad += int(val > bound)
    return float(bad)


@check("cumulant-bound-state", "Eq. est", "verify", 0.0, acceptance=4)
def _c_est(ctx):
    return _bound_violations(ctx, "state")


@check("cumulant-bound-observable", "Eq. estd", "verify", 0.0, acceptance=4)
def _c_estd(ctx):
    return _bound_violations(ctx, "observable")


def _bbgky_setup(ctx):
    from .states import random_grand_canonical
    rng = ctx.rng("bbgky")
    N = min(ctx.cfg.N_max, 4)
    return random_grand_canonical(N, ctx.cfg.d, rng, activity=1.0), N


def _bbgky_residual(ctx, rep, times=None):
    import numpy as np
    from .states import evolve_exact, marginal_series_bbgky, marginals_oracle
    D, N = _bbgky_setup(ctx)
    F0 = marginals_oracle(D)
    worst = 0.0
    for t in times or ctx.cfg.times:
        Ft = marginals_oracle(evolve_exact(ctx.spec, D, t))
        for s in range(1, N + 1):
            got = marginal_series_bbgky(ctx.spec, F0, t, s, rep)
            worst = max(worst, float(np.abs(got - Ft[s]).max()))
    return worst


@check("bbgky-oracle-exactness", "Eq. RozvBBGKY", "bbgky", 1e-10, acceptance=5)
def _c_bbgky(ctx):
    return _bbgky_residual(ctx, "cumulant")


@check("bbgky-reduced-representation", "Eq. rc", "bbgky", 1e-10, acceptance=5)
def _c_bbgky_rc(ctx):
    return _bbgky_residual(ctx, "reduced")


@check("bbgky-second-order-representation", "Eq. l_5", "bbgky", 1e-10, acceptance=5)
def _c_bbgky_so(ctx):
    return _bbgky_residual(ctx, "second_order")


@check("bbgky-iteration-representation", "Eq. iter", "bbgky", 1e-7, acceptance=5)
def _c_bbgky_it(ctx):
    return _bbgky_residual(ctx, "iteration")


@check("dual-duality", "Eq. avmar-1", "dual", 1e-9, acceptance=6)
def _c_duality(ctx):
    from .observables import random_observable, verify_duality
    D, N = _bbgky_setup(ctx)
    from .states import marginals_oracle
    F0 = marginals_oracle(D)
    B0 = random_observable(N, ctx.cfg.d, ctx.rng("dual"))
    return max(verify_duality(ctx.spec, B0, F0, t) for t in ctx.cfg.times)


@check("number-observable-exact", "Eq. af", "dual", 1e-12, acceptance=6)
def _c_number(ctx):
    import numpy as np
    from .observables import dual_solution, number_observable
    N, d = min(ctx.cfg.N_max, 4), ctx.cfg.d
    B = dual_solution(ctx.spec, number_observable(N, d), 1.3)
    worst = float(np.abs(B[1] - np.eye(d)).max())
    for s in range(2, N + 1):
        worst = max(worst, float(np.abs(B[s]).max()))
    return worst


@check("dual-compact-form", "Eq. oper_znuw", "dual", 1e-10, acceptance=6)
def _c_compact(ctx):
    from .observables import compact_dual_solution, dual_solution, random_observable
    from .sequences import residual
    B0 = random_observable(min(ctx.cfg.N_max, 4), ctx.cfg.d, ctx.rng("compact"))
    return max(residual(compact_dual_solution(ctx.spec, B0, t), dual_solution(ctx.spec, B0, t))
               for t in ctx.cfg.times)


@check("dual-group-expansion", "Eq. rdex", "dual", 1e-10)
def _c_rdex(ctx):
    from .observables import dual_solution, random_observable
    from .sequences import residual
    B0 = random_observable(min(ctx.cfg.N_max, 4), ctx.cfg.d, ctx.rng("rdex"))
    return residual(dual_solution(ctx.spec, B0, 0.9, "group_expansion"), dual_solution(ctx.spec, B0, 0.9))


def _fd_ratio(series, generator, t=0.7, dt=1e-3):
    """Central-difference residual at dt and dt/2; returns (res(dt), ratio)."""
    from .sequences import residual

    def res(h):
        plus, minus = series(t + h), series(t - h)
        fd = plus.map(lambda n, x: (x - minus[n]) / (2 * h))
        return residual(fd, generator(series(t)))
    r1, r2 = res(dt), res(dt / 2)
    return r1, r1 / r2 if r2 > 0 else float("inf")


@check("dual-generator-fd", "Eq. dh", "dual", 1.0)
def _c_dual_fd(ctx):
    from .observables import dual_generator, dual_solution, random_observable
    B0 = random_observable(3, ctx.cfg.d, ctx.rng("dualfd"))
    _, ratio = _fd_ratio(lambda t: dual_solution(ctx.spec, B0, t), lambda B: dual_generator(ctx.spec, B))
    return abs(ratio - 4.0)


@check("von-neumann-expansion", "Eq. rozvNh", "correlations", 1e-10, acceptance=7)
def _c_vn(ctx):
    from .sequences import residual, star_ln
    from .states import correlations_from_density, evolve_exact, random_grand_canonical, solve_von_neumann_hierarchy
    D = random_grand_canonical(3, ctx.cfg.d, ctx.rng("vn"), activity=1.0)
    g0 = correlations_from_density(D)
    return max(residual(solve_von_neumann_hierarchy(ctx.spec, g0, t), star_ln(evolve_exact(ctx.spec, D, t)))
               for t in ctx.cfg.times)


@check("von-neumann-generator-fd", "Eq. vNh", "correlations", 1.0, acceptance=7)
def _c_vn_fd(ctx):
    from .states import (correlations_from_density, random_grand_canonical,
                         solve_von_neumann_hierarchy, von_neumann_generator)
    D = random_grand_canonical(3, ctx.cfg.d, ctx.rng("vnfd"), activity=1.0)
    g0 = correlations_from_density(D)
    r1, ratio = _fd_ratio(lambda t: solve_von_neumann_hierarchy(ctx.spec, g0, t),
                          lambda g: von_neumann_generator(ctx.spec, g))
    return abs(ratio - 4.0)


@check("nonlinear-bbgky-correlations", "Eq. ssss", "correlations", 1e-9, acceptance=8)
def _c_ssss(ctx):
    import numpy as np
    import warnings
    from .sequences import OperatorSequence
    from .states import (evolve_exact, gbig_from_marginals, marginal_correlations_series,
                         marginals_oracle, random_grand_canonical)
    N, d = min(ctx.cfg.N_max, 4), ctx.cfg.d
    # small activity keeps the nonlinear series inside its convergence bound
    D = random_grand_canonical(N, d, ctx.rng("ssss"), activity=0.02)
    F0 = marginals_oracle(D)
    # a truncated state has F_m = 0 beyond N but cumulants g_m != 0 there;
    # padding by one order brings the omitted terms well below tolerance
    pad = OperatorSequence(1.0, F0.ops + [np.zeros((d ** (N + 1),) * 2, dtype=complex)], d)
    G0 = gbig_from_marginals(pad)
    worst = 0.0
    for t in ctx.cfg.times:
        Gt = gbig_from_marginals(marginals_oracle(evolve_exact(ctx.spec, D, t)))
        for s in range(1, N + 1):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                got = marginal_correlations_series(ctx.spec, G0, t, s, N + 1 - s)
            worst = max(worst, float(np.abs(got - Gt[s]).max()))
    return worst


def _pure_f0(d):
    import numpy as np
    u = np.ones(d) / math.sqrt(d)
    return np.outer(u, u)


@check("correlation-decay-meanfield", "Eq. Gcid", "correlations", 0.0, acceptance=8)
def _c_gcid(ctx):
    from .meanfield import truncated_correlation_decay
    st = truncated_correlation_decay(ctx.spec, _pure_f0(ctx.cfg.d), ctx.cfg.epsilons, 0.5)
    ctx.table("gcid.csv", ["epsilon", "time", "quantity", "value", "fitted_order"], st.rows())
    return 0.0 if st.decreasing("corr_trunc_s2") else 1.0


@check("dispersion-identity", "Eq. dispg", "correlations", 1e-10)
def _c_disp(ctx):
    import numpy as np
    from . import hilbert
    from .states import dispersion_functional, gbig_from_marginals, marginals_oracle, random_grand_canonical, variance_oracle
    D = random_grand_canonical(4, ctx.cfg.d, ctx.rng("disp"), activity=0.7)
    a = hilbert.random_hermitian(ctx.cfg.d, ctx.rng("disp-a"))
    G = gbig_from_marginals(marginals_oracle(D))
    var, mean = variance_oracle(a, D)
    # as written the functional is the variance minus <A>^2 Tr G_1
    expected = var - mean ** 2 * float(np.trace(G[1]).real)
    return abs(dispersion_functional(a, G[1], G[2]) - expected)


@check("kinetic-cluster-expansion", "Eq. kce", "kinetic", 1e-9, acceptance=9)
def _c_kce(ctx):
    from .kinetic import verify_kinetic_cluster_expansion
    rng = ctx.rng("kce")
    return max(verify_kinetic_cluster_expansion(ctx.spec, t, s, n, rng)
               for s, n in ((2, 0), (2, 1), (3, 1)) for t in (0.5, 1.0))


@check("generated-evolution-literal", "Eq. skrr", "kinetic", 1e-12)
def _c_skrr(ctx):
    import numpy as np
    from . import hilbert
    from .kinetic import _product, generated_evolution_V, generated_evolution_V_literal
    F = 0.5 * hilbert.random_density(ctx.cfg.d, ctx.rng("skrr"))
    worst = 0.0
    for s, n in ((2, 1), (2, 2)):
        m = s + n
        x = _product(F, m, ctx.cfg.d)
        a = generated_evolution_V(ctx.spec, 0.8, range(1, s + 1), range(s + 1, m + 1), x, m)
        b = generated_evolution_V_literal(ctx.spec, 0.8, s, n, x)
        worst = max(worst, float(np.abs(hilbert.trace_out_last(a - b, n, ctx.cfg.d)).max()))
    return worst


@check("correlation-functional-decomposition", "Eq. cf", "kinetic", 1e-10)
def _c_cf(ctx):
    import numpy as np
    import warnings
    from . import hilbert
    from .kinetic import correlation_functional, marginal_functional
    F = 0.02 * hilbert.random_density(ctx.cfg.d, ctx.rng("cf"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        F2 = marginal_functional(ctx.spec, 0.8, F, 2, 2)
        G2 = correlation_functional(ctx.spec, 0.8, F, 2, 2)
    return float(np.abs(F2 - G2 - np.kron(F, F)).max())


def _gqke_equivalence(ctx, t, s):
    import warnings
    from . import hilbert
    from .kinetic import marginal_functional, series_F1
    from .states import chaos_marginals
    F = hilbert.random_density(ctx.cfg.d, ctx.rng("gqke"))
    F = 0.02 * F / hilbert.trace_norm(F)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        F1t = series_F1(ctx.spec, F, t, 3)
        ref = chaos_marginals(ctx.spec, F, t, s, 3)
        fun = marginal_functional(ctx.spec, t, F1t, s, 3)
        omitted = hilbert.trace_norm(chaos_marginals(ctx.spec, F, t, s, 4) - ref)
    return hilbert.trace_norm(ref - fun), omitted


@check("gqke-equivalence", "Eq. f", "kinetic", 2.0, acceptance=10)
def _c_gqke_eq(ctx):
    worst = 0.0
    for s in (1, 2):
        for t in (0.5, 1.0):
            diff, omitted = _gqke_equivalence(ctx, t, s)
            worst = max(worst, diff / max(omitted, 1e-300))
    return worst


@check("gqke-solvers-agree", "Eq. ske", "kinetic", 1.0, acceptance=10)
def _c_gqke_solvers(ctx):
    import warnings
    from . import hilbert
    from .kinetic import solve_gqke
    F = hilbert.random_density(ctx.cfg.d, ctx.rng("gqke"))
    F = 0.02 * F / hilbert.trace_norm(F)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ser = solve_gqke(ctx.spec, F, 1.0, "series", 3, times=[1.0])
        # dt = 0.1 keeps the suite fast; the Richardson estimate covers the step error
        rk = solve_gqke(ctx.spec, F, 1.0, "timestep", 3, dt=0.1)
    ctx.table("gqke_timestep.csv", ["t", "trace_norm", "trace", "tail"], rk.table())
    diff = hilbert.trace_norm(ser.F1[-1] - rk.F1[-1])
    return diff / max(ser.tails[-1], rk.tails[-1], 1e-6)


@check("correlated-reduction", "Eq. skrrc", "kinetic", 1e-12, acceptance=13)
def _c_corr_red(ctx):
    import numpy as np
    from . import hilbert
    from .kinetic import InitialCorrelations, _product, generated_evolution_G, generated_evolution_V
    d = ctx.cfg.d
    F = 0.3 * hilbert.random_density(d, ctx.rng("corrred"))
    h = InitialCorrelations({2: np.eye(d ** 2), 3: np.eye(d ** 3), 4: np.eye(d ** 4)})
    worst = 0.0
    for s, n in ((1, 1), (2, 1), (2, 2)):
        m = s + n
        x = _product(F, m, d)
        a = generated_evolution_G(ctx.spec, 0.7, h, range(1, s + 1), range(s + 1, m + 1), x, m)
        b = generated_evolution_V(ctx.spec, 0.7, range(1, s + 1), range(s + 1, m + 1), x, m)
        worst = max(worst, float(np.abs(a - b).max()))
    import warnings
    from .kinetic import marginal_functional
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for s in (1, 2):
            fa = marginal_functional(ctx.spec, 0.7, 0.02 * F / 0.3, s, 2, h=h)
            fb = marginal_functional(ctx.spec, 0.7, 0.02 * F / 0.3, s, 2)
            worst = max(worst, float(np.abs(fa - fb).max()))
    return worst


@check("correlated-cluster-expansion", "Eq. kcec", "kinetic", 1e-9, acceptance=13)
def _c_kcec(ctx):
    import numpy as np
    from . import hilbert
    from .kinetic import InitialCorrelations, verify_correlated_cluster_expansion
    rng = ctx.rng("kcec")
    d = ctx.cfg.d
    h2 = np.eye(d * d) + 0.3 * hilbert.random_hermitian(d * d, rng)
    h = InitialCorrelations({2: h2, 3: np.kron(h2, np.eye(d))})
    return verify_correlated_cluster_expansion(ctx.spec, 0.8, 2, 1, h, rng)


@check("kinetic-dispersion", "Eq. averageg", "kinetic", 1e-9)
def _c_kin_disp(ctx):
    import warnings
    from . import hilbert
    from .kinetic import dispersion_from_functionals, series_F1
    from .states import chaos_marginal_correlations, dispersion_functional
    d = ctx.cfg.d
    rng = ctx.rng("kdisp")
    F = 0.02 * hilbert.random_density(d, rng)
    a = hilbert.random_hermitian(d, rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        F1t = series_F1(ctx.spec, F, 0.7, 4)
        kin = dispersion_from_functionals(ctx.spec, 0.7, a, F1t, 3)
        G2 = chaos_marginal_correlations(ctx.spec, F, 0.7, 2, 4)
    return abs(kin - dispersion_functional(a, F1t, G2))


@check("vlasov-trace", "Eq. Vlasov1", "meanfield", 1e-10, acceptance=12)
def _c_vlasov_trace(ctx):
    import numpy as np
    from . import hilbert
    from .meanfield import vlasov_solve
    f0 = hilbert.random_density(ctx.cfg.d, ctx.rng("vtrace"))
    _, traj = vlasov_solve(ctx.spec, f0, 1.0, dt=1e-2)
    return max(abs(np.trace(f).real - 1.0) for f in traj)


@check("vlasov-series-vs-timestep", "Eq. viter", "meanfield", 1e-6)
def _c_viter(ctx):
    from . import hilbert
    from .meanfield import vlasov_series, vlasov_solve, vlasov_t0
    f0 = hilbert.random_density(ctx.cfg.d, ctx.rng("viter"))
    t = 0.5 * vlasov_t0(ctx.spec, f0)
    _, traj = vlasov_solve(ctx.spec, f0, t, dt=1e-2)
    return hilbert.trace_norm(vlasov_series(ctx.spec, f0, t, depth=6) - traj[-1])


def _study_check(ctx, fn, quantity, fname, *args):
    st = fn(*args)
    ctx.table(fname, ["epsilon", "time", "quantity", "value", "fitted_order"], st.rows())
    return 0.0 if st.decreasing(quantity) else 1.0


@check("meanfield-state-limit", "Eq. ls", "meanfield", 0.0, acceptance=11)
def _c_ls(ctx):
    from .meanfield import meanfield_state_study
    return _study_check(ctx, meanfield_state_study, "state_s2", "meanfield_state.csv",
                        ctx.spec, _pure_f0(ctx.cfg.d), ctx.cfg.epsilons, 0.5)


@check("meanfield-observable-limit", "Eq. asymt", "meanfield", 0.0, acceptance=11)
def _c_asymt(ctx):
    import numpy as np
    from .meanfield import limit_observable_study
    b1 = np.diag(np.linspace(-1, 1, ctx.cfg.d)) + 0.3
    return _study_check(ctx, limit_observable_study, "observable_max", "meanfield_observable.csv",
                        ctx.spec, b1, ctx.cfg.epsilons, 0.5)


@check("gqke-meanfield-limit", "Eq. 1lim", "meanfield", 0.0, acceptance=11)
def _c_1lim(ctx):
    from .meanfield import meanfield_state_study
    return _study_check(ctx, meanfield_state_study, "gqke_limit", "meanfield_gqke.csv",
                        ctx.spec, _pure_f0(ctx.cfg.d), ctx.cfg.epsilons, 0.5, (1,))


@check("dual-vlasov-duality", "Eq. avmar-2", "meanfield", 1e-6)
def _c_avmar2(ctx):
    import numpy as np
    from . import hilbert
    from .meanfield import dual_vlasov_series, limit_mean_value, vlasov_solve
    rng = ctx.rng("avmar2")
    f = 0.1 * hilbert.random_density(ctx.cfg.d, rng)
    b1 = hilbert.random_hermitian(ctx.cfg.d, rng)
    bl = [dual_vlasov_series(ctx.spec, {1: b1}, 1.0, s, order=12) for s in range(1, 5)]
    _, vf = vlasov_solve(ctx.spec, f, 1.0, dt=1e-3)
    return abs(limit_mean_value(bl, f) - np.trace(b1 @ vf[-1]))


@check("modified-vlasov-reduction", "Eq. mVe", "meanfield", 1e-12, acceptance=13)
def _c_mve(ctx):
    import numpy as np
    from . import hilbert
    from .meanfield import modified_vlasov_solve, vlasov_solve
    f0 = hilbert.random_density(ctx.cfg.d, ctx.rng("mve"))
    _, a = modified_vlasov_solve(ctx.spec, f0, np.eye(ctx.cfg.d ** 2), 1.0)
    _, b = vlasov_solve(ctx.spec, f0, 1.0)
    return float(np.abs(a[-1] - b[-1]).max())


@check("cumulant-asymptotic-perturbation", "Eq. Duam2", "meanfield", 0.0)
def _c_duam2(ctx):
    from . import hilbert
    from .meanfield import lemma_study
    f = hilbert.random_density(ctx.cfg.d ** 3, ctx.rng("duam2"))
    st = lemma_study(ctx.spec, f, ctx.cfg.epsilons, 0.5, s=2)
    ctx.table("lemma.csv", ["epsilon", "time", "quantity", "value", "fitted_order"], st.rows())
    return 0.0 if st.decreasing("lemma_first") and st.decreasing("lemma_second") else 1.0


@check("hartree-vs-vlasov", "Eq. Vlasov1n", "nls", 1e-6, acceptance=12)
def _c_hartree_vlasov(ctx):
    import numpy as np
    from .meanfield import LatticeWavefunction, hartree_vs_vlasov
    psi = np.array([1.0, 0.5 + 0.2j, 0.1, 0.4j])
    lat = LatticeWavefunction(psi / np.linalg.norm(psi), 1.0, allow_small=True)
    return hartree_vs_vlasov(lat, 1.0)


def _nls_lattice():
    import numpy as np
    from .meanfield import LatticeWavefunction
    M, h = 16, 0.5
    x = h * np.arange(M)
    psi = (1 + 0.3 * np.cos(2 * np.pi * x / (M * h))) * np.exp(2j * np.pi * x / (M * h))
    return LatticeWavefunction(psi / math.sqrt(h * np.sum(np.abs(psi) ** 2)), h)


@check("nls-norm", "Hartree display", "nls", 1e-10, acceptance=12)
def _c_nls_norm(ctx):
    from .meanfield import hartree_nls_solve
    lat = _nls_lattice()
    _, traj = hartree_nls_solve(lat, 1.0, 1e-3)
    return max(abs(w.norm() - lat.norm()) for w in traj)


@check("nls-energy", "Hartree display", "nls", 1e-8, acceptance=12)
def _c_nls_energy(ctx):
    from .meanfield import hartree_nls_solve, nls_energy
    lat = _nls_lattice()
    _, traj = hartree_nls_solve(lat, 1.0, 1e-3, n_out=10)
    e0 = nls_energy(lat)
    return max(abs(nls_energy(w) - e0) for w in traj)


@check("nls-plane-wave", "Hartree display", "nls", 1e-8, acceptance=12)
def _c_plane(ctx):
    from .meanfield import plane_wave_residual
    return plane_wave_residual()


# --- running ----------------------------------------------------------------------------

def select_checks(cfg):
    if cfg.checks:
        missing = [c for c in cfg.checks if c not in REGISTRY]
        if missing:
            raise ConfigError(f"unknown check(s): {', '.join(missing)}")
        return [REGISTRY[c] for c in cfg.checks]
    if cfg.experiment == "all":
        return list(REGISTRY.values())
    groups = GROUPS.get(cfg.experiment, (cfg.experiment,))
    return [c for c in REGISTRY.values() if c.group in groups]


def run(cfg, out_dir=None):
    """Execute the selected checks; returns a ReportRecord."""
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    ctx = Context(cfg, out_dir)
    records = []
    for chk in select_checks(cfg):
        tol = cfg.tolerances.get(chk.name, chk.tolerance)
        t0 = time.perf_counter()
        value = float(chk.fn(ctx))
        ok = bool(value <= tol) and math.isfinite(value)
        records.append({"name": chk.name, "anchor": chk.anchor, "value": value, "tolerance": tol,
                        "passed": ok, "acceptance": chk.acceptance,
                        "seconds": round(time.perf_counter() - t0, 3)})
        log.info("%-40s %-6s value=%.3e tol=%.1e", chk.label, "PASS" if ok else "FAIL", value, tol)
    prov = {"config_hash": cfg.digest(), "seed": cfg.seed, "threads": cfg.threads}
    rep = ReportRecord(cfg.experiment, records, prov, ctx.tables)
    if out_dir:
        with open(os.path.join(out_dir, f"report_{cfg.experiment}.json"), "w") as fh:
            fh.write(rep.to_json())
    return rep


def _env(name, default=None):
    return os.environ.get(f"ARTIFACT_{name}", default)


def build_parser():
    p = argparse.ArgumentParser(prog="artifact", description="Hierarchy and kinetic-equation checks.")
    p.add_argument("--config", default=_env("CONFIG"), help="INI config path")
    p.add_argument("--check", action="append", default=None, help="run only this named check (repeatable)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory for JSON/CSV")
    p.add_argument("--list", action="store_true", help="print the check catalog and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    threads = args.threads if args.threads is not None else _env("THREADS")
    if threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    if args.list:
        for label in list_checks():
            print(label)
        return 0
    from .combinatorics import CapacityError
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        elif _env("SEED") is not None:
            cfg.seed = int(_env("SEED"))
        if threads is not None:
            cfg.threads = int(threads)
        checks = args.check or ([c for c in _env("CHECK", "").replace(",", " ").split()] or None)
        if checks:
            cfg.checks = tuple(checks)
        out = args.out or _env("OUT") or cfg.out
        rep = run(cfg, out)
    except (ConfigError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in rep.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']} ({c['anchor']})  "
              f"value={c['value']:.3e}  tol={c['tolerance']:.1e}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())

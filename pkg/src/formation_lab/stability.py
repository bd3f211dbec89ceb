"""Monte Carlo assessment of type-A stability.

Verdicts are sampled, not proved: ``type_a`` means no sampled run settled
at a stable ancillary equilibrium and no explicit search turned one up.
"""
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .dynamics import (ObjectiveMode, ScalarScenario, rk4_batch, target_sq_lengths,
                       vector_field)
from .equilibria import (Designation, Stability, classify, find_equilibria,
                         is_design, partition)
from .errors import InsufficientConvergence
from .rigidity import realize

CHUNK = 256
MAX_SLOW_SEEDS = 64


@dataclass(frozen=True)
class MonteCarlo:
    count: int = 1000
    bounds: tuple = None
    seed: int = 0


@dataclass(frozen=True)
class Convergence:
    speed_tol: float = 1e-8
    settle_T: float = 50.0
    design_tol: float = 1e-6
    eq_tol: float = 1e-10


@dataclass
class TypeAReport:
    n_samples: int
    frac_to_design: float
    frac_to_ancillary_stable: float
    frac_nonconvergent: float
    feasible: bool
    type_a: bool
    strongly_type_a: bool
    witness_ancillary: object = None
    stable_ancillary: list = field(default_factory=list)
    design_equilibria: list = field(default_factory=list)
    warning: bool = False
    note: str = "Monte Carlo verdict from finitely many sampled initial conditions"

    @property
    def verdicts(self):
        return {"feasible": self.feasible, "type_a": self.type_a,
                "strongly_type_a": self.strongly_type_a}

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "frac_to_design": self.frac_to_design,
            "frac_to_ancillary_stable": self.frac_to_ancillary_stable,
            "frac_nonconvergent": self.frac_nonconvergent,
            "verdicts": self.verdicts,
            "witness_ancillary": self.witness_ancillary.to_dict() if self.witness_ancillary else None,
            "stable_ancillary": [r.to_dict() for r in self.stable_ancillary],
            "design_equilibria": [r.to_dict() for r in self.design_equilibria],
            "warning": self.warning,
            "note": self.note,
        }


def workers():
    try:
        return max(1, int(os.environ.get("FORMATION_LAB_THREADS", "1")))
    except ValueError:
        return 1


def sample_initial(n_agents, bounds, rng_seed, count, dim=2):
    """I.i.d. uniform states in the box ``bounds = (low, high)``; shape ``(count, n_agents, dim)``."""
    lo, hi = bounds
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n_agents, dim))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n_agents, dim))
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("bounds must be finite")
    rng = np.random.default_rng(rng_seed)
    return lo + (hi - lo) * rng.random((count, n_agents, dim))


def default_bounds(s):
    """Box of side four target diameters centered on the target."""
    if isinstance(s, ScalarScenario):
        return (-2.0, 2.0)
    P = s.target_config
    c = P.mean(axis=0)
    r = 2.0 * geometry.diameter(P)
    return (c - r, c + r)


def _integrate_chunks(f, X0, dt, steps, bound):
    chunks = [X0[k:k + CHUNK] for k in range(0, len(X0), CHUNK)]
    run = lambda X: rk4_batch(f, X, dt, steps, bound)  # noqa: E731
    nw = workers()
    if nw > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            out = list(ex.map(run, chunks))
    else:
        out = [run(X) for X in chunks]
    if not out:
        return np.zeros((0, X0.shape[1])), np.zeros(0, dtype=bool)
    return np.vstack([o[0] for o in out]), np.concatenate([o[1] for o in out])


def design_candidates(s, attempts=20):
    """Known members of the design set used for the direct checks."""
    if isinstance(s, ScalarScenario):
        return [np.array([d]) for d in s.design]
    P = s.target_config
    cands = [P]
    if s.obj_mode is not ObjectiveMode.FULL_INFORMATION:
        cands.append(P * np.array([1.0, -1.0]))
        d_half = 0.5 * target_sq_lengths(s)
        for k in range(attempts):
            fw = realize(s.delta_graph, d_half, attempts=3, rng_seed=k)
            if fw is not None:
                cands.append(fw.config)
    out = []
    for c in cands:
        if not any(geometry.congruent(c, o, tol=1e-6) for o in out):
            out.append(c)
    return out


def _design_tol(s, conv):
    if isinstance(s, ScalarScenario):
        return conv.design_tol
    return conv.design_tol * max(1.0, float(np.max(target_sq_lengths(s), initial=1.0)))


def assess(s, mc=MonteCarlo(), conv=Convergence(), extra_seeds=(), design_attempts=20):
    """Integrate ``mc.count`` random starts and read off the type-A verdicts.

    ``extra_seeds`` feeds an explicit equilibrium search for stable
    ancillary equilibria that sampling alone may miss; endpoints of runs
    that had not settled by ``settle_T`` are refined the same way. Those
    runs still count as nonconvergent in the fractions.
    """
    f = vector_field(s)
    scalar = isinstance(s, ScalarScenario)
    bounds = mc.bounds if mc.bounds is not None else default_bounds(s)
    if scalar:
        X0 = sample_initial(1, bounds, mc.seed, mc.count, dim=1).reshape(mc.count, 1)
    else:
        X0 = sample_initial(s.n, bounds, mc.seed, mc.count).reshape(mc.count, 2 * s.n)
    dt = s.integration.dt
    steps = int(np.floor(conv.settle_T / dt + 1e-9))
    X, diverged = _integrate_chunks(f, X0, dt, steps, s.integration.bound)

    speed = np.full(len(X), np.inf)
    if len(X):
        ok = ~diverged
        speed[ok] = np.linalg.norm(f(X[ok]), axis=-1)
    converged = (speed <= conv.speed_tol) & ~diverged
    dtol = _design_tol(s, conv)

    to_design = np.zeros(len(X), dtype=bool)
    to_anc_stable = np.zeros(len(X), dtype=bool)
    ancillary = []          # refined, classified, de-duplicated
    for k in np.flatnonzero(converged):
        x = X[k]
        if is_design(s, x, dtol):
            to_design[k] = True
            continue
        rec = None
        for r in ancillary:
            if _close(f, x, r.state):
                rec = r
                break
        if rec is None:
            ref = find_equilibria(f, [x], tol=conv.eq_tol)
            y = ref[0] if ref else x
            rec = partition([classify(f, y)], s, dtol)[0]
            if rec.designation is Designation.DESIGN:
                to_design[k] = True
                continue
            ancillary.append(rec)
        if rec.stability is not Stability.UNSTABLE:
            to_anc_stable[k] = True

    # explicit search: caller seeds plus endpoints of runs that were still moving
    slow = [X[k] for k in np.flatnonzero(~converged & ~diverged)]
    seeds = list(extra_seeds) + [x for x in _dedupe_states(f, slow)[:MAX_SLOW_SEEDS]]
    located = find_equilibria(f, seeds, tol=conv.eq_tol) if seeds else []
    found = partition([classify(f, y) for y in located], s, dtol)
    stable_anc = [r for r in ancillary + found
                  if r.designation is Designation.ANCILLARY and r.stability is not Stability.UNSTABLE]
    stable_anc = _dedupe(f, stable_anc)

    designs = []
    for c in design_candidates(s, design_attempts):
        if np.linalg.norm(f(np.ravel(c))) <= 1e-8 * (1.0 + np.linalg.norm(c)):
            designs.append(partition([classify(f, c)], s, max(dtol, 1e-8))[0])

    n = len(X)
    n_design = int(to_design.sum())
    n_anc = int(to_anc_stable.sum())
    fd = n_design / n if n else 0.0
    fa = n_anc / n if n else 0.0
    fn = (n - n_design - n_anc) / n if n else 0.0
    feasible = n_design > 0 or len(designs) > 0
    type_a = feasible and n_anc == 0 and not stable_anc
    strongly = type_a and len(designs) > 0 and all(r.stability is Stability.STABLE for r in designs)
    warn = fn > 0.5
    if warn:
        warnings.warn(f"{fn:.0%} of runs did not settle", InsufficientConvergence)
    witness = next((r for r in stable_anc if r.stability is Stability.STABLE), None)
    if witness is None and stable_anc:
        witness = stable_anc[0]
    return TypeAReport(n, fd, fa, fn, feasible, type_a, strongly, witness,
                       stable_anc, designs, warn)


def _close(f, x, y):
    if getattr(f, "se2", False):
        return geometry.aligned_distance(np.reshape(x, (-1, 2)), np.reshape(y, (-1, 2))) <= 1e-5 * (
            1.0 + np.linalg.norm(y))
    return np.linalg.norm(np.ravel(x) - np.ravel(y)) <= 1e-5 * (1.0 + np.linalg.norm(y))


def _dedupe_states(f, xs):
    out = []
    for x in xs:
        if not any(np.linalg.norm(x - y) <= 1e-3 * (1.0 + np.linalg.norm(y)) for y in out):
            out.append(x)
    return out


def _dedupe(f, recs):
    out = []
    for r in recs:
        if not any(_close(f, r.state, o.state) for o in out):
            out.append(r)
    return out

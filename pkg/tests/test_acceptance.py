"""End-to-end acceptance checks, one group per criterion.

A summary line per criterion is printed at the end of the pytest run.
"""
import json
import time
import warnings

import numpy as np
import pytest

from formation_lab import formations as F
from formation_lab import geometry as G
from formation_lab.dynamics import (Integration, ObjectiveMode, PolynomialField, ScalarScenario,
                                    integrate, vector_field)
from formation_lab.equilibria import Designation, Stability, classify, find_equilibria, partition
from formation_lab.rigidity import (FormationGraph, Framework, is_infinitesimally_rigid,
                                    is_minimally_rigid, rigidity_condition, rigidity_matrix,
                                    rigidity_rank,
                                    symmetry_generators)
from formation_lab.robustness import PerturbationSpec, linear_drift, probe
from formation_lab.stability import Convergence, MonteCarlo, assess, default_bounds, sample_initial

from conftest import generic_points


def acceptance(num, title):
    return pytest.mark.acceptance(num, title)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# 1 ---------------------------------------------------------------------------

@acceptance(1, "scalar cubic example: equilibria, stability, not type-A")
def test_scalar_example():
    with Timer() as t:
        f = PolynomialField((0.0, 1.0, 0.0, -4.0))
        roots = sorted(float(x[0]) for x in find_equilibria(f, [[-1.0], [0.1], [1.0]]))
        np.testing.assert_allclose(roots, [-0.5, 0.0, 0.5], atol=1e-8)
        stab = {r: classify(f, [r]).stability for r in roots}
        assert [r for r in roots if stab[r] is Stability.STABLE] == pytest.approx([-0.5, 0.5])
        assert [r for r in roots if stab[r] is Stability.UNSTABLE] == pytest.approx([0.0], abs=1e-8)

        s = ScalarScenario.cubic(4, design=(0.5,), integration=Integration(dt=0.01, T=20))
        rep = assess(s, MonteCarlo(2000, (-2.0, 2.0), 0), Convergence(settle_T=20))
    assert rep.type_a is False
    assert float(rep.witness_ancillary.state[0]) == pytest.approx(-0.5, abs=1e-8)
    assert abs(rep.frac_to_ancillary_stable - 0.5) <= 0.05
    assert t.elapsed < 5.0


# 2 ---------------------------------------------------------------------------

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
CYCLE4 = FormationGraph(4, ((1, 2), (2, 3), (3, 4), (4, 1)))


def _verdicts(f):
    return rigidity_rank(f), is_infinitesimally_rigid(f), is_minimally_rigid(f)


@acceptance(2, "rigidity ranks and rotation stability")
def test_rigidity_ranks():
    rng = np.random.default_rng(2)
    with Timer() as t:
        cases = [
            (Framework(F.TRIANGLE, [[0, 0], [1, 0], [0.2, 0.9]]), (3, True, True)),
            (Framework(CYCLE4, SQUARE), (4, False, False)),
            (Framework(F.TWO_CYCLES, generic_points(rng, 4)), (5, True, True)),
        ]
        for f, expect in cases:
            assert _verdicts(f) == expect
            for _ in range(5):
                moved = G.rigid_motion(f.config, rng.uniform(-np.pi, np.pi), rng.normal(size=2))
                assert _verdicts(Framework(f.graph, moved)) == expect
    assert t.elapsed < 1.0


# 3 ---------------------------------------------------------------------------

@acceptance(3, "cyclic triangle law: type-A from 1000 random starts")
def test_triangle_type_a():
    mu = np.array([[1.0, 0.0], [0.3, 0.8]])
    s = F.triangle_scenario(mu, Integration(dt=1e-3, T=50))
    mc = MonteCarlo(1000, None, 1)
    # collinear starts are the excluded thin set; none occur in this sample
    X0 = sample_initial(3, default_bounds(s), mc.seed, mc.count)
    assert not any(G.is_collinear(x, tol=1e-6) for x in X0)
    lo, hi = default_bounds(s)
    np.testing.assert_allclose(hi - lo, 4 * G.diameter(s.target_config))
    with Timer() as t:
        rep = assess(s, mc)
    assert rep.frac_to_design >= 0.99
    assert rep.frac_to_ancillary_stable == 0.0 and not rep.stable_ancillary
    assert rep.type_a
    assert t.elapsed < 120.0


# 4 ---------------------------------------------------------------------------

def _gradient_cases():
    rng = np.random.default_rng(4)
    for n in (4, 5):
        complete = FormationGraph(n, tuple((i, j) for i in range(1, n + 1)
                                           for j in range(1, n + 1) if i != j))
        made = 0
        while made < 10:
            P = generic_points(rng, n)
            # generic: well away from the infinitesimally flexible (e.g. near-collinear) set
            if rigidity_condition(Framework(complete, P)) < 0.1:
                continue
            made += 1
            yield F.gradient_scenario(G.to_target(P), complete, Integration(dt=1e-3, T=50)), rng


@acceptance(4, "gradient law: local stability of 20 generic rigid frameworks")
def test_gradient_local_stability():
    ok = 0
    for s, rng in _gradient_cases():
        P = s.target_config
        f = vector_field(s)
        assert is_infinitesimally_rigid(Framework(s.delta_graph, P))
        rec = classify(f, P)
        assert rec.jacobian_spectrum.real.max() < -1e-8
        x0 = P + 0.05 * G.diameter(P) * rng.normal(size=P.shape) / np.sqrt(2)
        tr = integrate(s, x0)
        ok += G.congruent(tr.states[-1], P, tol=1e-5)
    assert ok == 20


# 5 ---------------------------------------------------------------------------

def _two_cycles(seed, gains=None):
    rng = np.random.default_rng(seed)
    mu = G.to_target(rng.uniform(-1, 1, (4, 2)))
    k = rng.uniform(0.2, 3, 5) if gains is None else gains
    return F.two_cycles_scenario(mu, k), k


@acceptance(5, "2-cycles structure: superposed, collinear, aligned-z balance")
def test_superposed_zero():
    for seed in range(5):
        s, _ = _two_cycles(seed)
        x = np.tile(np.random.default_rng(seed).normal(size=2), 4)
        assert np.linalg.norm(vector_field(s)(x)) == 0.0


@acceptance(5, "2-cycles structure: superposed, collinear, aligned-z balance")
def test_collinear_invariant():
    s, _ = _two_cycles(0, np.ones(5))
    s = F.two_cycles_scenario(s.target, np.ones(5), integration=Integration(dt=1e-3, T=10))
    rng = np.random.default_rng(5)
    d = np.array([np.cos(0.8), np.sin(0.8)])
    x0 = rng.uniform(-1, 1, 4)[:, None] * d + rng.normal(size=2)
    tr = integrate(s, x0)
    assert all(G.is_collinear(P, tol=1e-8) for P in tr.states)


@acceptance(5, "2-cycles structure: superposed, collinear, aligned-z balance")
def test_aligned_z_balance():
    checked = 0
    for seed in range(8):
        s, k = _two_cycles(seed)
        d = np.einsum("kd,kd->k", F.z_vectors(s.target_config), F.z_vectors(s.target_config))
        for y in find_equilibria(vector_field(s), F.aligned_z_seeds(s, seed)):
            e = F.edge_errors(y, d)
            z = F.z_vectors(y)
            cross = z[0, 0] * z[4, 1] - z[0, 1] * z[4, 0]
            if np.max(np.abs(e[1:4])) <= 1e-8 and abs(cross) <= 1e-8:
                assert F.balance_residual(y, k[0] * e[0], k[4] * e[4]) <= 1e-8
                checked += 1
    assert checked > 0


@acceptance(5, "2-cycles structure: superposed, collinear, aligned-z balance")
def test_range_only_witness():
    """Consistency artifact: the type-A pipeline surfaces a stable ancillary equilibrium."""
    s, k = _two_cycles(1)
    gains, _ = F.search_gains(s.target, ObjectiveMode.RANGE_ONLY, low=0.2, high=3, seed=1)
    s = F.two_cycles_scenario(s.target, gains, integration=Integration(dt=1e-2, T=10))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = assess(s, MonteCarlo(50, None, 0), Convergence(settle_T=10),
                     extra_seeds=F.aligned_z_seeds(s, 0), design_attempts=3)
    assert rep.witness_ancillary is not None
    assert rep.witness_ancillary.stability is Stability.STABLE
    assert rep.witness_ancillary.designation is Designation.ANCILLARY
    assert not rep.type_a


# 6 ---------------------------------------------------------------------------

@acceptance(6, "full-information gain design within 1e4 draws")
def test_full_information_gains():
    mu = G.to_target(np.random.default_rng(3).uniform(-1, 1, (4, 2)))
    hit = F.search_gains(mu, ObjectiveMode.FULL_INFORMATION, draws=10_000, low=-5, high=5, seed=6)
    assert hit is not None
    gains, used = hit
    assert used <= 10_000 and np.all(np.abs(gains) <= 5)
    s = F.two_cycles_scenario(mu, gains, ObjectiveMode.FULL_INFORMATION)
    rec = partition([classify(vector_field(s), s.target_config)], s)[0]
    assert rec.designation is Designation.DESIGN
    assert len(rec.jacobian_spectrum) == 5
    assert np.all(rec.jacobian_spectrum.real < 0)


# 7 ---------------------------------------------------------------------------

@acceptance(7, "robustness probes: sink, fold, gradient design")
def test_sink_robust():
    rep = probe(PolynomialField((0.0, -1.0)), [0.0], PerturbationSpec(1e-2, trials=100))
    assert rep.survived == 100 and rep.robust


@acceptance(7, "robustness probes: sink, fold, gradient design")
@pytest.mark.parametrize("eps", [1e-3, 1e-2])
def test_fold_not_robust(eps):
    rep = probe(PolynomialField((0.0, 0.0, 1.0)), [0.0], PerturbationSpec(eps, trials=100))
    assert rep.survived < 100 and not rep.robust


@acceptance(7, "robustness probes: sink, fold, gradient design")
def test_gradient_design_robust():
    rng = np.random.default_rng(7)
    s = F.gradient_scenario(G.to_target(generic_points(rng, 4)), F.leader_follower(4))
    f, x = vector_field(s), s.target_config.ravel()
    spec = PerturbationSpec(1e-3, trials=50)
    margin = -classify(f, x).jacobian_spectrum.real.max()
    assert margin > 1e-2
    rep = probe(f, x, spec, locality_radius=10 * linear_drift(f, x, spec))
    assert rep.survived == 50


# 8 ---------------------------------------------------------------------------

@acceptance(8, "properties: equivariance, kernel, RK4 order, reproducibility")
def test_equivariance_all_laws():
    rng = np.random.default_rng(8)
    for _ in range(20):
        mu = G.to_target(generic_points(rng, 4))
        scenarios = [F.two_cycles_scenario(mu, rng.uniform(-2, 2, 5)),
                     F.gradient_scenario(mu, F.symmetric(F.laman(4))),
                     F.triangle_scenario(mu[:2])]
        th, t = rng.uniform(-np.pi, np.pi), rng.normal(size=2) * 3
        for s in scenarios:
            f = vector_field(s)
            P = rng.normal(size=(s.n, 2))
            lhs = f(G.rigid_motion(P, th, t).ravel()).reshape(-1, 2)
            rhs = f(P.ravel()).reshape(-1, 2) @ G.rotation(th).T
            assert np.max(np.abs(lhs - rhs)) <= 1e-10


@acceptance(8, "properties: equivariance, kernel, RK4 order, reproducibility")
def test_kernel_generators():
    rng = np.random.default_rng(9)
    for n in range(3, 8):
        P = rng.normal(size=(n, 2))
        g = FormationGraph(n, tuple((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)))
        R = rigidity_matrix(Framework(g, P))
        assert np.abs(R @ symmetry_generators(P)).max() <= 1e-9


@acceptance(8, "properties: equivariance, kernel, RK4 order, reproducibility")
def test_rk4_order():
    def exact(x0, k, t):
        return 1 / np.sqrt(k + (1 / x0 ** 2 - k) * np.exp(-2 * t))

    errs = []
    for dt in (0.1, 0.05):
        s = ScalarScenario.cubic(4, integration=Integration(dt=dt, T=2.0))
        errs.append(abs(integrate(s, [0.1]).states[-1, 0] - exact(0.1, 4, 2.0)))
    assert abs(errs[0] / errs[1] - 16) <= 0.2 * 16


@acceptance(8, "properties: equivariance, kernel, RK4 order, reproducibility")
def test_bitwise_reproducible():
    s = ScalarScenario.cubic(4, design=(0.5,), integration=Integration(dt=0.01, T=20))

    def reports():
        a = assess(s, MonteCarlo(500, (-2, 2), 11), Convergence(settle_T=20)).to_dict()
        b = probe(PolynomialField((0.0, -1.0)), [0.0], PerturbationSpec(1e-2, trials=20, seed=3))
        return json.dumps(a).encode(), json.dumps(b.to_dict()).encode()

    assert reports() == reports()

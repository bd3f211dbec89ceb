import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from formation_lab import geometry as G
from formation_lab.errors import DimensionMismatch, IndexOutOfRange
from formation_lab.formations import TRIANGLE, TWO_CYCLES, TWO_CYCLES_FRAMEWORKS, laman
from formation_lab.rigidity import (FormationGraph, Framework, invalence,
                                    is_infinitesimally_rigid, is_minimally_rigid, outvalence,
                                    realize, rigidity_matrix, rigidity_rank, symmetry_generators)

from conftest import generic_points

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
CYCLE4 = FormationGraph(4, ((1, 2), (2, 3), (3, 4), (4, 1)))
K4 = FormationGraph(4, ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)))


def svd_rank(M, tol=1e-9):
    s = np.linalg.svd(M, compute_uv=False)
    return int((s > tol * s[0]).sum())


class TestGraph:
    def test_valences(self):
        assert outvalence(TWO_CYCLES, 1) == 2
        assert invalence(TWO_CYCLES, 3) == 2

    def test_empty(self):
        g = FormationGraph(3, ())
        assert [outvalence(g, i) for i in (1, 2, 3)] == [0, 0, 0]

    def test_rejects_bad_edges(self):
        with pytest.raises(IndexOutOfRange):
            FormationGraph(3, ((1, 4),))
        with pytest.raises(ValueError):
            FormationGraph(3, ((2, 2),))
        with pytest.raises(ValueError):
            FormationGraph(3, ((1, 2), (1, 2)))

    def test_framework_size_check(self):
        with pytest.raises(DimensionMismatch):
            Framework(TRIANGLE, SQUARE)


class TestRigidityMatrix:
    def test_single_edge(self):
        R = rigidity_matrix(Framework(FormationGraph(2, ((1, 2),)), [[0, 0], [1, 0]]))
        np.testing.assert_array_equal(R, [[-1, 0, 1, 0]])

    def test_matches_finite_differences(self):
        c = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        R = rigidity_matrix(Framework(TRIANGLE, c))
        h = 1e-6
        fd = np.empty_like(R)
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            fd[:, k] = (G.delta((c.ravel() + e).reshape(3, 2), TRIANGLE.edges)
                        - G.delta((c.ravel() - e).reshape(3, 2), TRIANGLE.edges)) / (2 * h)
        np.testing.assert_allclose(R, fd, atol=1e-7)

    def test_rows_balance(self, rng):
        R = rigidity_matrix(Framework(K4, rng.normal(size=(4, 2))))
        np.testing.assert_allclose(R.reshape(6, 4, 2).sum(axis=1), 0.0, atol=1e-14)

    @given(st.integers(3, 7), st.integers(0, 2**31))
    def test_kernel_holds_symmetries(self, n, seed):
        c = np.random.default_rng(seed).normal(size=(n, 2))
        edges = tuple((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1))
        R = rigidity_matrix(Framework(FormationGraph(n, edges), c))
        Gm = symmetry_generators(c)
        scale = np.abs(R).max() * np.abs(Gm).max()
        assert np.abs(R @ Gm).max() <= 1e-9 * max(scale, 1.0)
        assert svd_rank(R) <= 2 * n - 3


class TestRigidity:
    def test_triangle(self):
        f = Framework(TRIANGLE, [[0, 0], [1, 0], [0, 1]])
        assert rigidity_rank(f) == svd_rank(rigidity_matrix(f)) == 3
        assert is_infinitesimally_rigid(f) and is_minimally_rigid(f)

    def test_square_cycle_flexes(self):
        f = Framework(CYCLE4, SQUARE)
        assert rigidity_rank(f) == svd_rank(rigidity_matrix(f)) == 4
        assert not is_infinitesimally_rigid(f)

    def test_two_cycles_generic(self, rng):
        f = Framework(TWO_CYCLES, generic_points(rng, 4))
        assert rigidity_rank(f) == svd_rank(rigidity_matrix(f)) == 5
        assert is_infinitesimally_rigid(f) and is_minimally_rigid(f)

    def test_complete_graph_not_minimal(self, rng):
        f = Framework(K4, generic_points(rng, 4))
        assert is_infinitesimally_rigid(f)
        assert not is_minimally_rigid(f)

    def test_direction_ignored(self):
        c = [[0, 0], [1, 0], [0, 1]]
        both = FormationGraph(3, ((1, 2), (2, 1), (2, 3), (3, 2), (3, 1), (1, 3)))
        assert rigidity_rank(Framework(both, c)) == 3
        assert is_minimally_rigid(Framework(both, c))

    @given(st.integers(3, 7), st.integers(0, 2**31))
    def test_minimal_implies_laman_count(self, n, seed):
        rng = np.random.default_rng(seed)
        g = laman(n)
        f = Framework(g, rng.normal(size=(n, 2)))
        if is_minimally_rigid(f):
            assert g.m == 2 * n - 3


def _circle_hits(c1, r1, c2, r2):
    """Intersections of two circles (0, 1 or 2 points)."""
    d = np.linalg.norm(c2 - c1)
    a = (r1 ** 2 - r2 ** 2 + d ** 2) / (2 * d)
    h2 = r1 ** 2 - a ** 2
    if h2 < 0:
        return []
    base = c1 + a * (c2 - c1) / d
    perp = np.array([-(c2 - c1)[1], (c2 - c1)[0]]) / d
    return [base + np.sqrt(h2) * perp, base - np.sqrt(h2) * perp]


def two_cycles_realizations(P):
    """All realizations of the 2-cycles lengths of ``P`` with x1 = 0, x3 on the +x axis."""
    L = lambda i, j: np.linalg.norm(P[i - 1] - P[j - 1])  # noqa: E731
    x1, x3 = np.zeros(2), np.array([L(1, 3), 0.0])
    out = []
    for x2 in _circle_hits(x1, L(1, 2), x3, L(2, 3)):
        for x4 in _circle_hits(x1, L(1, 4), x3, L(3, 4)):
            out.append(np.array([x1, x2, x3, x4]))
    return out


class TestRealize:
    def test_equilateral(self):
        fw = realize(TRIANGLE, [0.5, 0.5, 0.5])
        assert fw is not None
        L = np.linalg.norm(fw.config - np.roll(fw.config, 1, axis=0), axis=1)
        np.testing.assert_allclose(L, 1.0, atol=1e-8)

    def test_impossible_triangle(self):
        assert realize(TRIANGLE, 0.5 * np.array([1.0, 1.0, 100.0]), attempts=5) is None

    def test_two_cycles_matches_enumeration(self, rng):
        for _ in range(5):
            P = generic_points(rng, 4)
            fw = realize(TWO_CYCLES, G.delta(P, TWO_CYCLES.edges), rng_seed=int(rng.integers(1e6)))
            assert fw is not None
            cands = two_cycles_realizations(P)
            assert len(cands) == 4
            assert any(G.congruent(fw.config, c, allow_reflection=True) for c in cands)

    def test_figure_frameworks_share_lengths(self):
        ref = G.delta(TWO_CYCLES_FRAMEWORKS["a"], TWO_CYCLES.edges)
        for c in TWO_CYCLES_FRAMEWORKS.values():
            np.testing.assert_array_equal(G.delta(c, TWO_CYCLES.edges), ref)
        assert len(two_cycles_realizations(TWO_CYCLES_FRAMEWORKS["a"])) == 4

    @given(st.integers(3, 6), st.integers(0, 2**31))
    def test_round_trip(self, n, seed):
        rng = np.random.default_rng(seed)
        g = laman(n)
        P = generic_points(rng, n)
        d = G.delta(P, g.edges)
        fw = realize(g, d, rng_seed=seed % 1000)
        assert fw is not None
        np.testing.assert_allclose(fw.delta(), d, atol=1e-8)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            realize(TRIANGLE, [1.0, 1.0])


def test_rigidity_condition():
    from formation_lab.rigidity import rigidity_condition
    assert rigidity_condition(Framework(CYCLE4, SQUARE)) == pytest.approx(0.0, abs=1e-12)
    tri = Framework(TRIANGLE, [[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    flat = Framework(TRIANGLE, [[0, 0], [1, 0], [0.5, 1e-4]])
    assert rigidity_condition(tri) > 0.5
    assert rigidity_condition(flat) < 1e-3

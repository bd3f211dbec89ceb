"""Formation graphs, rigidity matrices and numeric realization of edge lengths."""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from . import geometry
from .errors import DimensionMismatch, IndexOutOfRange

RANK_TOL = 1e-9


@dataclass(frozen=True)
class FormationGraph:
    """Directed graph on vertices 1..n; edges keep their given order."""

    n: int
    edges: tuple

    def __post_init__(self):
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        seen = set()
        for i, j in edges:
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise IndexOutOfRange(f"edge ({i}, {j}) outside 1..{self.n}")
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        object.__setattr__(self, "edges", edges)

    @property
    def m(self):
        return len(self.edges)

    def _check(self, i):
        if not 1 <= i <= self.n:
            raise IndexOutOfRange(f"vertex {i} outside 1..{self.n}")

    def out_edges(self, i):
        """Indices (into ``edges``) of edges leaving vertex ``i``, in order."""
        self._check(i)
        return [k for k, (a, _) in enumerate(self.edges) if a == i]

    def out_neighbors(self, i):
        return [self.edges[k][1] for k in self.out_edges(i)]

    def without_edge(self, k):
        return FormationGraph(self.n, self.edges[:k] + self.edges[k + 1:])

    def undirected(self):
        """Edge list with each unordered pair once (first occurrence wins)."""
        seen, out = set(), []
        for i, j in self.edges:
            key = (min(i, j), max(i, j))
            if key not in seen:
                seen.add(key)
                out.append((i, j))
        return FormationGraph(self.n, tuple(out))

    def index_arrays(self):
        e = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        return e[:, 0] - 1, e[:, 1] - 1


@dataclass(frozen=True, eq=False)
class Framework:
    graph: FormationGraph
    config: np.ndarray

    def __post_init__(self):
        c = geometry.as_config(self.config)
        if c.shape[0] != self.graph.n:
            raise DimensionMismatch(
                f"graph has {self.graph.n} vertices, configuration has {c.shape[0]}")
        object.__setattr__(self, "config", c)

    def delta(self):
        return geometry.delta(self.config, self.graph.edges)


def outvalence(g, i):
    return len(g.out_edges(i))


def invalence(g, i):
    g._check(i)
    return sum(1 for _, j in g.edges if j == i)


def rigidity_matrix(f):
    """Jacobian of the half squared edge lengths, one row per edge."""
    c = f.config
    n = c.shape[0]
    i, j = f.graph.index_arrays()
    R = np.zeros((f.graph.m, 2 * n))
    w = c[i] - c[j]
    rows = np.arange(f.graph.m)
    for d in range(2):
        R[rows, 2 * i + d] += w[:, d]
        R[rows, 2 * j + d] -= w[:, d]
    return R


def symmetry_generators(c):
    """Translations in x, y and the rotation about the centroid, as columns."""
    c = geometry.as_config(c)
    n = c.shape[0]
    tx = np.tile([1.0, 0.0], n)
    ty = np.tile([0.0, 1.0], n)
    cc = c - c.mean(axis=0)
    rot = np.column_stack([-cc[:, 1], cc[:, 0]]).ravel()
    return np.column_stack([tx, ty, rot])


def numerical_rank(M, tol=RANK_TOL):
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def rigidity_rank(f, tol=RANK_TOL):
    # rigidity depends only on the underlying undirected edge set
    und = Framework(f.graph.undirected(), f.config)
    return numerical_rank(rigidity_matrix(und), tol)


def is_infinitesimally_rigid(f, tol=RANK_TOL):
    n = f.graph.n
    if n < 2:
        return True
    return rigidity_rank(f, tol) == 2 * n - 3


def is_minimally_rigid(f, tol=RANK_TOL):
    if not is_infinitesimally_rigid(f, tol):
        return False
    und = f.graph.undirected()
    for k in range(und.m):
        if is_infinitesimally_rigid(Framework(und.without_edge(k), f.config), tol):
            return False
    return True


def realize(g, d, attempts=20, rng_seed=0, residual_tol=1e-10):
    """Search for a framework whose half squared edge lengths equal ``d``.

    ``d`` uses the same convention as :func:`geometry.delta`. Returns a
    canonicalized :class:`Framework`, or ``None`` when no restart reaches
    ``residual_tol``; ``None`` does not prove the lengths are unrealizable.
    """
    d = np.asarray(d, dtype=float).ravel()
    if d.size != g.m:
        raise DimensionMismatch(f"graph has {g.m} edges, got {d.size} lengths")
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    if np.any(d < 0):
        return None
    n = g.n
    i, j = g.index_arrays()
    scale = np.sqrt(2.0 * d.mean()) if d.size and d.mean() > 0 else 1.0
    rng = np.random.default_rng(rng_seed)

    def residual(x):
        p = x.reshape(n, 2)
        w = p[j] - p[i]
        return 0.5 * np.einsum("kd,kd->k", w, w) - d

    def jac(x):
        R = np.zeros((g.m, 2 * n))
        p = x.reshape(n, 2)
        w = p[i] - p[j]
        rows = np.arange(g.m)
        for a in range(2):
            R[rows, 2 * i + a] += w[:, a]
            R[rows, 2 * j + a] -= w[:, a]
        return R

    for _ in range(attempts):
        x0 = rng.normal(scale=scale, size=2 * n)
        sol = least_squares(residual, x0, jac=jac, method="trf",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        r = residual(sol.x)
        if np.max(np.abs(r), initial=0.0) < residual_tol:
            p = sol.x.reshape(n, 2)
            if n >= 2 and np.any(p[0] != p[1]):
                p = geometry.canonicalize(p)
            return Framework(g, p)
    return None


def rigidity_condition(f):
    """``sigma_{2n-3} / sigma_1`` of the (undirected) rigidity matrix.

    Zero for flexible frameworks; small values flag frameworks close to the
    infinitesimally flexible set (for example nearly collinear ones).
    """
    n = f.graph.n
    if n < 2:
        return 1.0
    und = Framework(f.graph.undirected(), f.config)
    s = np.linalg.svd(rigidity_matrix(und), compute_uv=False)
    k = 2 * n - 3
    if s.size < k or s[0] == 0.0:
        return 0.0
    return float(s[k - 1] / s[0])

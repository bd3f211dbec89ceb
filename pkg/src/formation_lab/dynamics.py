"""Decentralized closed-loop formation dynamics and their integration.

Every agent ``i`` moves along the vectors ``g_ij = x_j - x_i`` of its
out-edges in the h-graph, scaled by scalar controls ``u_ij`` that may only
depend on what the agent observes (``h_i``) and what it knows about the
target (``delta_i``).

Unit conventions
----------------
* ``objective_data`` (range entries), ``local_objective`` and
  ``global_objective`` use squared lengths: ``e = |x_j - x_i|^2 - d``.
* ``LinearGain`` multiplies that squared-length error by a gain.
* ``Gradient`` and ``TriangleCyclic`` use plain lengths ``sqrt(d)``.
* :func:`geometry.delta` carries an extra factor 1/2; convert explicitly.
"""
import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import ConfigError, IndexOutOfRange, NonFinite
from .rigidity import FormationGraph


class ObservationMode(enum.Enum):
    RANGE_ONLY = "RangeOnly"
    RELATIVE_POSITION = "RelativePosition"


class ObjectiveMode(enum.Enum):
    RANGE_ONLY = "RangeOnly"
    RANGE_AND_ANGLE = "RangeAndAngle"
    FULL_INFORMATION = "FullInformation"


@dataclass(frozen=True)
class LinearGain:
    """``u_ij = k_ij * (|x_j - x_i|^2 - d_ij)``; one gain per h-edge."""

    gains: tuple

    def __post_init__(self):
        g = tuple(float(k) for k in self.gains)
        if not all(np.isfinite(g)):
            raise ConfigError("gains must be finite")
        object.__setattr__(self, "gains", g)


@dataclass(frozen=True)
class Gradient:
    """``u_ij = |x_j - x_i| - sqrt(d_ij)`` on every h-edge."""


@dataclass(frozen=True)
class TriangleCyclic:
    """``x_i' = (|x_{i+1} - x_i| - sqrt(d_i)) (x_{i+1} - x_i)`` on the directed 3-cycle."""


@dataclass(frozen=True)
class PolynomialCustom:
    """One polynomial per h-edge in the tail agent's variables ``(delta_i, h_i)``.

    ``terms[k]`` is a sequence of ``(coefficient, exponents)`` pairs for h-edge
    ``k``; ``exponents`` has one entry per variable.
    """

    terms: tuple
    max_degree: int = 4

    def __post_init__(self):
        terms = tuple(
            tuple((float(c), tuple(int(p) for p in e)) for c, e in edge_terms)
            for edge_terms in self.terms)
        for edge_terms in terms:
            for c, e in edge_terms:
                if not np.isfinite(c):
                    raise ConfigError("polynomial coefficients must be finite")
                if any(p < 0 for p in e):
                    raise ConfigError("negative exponent")
                if sum(e) > self.max_degree:
                    raise ConfigError(
                        f"monomial of degree {sum(e)} exceeds cap {self.max_degree}")
        object.__setattr__(self, "terms", terms)


BUILTIN_LAWS = (LinearGain, Gradient, TriangleCyclic)


@dataclass(frozen=True)
class Integration:
    dt: float = 1e-3
    T: float = 50.0
    method: str = "rk4"
    bound: float = 1e6

    def __post_init__(self):
        if not (self.dt > 0 and self.T > 0):
            raise ConfigError("dt and T must be positive")
        if self.method != "rk4":
            raise ConfigError(f"unsupported integration method {self.method!r}")

    @property
    def steps(self):
        return int(np.floor(self.T / self.dt + 1e-9))


@dataclass(frozen=True, eq=False)
class Scenario:
    target: np.ndarray
    h_graph: FormationGraph
    delta_graph: FormationGraph
    obs_mode: ObservationMode = ObservationMode.RELATIVE_POSITION
    obj_mode: ObjectiveMode = ObjectiveMode.RANGE_ONLY
    law: object = field(default_factory=Gradient)
    integration: Integration = field(default_factory=Integration)

    def __post_init__(self):
        mu = np.array(self.target, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "target", mu)
        object.__setattr__(self, "obs_mode", ObservationMode(self.obs_mode))
        object.__setattr__(self, "obj_mode", ObjectiveMode(self.obj_mode))
        if self.h_graph.n != self.delta_graph.n:
            raise ConfigError("h-graph and delta-graph disagree on n")
        if mu.shape[0] != self.h_graph.n - 1:
            raise ConfigError(
                f"target needs {self.h_graph.n - 1} points, got {mu.shape[0]}")

    @property
    def n(self):
        return self.h_graph.n

    @property
    def target_config(self):
        return geometry.target_points(self.target)


@dataclass(frozen=True)
class ScalarScenario:
    """One-dimensional polynomial system ``x' = sum_k coeffs[k] x^k``."""

    coeffs: tuple
    design: tuple = ()
    integration: Integration = field(default_factory=Integration)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "design", tuple(float(d) for d in self.design))

    @classmethod
    def cubic(cls, k, design=(), integration=None):
        """The system ``x' = x (1 - k x^2)``."""
        return cls((0.0, 1.0, 0.0, -float(k)), tuple(design),
                   integration or Integration())


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    terminal_speed: float


# observation / objective ---------------------------------------------------

def _observe_points(P, i, nbrs, mode):
    """Observation vector of agent ``i`` (0-based) for points ``P[..., n, 2]``."""
    if not nbrs:
        return np.zeros(P.shape[:-2] + (0,))
    W = P[..., nbrs, :] - P[..., i:i + 1, :]
    ranges = np.sqrt(np.einsum("...kd,...kd->...k", W, W))
    if mode is ObservationMode.RANGE_ONLY:
        return ranges
    dots = np.einsum("...d,...kd->...k", W[..., 0, :], W[..., 1:, :])
    return np.concatenate([ranges, dots], axis=-1)


def _check_vertex(g, i):
    if not 1 <= i <= g.n:
        raise IndexOutOfRange(f"vertex {i} outside 1..{g.n}")


def observe(c, g, i, mode=ObservationMode.RELATIVE_POSITION):
    """What agent ``i`` measures about its h-graph out-neighbors.

    Ranges to each neighbor in edge order; in relative-position mode
    followed by the inner products of the first neighbor vector with each
    of the others.
    """
    _check_vertex(g, i)
    c = geometry.as_config(c)
    nbrs = [j - 1 for j in g.out_neighbors(i)]
    return _observe_points(c, i - 1, nbrs, ObservationMode(mode))


def objective_data(t, g, i, mode=ObjectiveMode.RANGE_ONLY):
    _check_vertex(g, i)
    mode = ObjectiveMode(mode)
    mu = np.asarray(t, dtype=float).reshape(-1, 2)
    if mode is ObjectiveMode.FULL_INFORMATION:
        return mu.ravel().copy()
    P = geometry.target_points(mu)
    nbrs = [j - 1 for j in g.out_neighbors(i)]
    if not nbrs:
        return np.zeros(0)
    W = P[nbrs] - P[i - 1]
    sq = np.einsum("kd,kd->k", W, W)
    if mode is ObjectiveMode.RANGE_ONLY:
        return sq
    return np.concatenate([sq, W[1:] @ W[0]])


def target_sq_lengths(s, graph=None):
    graph = graph or s.delta_graph
    return geometry.squared_lengths(s.target_config, graph.edges)


def local_objective(s, c, i):
    """Squared-length errors on agent ``i``'s delta-graph out-edges."""
    _check_vertex(s.delta_graph, i)
    c = geometry.as_config(c)
    ks = s.delta_graph.out_edges(i)
    d = target_sq_lengths(s)[ks]
    edges = [s.delta_graph.edges[k] for k in ks]
    return geometry.squared_lengths(c, edges) - d


def global_objective(s, c):
    c = geometry.as_config(c)
    return geometry.squared_lengths(c, s.delta_graph.edges) - target_sq_lengths(s)


def _h_edge_targets(s):
    """Squared target length of every h-edge, checking the agent can know it."""
    known = set(s.delta_graph.edges)
    if s.obj_mode is not ObjectiveMode.FULL_INFORMATION:
        for e in s.h_graph.edges:
            if e not in known:
                raise ConfigError(
                    f"agent {e[0]} has no target for h-edge {e} in its delta data")
    return geometry.squared_lengths(s.target_config, s.h_graph.edges)


# polynomials ---------------------------------------------------------------

def monomials(nvars, degree):
    """Exponent tuples of all monomials in ``nvars`` variables up to ``degree``."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    return out


def _eval_poly(V, coeffs, exps):
    """Evaluate ``sum_k coeffs[k] * prod(V ** exps[k])`` over leading axes of V."""
    if len(coeffs) == 0:
        return np.zeros(V.shape[:-1])
    E = np.asarray(exps, dtype=float).reshape(len(coeffs), V.shape[-1])
    if V.shape[-1] == 0:
        return np.full(V.shape[:-1], float(np.sum(coeffs)))
    mono = np.prod(V[..., None, :] ** E, axis=-1)
    return mono @ np.asarray(coeffs, dtype=float)


# closed loop ---------------------------------------------------------------

class ClosedLoop:
    """Closed-loop right-hand side of a formation scenario.

    Call with a flat state of shape ``(..., 2n)``. ``control_perturbation``
    optionally adds ``(epsilon, polys)`` to the scalar controls, where
    ``polys[k] = (coeffs, exps)`` is a polynomial in the tail agent's
    observation vector for h-edge ``k``.
    """

    se2 = True

    def __init__(self, scenario, control_perturbation=None):
        s = scenario
        self.scenario = s
        self.n = s.n
        self.dim = 2 * s.n
        g = s.h_graph
        self.tail, self.head = g.index_arrays()
        self.m = g.m
        self.incidence = np.zeros((self.n, self.m))
        self.incidence[self.tail, np.arange(self.m)] = 1.0
        self.nbrs = [[j - 1 for j in g.out_neighbors(i + 1)] for i in range(self.n)]
        self.out_idx = [g.out_edges(i + 1) for i in range(self.n)]
        self.law = s.law
        self.perturbation = control_perturbation

        if isinstance(s.law, TriangleCyclic):
            cyc = {(1, 2), (2, 3), (3, 1)}
            if s.n != 3 or set(g.edges) != cyc:
                raise ConfigError("TriangleCyclic needs the directed 3-cycle 1->2->3->1")
        if isinstance(s.law, LinearGain):
            if len(s.law.gains) != self.m:
                raise ConfigError(f"LinearGain needs {self.m} gains, got {len(s.law.gains)}")
            self.gains = np.asarray(s.law.gains)
        if isinstance(s.law, BUILTIN_LAWS):
            self.d_sq = _h_edge_targets(s)
            self.d_len = np.sqrt(self.d_sq)
        elif isinstance(s.law, PolynomialCustom):
            if len(s.law.terms) != self.m:
                raise ConfigError(f"PolynomialCustom needs {self.m} edge polynomials")
            self.delta_data = [objective_data(s.target, s.delta_graph, i + 1, s.obj_mode)
                               for i in range(self.n)]
            self.poly = []
            for k, terms in enumerate(s.law.terms):
                i = self.tail[k]
                nv = len(self.delta_data[i]) + self._nobs(i)
                for _, e in terms:
                    if len(e) != nv:
                        raise ConfigError(
                            f"edge {k}: monomial has {len(e)} exponents, agent has {nv} variables")
                self.poly.append(([c for c, _ in terms], [e for _, e in terms]))
        else:
            raise ConfigError(f"unknown control law {s.law!r}")

    def _nobs(self, i):
        k = len(self.nbrs[i])
        if self.scenario.obs_mode is ObservationMode.RANGE_ONLY or k == 0:
            return k
        return 2 * k - 1

    def observations(self, P):
        mode = self.scenario.obs_mode
        return [_observe_points(P, i, self.nbrs[i], mode) for i in range(self.n)]

    def edge_vectors(self, P):
        return P[..., self.head, :] - P[..., self.tail, :]

    def controls(self, x):
        """Scalar controls ``u_ij`` for every h-edge, shape ``(..., m)``."""
        P = np.asarray(x, dtype=float).reshape(np.shape(x)[:-1] + (self.n, 2))
        return self._controls(P, self.edge_vectors(P))

    def _controls(self, P, W):
        q = np.einsum("...kd,...kd->...k", W, W)
        law = self.law
        if isinstance(law, LinearGain):
            u = self.gains * (q - self.d_sq)
        elif isinstance(law, (Gradient, TriangleCyclic)):
            u = np.sqrt(q) - self.d_len
        else:
            obs = self.observations(P)
            u = np.zeros(q.shape)
            for k, (coeffs, exps) in enumerate(self.poly):
                i = self.tail[k]
                dd = np.broadcast_to(self.delta_data[i], P.shape[:-2] + self.delta_data[i].shape)
                V = np.concatenate([dd, obs[i]], axis=-1)
                u[..., k] = _eval_poly(V, coeffs, exps)
        if self.perturbation is not None:
            eps, polys = self.perturbation
            obs = self.observations(P)
            u = u.copy()
            for k, (coeffs, exps) in enumerate(polys):
                u[..., k] += eps * _eval_poly(obs[self.tail[k]], coeffs, exps)
        return u

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        P = x.reshape(x.shape[:-1] + (self.n, 2))
        W = self.edge_vectors(P)
        u = self._controls(P, W)
        out = np.matmul(self.incidence, u[..., None] * W)
        return out.reshape(x.shape)

    def jacobian(self, x):
        """Analytic Jacobian for the built-in laws; ``None`` otherwise."""
        if self.perturbation is not None or not isinstance(self.law, BUILTIN_LAWS):
            return None
        P = np.asarray(x, dtype=float).reshape(self.n, 2)
        W = P[self.head] - P[self.tail]
        q = np.einsum("kd,kd->k", W, W)
        if isinstance(self.law, LinearGain):
            phi = self.gains * (q - self.d_sq)
            dphi = self.gains.copy()
        else:
            r = np.sqrt(q)
            phi = r - self.d_len
            with np.errstate(divide="ignore"):
                dphi = np.where(r > 0, 0.5 / np.where(r > 0, r, 1.0), 0.0)
        J = np.zeros((self.dim, self.dim))
        I2 = np.eye(2)
        for k in range(self.m):
            i, j = self.tail[k], self.head[k]
            B = phi[k] * I2 + 2.0 * dphi[k] * np.outer(W[k], W[k])
            J[2 * i:2 * i + 2, 2 * j:2 * j + 2] += B
            J[2 * i:2 * i + 2, 2 * i:2 * i + 2] -= B
        return J


class PolynomialField:
    """Scalar polynomial vector field ``x' = sum_k coeffs[k] x^k`` on shape ``(..., 1)``."""

    se2 = False
    dim = 1

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self._p = np.polynomial.Polynomial(self.coeffs)
        self._dp = self._p.deriv()

    def __call__(self, x):
        return self._p(np.asarray(x, dtype=float))

    def jacobian(self, x):
        x = np.asarray(x, dtype=float).ravel()
        return np.array([[self._dp(x[0])]])


def vector_field(s, control_perturbation=None):
    if isinstance(s, ScalarScenario):
        if control_perturbation is not None:
            raise ConfigError("scalar systems have no decentralized controls")
        return PolynomialField(s.coeffs)
    return ClosedLoop(s, control_perturbation)


# integration ---------------------------------------------------------------

def rk4_step(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _out_of_bounds(x, planar, bound):
    if planar:
        P = x.reshape(x.shape[:-1] + (-1, 2))
        r = np.sqrt(np.einsum("...kd,...kd->...k", P, P)).max(axis=-1)
    else:
        r = np.abs(x).max(axis=-1)
    return ~(r <= bound)


def rk4_batch(f, X0, dt, steps, bound=1e6):
    """Integrate a batch of states ``(B, dim)``; returns ``(X, diverged)``.

    Rows that leave the box are frozen at their last in-bounds state.
    """
    X = np.array(X0, dtype=float)
    planar = getattr(f, "se2", False)
    diverged = np.zeros(X.shape[0], dtype=bool)
    active = np.arange(X.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            if active.size == 0:
                break
            Xa = X[active]
            Xn = rk4_step(f, Xa, dt)
            bad = _out_of_bounds(Xn, planar, bound)
            if bad.any():
                diverged[active[bad]] = True
                X[active[~bad]] = Xn[~bad]
                active = active[~bad]
            else:
                X[active] = Xn
    return X, diverged


def integrate(s, x0, field=None):
    """Fixed-step classical RK4 trajectory of scenario ``s`` from ``x0``."""
    f = field or vector_field(s)
    cfg = s.integration
    planar = getattr(f, "se2", False)
    shape = (s.n, 2) if planar else (f.dim,)
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    if x.size != f.dim:
        raise ConfigError(f"initial state has {x.size} entries, expected {f.dim}")
    steps = cfg.steps
    states = np.empty((steps + 1, f.dim))
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x = rk4_step(f, x, cfg.dt)
            if _out_of_bounds(x[None], planar, cfg.bound)[0]:
                raise NonFinite(f"state left the bounding box at t={(k + 1) * cfg.dt:g}")
            states[k + 1] = x
    times = cfg.dt * np.arange(steps + 1)
    speed = float(np.linalg.norm(f(x)))
    return Trajectory(times, states.reshape((steps + 1,) + shape), speed)

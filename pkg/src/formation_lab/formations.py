"""Standard formations: graphs, targets and a few quantities specific to them."""
import numpy as np

from . import geometry
from .dynamics import (ClosedLoop, Gradient, Integration, LinearGain, ObjectiveMode, target_sq_lengths,
                       ObservationMode, Scenario, TriangleCyclic)
from .rigidity import FormationGraph

# Edge k is the vector z_{k+1}: z1 = x2-x1, z2 = x3-x2, z3 = x1-x3, z4 = x3-x4, z5 = x4-x1
TWO_CYCLES = FormationGraph(4, ((1, 2), (2, 3), (3, 1), (4, 3), (1, 4)))
TRIANGLE = FormationGraph(3, ((1, 2), (2, 3), (3, 1)))

FIVE_AGENT_H = FormationGraph(5, ((1, 2), (2, 3), (2, 4), (3, 1), (4, 1), (5, 2), (5, 3)))
FIVE_AGENT_H_ALT = FormationGraph(5, ((1, 2), (2, 3), (2, 4), (3, 5), (4, 5), (5, 2), (5, 1)))
FIVE_AGENT_DELTA = FormationGraph(5, ((1, 2), (2, 3), (2, 4), (3, 5), (4, 5), (5, 2), (5, 1)))
FIVE_AGENT_TARGET = np.array([[2.0, 0.0], [1.0, 1.5], [0.0, 1.0], [0.5, 1.0]])

# The four frameworks sharing one set of 2-cycles edge lengths; (a)/(c) and (b)/(d) are mirror pairs.
TWO_CYCLES_FRAMEWORKS = {
    "a": np.array([[0.0, 0.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]),
    "b": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]),
    "c": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, -1.0], [-1.0, 1.0]]),
    "d": np.array([[0.0, 0.0], [-1.0, 0.0], [0.0, -1.0], [-1.0, 1.0]]),
}


def symmetric(g):
    """Both directions of every edge (bidirectional formation)."""
    edges = list(g.edges)
    for i, j in g.edges:
        if (j, i) not in edges:
            edges.append((j, i))
    return FormationGraph(g.n, tuple(edges))


def leader_follower(n):
    """Acyclic minimally rigid digraph: agent 2 follows 1, agent i>2 follows i-1 and i-2."""
    edges = [(2, 1)]
    for i in range(3, n + 1):
        edges += [(i, i - 1), (i, i - 2)]
    return FormationGraph(n, tuple(edges))


def laman(n):
    """Undirected Henneberg-type minimally rigid graph (edges listed once)."""
    edges = [(1, 2)]
    for i in range(3, n + 1):
        edges += [(i - 2, i), (i - 1, i)]
    return FormationGraph(n, tuple(edges))


def triangle_scenario(target, integration=None):
    return Scenario(target, TRIANGLE, TRIANGLE, ObservationMode.RANGE_ONLY,
                    ObjectiveMode.RANGE_ONLY, TriangleCyclic(), integration or Integration())


def two_cycles_scenario(target, gains=(1.0,) * 5, obj_mode=ObjectiveMode.RANGE_ONLY,
                        integration=None):
    return Scenario(target, TWO_CYCLES, TWO_CYCLES, ObservationMode.RELATIVE_POSITION,
                    obj_mode, LinearGain(tuple(gains)), integration or Integration())


def gradient_scenario(target, graph, integration=None):
    return Scenario(target, graph, graph, ObservationMode.RANGE_ONLY,
                    ObjectiveMode.RANGE_ONLY, Gradient(), integration or Integration())


def z_vectors(x):
    """The five 2-cycles edge vectors ``z_1..z_5`` as rows."""
    P = np.asarray(x, dtype=float).reshape(4, 2)
    return np.array([P[1] - P[0], P[2] - P[1], P[0] - P[2], P[2] - P[3], P[3] - P[0]])


def edge_errors(x, d):
    """``e_i = z_i . z_i - d_i`` with squared targets ``d``."""
    z = z_vectors(x)
    return np.einsum("kd,kd->k", z, z) - np.asarray(d, dtype=float)


def balance_residual(x, u11, u12):
    """Agent 1 balance for aligned ``z_1``, ``z_5``: ``|u11 |z1| + s u12 |z5||``.

    ``s`` is +1 when the two vectors point the same way and -1 otherwise.
    """
    z = z_vectors(x)
    s = 1.0 if z[0] @ z[4] > 0 else -1.0
    return abs(u11 * np.linalg.norm(z[0]) + s * u12 * np.linalg.norm(z[4]))


def aligned_z_seeds(s, rng_seed=0, count=60):
    """Configurations with ``e_2 = e_3 = e_4 = 0``, ``z_1 || z_5`` and agent 1 balanced.

    Agent 1 sits at the origin, agents 2 and 4 on the x-axis at ``a`` and
    ``b``, agent 3 at ``(p, q)``; the four unknowns solve the three edge
    equations plus ``k_1 e_1 a + k_5 e_5 b = 0``. Collinear solutions are
    dropped. Needs a ``LinearGain`` law.
    """
    from scipy.optimize import fsolve

    d = target_sq_lengths(s, s.h_graph)
    k = np.asarray(s.law.gains)

    def equations(v):
        a, b, p, q = v
        e1, e5 = a * a - d[0], b * b - d[4]
        return [p * p + q * q - d[2], (p - a) ** 2 + q * q - d[1],
                (p - b) ** 2 + q * q - d[3], k[0] * e1 * a + k[4] * e5 * b]

    rng = np.random.default_rng(rng_seed)
    scale = np.sqrt(np.max(d))
    out = []
    for _ in range(count):
        v, _, ier, _ = fsolve(equations, rng.normal(scale=scale, size=4), full_output=True)
        if ier == 1 and np.max(np.abs(equations(v))) < 1e-10 and abs(v[3]) > 1e-6:
            a, b, p, q = v
            out.append(np.array([[0.0, 0.0], [a, 0.0], [p, q], [b, 0.0]]))
    return out


def search_gains(mu, obj_mode=ObjectiveMode.FULL_INFORMATION, draws=10_000, low=-5.0,
                 high=5.0, seed=0, eps_eig=1e-6):
    """Random search for 2-cycles gains that make the target a stable equilibrium.

    Returns ``(gains, draws_used)``, or ``None`` if no draw worked.
    """
    from .equilibria import Stability, classify

    rng = np.random.default_rng(seed)
    x = geometry.target_points(mu).ravel()
    for k in range(1, draws + 1):
        gains = rng.uniform(low, high, 5)
        f = ClosedLoop(two_cycles_scenario(mu, gains, obj_mode))
        if classify(f, x, eps_eig).stability is Stability.STABLE:
            return gains, k
    return None

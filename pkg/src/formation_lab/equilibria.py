"""Locate, linearize and classify equilibria of closed-loop systems.

Fields are callables on flat states. Planar fields (``field.se2`` true) are
treated modulo translations and rotations: the Jacobian is restricted to the
orthogonal complement of the symmetry generators before reading the spectrum.
"""
import dataclasses
import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from . import geometry
from .dynamics import ObjectiveMode, ScalarScenario, global_objective
from .errors import NonFinite
from .rigidity import numerical_rank, symmetry_generators

EPS_EIG = 1e-6
DEDUP_TOL = 1e-6


class Stability(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


class Designation(enum.Enum):
    DESIGN = "Design"
    ANCILLARY = "Ancillary"


@dataclass
class EquilibriumRecord:
    state: np.ndarray
    jacobian_spectrum: np.ndarray
    symmetry_dims: int
    stability: Stability
    designation: Designation = None
    degenerate: bool = False
    residual: float = 0.0

    def to_dict(self):
        return {
            "state": self.state.tolist(),
            "jacobian_spectrum": [[float(z.real), float(z.imag)] for z in self.jacobian_spectrum],
            "symmetry_dims": int(self.symmetry_dims),
            "stability": self.stability.value,
            "designation": self.designation.value if self.designation else None,
            "degenerate": bool(self.degenerate),
            "residual": float(self.residual),
        }


def _flat(x):
    return np.asarray(x, dtype=float).reshape(-1)


def _shaped(field, x):
    x = _flat(x)
    if getattr(field, "se2", False):
        return x.reshape(-1, 2)
    return x


def fd_jacobian(field, x, fd_step=1e-6):
    x = _flat(x)
    J = np.empty((x.size, x.size))
    for k in range(x.size):
        h = fd_step * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = h
        J[:, k] = (_flat(field(x + e)) - _flat(field(x - e))) / (2.0 * h)
    return J


def linearize(field, x, fd_step=1e-6, analytic=False):
    """Jacobian of ``field`` at ``x``; central differences unless ``analytic``."""
    x = _flat(x)
    r = np.linalg.norm(_flat(field(x)))
    if r > 1e-6 * (1.0 + np.linalg.norm(x)):
        warnings.warn(f"linearizing away from an equilibrium (|f| = {r:.3g})")
    J = None
    if analytic:
        jac = getattr(field, "jacobian", None)
        J = jac(x) if jac is not None else None
        if J is None:
            raise ValueError("field has no analytic Jacobian")
    else:
        J = fd_jacobian(field, x, fd_step)
    if not np.all(np.isfinite(J)):
        raise NonFinite("Jacobian has non-finite entries")
    return J


def _best_jacobian(field, x, fd_step=1e-6):
    jac = getattr(field, "jacobian", None)
    J = jac(x) if jac is not None else None
    return J if J is not None else fd_jacobian(field, x, fd_step)


def _newton(field, x0, tol, max_iter):
    x = _flat(x0).copy()
    fx = _flat(field(x))
    nf = np.linalg.norm(fx)
    checkpoint = nf
    for it in range(max_iter):
        if not np.isfinite(nf):
            return None
        if nf <= tol:
            return x
        if it and it % 25 == 0:
            # neither quadratic nor steady linear progress: give up
            if nf > 0.5 * checkpoint:
                return None
            checkpoint = nf
        J = _best_jacobian(field, x)
        if not np.all(np.isfinite(J)):
            return None
        step = np.linalg.pinv(J, rcond=1e-10) @ fx
        if not np.any(step):
            return None
        alpha = 1.0
        while alpha > 1e-10:
            xn = x - alpha * step
            fn = _flat(field(xn))
            nn = np.linalg.norm(fn)
            if nn < (1.0 - 1e-4 * alpha) * nf:
                break
            alpha *= 0.5
        else:
            return None
        x, fx, nf = xn, fn, nn
    return x if nf <= tol else None


def _same(field, a, b):
    if getattr(field, "se2", False):
        return geometry.congruent(a.reshape(-1, 2), b.reshape(-1, 2), tol=DEDUP_TOL)
    return np.linalg.norm(a - b) <= DEDUP_TOL * (1.0 + np.linalg.norm(b))


def _sort_key(field, x):
    if getattr(field, "se2", False):
        P = x.reshape(-1, 2)
        try:
            P = geometry.canonicalize(P)
        except geometry.DegenerateInput:
            P = P - P.mean(axis=0)
        return tuple(np.round(P.ravel(), 9))
    return tuple(np.round(x, 9))


def find_equilibria(field, seeds, tol=1e-10, max_iter=200, diagnostics=None):
    """Refine each seed by damped pseudo-inverse Newton; keep and dedupe roots.

    Returned states are sorted deterministically. Mirror images are kept as
    distinct equilibria. If ``diagnostics`` is a dict it receives the number
    of dropped seeds, per-equilibrium hit counts and pairs of distinct
    equilibria that lie suspiciously close (a sign of a continuum).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    found, hits, dropped = [], [], 0
    for seed in seeds:
        x = _newton(field, seed, tol, max_iter)
        if x is None:
            dropped += 1
            continue
        for k, y in enumerate(found):
            if _same(field, x, y):
                hits[k] += 1
                break
        else:
            found.append(x)
            hits.append(1)
    order = sorted(range(len(found)), key=lambda k: _sort_key(field, found[k]))
    found = [found[k] for k in order]
    hits = [hits[k] for k in order]
    if diagnostics is not None:
        close = []
        for a in range(len(found)):
            for b in range(a + 1, len(found)):
                scale = 1.0 + np.linalg.norm(found[b])
                if getattr(field, "se2", False):
                    dist = geometry.aligned_distance(found[a].reshape(-1, 2), found[b].reshape(-1, 2))
                else:
                    dist = np.linalg.norm(found[a] - found[b])
                if dist <= 1e-3 * scale:
                    close.append((a, b))
        diagnostics.update(dropped=dropped, hits=hits, near_duplicates=close)
    return [_shaped(field, x) for x in found]


def symmetry_basis(field, x):
    """Orthonormal basis of the directions left after removing symmetry modes."""
    x = _flat(x)
    if not getattr(field, "se2", False):
        return np.eye(x.size), 0
    G = symmetry_generators(x.reshape(-1, 2))
    rank = numerical_rank(G, 1e-9)
    if rank < 3:
        G = G[:, :2]
    return null_space(G.T), rank


def reduced_jacobian(field, x, J=None):
    x = _flat(x)
    if J is None:
        J = _best_jacobian(field, x)
    Q, dims = symmetry_basis(field, x)
    return Q.T @ J @ Q, dims


def classify(field, x, eps_eig=EPS_EIG):
    x = _flat(x)
    J = _best_jacobian(field, x)
    if not np.all(np.isfinite(J)):
        raise NonFinite("Jacobian has non-finite entries")
    Jr, dims = reduced_jacobian(field, x, J)
    ev = np.linalg.eigvals(Jr) if Jr.size else np.zeros(0, dtype=complex)
    ev = ev[np.lexsort((ev.imag, ev.real))]
    re = ev.real
    if np.all(re < -eps_eig):
        stab = Stability.STABLE
    elif np.any(re > eps_eig):
        stab = Stability.UNSTABLE
    else:
        stab = Stability.MARGINAL
    degenerate = bool(np.any(np.abs(re) <= eps_eig))
    residual = float(np.linalg.norm(_flat(field(x))))
    return EquilibriumRecord(_shaped(field, x), ev, dims, stab, None, degenerate, residual)


def is_design(s, state, tol=1e-8):
    """Design membership: edge lengths met (and the exact target under full information)."""
    if isinstance(s, ScalarScenario):
        x = float(_flat(state)[0])
        return any(abs(x - d) <= tol for d in s.design)
    P = np.asarray(state, dtype=float).reshape(-1, 2)
    if np.max(np.abs(global_objective(s, P)), initial=0.0) > tol:
        return False
    if s.obj_mode is ObjectiveMode.FULL_INFORMATION:
        return geometry.congruent(P, s.target_config, tol=max(tol, 1e-6))
    return True


def partition(records, s, tol=1e-8):
    return [dataclasses.replace(
        r, designation=Designation.DESIGN if is_design(s, r.state, tol) else Designation.ANCILLARY)
        for r in records]

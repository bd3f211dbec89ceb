"""Perturbation probes: does a stable equilibrium survive ``x' = f(x) + eps g(x)``?

For formation scenarios the perturbation enters through the scalar controls
``u_ij`` as polynomials in the agent's own observations, so the perturbed
system is still decentralized and SE(2)-equivariant.
"""
from dataclasses import dataclass

import numpy as np

from . import geometry
from .dynamics import ClosedLoop, _eval_poly, monomials
from .equilibria import EPS_EIG, Stability, classify, find_equilibria
from .errors import NotAnEquilibrium


@dataclass(frozen=True)
class PerturbationSpec:
    epsilon: float
    basis_degree: int = 2
    trials: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.basis_degree < 0:
            raise ValueError("basis_degree must be >= 0")


@dataclass
class RobustnessReport:
    trials: int
    survived: int
    max_drift: float

    @property
    def robust(self):
        return self.survived == self.trials

    def to_dict(self):
        return {"trials": self.trials, "survived": self.survived,
                "max_drift": self.max_drift, "robust": self.robust}


class PerturbedField:
    """``f(x) + eps * g(x)`` with ``g`` a polynomial vector field in the state."""

    def __init__(self, base, epsilon, coefficients, exponents):
        self.base = base
        self.epsilon = float(epsilon)
        self.coefficients = np.asarray(coefficients, dtype=float)  # (dim, n_monomials)
        self.exponents = np.asarray(exponents, dtype=float)        # (n_monomials, dim)
        self.dim = self.exponents.shape[1]
        self.se2 = False

    def g(self, x):
        x = np.asarray(x, dtype=float)
        mono = np.prod(x[..., None, :] ** self.exponents, axis=-1)
        return mono @ self.coefficients.T

    def __call__(self, x):
        return self.base(x) + self.epsilon * self.g(x)


def _rng(spec, trial_index):
    return np.random.default_rng([spec.seed, trial_index])


def perturb(field, spec, trial_index):
    rng = _rng(spec, trial_index)
    if isinstance(field, ClosedLoop):
        polys = []
        for k in range(field.m):
            nv = field._nobs(field.tail[k])
            exps = monomials(nv, spec.basis_degree)
            polys.append((rng.standard_normal(len(exps)), exps))
        if field.perturbation is not None:
            raise ValueError("field is already perturbed")
        return ClosedLoop(field.scenario, (spec.epsilon, polys))
    dim = getattr(field, "dim", None)
    if dim is None:
        raise ValueError("generic fields need a 'dim' attribute")
    exps = monomials(dim, spec.basis_degree)
    coeffs = rng.standard_normal((dim, len(exps)))
    return PerturbedField(field, spec.epsilon, coeffs, exps)


def control_perturbation_values(field, x):
    """The added control terms ``g_ij(h_i(x))`` (before scaling by epsilon)."""
    eps, polys = field.perturbation
    P = np.asarray(x, dtype=float).reshape(np.shape(x)[:-1] + (field.n, 2))
    obs = field.observations(P)
    return np.stack([_eval_poly(obs[field.tail[k]], c, e) for k, (c, e) in enumerate(polys)], -1)


def _distance(field, a, b):
    if getattr(field, "se2", False):
        return geometry.aligned_distance(np.reshape(a, (-1, 2)), np.reshape(b, (-1, 2)))
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)))


def linear_drift(field, x_star, spec):
    """Largest first-order displacement ``|J^+ (f_eps - f)(x*)|`` over the trials in ``spec``.

    This is the hyperbolic prediction for how far a perturbation moves the
    equilibrium; ten times it is a scale-aware locality radius.
    """
    from .equilibria import _best_jacobian

    x = np.asarray(x_star, dtype=float).ravel()
    Jp = np.linalg.pinv(_best_jacobian(field, x), rcond=1e-10)
    f0 = np.ravel(field(x))
    return max(float(np.linalg.norm(Jp @ (np.ravel(perturb(field, spec, t)(x)) - f0)))
               for t in range(spec.trials))


def probe(field, x_star, spec, locality_radius=None, eq_tol=1e-8, tol=1e-10, eps_eig=EPS_EIG):
    """Count the trials whose perturbed field keeps a stable equilibrium near ``x_star``."""
    x = np.asarray(x_star, dtype=float).ravel()
    r0 = float(np.linalg.norm(np.ravel(field(x))))
    if r0 > eq_tol * (1.0 + np.linalg.norm(x)):
        raise NotAnEquilibrium(f"|f(x*)| = {r0:.3g}")
    base = classify(field, x, eps_eig)
    if base.stability is Stability.UNSTABLE:
        raise ValueError("probe needs a stable or marginal equilibrium")
    if locality_radius is None:
        locality_radius = 10.0 * spec.epsilon * (1.0 + np.linalg.norm(x))
    offsets = 0.5 * locality_radius * np.vstack([np.eye(x.size), -np.eye(x.size)])
    seeds = [x] + list(x + offsets)

    survived, drift = 0, 0.0
    for t in range(spec.trials):
        pf = perturb(field, spec, t)
        best = None
        for y in find_equilibria(pf, seeds, tol=tol):
            dist = _distance(pf, y, x)
            if dist > locality_radius:
                continue
            if classify(pf, y, eps_eig).stability is Stability.STABLE:
                best = dist if best is None else min(best, dist)
        if best is not None:
            survived += 1
            drift = max(drift, best)
    return RobustnessReport(spec.trials, survived, drift)

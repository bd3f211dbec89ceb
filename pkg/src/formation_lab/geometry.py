"""Planar configurations and the rigid motions acting on them.

A configuration is an ``(n, 2)`` float array; row ``i`` is agent ``i + 1``.
A target configuration ``mu`` is the ``(n - 1, 2)`` array of points 2..n with
point 1 pinned at the origin.
"""
import numpy as np

from .errors import DegenerateInput, IndexOutOfRange

EPS = np.finfo(float).eps


def as_config(points):
    c = np.array(points, dtype=float)
    if c.ndim == 1 and c.size % 2 == 0:
        c = c.reshape(-1, 2)
    if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 1:
        raise ValueError(f"expected an (n, 2) array of points, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("configuration has non-finite coordinates")
    return c


def target_points(mu):
    """Full configuration of a target: the origin followed by ``mu``."""
    mu = np.asarray(mu, dtype=float).reshape(-1, 2)
    return np.vstack([np.zeros((1, 2)), mu])


def to_target(c):
    """Translate so point 1 is at the origin and drop it (rotation kept)."""
    c = as_config(c)
    return c[1:] - c[0]


def rotation(theta):
    ct, st = np.cos(theta), np.sin(theta)
    return np.array([[ct, -st], [st, ct]])


def rigid_motion(c, theta, shift=(0.0, 0.0)):
    return as_config(c) @ rotation(theta).T + np.asarray(shift, dtype=float)


def canonicalize(c):
    """Point 1 to the origin, point 2 onto the positive x-axis."""
    c = as_config(c)
    if c.shape[0] < 2:
        raise DegenerateInput("canonicalize needs at least two points")
    out = c - c[0]
    v = out[1]
    r = np.hypot(v[0], v[1])
    if r == 0.0:
        raise DegenerateInput("points 1 and 2 coincide; rotation is undefined")
    ct, st = v[0] / r, v[1] / r
    # rotate by -angle(v)
    x = ct * out[:, 0] + st * out[:, 1]
    y = -st * out[:, 0] + ct * out[:, 1]
    out = np.column_stack([x, y])
    out[0] = 0.0
    out[1] = (r, 0.0)
    return out


def _edge_index(edges, n):
    e = np.asarray(edges, dtype=int).reshape(-1, 2)
    if e.size and (e.min() < 1 or e.max() > n):
        raise IndexOutOfRange(f"edge endpoint outside 1..{n}")
    return e[:, 0] - 1, e[:, 1] - 1


def delta(c, edges):
    """Half squared edge lengths, one entry per edge, in edge-list order."""
    c = as_config(c)
    i, j = _edge_index(edges, c.shape[0])
    w = c[j] - c[i]
    return 0.5 * np.einsum("kd,kd->k", w, w)


def squared_lengths(c, edges):
    return 2.0 * delta(c, edges)


def diameter(c):
    c = as_config(c)
    diff = c[:, None, :] - c[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijd,ijd->ij", diff, diff))))


def align(a, b, allow_reflection=False):
    """Orthogonal map plus shift that best carries ``a`` onto ``b``.

    Returns ``(a_aligned, R, t)`` with ``a_aligned = a @ R.T + t``.
    """
    a = as_config(a)
    b = as_config(b)
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    A, B = a - ca, b - cb
    U, _, Vt = np.linalg.svd(A.T @ B)
    R = (U @ Vt).T
    if not allow_reflection and np.linalg.det(R) < 0:
        D = np.diag([1.0, -1.0])
        R = (U @ D @ Vt).T
    t = cb - ca @ R.T
    return a @ R.T + t, R, t


def congruent(a, b, allow_reflection=False, tol=1e-6):
    """True iff a rigid motion (optionally with reflection) maps a onto b.

    ``tol`` is relative to the diameter of ``b`` (absolute when ``b`` is a
    single point cluster).
    """
    a = as_config(a)
    b = as_config(b)
    if a.shape != b.shape:
        return False
    scale = diameter(b)
    if scale == 0.0:
        scale = 1.0
    aligned, _, _ = align(a, b, allow_reflection)
    err = np.max(np.linalg.norm(aligned - b, axis=1))
    return bool(err <= tol * scale)


def aligned_distance(a, b, allow_reflection=False):
    """Euclidean distance between ``b`` and the best-aligned copy of ``a``."""
    aligned, _, _ = align(a, b, allow_reflection)
    return float(np.linalg.norm(aligned - as_config(b)))


def is_collinear(c, tol=1e-9):
    c = as_config(c)
    s = np.linalg.svd(c - c.mean(axis=0), compute_uv=False)
    if s.size < 2:
        return True
    return bool(s[1] <= tol * (s[0] + EPS))

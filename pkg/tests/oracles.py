"""Independent reference implementations used only by the tests.

Everything here is written the slow, obvious way so it shares no code path
with the library.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def cayley_menger_volume(vertices) -> float:
    """k-volume of a simplex from pairwise distances alone."""
    V = np.asarray(vertices, dtype=float)
    k = V.shape[0] - 1
    D2 = ((V[:, None, :] - V[None, :, :]) ** 2).sum(-1)
    CM = np.ones((k + 2, k + 2))
    CM[0, 0] = 0.0
    CM[1:, 1:] = D2
    det = np.linalg.det(CM)
    v2 = (-1) ** (k + 1) * det / (2**k * math.factorial(k) ** 2)
    return math.sqrt(max(v2, 0.0))


def dist_to_hull_lstsq(w, base) -> float:
    """Distance from ``w`` to the affine hull of ``base`` by least squares."""
    base = np.asarray(base, dtype=float)
    if len(base) == 1:
        return float(np.linalg.norm(np.asarray(w) - base[0]))
    A = (base[1:] - base[0]).T
    coef, *_ = np.linalg.lstsq(A, np.asarray(w) - base[0], rcond=None)
    return float(np.linalg.norm(A @ coef - (np.asarray(w) - base[0])))


def hmin_naive(vertices) -> float:
    V = np.asarray(vertices, dtype=float)
    return min(dist_to_hull_lstsq(V[i], np.delete(V, i, axis=0)) for i in range(len(V)))


def k1_sq_naive(X) -> float:
    X = np.asarray(X, dtype=float)
    n = len(X) - 2
    vol = cayley_menger_volume(X)
    D = max(np.linalg.norm(a - b) for a, b in itertools.combinations(X, 2))
    if D == 0 or vol <= 1e-12 * D ** (n + 1):
        return 0.0
    return (vol / D ** ((n + 1) * (n + 2) / 2)) ** 2


def k2_sq_naive(X) -> float:
    X = np.asarray(X, dtype=float)
    n = len(X) - 2
    D = max(np.linalg.norm(a - b) for a, b in itertools.combinations(X, 2))
    h = hmin_naive(X)
    if D == 0 or h <= 1e-12 * D:
        return 0.0
    return (h / D ** ((n * (n + 1) + 2) / 2)) ** 2


def tuple_sum(points, weights, f, arity, fixed=None) -> float:
    """Sum of ``f(tuple) * prod(weights)`` over all ordered index tuples."""
    total = []
    for idx in itertools.product(range(len(points)), repeat=arity):
        X = [points[i] for i in idx]
        if fixed is not None:
            X = [fixed] + X
        w = math.prod(weights[i] for i in idx)
        if w:
            total.append(f(np.asarray(X)) * w)
    return math.fsum(total)


def line_search_beta_sq(points, weights, x, r, centered=False, steps=20000) -> float:
    """Scan line angles densely in the plane; optimal offset for each angle."""
    P = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    inside = np.linalg.norm(P - x, axis=1) <= r
    P, w = P[inside], w[inside]
    best = math.inf
    for th in np.linspace(0, math.pi, steps, endpoint=False):
        nrm = np.array([-math.sin(th), math.cos(th)])
        s = P @ nrm
        c = nrm @ x if centered else (w @ s) / w.sum()
        best = min(best, float(w @ (s - c) ** 2))
    return best / r**3

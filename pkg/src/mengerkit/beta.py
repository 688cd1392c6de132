"""Jones beta numbers, centred beta numbers and their multiscale sums.

``beta_p(x, r)^p = inf_L (1/r^n) sum_y w_y (dist(y, L)/r)^p`` over affine
n-planes ``L``, with ``y`` ranging over the measure restricted to ``B(x, r)``.
For ``p = 2`` the infimum is a weighted total least squares problem solved
exactly by an eigendecomposition; other exponents use iteratively
reweighted fitting and are upper bounds.  The centred variant only admits
planes through ``x``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .measure import Ball, DiscreteMeasure, ScaleGrid, restrict

ORTHO_TOL = 1e-10


class InsufficientDataError(ValueError):
    """The ball holds fewer than n+1 positive-weight points or no mass."""


@dataclass(frozen=True)
class AffinePlane:
    base: np.ndarray
    basis: np.ndarray  # (n, m), orthonormal rows

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        if np.abs(b @ b.T - np.eye(b.shape[0])).max() > ORTHO_TOL:
            raise ValueError("plane basis is not orthonormal")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def distances(self, points) -> np.ndarray:
        d = np.atleast_2d(points) - self.base
        resid = d - (d @ self.basis.T) @ self.basis
        return np.linalg.norm(resid, axis=1)

    def to_dict(self) -> dict:
        return {"base": self.base.tolist(), "basis": self.basis.tolist()}


@dataclass(frozen=True)
class BetaFit:
    value: float
    value_sq: float  # value**2 computed without the square root round trip
    plane: AffinePlane


def _ball_data(mu: DiscreteMeasure, x, r: float):
    if not r > 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    nu = restrict(mu, Ball(x, r))
    keep = nu.weights > 0
    pts, w = nu.points[keep], nu.weights[keep]
    if pts.shape[0] < mu.n + 1 or not w.sum() > 0:
        raise InsufficientDataError(
            f"B(x, {r:g}) holds {pts.shape[0]} positive-weight points, need {mu.n + 1}")
    return x, pts, w


def _eig_fit(pts, w, base, n, r):
    d = pts - base
    S = (d * w[:, None]).T @ d
    vals, vecs = np.linalg.eigh(S)
    m = pts.shape[1]
    tail = math.fsum(np.clip(vals[: m - n], 0.0, None))
    sq = tail / r ** (n + 2)
    plane = AffinePlane(base, vecs[:, m - n:][:, ::-1].T)
    return BetaFit(math.sqrt(sq), sq, plane)


def beta2(mu: DiscreteMeasure, x, r: float) -> BetaFit:
    """Exact ``beta_2`` and its minimizing plane (through the weighted centroid)."""
    x, pts, w = _ball_data(mu, x, r)
    centroid = (w[:, None] * pts).sum(axis=0) / w.sum()
    return _eig_fit(pts, w, centroid, mu.n, r)


def centered_beta2(mu: DiscreteMeasure, x, r: float) -> BetaFit:
    """Exact ``beta_2`` over planes through ``x`` (second moment about ``x``)."""
    x, pts, w = _ball_data(mu, x, r)
    return _eig_fit(pts, w, x, mu.n, r)


def plane_objective(plane: AffinePlane, pts, w, n: int, r: float, p: float) -> float:
    """``(1/r^n) sum w (dist/r)^p``, i.e. ``beta_p^p`` for this plane."""
    return math.fsum(w * (plane.distances(pts) / r) ** p) / r**n


def _beta_p_fit(mu, x, r, p, centered) -> BetaFit:
    if p < 1:
        raise ValueError("p must be at least 1")
    fit = centered_beta2(mu, x, r) if centered else beta2(mu, x, r)
    if p == 2:
        return fit
    x, pts, w = _ball_data(mu, x, r)
    n = mu.n
    best_plane = fit.plane
    best = prev = plane_objective(best_plane, pts, w, n, r, p)
    plane = best_plane
    for _ in range(100):
        d = plane.distances(pts)
        # IRLS: minimise sum w d^p via weights w d^(p-2), floored to stay finite
        floor = max(1e-12 * r, 1e-300)
        ww = w * np.maximum(d, floor) ** (p - 2)
        if centered:
            base = x
        else:
            base = (ww[:, None] * pts).sum(axis=0) / ww.sum()
        plane = _eig_fit(pts, ww, base, n, r).plane
        obj = plane_objective(plane, pts, w, n, r, p)
        if obj < best:
            best, best_plane = obj, plane
        if abs(prev - obj) < 1e-10:
            break
        prev = obj
    return BetaFit(best ** (1.0 / p), best ** (2.0 / p), best_plane)


def beta_p(mu: DiscreteMeasure, x, r: float, p: float, centered: bool = False) -> float:
    """``beta_p`` (or the centred version).  For ``p != 2`` this is an upper
    bound found by local search seeded at the ``p = 2`` plane."""
    return _beta_p_fit(mu, x, r, p, centered).value


# --- multiscale sums ----------------------------------------------------------

@dataclass
class BetaProfile:
    center: np.ndarray
    grid: ScaleGrid
    values: np.ndarray  # nan where flagged
    flagged: np.ndarray  # bool
    multiscale_sum: float
    covered_scales: int
    centered: bool = False
    p: float = 2.0

    @property
    def flagged_count(self) -> int:
        return int(self.flagged.sum())

    def contributions(self) -> np.ndarray:
        """Per-scale terms ``ln(1/sigma) beta_j^2`` (0 at flagged scales)."""
        v = np.where(self.flagged, 0.0, self.values)
        return self.grid.log_weight * v**2

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "grid": self.grid.to_dict(),
            "radii": self.grid.radii.tolist(),
            "values": [None if f else float(v) for v, f in zip(self.values, self.flagged)],
            "flags": [bool(f) for f in self.flagged],
            "centered": self.centered,
            "p": self.p,
            "sum": self.multiscale_sum,
            "covered_scales": self.covered_scales,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["j", "r_j", "beta", "beta_sq", "flagged"])
        for j, (r, v, f) in enumerate(zip(self.grid.radii, self.values, self.flagged)):
            if f:
                out.writerow([j, repr(float(r)), "", "", 1])
            else:
                out.writerow([j, repr(float(r)), repr(float(v)), repr(float(v) ** 2), 0])
        return buf.getvalue()


def multiscale_beta_sum(mu: DiscreteMeasure, x, grid: ScaleGrid, centered: bool = True,
                        p: float = 2.0) -> BetaProfile:
    """Left-endpoint discretisation ``ln(1/sigma) sum_j beta(x, r_j)^2`` of the
    ``dr/r`` integral, skipping and flagging sparse scales."""
    x = np.asarray(x, dtype=float)
    values = np.full(grid.count, np.nan)
    flagged = np.zeros(grid.count, dtype=bool)
    sq = []
    for j, r in enumerate(grid.radii):
        try:
            fit = _beta_p_fit(mu, x, r, p, centered)
        except InsufficientDataError:
            flagged[j] = True
            continue
        values[j] = fit.value
        sq.append(fit.value_sq)
    total = grid.log_weight * math.fsum(sq)
    return BetaProfile(x, grid, values, flagged, total, len(sq), centered, p)


@dataclass
class CarlesonReport:
    value: float
    ball: Ball
    bound: float | None  # C * R^n when a constant C was supplied
    points: int

    @property
    def holds(self) -> bool | None:
        return None if self.bound is None else self.value <= self.bound

    def to_dict(self) -> dict:
        return {"value": self.value, "ball": self.ball.to_dict(), "bound": self.bound,
                "points": self.points}


def carleson_sum(mu: DiscreteMeasure, ball: Ball, grid: ScaleGrid, p: float = 2.0,
                 C: float | None = None) -> CarlesonReport:
    """``sum_{y in B} w_y * multiscale_beta_sum(mu, y)`` with uncentred betas."""
    idx = np.flatnonzero(ball.contains(mu.points) & mu.support_mask()) if len(mu) else []
    terms = [mu.weights[i] * multiscale_beta_sum(mu, mu.points[i], grid, False, p).multiscale_sum
             for i in idx]
    bound = None if C is None else C * ball.radius**mu.n
    return CarlesonReport(math.fsum(terms), ball, bound, len(idx))


# --- brute-force oracle ---------------------------------------------------------

def _best_offset(Z, w, p, fixed):
    """Minimise ``sum w |Z - c|^p`` over offsets ``c`` in the normal space."""
    if fixed is not None:
        return fixed
    if p == 2:
        return (w[:, None] * Z).sum(axis=0) / w.sum()
    f = lambda c: float(np.sum(w * np.linalg.norm(Z - c, axis=1) ** p))
    if Z.shape[1] == 1:
        z = Z[:, 0]
        res = minimize_scalar(lambda c: f(np.array([c])), bounds=(z.min(), z.max()),
                              method="bounded", options={"xatol": 1e-12})
        return np.array([res.x])
    c0 = (w[:, None] * Z).sum(axis=0) / w.sum()
    res = minimize(f, c0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
    return res.x if res.fun <= f(c0) else c0


def _normal_objective(N, pts, w, x, n, r, p, centered):
    """Objective for the plane whose normal space has orthonormal rows ``N``."""
    Z = pts @ N.T
    c = _best_offset(Z, w, p, (x @ N.T) if centered else None)
    d = np.linalg.norm(Z - c, axis=1)
    return math.fsum(w * (d / r) ** p) / r**n


def _normals_2d(theta):
    return np.array([[-math.sin(theta), math.cos(theta)]])


def _frame_3d(u):
    """Orthonormal pair spanning the complement of unit vector ``u``."""
    a = np.array([1.0, 0, 0]) if abs(u[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(u, a)
    e1 /= np.linalg.norm(e1)
    return np.stack([e1, np.cross(u, e1)])


def _sphere_dir(phi, psi):
    return np.array([math.sin(phi) * math.cos(psi), math.sin(phi) * math.sin(psi), math.cos(phi)])


def brute_force_beta(mu: DiscreteMeasure, x, r: float, p: float = 2.0, centered: bool = False,
                     resolution: int = 4096) -> float:
    """Grid search over plane orientations with optimal offsets, polished locally.

    Every returned value is the objective of an explicit plane, hence an
    upper bound on the true infimum.  Supports ``(m, n) = (2, 1)`` with
    ``resolution`` angles in ``[0, pi)``, and ``m = 3`` with a latitude/longitude
    grid of the upper hemisphere (normals for n = 2, directions for n = 1).
    """
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    m, n = mu.m, mu.n
    if not ((m == 2 and n == 1) or (m == 3 and n <= 2)):
        raise ValueError(f"unsupported (m, n) = ({m}, {n})")
    x, pts, w = _ball_data(mu, x, r)
    obj = lambda N: _normal_objective(N, pts, w, x, n, r, p, centered)

    if m == 2:
        thetas = math.pi * np.arange(resolution) / resolution
        vals = np.array([obj(_normals_2d(t)) for t in thetas])
        best = float(vals.min())
        step = math.pi / resolution
        # polish every discrete local minimum (cyclic neighbourhood)
        local = np.flatnonzero((vals <= np.roll(vals, 1)) & (vals <= np.roll(vals, -1)))
        for k in local:
            res = minimize_scalar(lambda t: obj(_normals_2d(t)),
                                  bounds=(thetas[k] - step, thetas[k] + step),
                                  method="bounded", options={"xatol": 1e-13})
            best = min(best, float(res.fun))
        return best ** (1.0 / p)

    L = max(resolution // 16, 4)
    dirs, vals = [], []
    for a in range(L + 1):
        phi = 0.5 * math.pi * a / L
        count = 1 if a == 0 else 4 * L
        for b in range(count):
            psi = 2 * math.pi * b / count
            dirs.append((phi, psi))
    to_normals = (lambda u: u[None, :]) if n == 2 else _frame_3d
    vals = np.array([obj(to_normals(_sphere_dir(*d))) for d in dirs])
    best = float(vals.min())
    for k in np.argsort(vals, kind="stable")[:8]:
        res = minimize(lambda ang: obj(to_normals(_sphere_dir(*ang))), np.array(dirs[k]),
                       method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-16})
        best = min(best, float(res.fun))
    return best ** (1.0 / p)

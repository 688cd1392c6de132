"""Exact and Monte Carlo Menger curvature sums of discrete measures.

Every integral against a product measure ``mu^k`` becomes a weighted sum over
ordered index tuples *with repetition*.  Tuples with a repeated index
describe coincident points and contribute 0 for K1 and K2, so the exact
routines skip them for those integrands; custom integrands see every tuple.

Exact sums are enumerated in fixed-size chunks and combined in chunk order,
so results do not depend on the number of worker threads.  Monte Carlo
chunk ``s`` draws from ``default_rng(seed ^ s)`` for the same reason.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .measure import Ball, DiscreteMeasure, mass, restrict, rescale, support_diameter
from .simplex import IntegrandKind, integrand_values, min_pairwise_batch, well_scaled_batch

ENUMERATION_BUDGET = 10**8
CHUNK = 1 << 15
MC_CHUNK = 1 << 13


class BudgetExceededError(ValueError):
    pass


class ZeroMassError(ValueError):
    pass


@dataclass
class CurvatureReport:
    value: float
    method: str
    samples: int
    stderr: float
    seed: int
    integrand: str
    region: dict = field(default_factory=lambda: {"type": "whole"})

    def __post_init__(self):
        if self.method not in ("exact", "monte_carlo"):
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class PointwiseRegion:
    """Tuples ``(x, x_1, ..., x_{n+1})`` with the free points in ``B(x, r)``."""

    x: np.ndarray
    r: float


def _is_geometric(kind: IntegrandKind) -> bool:
    return kind.func is None


def _chunk_sum(points, weights, kind, arity, start, stop, fixed, accept, skip_repeats) -> float:
    N = points.shape[0]
    flat = np.arange(start, stop, dtype=np.int64)
    idx = np.stack(np.unravel_index(flat, (N,) * arity), axis=1)
    w = np.prod(weights[idx], axis=1)
    keep = w > 0
    if skip_repeats and arity > 1:
        s = np.sort(idx, axis=1)
        keep &= np.all(s[:, 1:] != s[:, :-1], axis=1)
    if not keep.any():
        return 0.0
    idx, w = idx[keep], w[keep]
    X = points[idx]
    if fixed is not None:
        X = np.concatenate([np.broadcast_to(fixed, (X.shape[0], 1, X.shape[2])), X], axis=1)
    if accept is not None:
        ok = accept(X)
        if not ok.any():
            return 0.0
        X, w = X[ok], w[ok]
    return math.fsum(integrand_values(kind, X) * w)


def _enumerate(points, weights, kind, arity, fixed=None, accept=None, threads=1) -> float:
    N = points.shape[0]
    if N == 0:
        return 0.0
    total = N**arity
    if total > ENUMERATION_BUDGET:
        raise BudgetExceededError(
            f"{N}^{arity} = {total} tuples exceeds the budget of {ENUMERATION_BUDGET}; "
            "use monte_carlo_curvature instead"
        )
    fixed = None if fixed is None else np.asarray(fixed, dtype=float)[None, :]
    skip = _is_geometric(kind)
    bounds = [(s, min(s + CHUNK, total)) for s in range(0, total, CHUNK)]

    def work(b):
        return _chunk_sum(points, weights, kind, arity, b[0], b[1], fixed, accept, skip)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    return math.fsum(parts)


def _exact_report(value, kind, region) -> CurvatureReport:
    return CurvatureReport(float(value), "exact", 0, 0.0, 0, str(kind), region)


def _ball_region(ball: Ball | None) -> dict:
    return {"type": "whole"} if ball is None else {"type": "ball", **ball.to_dict()}


def integral_curvature_exact(mu: DiscreteMeasure, kind: IntegrandKind, region: Ball | None = None,
                             threads: int = 1) -> CurvatureReport:
    """``M_{K^p}(mu)`` (or of ``mu`` restricted to ``region``) by full enumeration."""
    nu = mu if region is None else restrict(mu, region)
    value = _enumerate(nu.points, nu.weights, kind, mu.n + 2, threads=threads)
    return _exact_report(value, kind, _ball_region(region))


def pointwise_curvature(x, mu: DiscreteMeasure, kind: IntegrandKind, r: float,
                        threads: int = 1) -> CurvatureReport:
    """``curv(x, r)``: sum of ``K^p(x, x_1, ..., x_{n+1})`` over ``B(x, r)^{n+1}``."""
    x = np.asarray(x, dtype=float)
    nu = restrict(mu, Ball(x, r))
    value = _enumerate(nu.points, nu.weights, kind, mu.n + 1, fixed=x, threads=threads)
    return _exact_report(value, kind, {"type": "pointwise", "x": x.tolist(), "r": float(r)})


def restricted_curvature(mu: DiscreteMeasure, ball: Ball, lam: float, kind: IntegrandKind,
                         threads: int = 1) -> CurvatureReport:
    """Curvature of ``mu|B`` carried by well-scaled tuples (``min/diam >= lam``)."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    nu = restrict(mu, ball)
    value = _enumerate(nu.points, nu.weights, kind, mu.n + 2,
                       accept=lambda X: well_scaled_batch(X, lam), threads=threads)
    return _exact_report(value, kind, {**_ball_region(ball), "lambda": lam})


def localized_curvature(mu: DiscreteMeasure, x, t: float, k: float, kind: IntegrandKind,
                        threads: int = 1) -> CurvatureReport:
    """Curvature over tuples in ``B(x, k t)^{n+2}`` whose pairwise gaps are all ``>= t/k``."""
    if not k > 2:
        raise ValueError("k must exceed 2")
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    nu = restrict(mu, Ball(x, k * t))
    gap = t / k
    value = _enumerate(nu.points, nu.weights, kind, mu.n + 2,
                       accept=lambda X: min_pairwise_batch(X) >= gap, threads=threads)
    return _exact_report(value, kind, {"type": "localized", "x": x.tolist(), "t": t, "k": k})


# --- Monte Carlo --------------------------------------------------------------

def _mc_chunk(points, prob, kind, arity, count, seed, fixed):
    rng = np.random.default_rng(seed)
    idx = rng.choice(points.shape[0], size=(count, arity), p=prob)
    X = points[idx]
    if fixed is not None:
        X = np.concatenate([np.broadcast_to(fixed, (count, 1, X.shape[2])), X], axis=1)
    vals = integrand_values(kind, X)
    mean = float(vals.mean())
    return count, mean, float(((vals - mean) ** 2).sum())


def monte_carlo_curvature(mu: DiscreteMeasure, kind: IntegrandKind, region=None, samples: int = 100_000,
                          seed: int = 0, threads: int = 1) -> CurvatureReport:
    """Unbiased estimate of a curvature sum by sampling tuples from the measure.

    ``region`` is ``None`` (whole space), a :class:`Ball` (``mu`` restricted to
    it) or a :class:`PointwiseRegion`.  Tuples are drawn i.i.d. from the
    normalised weights; the mean of ``K^p`` is multiplied by ``mass**arity``.
    ``stderr`` uses the unbiased sample variance.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    fixed = None
    if isinstance(region, PointwiseRegion):
        x = np.asarray(region.x, dtype=float)
        nu = restrict(mu, Ball(x, region.r))
        arity = mu.n + 1
        fixed = x[None, :]
        desc = {"type": "pointwise", "x": x.tolist(), "r": float(region.r)}
    else:
        nu = mu if region is None else restrict(mu, region)
        arity = mu.n + 2
        desc = _ball_region(region)
    W = mass(nu)
    if not W > 0:
        raise ZeroMassError("region carries no mass")
    prob = nu.weights / W
    jobs = [(s, min(MC_CHUNK, samples - s * MC_CHUNK)) for s in range(math.ceil(samples / MC_CHUNK))]

    def work(job):
        s, count = job
        return _mc_chunk(nu.points, prob, kind, arity, count, seed ^ s, fixed)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(j) for j in jobs]
    # Chan et al. pairwise merge of (count, mean, M2), in chunk order.
    n_tot, mean, m2 = 0, 0.0, 0.0
    for c, mu_c, m2_c in parts:
        delta = mu_c - mean
        n_new = n_tot + c
        mean += delta * c / n_new
        m2 += m2_c + delta * delta * n_tot * c / n_new
        n_tot = n_new
    scale = W**arity
    var = m2 / (n_tot - 1)
    return CurvatureReport(mean * scale, "monte_carlo", samples, math.sqrt(var / n_tot) * scale,
                           seed, str(kind), desc)


# --- scaling laws -------------------------------------------------------------

def _rel_err(a: float, b: float) -> float:
    den = max(abs(a), abs(b))
    return 0.0 if den == 0 else abs(a - b) / den


@dataclass
class ScalingReport:
    direct: float
    closed_form: float
    factor: float
    s1_rel_error: float
    s2_lhs: float
    s2_rhs: float
    s2_rel_error: float

    def to_dict(self) -> dict:
        return asdict(self)


def transform_measure(mu: DiscreteMeasure, x, a: float, lam: float) -> DiscreteMeasure:
    """``nu = lam * h_# mu`` for ``h(y) = a y + x``, i.e. ``nu(A) = lam mu((A - x)/a)``."""
    return DiscreteMeasure(a * mu.points + np.asarray(x, dtype=float), lam * mu.weights, mu.n, mu.m)


def scaling_check(mu: DiscreteMeasure, x, r: float, a: float, lam: float, kind: IntegrandKind) -> ScalingReport:
    """Compare both scaling laws of the integral curvature.

    Dilation/reweighting: ``M(nu) = lam^{n+2} a^{-n(n+1)} M(mu)`` with ``nu``
    from :func:`transform_measure`.  Blow-up: ``M(mu_{x,r}|B(0,1)) =
    M(mu|B(x,r)) / r^n``.
    """
    n = mu.n
    base = integral_curvature_exact(mu, kind).value
    direct = integral_curvature_exact(transform_measure(mu, x, a, lam), kind).value
    factor = lam ** (n + 2) * a ** (-n * (n + 1))
    closed = factor * base
    x = np.asarray(x, dtype=float)
    blown = restrict(rescale(mu, x, r), Ball(np.zeros(mu.m), 1.0))
    lhs = integral_curvature_exact(blown, kind).value
    rhs = integral_curvature_exact(restrict(mu, Ball(x, r)), kind).value / r**n
    return ScalingReport(direct, closed, factor, _rel_err(direct, closed), lhs, rhs, _rel_err(lhs, rhs))


# --- curvature bins -----------------------------------------------------------

@dataclass
class CurvatureBins:
    indices: np.ndarray  # support point indices, ascending
    values: np.ndarray  # curv(x_i, r) for each of them
    bins: dict  # j -> array of point indices with floor(curv) == j
    masses: dict  # j -> total weight of bin j

    def total_mass(self) -> float:
        return math.fsum(self.masses.values())


def curvature_bins(mu: DiscreteMeasure, kind: IntegrandKind, r: float, threads: int = 1) -> CurvatureBins:
    """Partition the support by ``j = floor(curv(x, r))``."""
    idx = np.flatnonzero(mu.support_mask())
    values = np.array([pointwise_curvature(mu.points[i], mu, kind, r, threads).value for i in idx])
    labels = np.floor(values).astype(np.int64)
    bins, masses = {}, {}
    for j in np.unique(labels):
        members = idx[labels == j]
        bins[int(j)] = members
        masses[int(j)] = math.fsum(mu.weights[members])
    return CurvatureBins(idx, values, bins, masses)


def covering_radius(mu: DiscreteMeasure) -> float:
    """Radius such that ``B(x, r)`` contains the whole support for any support point ``x``."""
    return max(support_diameter(mu), 1e-300) * (1 + 1e-12)

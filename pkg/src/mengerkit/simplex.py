"""Simplex geometry and the Menger-type integrands K1, K2.

Most functions come in two flavours: a scalar one taking a single
``(k, m)`` vertex array and a ``*_batch`` one taking ``(B, k, m)`` stacks,
which is what the curvature sums use.

Affine dependence is decided from singular values of the edge matrix: any
singular value below ``RANK_TOL`` times the largest one counts as zero.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

RANK_TOL = 1e-10
MAX_SYMMETRIZE_ARITY = 8


class DegenerateSimplexError(ValueError):
    pass


class SymmetrizationCostError(ValueError):
    pass


def _batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError("expected a (k, m) or (B, k, m) vertex array")
    return X


# --- volumes, distances, heights --------------------------------------------

def simplex_volume_batch(X) -> np.ndarray:
    """k-dimensional volume of each hull, ``sqrt(det(G^T G)) / k!``.

    Evaluated as the product of singular values of the edge matrix; tuples
    whose numerical rank is below k get volume 0.
    """
    X = _batch(X)
    k = X.shape[1] - 1
    if k < 1:
        return np.zeros(X.shape[0])
    if k > X.shape[2]:
        return np.zeros(X.shape[0])
    E = X[:, 1:, :] - X[:, :1, :]
    s = np.linalg.svd(E, compute_uv=False)
    smax = s[:, 0]
    vol = np.prod(s, axis=1) / math.factorial(k)
    degenerate = (smax == 0) | (s[:, -1] <= RANK_TOL * smax)
    vol[degenerate] = 0.0
    return vol


def simplex_volume(vertices) -> float:
    return float(simplex_volume_batch(vertices)[0])


def _pairwise(X: np.ndarray) -> np.ndarray:
    diff = X[:, :, None, :] - X[:, None, :, :]
    return np.sqrt(np.einsum("bijm,bijm->bij", diff, diff))


def diam_batch(X) -> np.ndarray:
    X = _batch(X)
    return _pairwise(X).max(axis=(1, 2))


def min_pairwise_batch(X) -> np.ndarray:
    X = _batch(X)
    k = X.shape[1]
    if k < 2:
        raise ValueError("need at least two vertices")
    iu = np.triu_indices(k, 1)
    return _pairwise(X)[:, iu[0], iu[1]].min(axis=1)


def diam(vertices) -> float:
    return float(diam_batch(vertices)[0])


def min_pairwise(vertices) -> float:
    return float(min_pairwise_batch(vertices)[0])


def affine_distance_batch(w, base) -> np.ndarray:
    """Distance from each ``w[b]`` to ``aff(base[b])``.

    A rank-deficient base is handled by projecting onto the affine hull it
    actually spans (lower-dimensional), so no error is raised here.
    """
    base = _batch(base)
    w = np.asarray(w, dtype=float).reshape(base.shape[0], base.shape[2])
    d = w - base[:, 0, :]
    if base.shape[1] == 1:
        return np.linalg.norm(d, axis=1)
    E = base[:, 1:, :] - base[:, :1, :]
    _, s, Vt = np.linalg.svd(E, full_matrices=False)
    keep = s > RANK_TOL * s[:, :1]
    keep &= s > 0
    coef = np.einsum("bkm,bm->bk", Vt, d) * keep
    resid = d - np.einsum("bk,bkm->bm", coef, Vt)
    return np.linalg.norm(resid, axis=1)


def dist_to_affine(w, base) -> float:
    """Distance from ``w`` to the affine hull of ``base`` (must be non-degenerate)."""
    base = np.asarray(base, dtype=float)
    if base.shape[0] > 1 and simplex_volume(base) == 0.0:
        raise DegenerateSimplexError("degenerate affine hull")
    return float(affine_distance_batch(np.asarray(w, dtype=float)[None], base[None])[0])


def h_min_batch(X) -> np.ndarray:
    """Minimum over vertices of the distance to the affine hull of the others."""
    X = _batch(X)
    k = X.shape[1]
    if k < 2:
        raise ValueError("need at least two vertices")
    out = np.full(X.shape[0], np.inf)
    for i in range(k):
        others = np.delete(X, i, axis=1)
        out = np.minimum(out, affine_distance_batch(X[:, i, :], others))
    return out


def h_min(vertices) -> float:
    return float(h_min_batch(vertices)[0])


def well_scaled(X, lam: float) -> bool:
    """True iff ``min_pairwise(X) / diam(X) >= lam`` (False when diam is 0)."""
    D = diam(X)
    return bool(D > 0 and min_pairwise(X) / D >= lam)


def well_scaled_batch(X, lam: float) -> np.ndarray:
    X = _batch(X)
    D = diam_batch(X)
    mp = min_pairwise_batch(X)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (D > 0) & (mp >= lam * D)


# --- integrands -------------------------------------------------------------

@dataclass(frozen=True)
class IntegrandKind:
    """Which Menger-type integrand to evaluate, raised to the power ``p``.

    ``tag`` is ``"K1"`` or ``"K2"``; for anything else supply ``func`` mapping a
    ``(B, n+2, m)`` stack to the values of ``K**p``.
    """

    tag: str = "K1"
    p: float = 2.0
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError("exponent p must be >= 1")
        if self.tag not in ("K1", "K2") and self.func is None:
            raise ValueError(f"unknown integrand tag {self.tag!r}")

    @classmethod
    def parse(cls, tag: str, p: float = 2.0) -> "IntegrandKind":
        if tag not in ("K1", "K2"):
            raise ValueError(f"integrand must be 'K1' or 'K2', got {tag!r}")
        return cls(tag, float(p))

    def __call__(self, X) -> np.ndarray:
        return integrand_values(self, X)

    def __str__(self) -> str:
        return self.tag if self.p == 2 else f"{self.tag}^{self.p:g}"


K1 = IntegrandKind("K1")
K2 = IntegrandKind("K2")


def integrand_values(kind: IntegrandKind, X) -> np.ndarray:
    """``K**p`` for each tuple of a ``(B, n+2, m)`` stack.

    Tuples with zero diameter or lying in an n-plane evaluate to 0.
    """
    X = _batch(X)
    if kind.func is not None:
        return np.asarray(kind.func(X), dtype=float)
    n = X.shape[1] - 2
    if n < 1:
        raise ValueError("integrands need n + 2 >= 3 points")
    vol = simplex_volume_batch(X)
    D = diam_batch(X)
    live = (vol > 0) & (D > 0)
    out = np.zeros(X.shape[0])
    if not live.any():
        return out
    if kind.tag == "K1":
        base = vol[live] / D[live] ** ((n + 1) * (n + 2) / 2)
    else:
        base = h_min_batch(X[live]) / D[live] ** ((n * (n + 1) + 2) / 2)
    out[live] = base**kind.p
    return out


def evaluate_integrand(kind: IntegrandKind, X) -> float:
    return float(integrand_values(kind, X)[0])


def symmetrize(kind: IntegrandKind, n: int | None = None) -> IntegrandKind:
    """Average ``kind`` over all orderings of its arguments.

    Exhaustive over the ``(n+2)!`` permutations; arities above 8 are refused.
    """
    if n is not None and n + 2 > MAX_SYMMETRIZE_ARITY:
        raise SymmetrizationCostError(
            f"symmetrizing {n + 2} arguments costs {math.factorial(n + 2)} evaluations per tuple"
        )

    def func(X):
        X = _batch(X)
        k = X.shape[1]
        if k > MAX_SYMMETRIZE_ARITY:
            raise SymmetrizationCostError(f"arity {k} exceeds the cap of {MAX_SYMMETRIZE_ARITY}")
        total = np.zeros(X.shape[0])
        count = 0
        for perm in itertools.permutations(range(k)):
            total += integrand_values(kind, X[:, list(perm), :])
            count += 1
        return total / count

    return IntegrandKind(f"sym({kind.tag})", kind.p, func)


# --- proper-integrand verification ------------------------------------------

def quoted_constants(n: int) -> tuple[float, float]:
    """(c, ell) for K1 exactly as quoted alongside the K1 example:
    ``c = (n * n!)**2``, ``ell = (n+2)(n+1)/2 + 2n``."""
    return float((n * math.factorial(n)) ** 2), (n + 2) * (n + 1) / 2 + 2 * n


def derived_constants(tag: str, n: int) -> tuple[float, float]:
    """(c, ell) making the distance bound provable for K1/K2 with p = 2.

    K1: ``d = (n+1) vol_{n+1}(S_w) / vol_n(S)`` with ``vol_n(S) >= (t/C)^n / n!``
    and ``diam <= 2Ct`` gives ``c = ((n+1)!)^2 2^((n+1)(n+2))``,
    ``ell = 2n + (n+1)(n+2)``.
    K2: every height of ``S_w`` is at least ``d / (2C^2)^n``, giving
    ``c = 2^(n^2 + 3n + 2)``, ``ell = n^2 + 5n + 2``.
    """
    if tag == "K1":
        return float(math.factorial(n + 1) ** 2 * 2 ** ((n + 1) * (n + 2))), float(2 * n + (n + 1) * (n + 2))
    if tag == "K2":
        return float(2 ** (n * n + 3 * n + 2)), float(n * n + 5 * n + 2)
    raise ValueError(f"no derived constants for integrand {tag!r}")


def random_ball_points(rng: np.random.Generator, count: int, center, radius: float) -> np.ndarray:
    """``count`` points uniform in the closed ball ``B(center, radius)``."""
    center = np.asarray(center, dtype=float)
    m = center.shape[0]
    g = rng.standard_normal((count, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = radius * rng.random(count) ** (1.0 / m)
    return center + g * rad[:, None]


@dataclass
class ProperSimplexSample:
    x: np.ndarray
    t: float
    C: float
    simplex: np.ndarray  # (n+1, m), an (n, t/C)-simplex inside B(x, Ct)
    w: np.ndarray


def random_proper_simplex(rng: np.random.Generator, n: int, m: int, C_range=(1.0, 4.0),
                          batch: int = 64, max_batches: int = 64) -> ProperSimplexSample:
    """Rejection-sample an (n, t/C)-simplex inside ``B(x, Ct)`` and a witness
    ``w`` in the same ball.  ``t`` is log-uniform in [0.1, 10]."""
    while True:
        t = float(10 ** rng.uniform(-1, 1))
        C = float(rng.uniform(*C_range))
        x = rng.standard_normal(m) * t
        for _ in range(max_batches):
            cand = random_ball_points(rng, batch * (n + 1), x, C * t).reshape(batch, n + 1, m)
            ok = np.flatnonzero(h_min_batch(cand) >= t / C)
            if ok.size:
                S = cand[ok[0]]
                w = random_ball_points(rng, 1, x, C * t)[0]
                return ProperSimplexSample(x, t, C, S, w)


@dataclass
class ProperIntegrandReport:
    integrand: str
    n: int
    m: int
    trials: int
    constants: tuple | None
    violations: dict = field(default_factory=lambda: {"distance_bound": [], "homogeneity": [], "translation": []})
    worst_ratio: float = 0.0  # max of lhs / rhs in the distance bound

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def counts(self) -> dict:
        return {k: len(v) for k, v in self.violations.items()}

    def to_dict(self) -> dict:
        return {
            "integrand": self.integrand,
            "n": self.n,
            "m": self.m,
            "trials": self.trials,
            "constants": list(self.constants) if self.constants else None,
            "violation_counts": self.counts(),
            "worst_distance_ratio": self.worst_ratio,
            "first_witnesses": {k: v[:3] for k, v in self.violations.items()},
        }


def _rel_close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def proper_integrand_check(kind: IntegrandKind, n: int, m: int, trials: int = 1000, seed: int = 0,
                           constants="derived", rtol: float = 1e-9,
                           C_range=(1.0, 4.0)) -> ProperIntegrandReport:
    """Randomised check of the distance bound, homogeneity and translation
    invariance that a (mu, p)-proper integrand must satisfy.

    ``constants`` is ``"derived"`` (provable values, see :func:`derived_constants`),
    ``"quoted"`` (the published K1 values), an explicit ``(c, ell)`` pair, or
    ``None`` to skip the distance bound.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if constants == "derived":
        constants = derived_constants(kind.tag, n) if kind.tag in ("K1", "K2") else None
    elif constants == "quoted":
        constants = quoted_constants(n)
    rng = np.random.default_rng(seed)
    report = ProperIntegrandReport(str(kind), n, m, trials, constants)
    p = kind.p
    for trial in range(trials):
        s = random_proper_simplex(rng, n, m, C_range)
        X = np.vstack([s.simplex, s.w])
        val = evaluate_integrand(kind, X)
        witness = {"trial": trial, "tuple": X.tolist(), "t": s.t, "C": s.C}

        if constants is not None:
            c, ell = constants
            lhs = (affine_distance_batch(s.w[None], s.simplex[None])[0] / s.t) ** p
            rhs = c * s.C**ell * s.t ** (n * (n + 1)) * val
            if lhs > 0:
                ratio = lhs / rhs if rhs > 0 else math.inf
                report.worst_ratio = max(report.worst_ratio, ratio)
                if lhs > rhs * (1 + rtol):
                    report.violations["distance_bound"].append({**witness, "lhs": lhs, "rhs": rhs})

        lam = float(10 ** rng.uniform(-1, 1))
        scaled = lam ** (n * (n + 1)) * evaluate_integrand(kind, lam * X)
        if not _rel_close(scaled, val, rtol):
            report.violations["homogeneity"].append({**witness, "lambda": lam, "value": val, "scaled": scaled})

        b = rng.standard_normal(m) * 5.0
        moved = evaluate_integrand(kind, X + b)
        if not _rel_close(moved, val, rtol):
            report.violations["translation"].append({**witness, "shift": b.tolist(), "value": val, "moved": moved})
    return report

"""Per-point comparison tables and the rectifiable-versus-fractal experiment."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .beta import multiscale_beta_sum
from .curvature import BudgetExceededError, PointwiseRegion, monte_carlo_curvature, pointwise_curvature
from .generators import GeneratorSpec, generate
from .measure import DiscreteMeasure, ScaleGrid
from .simplex import IntegrandKind


def sample_indices(mu: DiscreteMeasure, count: int) -> np.ndarray:
    """``count`` support indices evenly spread through the point order."""
    support = np.flatnonzero(mu.support_mask())
    if count >= support.size:
        return support
    pick = np.linspace(0, support.size - 1, count).round().astype(int)
    return support[np.unique(pick)]


def curv_at(mu: DiscreteMeasure, x, kind: IntegrandKind, r: float, samples: int, seed: int, threads: int = 1):
    """Exact pointwise curvature, falling back to Monte Carlo over budget."""
    try:
        return pointwise_curvature(x, mu, kind, r, threads)
    except BudgetExceededError:
        return monte_carlo_curvature(mu, kind, PointwiseRegion(np.asarray(x, dtype=float), r), samples, seed, threads)


def _ratio(a: float, b: float):
    if b > 0:
        return a / b
    return 0.0 if a == 0 else None


@dataclass
class CompareRow:
    index: int
    x: list
    beta_sum: float
    covered_scales: int
    curv_k1: float
    curv_k2: float
    method: str
    ratio_k1: float | None
    ratio_k2: float | None

    @property
    def dominated(self) -> bool:
        return self.curv_k1 <= self.curv_k2


def compare_table(mu: DiscreteMeasure, grid: ScaleGrid, indices, p: float = 2.0, samples: int = 100_000,
                  seed: int = 0, threads: int = 1) -> list[CompareRow]:
    """Centred multiscale beta sum and ``curv(x, R)`` for K1 and K2 at each point.

    Monte Carlo fallbacks use the same seed for both integrands, so the two
    estimates average the same tuples and the K1 <= K2 ordering survives.
    """
    k1, k2 = IntegrandKind("K1", p), IntegrandKind("K2", p)
    R = grid.top_radius

    def row(i):
        x = mu.points[i]
        prof = multiscale_beta_sum(mu, x, grid, centered=True)
        c1 = curv_at(mu, x, k1, R, samples, seed)
        c2 = curv_at(mu, x, k2, R, samples, seed)
        return CompareRow(int(i), x.tolist(), prof.multiscale_sum, prof.covered_scales, c1.value, c2.value,
                          c1.method, _ratio(prof.multiscale_sum, c1.value), _ratio(prof.multiscale_sum, c2.value))

    indices = [int(i) for i in indices]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(row, indices))
    return [row(i) for i in indices]


@dataclass
class DichotomyResult:
    circle_median: float
    cantor_median: float
    circle_last_share: float  # median share of the finest scale in the circle sums
    grid: dict
    sampled_points: int

    @property
    def factor(self) -> float:
        return self.cantor_median / self.circle_median if self.circle_median > 0 else math.inf

    def to_dict(self) -> dict:
        return {**asdict(self), "factor": self.factor}


def dichotomy(circle_count: int = 4096, cantor_depth: int = 6, grid: ScaleGrid = ScaleGrid(1.0, 0.5, 8),
              points: int = 64) -> DichotomyResult:
    """Median centred multiscale beta sums on a circle and on the four-corner
    Cantor set, sampled at ``points`` support points each."""
    circle = generate(GeneratorSpec("circle", {"count": circle_count}))
    cantor = generate(GeneratorSpec("four_corner_cantor", {"depth": cantor_depth}))
    sums, shares = {}, []
    for name, mu in (("circle", circle), ("cantor", cantor)):
        vals = []
        for i in sample_indices(mu, points):
            prof = multiscale_beta_sum(mu, mu.points[i], grid, centered=True)
            vals.append(prof.multiscale_sum)
            if name == "circle" and prof.multiscale_sum > 0:
                shares.append(prof.contributions()[-1] / prof.multiscale_sum)
        sums[name] = float(np.median(vals))
    return DichotomyResult(sums["circle"], sums["cantor"], float(np.median(shares)) if shares else 0.0,
                           grid.to_dict(), points)

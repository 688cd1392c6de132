"""Discrete measures on R^m: balls, restriction, density ratios, rescaling and I/O.

A :class:`DiscreteMeasure` is a finite weighted point cloud standing in for a
Radon measure.  Balls are closed everywhere in this package: a point ``p``
belongs to ``B(c, r)`` iff ``|p - c| <= r``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeasureFormatError(ValueError):
    """Raised when a point-cloud file cannot be parsed."""


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of rows of ``points`` lying in the closed ball."""
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return d <= self.radius

    def to_dict(self) -> dict:
        return {"center": [float(c) for c in self.center], "radius": float(self.radius)}


@dataclass(frozen=True)
class ScaleGrid:
    """Geometric radii ``r_j = R * sigma**j`` for ``j = 0..J-1``."""

    top_radius: float
    ratio: float
    count: int

    def __post_init__(self):
        if not self.top_radius > 0:
            raise ValueError("top_radius must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("count must be a positive integer")

    @property
    def radii(self) -> np.ndarray:
        return self.top_radius * self.ratio ** np.arange(self.count, dtype=float)

    @property
    def log_weight(self) -> float:
        """Weight ``ln(1/sigma)`` of each scale in the discretised ``dr/r`` integral."""
        return math.log(1.0 / self.ratio)

    def finest_half(self) -> np.ndarray:
        """Indices of the finest ``ceil(J/2)`` scales."""
        return np.arange(self.count // 2, self.count)

    def to_dict(self) -> dict:
        return {"R": self.top_radius, "sigma": self.ratio, "J": self.count}


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud in R^m carrying an intrinsic dimension ``n < m``."""

    points: np.ndarray
    weights: np.ndarray
    n: int
    m: int = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        m = self.m
        if pts.size == 0:
            if m is None:
                raise ValueError("ambient dimension m is required for an empty measure")
            pts = pts.reshape(0, m)
        else:
            pts = np.atleast_2d(pts)
            if m is None:
                m = pts.shape[1]
            if pts.ndim != 2 or pts.shape[1] != m:
                raise ValueError(f"all points must have exactly m={m} coordinates")
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights differ in length")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(~np.isfinite(pts)):
            raise ValueError("coordinates must be finite")
        n = int(self.n)
        if not 1 <= n < m:
            raise ValueError(f"need 1 <= n < m, got n={n}, m={m}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", int(m))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def support_mask(self) -> np.ndarray:
        return self.weights > 0

    def subset(self, mask_or_index) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points[mask_or_index], self.weights[mask_or_index], self.n, self.m)

    def with_weights(self, weights) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, weights, self.n, self.m)


def as_ball(center, radius) -> Ball:
    return center if isinstance(center, Ball) else Ball(np.asarray(center, dtype=float), radius)


def mass(mu: DiscreteMeasure, region: Ball | None = None) -> float:
    """Total weight of ``mu`` inside ``region`` (the whole space when ``None``)."""
    if region is None:
        return mu.total_mass
    if len(mu) == 0:
        return 0.0
    return float(mu.weights[region.contains(mu.points)].sum())


def restrict(mu: DiscreteMeasure, ball: Ball) -> DiscreteMeasure:
    if len(mu) == 0:
        return mu
    return mu.subset(ball.contains(mu.points))


def density_ratio(mu: DiscreteMeasure, x, r: float) -> float:
    """``mu(B(x, r)) / r**n``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    return mass(mu, Ball(x, r)) / r**mu.n


@dataclass
class DensityProfile:
    radii: np.ndarray
    ratios: np.ndarray
    upper: float  # max over the finest half of the grid
    lower: float  # min over the finest half of the grid

    def to_dict(self) -> dict:
        return {
            "radii": self.radii.tolist(),
            "ratios": self.ratios.tolist(),
            "upper_density_proxy": self.upper,
            "lower_density_proxy": self.lower,
        }


def density_profile(mu: DiscreteMeasure, x, grid: ScaleGrid) -> DensityProfile:
    """Density ratios at every grid radius plus finite-grid proxies of the
    upper and lower densities (max/min over the finest half of the grid)."""
    radii = grid.radii
    ratios = np.array([density_ratio(mu, x, r) for r in radii])
    fine = ratios[grid.finest_half()]
    return DensityProfile(radii, ratios, float(fine.max()), float(fine.min()))


@dataclass
class AhlforsReport:
    c_best: float
    C_best: float
    c_witness: tuple  # (sample index, radius)
    C_witness: tuple

    @property
    def ratio(self) -> float:
        return self.C_best / self.c_best if self.c_best > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "c_best": self.c_best,
            "C_best": self.C_best,
            "c_witness": list(self.c_witness),
            "C_witness": list(self.C_witness),
        }


def support_diameter(mu: DiscreteMeasure) -> float:
    pts = mu.points[mu.support_mask()]
    if len(pts) < 2:
        return 0.0
    from scipy.spatial.distance import pdist

    return float(pdist(pts).max())


def ahlfors_check(mu: DiscreteMeasure, sample_points, grid: ScaleGrid) -> AhlforsReport:
    """Empirical n-Ahlfors regularity constants over sample points and grid radii.

    ``C_best`` is the largest density ratio seen; ``c_best`` the smallest among
    radii below the support diameter.  Both are finite-grid statistics only.
    """
    samples = np.atleast_2d(np.asarray(sample_points, dtype=float))
    diam = support_diameter(mu)
    radii = grid.radii
    hi, lo = -math.inf, math.inf
    hi_w = lo_w = (None, None)
    for i, x in enumerate(samples):
        for r in radii:
            theta = density_ratio(mu, x, r)
            if theta > hi:
                hi, hi_w = theta, (i, float(r))
            if r < diam and theta < lo:
                lo, lo_w = theta, (i, float(r))
    if lo == math.inf:
        lo = 0.0
    return AhlforsReport(float(lo), float(hi), lo_w, hi_w)


def rescale(mu: DiscreteMeasure, x, r: float) -> DiscreteMeasure:
    """Blow-up ``mu_{x,r}(E) = mu(rE + x) / r**n``: points ``y -> (y - x)/r``,
    weights ``w -> w / r**n``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    return DiscreteMeasure((mu.points - x) / r, mu.weights / r**mu.n, mu.n, mu.m)


# --- file formats -----------------------------------------------------------

def measure_to_json(mu: DiscreteMeasure) -> str:
    return json.dumps(
        {"m": mu.m, "n": mu.n, "points": mu.points.tolist(), "weights": mu.weights.tolist()}
    )


def measure_from_json(text: str) -> DiscreteMeasure:
    try:
        doc = json.loads(text)
        m, n = int(doc["m"]), int(doc["n"])
        points, weights = doc["points"], doc["weights"]
    except (ValueError, KeyError, TypeError) as exc:
        raise MeasureFormatError(f"invalid measure JSON: {exc}") from exc
    if not 1 <= n < m:
        raise MeasureFormatError(f"need 1 <= n < m, got n={n}, m={m}")
    try:
        return DiscreteMeasure(np.asarray(points, dtype=float).reshape(-1, m), weights, n, m)
    except ValueError as exc:
        raise MeasureFormatError(str(exc)) from exc


def measure_to_csv(mu: DiscreteMeasure) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(mu.m)] + ["weight"])
    for p, w in zip(mu.points, mu.weights):
        writer.writerow([repr(float(c)) for c in p] + [repr(float(w))])
    return buf.getvalue()


def measure_from_csv(text: str, n: int) -> DiscreteMeasure:
    """Parse ``x1,...,xm,weight`` CSV.  Errors name the offending line."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise MeasureFormatError("line 1: empty file")
    header = [h.strip() for h in rows[0]]
    m = len(header) - 1
    expected = [f"x{i + 1}" for i in range(m)] + ["weight"]
    if m < 1 or header != expected:
        raise MeasureFormatError(f"line 1: header must be {','.join(expected) or 'x1,...,xm,weight'}")
    if not 1 <= n < m:
        raise MeasureFormatError(f"line 1: need 1 <= n < m, got n={n}, m={m}")
    points, weights = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != m + 1:
            raise MeasureFormatError(f"line {lineno}: expected {m + 1} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise MeasureFormatError(f"line {lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in vals) or vals[-1] < 0:
            raise MeasureFormatError(f"line {lineno}: non-finite value or negative weight")
        points.append(vals[:m])
        weights.append(vals[m])
    return DiscreteMeasure(np.asarray(points, dtype=float).reshape(-1, m), weights, n, m)


def load_measure(path, n: int | None = None) -> DiscreteMeasure:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        mu = measure_from_json(text)
        if n is not None and mu.n != n:
            raise MeasureFormatError(f"file declares n={mu.n} but n={n} was requested")
        return mu
    if n is None:
        raise MeasureFormatError("CSV input needs an explicit intrinsic dimension n")
    return measure_from_csv(text, n)


def save_measure(mu: DiscreteMeasure, path) -> None:
    path = Path(path)
    path.write_text(measure_to_json(mu) if path.suffix.lower() == ".json" else measure_to_csv(mu))

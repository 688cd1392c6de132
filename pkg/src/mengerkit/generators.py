"""Synthetic measures whose rectifiability is known in advance.

Rectifiable samples (segment, circle, plane patch, Lipschitz graph) use
midpoint grids weighted by length or area, so total masses approximate
Hausdorff measure.  The four-corner Cantor set is the classical purely
1-unrectifiable example.  ``singular_line`` is the measure ``dx/|x|`` on a
line, cut off at ``|x| >= eps``: flat, but with mass blowing up as ``eps -> 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measure import DiscreteMeasure

KINDS = ("segment", "circle", "plane_patch", "lipschitz_graph", "four_corner_cantor", "singular_line", "noisy")

_DEFAULTS = {
    "segment": {"count": 100, "length": 1.0, "m": 2},
    "circle": {"count": 256, "radius": 1.0, "m": 2},
    "plane_patch": {"count": 20, "side": 1.0, "m": 3},
    "lipschitz_graph": {"count": 200, "coefficients": [0.3, 0.1]},
    "four_corner_cantor": {"depth": 4},
    "singular_line": {"count": 100, "epsilon": None},
    "noisy": {"amplitude": 0.0},
}


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: dict = field(default_factory=dict)
    base: "GeneratorSpec | None" = None  # only for kind == "noisy"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        p = self.resolved()
        if "count" in p and (int(p["count"]) != p["count"] or p["count"] < 1):
            raise ValueError("count must be a positive integer")
        if self.kind == "four_corner_cantor" and (int(p["depth"]) != p["depth"] or p["depth"] < 0):
            raise ValueError("depth must be a nonnegative integer")
        if self.kind == "singular_line":
            eps = p["epsilon"]
            if eps is None or not 0 < eps < 1:
                raise ValueError("singular_line needs epsilon in (0, 1)")
        if self.kind == "noisy":
            if self.base is None or self.base.kind == "noisy":
                raise ValueError("noisy needs a non-noisy base spec")
            if not p["amplitude"] >= 0:
                raise ValueError("noise amplitude must be nonnegative")
        for key in ("length", "radius", "side"):
            if key in p and not p[key] > 0:
                raise ValueError(f"{key} must be positive")

    def resolved(self) -> dict:
        return {**_DEFAULTS[self.kind], **self.params}

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "params": self.resolved(), "seed": self.seed}
        if self.base is not None:
            d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        base = d.get("base")
        return cls(d["kind"], dict(d.get("params", {})), None if base is None else cls.from_dict(base),
                   int(d.get("seed", 0)))


def _embed(coords: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros((coords.shape[0], m))
    out[:, : coords.shape[1]] = coords
    return out


def _segment(p):
    N, L = int(p["count"]), float(p["length"])
    s = (np.arange(N) + 0.5) / N * L
    return DiscreteMeasure(_embed(s[:, None], p["m"]), np.full(N, L / N), 1)


def _circle(p):
    N, R = int(p["count"]), float(p["radius"])
    a = 2 * math.pi * np.arange(N) / N
    pts = R * np.stack([np.cos(a), np.sin(a)], axis=1)
    return DiscreteMeasure(_embed(pts, p["m"]), np.full(N, 2 * math.pi * R / N), 1)


def _plane_patch(p):
    N, L = int(p["count"]), float(p["side"])
    s = ((np.arange(N) + 0.5) / N - 0.5) * L
    u, v = np.meshgrid(s, s, indexing="ij")
    pts = np.stack([u.ravel(), v.ravel()], axis=1)
    return DiscreteMeasure(_embed(pts, p["m"]), np.full(N * N, L * L / (N * N)), 2)


def _lipschitz_graph(p):
    """Graph of ``f(t) = sum_k a_k sin(2 pi k t) / k`` over ``[0, 1]`` weighted by arc length."""
    N = int(p["count"])
    a = np.asarray(p["coefficients"], dtype=float)
    k = np.arange(1, a.size + 1)
    t = (np.arange(N) + 0.5) / N
    f = (a[None, :] * np.sin(2 * math.pi * np.outer(t, k)) / k).sum(axis=1)
    df = (a[None, :] * 2 * math.pi * np.cos(2 * math.pi * np.outer(t, k))).sum(axis=1)
    return DiscreteMeasure(np.stack([t, f], axis=1), np.sqrt(1 + df**2) / N, 1)


def cantor_points(depth: int) -> np.ndarray:
    """Centres of the ``4**depth`` squares of side ``4**-depth`` in the
    four-corner construction on the unit square."""
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    pts = np.array([[0.5, 0.5]])
    for _ in range(depth):
        pts = (corners[:, None, :] * 0.75 + pts[None, :, :] / 4).reshape(-1, 2)
    return pts


def _cantor(p):
    d = int(p["depth"])
    pts = cantor_points(d)
    return DiscreteMeasure(pts, np.full(len(pts), 4.0**-d), 1)


def singular_line_cells(epsilon: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Positive half of the ``singular_line`` grid: log-spaced cells
    ``[a_i, a_{i+1}]`` of ``[eps, 1]`` with ``a_i = eps^(1 - i/count)``, point at
    the geometric midpoint and weight ``(a_{i+1} - a_i) / midpoint``."""
    i = np.arange(count + 1)
    a = epsilon ** (1 - i / count)
    mid = np.sqrt(a[:-1] * a[1:])
    return mid, np.diff(a) / mid


def _singular_line(p):
    mid, w = singular_line_cells(float(p["epsilon"]), int(p["count"]))
    x = np.concatenate([-mid[::-1], mid])
    pts = np.stack([x, np.zeros_like(x)], axis=1)
    return DiscreteMeasure(pts, np.concatenate([w[::-1], w]), 1)


_BUILDERS = {
    "segment": _segment,
    "circle": _circle,
    "plane_patch": _plane_patch,
    "lipschitz_graph": _lipschitz_graph,
    "four_corner_cantor": _cantor,
    "singular_line": _singular_line,
}


def generate(spec: GeneratorSpec) -> DiscreteMeasure:
    if spec.kind == "noisy":
        base = generate(spec.base)
        amp = float(spec.resolved()["amplitude"])
        if amp == 0:
            return base
        rng = np.random.default_rng(spec.seed)
        return DiscreteMeasure(base.points + amp * rng.standard_normal(base.points.shape), base.weights,
                               base.n, base.m)
    return _BUILDERS[spec.kind](spec.resolved())


def ground_truth(spec: GeneratorSpec) -> str:
    """``rectifiable``, ``purely_unrectifiable`` or ``degenerate``.

    A noisy spec inherits its base label: noise perturbs the sample, not the
    underlying set being approximated.
    """
    if spec.kind == "noisy":
        return ground_truth(spec.base)
    if spec.kind == "four_corner_cantor":
        return "purely_unrectifiable"
    if spec.kind == "singular_line":
        return "degenerate"
    return "rectifiable"

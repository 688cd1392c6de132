"""Greedy selection of well-spread, heavy points around a centre, and the
beta-versus-curvature lower-bound chain built on it.

Given a centre ``x`` and radius ``r``, :func:`select_spanning_points` picks
``x_1, ..., x_n`` in ``B(x, r)`` so that the simplex ``(x, x_1, ..., x_n)``
has minimal height at least ``delta r`` while every ball ``B(x_i, 5 eta r)``
still carries mass at least ``C2 r^n``.  Averaging the centred beta number
over planes spanned by points of those balls bounds it by a curvature sum,
which :func:`empirical_lower_bound` evaluates scale by scale.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .beta import InsufficientDataError, centered_beta2
from .curvature import ENUMERATION_BUDGET, BudgetExceededError, pointwise_curvature
from .measure import Ball, DiscreteMeasure, ScaleGrid, ahlfors_check, restrict
from .simplex import (K1, IntegrandKind, affine_distance_batch, derived_constants, h_min, h_min_batch,
                      integrand_values)


def selection_constants(n: int, m: int, lam: float, C0: float) -> tuple[float, float, float]:
    """``(delta, eta, C2)`` for intrinsic dimension ``n`` in ``R^m``.

    ``delta = lam / (2^(n+1) 5^(n-1) C0)`` is the value needed at the last
    induction step, hence valid at every step; ``eta = delta / (10 n)``;
    ``C2 = lam eta^m / 2^(m+1)``.
    """
    if not 1 <= n < m:
        raise ValueError(f"need 1 <= n < m, got n={n}, m={m}")
    if not 0 < lam <= C0:
        raise ValueError(f"need 0 < lambda <= C0, got lambda={lam}, C0={C0}")
    delta = lam / (2 ** (n + 1) * 5 ** (n - 1) * C0)
    eta = delta / (10 * n)
    C2 = lam * eta**m / 2 ** (m + 1)
    return delta, eta, C2


def auto_constants(mu: DiscreteMeasure, x, grid: ScaleGrid, sample_points=None) -> tuple[float, float]:
    """Empirical ``(lam, C0)``: the smallest density ratio at ``x`` and the
    largest over ``sample_points`` (default: the support), with ``lam <= C0``."""
    if sample_points is None:
        sample_points = mu.points[mu.support_mask()]
    C0 = ahlfors_check(mu, sample_points, grid).C_best
    lam = ahlfors_check(mu, np.asarray(x, dtype=float)[None, :], grid).c_best
    if not lam > 0:
        raise ValueError("lower density ratio at x is zero; supply lambda explicitly")
    return min(lam, C0), C0


@dataclass
class SelectionResult:
    center: np.ndarray
    radius: float
    delta: float
    eta: float
    C2: float
    lam: float
    C0: float
    points: np.ndarray  # (k, m) selected so far; k = n on success
    indices: list
    ball_masses: list
    achieved_hmin: float
    status: str  # "success" | "failed"
    failed_step: int | None = None
    diagnostic: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "success"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center"] = [float(c) for c in self.center]
        d["points"] = np.asarray(self.points).tolist()
        d["indices"] = [int(i) for i in self.indices]
        d["ball_masses"] = [float(b) for b in self.ball_masses]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def select_spanning_points(mu: DiscreteMeasure, x, r: float, lam: float, C0: float) -> SelectionResult:
    """Greedy construction of ``x_1, ..., x_n``.

    Step ``k`` considers support points ``y`` of ``B(x, r)`` at distance at
    least ``delta r`` from ``V_k = aff(x, x_1, ..., x_k)`` whose simplex
    ``(x, x_1, ..., x_k, y)`` keeps minimal height ``>= delta r``, and takes
    the one maximising ``(mu|B(x,r))(B(y, 5 eta r))`` (lowest index on ties).
    Fails at step ``k`` when that maximum is below ``C2 r^n``.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    n, m = mu.n, mu.m
    delta, eta, C2 = selection_constants(n, m, lam, C0)
    x = np.asarray(x, dtype=float)
    inside = np.flatnonzero(Ball(x, r).contains(mu.points) & mu.support_mask()) if len(mu) else np.array([], int)
    pts, w = mu.points[inside], mu.weights[inside]
    threshold = C2 * r**n
    chosen, masses = [], []

    def result(status, step=None, diag=None):
        sel = mu.points[[inside[i] for i in chosen]] if chosen else np.zeros((0, m))
        hm = h_min(np.vstack([x, sel])) if chosen else 0.0
        return SelectionResult(x, float(r), delta, eta, C2, float(lam), float(C0), sel,
                               [int(inside[i]) for i in chosen], masses, float(hm), status, step, diag or {})

    for k in range(n):
        base = np.vstack([x] + [pts[i] for i in chosen])
        if len(pts):
            dist_v = affine_distance_batch(pts, np.broadcast_to(base, (len(pts),) + base.shape))
            ok = dist_v >= delta * r
            if k > 0 and ok.any():
                cand = np.flatnonzero(ok)
                simp = np.concatenate([np.broadcast_to(base, (cand.size,) + base.shape), pts[cand][:, None]], axis=1)
                ok[cand] = h_min_batch(simp) >= delta * r
            cand = np.flatnonzero(ok)
        else:
            cand = np.array([], dtype=int)
        if cand.size == 0:
            return result("failed", k, {"candidates": 0, "best_mass": 0.0, "threshold": threshold})
        near = cdist(pts[cand], pts) <= 5 * eta * r
        ball_mass = near.astype(float) @ w
        best = int(np.argmax(ball_mass))  # first maximum = lowest index
        if ball_mass[best] < threshold:
            return result("failed", k, {"candidates": int(cand.size), "best_mass": float(ball_mass[best]),
                                        "threshold": threshold})
        chosen.append(int(cand[best]))
        masses.append(float(ball_mass[best]))
    return result("success")


# --- verification ---------------------------------------------------------------

@dataclass
class SelectionCheck:
    name: str
    passed: bool
    detail: dict


@dataclass
class SelectionVerification:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [asdict(c) for c in self.checks]}


def verify_selection(result: SelectionResult, mu: DiscreteMeasure, picks: int = 100, seed: int = 0,
                     finer: SelectionResult | None = None) -> SelectionVerification:
    """Check the geometric guarantees of a selection.

    * ``height``: ``h_min(x, x_1, ..., x_n) >= delta r``.
    * ``perturbed_height``: ``picks`` random ``y_i`` from the support inside
      ``B(x_i, 5 eta r)`` keep ``h_min(x, y_1, ..., y_n) >= delta r / 2``.
    * ``disjoint``: the product of balls ``B(x_i, 5 eta r)`` misses the
      analogous product at radius ``delta r / 3``.  Without ``finer`` this is
      checked for any selection at the smaller radius (its centres lie in
      ``B(x, delta r / 3)``); with ``finer`` the actual centres are compared.
    """
    if not result.ok:
        raise ValueError("can only verify a successful selection")
    x, r, delta, eta = result.center, result.radius, result.delta, result.eta
    checks = []
    hm = h_min(np.vstack([x, result.points]))
    checks.append(SelectionCheck("height", bool(hm >= delta * r),
                                 {"h_min": hm, "bound": delta * r}))

    rng = np.random.default_rng(seed)
    rad = 5 * eta * r
    pools = [np.flatnonzero(Ball(p, rad).contains(mu.points) & mu.support_mask()) for p in result.points]
    worst, witness = math.inf, None
    if all(len(pl) for pl in pools):
        for _ in range(picks):
            ys = [mu.points[rng.choice(pl)] for pl in pools]
            v = h_min(np.vstack([x] + ys))
            if v < worst:
                worst, witness = v, [y.tolist() for y in ys]
    checks.append(SelectionCheck("perturbed_height", bool(worst >= delta * r / 2),
                                 {"min_h_min": worst, "bound": delta * r / 2, "witness": witness,
                                  "pool_sizes": [int(len(pl)) for pl in pools]}))

    r2 = delta * r / 3
    rad2 = 5 * eta * r2
    gaps = [float(np.linalg.norm(p - x)) for p in result.points]
    # finer centres sit within r2 of x, so the balls separate once |x_i - x| - r2 > rad + rad2
    generic = all(g - r2 > rad + rad2 for g in gaps)
    detail = {"min_center_gap": min(gaps), "needed": r2 + rad + rad2}
    passed = generic
    if finer is not None:
        sep = [float(np.linalg.norm(a - b)) for a, b in zip(result.points, finer.points)]
        explicit = any(s > rad + rad2 for s in sep)
        detail.update({"finer_separations": sep, "explicit": explicit})
        passed = passed and explicit
    checks.append(SelectionCheck("disjoint", bool(passed), detail))
    return SelectionVerification(checks)


# --- lower-bound chain ------------------------------------------------------------

def lower_bound_grid(R: float, J: int, delta: float) -> ScaleGrid:
    """Scale grid with ratio ``delta / 3`` required by the lower-bound chain."""
    return ScaleGrid(R, delta / 3, J)


def lower_bound_constant(kind: IntegrandKind, n: int, delta: float, C2: float) -> float:
    """Per-scale constant ``C`` with ``beta_hat^2(x, r) <= C * S(r)``.

    The chain uses the distance bound ``(d/t)^2 <= c C^ell t^(n(n+1)) K^2`` with
    ``C = sqrt(2/delta)`` and ``t = r/C`` (so ``Ct = r`` and ``t/C = delta r/2``),
    and the ball masses ``>= C2 r^n``.
    """
    if kind.p != 2 or kind.tag not in ("K1", "K2"):
        raise ValueError("lower-bound chain is available for K1^2 and K2^2 only")
    c, ell = derived_constants(kind.tag, n)
    Cg = math.sqrt(2.0 / delta)
    return c * Cg ** (ell - 2 - n * (n + 1)) / C2**n


@dataclass
class LowerBoundRow:
    j: int
    r: float
    lhs: float  # beta_hat^2(x, r)
    rhs: float  # C * S(r)
    flagged: bool
    reason: str = ""
    min_hmin: float = math.nan  # smallest h_min(x, y) over the averaged tuples

    @property
    def ratio(self) -> float:
        if self.flagged:
            return math.nan
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)

    @property
    def holds(self) -> bool:
        return self.flagged or self.lhs <= self.rhs


@dataclass
class LowerBoundReport:
    center: np.ndarray
    grid: ScaleGrid
    integrand: str
    lam: float
    C0: float
    delta: float
    constant: float  # per-scale C
    multiscale_constant: float  # ln(3/delta) * C
    rows: list
    beta_sum: float  # ln(1/sigma) * sum of beta_hat^2 over unflagged scales
    curvature: float  # curv_{K^2}(x, R)

    @property
    def multiscale_rhs(self) -> float:
        return self.multiscale_constant * self.curvature

    @property
    def per_scale_holds(self) -> bool:
        return all(row.holds for row in self.rows)

    @property
    def multiscale_holds(self) -> bool:
        return self.beta_sum <= self.multiscale_rhs

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "grid": self.grid.to_dict(),
            "integrand": self.integrand,
            "lambda": self.lam,
            "C0": self.C0,
            "delta": self.delta,
            "constant": self.constant,
            "multiscale_constant": self.multiscale_constant,
            "rows": [{**asdict(r), "ratio": r.ratio} for r in self.rows],
            "beta_sum": self.beta_sum,
            "curvature": self.curvature,
            "multiscale_rhs": self.multiscale_rhs,
            "per_scale_holds": self.per_scale_holds,
            "multiscale_holds": self.multiscale_holds,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["r_j", "lhs", "rhs", "ratio", "flag"])
        for row in self.rows:
            out.writerow([repr(row.r), repr(row.lhs), repr(row.rhs), repr(row.ratio), int(row.flagged)])
        return buf.getvalue()


def _selected_sum(mu, x, r, sel: SelectionResult, kind):
    """``S(r)``: sum of ``K(x, y_1..y_n, z) w_z prod w_yi`` over ``z`` in ``B(x, r)``
    and ``y_i`` in ``B(x_i, 5 eta r) cap B(x, r)``; also the smallest ``h_min(x, y)``."""
    nu = restrict(mu, Ball(x, r))
    keep = nu.weights > 0
    pts, w = nu.points[keep], nu.weights[keep]
    pools = [np.flatnonzero(Ball(p, 5 * sel.eta * r).contains(pts)) for p in sel.points]
    total = len(pts) * math.prod(len(pl) for pl in pools)
    if total > ENUMERATION_BUDGET:
        raise BudgetExceededError(f"{total} tuples exceeds the budget of {ENUMERATION_BUDGET}")
    terms, worst = [], math.inf
    for combo in itertools.product(*pools):
        combo = list(combo)
        ys = pts[combo]
        worst = min(worst, h_min(np.vstack([x, ys])))
        X = np.concatenate([np.broadcast_to(np.vstack([x, ys]), (len(pts), len(combo) + 1, mu.m)),
                            pts[:, None, :]], axis=1)
        vals = integrand_values(kind, X)
        terms.append(math.fsum(vals * w) * float(np.prod(w[combo])))
    return math.fsum(terms), worst


def empirical_lower_bound(mu: DiscreteMeasure, x, grid: ScaleGrid, kind: IntegrandKind = K1,
                          lam: float | None = None, C0: float | None = None) -> LowerBoundReport:
    """Per-scale comparison ``beta_hat^2(x, r_j) <= C * S(r_j)`` and the summed
    form ``ln(3/delta) sum_j beta_hat^2 <= ln(3/delta) C curv_{K^2}(x, R)``.

    ``grid`` must have ratio ``delta/3`` (see :func:`lower_bound_grid`).
    ``lam`` and ``C0`` default to :func:`auto_constants` over ``grid``.
    Scales where the selection fails or the ball is too sparse are flagged.
    """
    x = np.asarray(x, dtype=float)
    n, m = mu.n, mu.m
    if lam is None or C0 is None:
        a_lam, a_C0 = auto_constants(mu, x, grid)
        lam = a_lam if lam is None else lam
        C0 = a_C0 if C0 is None else C0
    delta, eta, C2 = selection_constants(n, m, lam, C0)
    if not math.isclose(grid.ratio, delta / 3, rel_tol=1e-12):
        raise ValueError(f"grid ratio must equal delta/3 = {delta / 3!r}, got {grid.ratio!r}")
    Cj = lower_bound_constant(kind, n, delta, C2)
    rows, betas = [], []
    for j, r in enumerate(grid.radii):
        r = float(r)
        try:
            lhs = centered_beta2(mu, x, r).value_sq
        except InsufficientDataError:
            rows.append(LowerBoundRow(j, r, math.nan, math.nan, True, "insufficient data"))
            continue
        sel = select_spanning_points(mu, x, r, lam, C0)
        if not sel.ok:
            rows.append(LowerBoundRow(j, r, lhs, math.nan, True, f"selection failed at step {sel.failed_step}"))
            continue
        S, worst = _selected_sum(mu, x, r, sel, kind)
        rows.append(LowerBoundRow(j, r, lhs, Cj * S, False, "", worst))
        betas.append(lhs)
    curv = pointwise_curvature(x, mu, kind, grid.top_radius).value
    return LowerBoundReport(x, grid, str(kind), float(lam), float(C0), delta, Cj,
                            math.log(3.0 / delta) * Cj, rows, grid.log_weight * math.fsum(betas), curv)

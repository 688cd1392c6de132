"""``mengerkit`` command line: analyze, compare and check.

Exit codes: 0 success, 1 invariant failure, 2 input error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .beta import multiscale_beta_sum
from .checks import run_suite
from .curvature import BudgetExceededError, integral_curvature_exact, monte_carlo_curvature
from .experiments import compare_table, curv_at, sample_indices
from .generators import GeneratorSpec, generate, ground_truth
from .measure import DiscreteMeasure, MeasureFormatError, ScaleGrid, ahlfors_check, density_profile, load_measure
from .selection import auto_constants, select_spanning_points, selection_constants
from .simplex import IntegrandKind

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

DEFAULT_CONFIG = {
    "input": None,
    "generator": {"kind": "circle", "params": {"count": 256, "radius": 1.0, "m": 2}, "seed": 0},
    "reference": None,
    "n": 1,
    "m": 2,
    "integrand": "K1",
    "p": 2.0,
    "grid": {"R": 1.0, "sigma": 0.5, "J": 8},
    "lambda": "auto",
    "C0": "auto",
    "samples": 100000,
    "sample_points": 16,
    "min_median_ratio": None,
    "inject_bad_integrand": False,
    "seed": 0,
}


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    """Make reports JSON-safe: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _csv(header, rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(header)
    for row in rows:
        out.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --- configuration --------------------------------------------------------------

def load_config(path, seed_override=None) -> dict:
    try:
        user = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise InputError("config must be a JSON object")
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if user.get("input") is not None and "generator" not in user:
        cfg["generator"] = None
    cfg.update(user)
    if seed_override is not None:
        cfg["seed"] = seed_override
    return cfg


def _source_measure(source: dict | str, cfg: dict) -> tuple[DiscreteMeasure, dict]:
    if isinstance(source, str):
        try:
            mu = load_measure(source, cfg["n"])
        except OSError as exc:
            raise InputError(f"cannot read {source}: {exc}") from exc
        return mu, {"input": source}
    spec = GeneratorSpec.from_dict(source)
    return generate(spec), {"generator": spec.to_dict(), "ground_truth": ground_truth(spec)}


def build_measure(cfg: dict) -> tuple[DiscreteMeasure, dict]:
    if (cfg.get("input") is None) == (cfg.get("generator") is None):
        raise InputError("config needs exactly one of 'input' and 'generator'")
    mu, info = _source_measure(cfg["input"] or cfg["generator"], cfg)
    if mu.n != cfg["n"] or mu.m != cfg["m"]:
        raise InputError(f"measure has (n, m) = ({mu.n}, {mu.m}) but config says ({cfg['n']}, {cfg['m']})")
    return mu, info


def resolve(cfg: dict):
    g = cfg["grid"]
    try:
        grid = ScaleGrid(float(g["R"]), float(g["sigma"]), int(g["J"]))
        kind = IntegrandKind.parse(cfg["integrand"], float(cfg["p"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid config: {exc}") from exc
    for key in ("lambda", "C0"):
        v = cfg[key]
        if v != "auto" and not (isinstance(v, (int, float)) and v > 0):
            raise InputError(f"{key} must be 'auto' or a positive number")
    if int(cfg["samples"]) < 2 or int(cfg["sample_points"]) < 1:
        raise InputError("samples must be >= 2 and sample_points >= 1")
    return grid, kind


# --- commands ---------------------------------------------------------------------

def cmd_analyze(cfg: dict, out: Path, threads: int) -> int:
    mu, info = build_measure(cfg)
    grid, kind = resolve(cfg)
    seed = int(cfg["seed"])
    idx = sample_indices(mu, int(cfg["sample_points"]))

    C0 = cfg["C0"]
    if C0 == "auto":
        C0 = ahlfors_check(mu, mu.points[idx], grid).C_best

    def per_point(i):
        x = mu.points[i]
        lam = cfg["lambda"]
        if lam == "auto":
            lam = min(auto_constants(mu, x, grid, mu.points[idx])[0], C0)
        selected = [select_spanning_points(mu, x, r, lam, C0).ok for r in grid.radii]
        prof = multiscale_beta_sum(mu, x, grid, centered=True, p=float(cfg["p"]))
        curv = curv_at(mu, x, kind, grid.top_radius, int(cfg["samples"]), seed)
        dens = density_profile(mu, x, grid)
        return i, prof, curv, dens, lam, selected

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(per_point, idx))
    else:
        results = [per_point(i) for i in idx]

    beta_rows, curv_rows, dens_rows, points = [], [], [], []
    for i, prof, curv, dens, lam, selected in results:
        for j, (r, v, f) in enumerate(zip(grid.radii, prof.values, prof.flagged)):
            beta_rows.append([int(i), j, r, "" if f else v, "" if f else v * v, int(f)])
        curv_rows.append([int(i), *mu.points[i].tolist(), curv.value, curv.method, curv.samples, curv.stderr,
                          curv.seed, curv.integrand])
        for j, (r, t) in enumerate(zip(dens.radii, dens.ratios)):
            dens_rows.append([int(i), j, r, t])
        points.append({"index": int(i), "x": mu.points[i], "beta_sum": prof.multiscale_sum,
                       "covered_scales": prof.covered_scales, "flagged_scales": prof.flagged_count,
                       "curvature": curv.to_dict(), "upper_density": dens.upper, "lower_density": dens.lower,
                       "lambda": lam, "selection_constants": selection_constants(mu.n, mu.m, lam, C0),
                       "selection_success": selected})

    try:
        total = integral_curvature_exact(mu, kind, threads=threads)
    except BudgetExceededError:
        total = monte_carlo_curvature(mu, kind, None, int(cfg["samples"]), seed, threads)
    ahl = ahlfors_check(mu, mu.points[idx], grid)
    coords = [f"x{k + 1}" for k in range(mu.m)]
    (out / "beta_profiles.csv").write_text(
        _csv(["point", "j", "r_j", "beta", "beta_sq", "flagged"], beta_rows))
    (out / "curvature.csv").write_text(_csv(["point", *coords, "value", "method", "samples", "stderr", "seed",
                                             "integrand"], curv_rows))
    (out / "density.csv").write_text(_csv(["point", "j", "r_j", "ratio"], dens_rows))
    summary = {"config": cfg, "measure": {**info, "points": len(mu), "mass": mu.total_mass, "n": mu.n, "m": mu.m},
               "grid": grid.to_dict(), "C0": C0, "total_curvature": total.to_dict(), "ahlfors": ahl.to_dict(),
               "points": points}
    (out / "summary.json").write_text(_dump(summary))
    return EXIT_OK


def cmd_compare(cfg: dict, out: Path, threads: int) -> int:
    mu, info = build_measure(cfg)
    grid, kind = resolve(cfg)
    seed, samples = int(cfg["seed"]), int(cfg["samples"])
    rows = compare_table(mu, grid, sample_indices(mu, int(cfg["sample_points"])), kind.p, samples, seed, threads)
    header = ["point", "beta_sum", "covered_scales", "curv_k1", "curv_k2", "method", "ratio_k1", "ratio_k2"]
    table = [[r.index, r.beta_sum, r.covered_scales, r.curv_k1, r.curv_k2, r.method,
              "" if r.ratio_k1 is None else r.ratio_k1, "" if r.ratio_k2 is None else r.ratio_k2] for r in rows]
    (out / "compare.csv").write_text(_csv(header, table))
    failures = [r.index for r in rows if not r.dominated]
    summary = {"measure": info, "grid": grid.to_dict(), "rows": len(rows),
               "median_beta_sum": float(np.median([r.beta_sum for r in rows])),
               "k1_le_k2_violations": failures}
    status = EXIT_OK if not failures else EXIT_FAIL
    if cfg.get("reference") is not None:
        ref, ref_info = _source_measure(cfg["reference"], cfg)
        ref_rows = compare_table(ref, grid, sample_indices(ref, int(cfg["sample_points"])), kind.p, samples,
                                 seed, threads)
        ref_median = float(np.median([r.beta_sum for r in ref_rows]))
        ratio = summary["median_beta_sum"] / ref_median if ref_median > 0 else math.inf
        summary["reference"] = {"measure": ref_info, "median_beta_sum": ref_median, "median_ratio": ratio}
        floor = cfg.get("min_median_ratio")
        if floor is not None:
            summary["reference"]["min_median_ratio"] = floor
            summary["reference"]["passed"] = ratio >= floor
            if ratio < floor:
                status = EXIT_FAIL
    (out / "compare_summary.json").write_text(_dump(summary))
    return status


def cmd_check(cfg: dict, out: Path, threads: int) -> int:
    outcomes = run_suite(int(cfg["seed"]), bool(cfg.get("inject_bad_integrand")))
    failing = [o.name for o in outcomes if o.gating and not o.passed]
    report = {"seed": int(cfg["seed"]), "passed": not failing, "failing": failing,
              "checks": [o.to_dict() for o in outcomes]}
    (out / "check.json").write_text(_dump(report))
    for o in outcomes:
        tag = "PASS" if o.passed else ("FAIL" if o.gating else "INFO")
        print(f"{tag} {o.name}")
    return EXIT_OK if not failing else EXIT_FAIL


COMMANDS = {"analyze": cmd_analyze, "compare": cmd_compare, "check": cmd_check}


def _threads(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("MENGER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"MENGER_THREADS must be an integer, got {env!r}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mengerkit", description="Menger curvature and beta-number analysis of "
                                                               "weighted point clouds.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="JSON run configuration")
    ap.add_argument("--out", type=Path, help="output directory")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--threads", type=int, help="worker threads (default: $MENGER_THREADS or 1)")
    ap.add_argument("--print-config", action="store_true", help="print the default config and exit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.print_config:
        sys.stdout.write(_dump(DEFAULT_CONFIG))
        return EXIT_OK
    try:
        if args.out is None:
            raise InputError("--out is required")
        if args.config is None:
            if args.command != "check":
                raise InputError("--config is required")
            cfg = copy.deepcopy(DEFAULT_CONFIG)
            if args.seed is not None:
                cfg["seed"] = args.seed
        else:
            cfg = load_config(args.config, args.seed)
        threads = _threads(args.threads)
        if threads < 1:
            raise InputError("--threads must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, threads)
    except (InputError, MeasureFormatError, BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

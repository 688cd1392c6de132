import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from mengerkit.curvature import integral_curvature_exact
from mengerkit.generators import (KINDS, GeneratorSpec, cantor_points, generate, ground_truth,
                                  singular_line_cells)
from mengerkit.measure import ScaleGrid, ahlfors_check, mass
from mengerkit.simplex import K1, K2


def test_segment_mass():
    mu = generate(GeneratorSpec("segment", {"count": 1000}))
    assert mass(mu) == pytest.approx(1.0, rel=1e-12)
    assert mu.points[:, 1].max() == 0 and mu.n == 1 and mu.m == 2


def test_segment_in_r3():
    mu = generate(GeneratorSpec("segment", {"count": 10, "m": 3}))
    assert mu.m == 3 and np.all(mu.points[:, 1:] == 0)


def test_circle_on_curve():
    mu = generate(GeneratorSpec("circle", {"count": 64, "radius": 2.0}))
    assert np.allclose(np.linalg.norm(mu.points, axis=1), 2.0)
    assert mass(mu) == pytest.approx(4 * math.pi)


def test_plane_patch():
    mu = generate(GeneratorSpec("plane_patch", {"count": 10}))
    assert len(mu) == 100 and mu.n == 2 and mu.m == 3
    assert mass(mu) == pytest.approx(1.0) and np.all(mu.points[:, 2] == 0)


def test_lipschitz_graph_length():
    mu = generate(GeneratorSpec("lipschitz_graph", {"count": 4000, "coefficients": [0.2]}))
    t = np.linspace(0, 1, 200_001)
    arc = np.hypot(np.diff(t), np.diff(0.2 * np.sin(2 * np.pi * t))).sum()
    assert mass(mu) == pytest.approx(arc, rel=1e-6)


class TestCantor:
    def test_depth_three(self):
        pts = cantor_points(3)
        assert len(pts) == 64
        assert pdist(pts).min() == pytest.approx(3 * 4.0**-3, rel=1e-12)

    @pytest.mark.parametrize("d", [0, 1, 2, 4])
    def test_children_of_each_square(self, d):
        # every square of side s splits into its four corner squares of side s/4
        s = 4.0**-d
        offsets = np.array([[-1, -1], [1, -1], [-1, 1], [1, 1]]) * 3 * s / 8
        kids = (cantor_points(d)[:, None, :] + offsets[None]).reshape(-1, 2)
        assert sorted(map(tuple, np.round(kids, 12))) == sorted(map(tuple, np.round(cantor_points(d + 1), 12)))

    def test_unit_mass_and_regularity(self):
        mu = generate(GeneratorSpec("four_corner_cantor", {"depth": 6}))
        assert mass(mu) == pytest.approx(1.0)
        rep = ahlfors_check(mu, mu.points[::97], ScaleGrid(0.5, 0.25, 4))
        assert rep.ratio <= 4.0


class TestSingularLine:
    def test_cells(self):
        mid, w = singular_line_cells(0.01, 10)
        assert mid[0] > 0.01 and mid[-1] < 1 and np.all(np.diff(mid) > 0)
        q = 0.01 ** (-1 / 10)
        assert np.allclose(w, math.sqrt(q) - 1 / math.sqrt(q))

    def test_flat(self):
        mu = generate(GeneratorSpec("singular_line", {"count": 12, "epsilon": 0.01}))
        assert len(mu) == 24 and np.all(mu.points[:, 1] == 0)
        assert integral_curvature_exact(mu, K1).value == 0.0
        assert integral_curvature_exact(mu, K2).value == 0.0

    def test_mass_grows(self):
        total = [sum(map(Fraction, generate(GeneratorSpec("singular_line", {"count": 100, "epsilon": e})).weights))
                 for e in (1e-2, 1e-4)]
        assert total[1] > 2 * total[0]


def test_ground_truths():
    assert ground_truth(GeneratorSpec("circle")) == "rectifiable"
    assert ground_truth(GeneratorSpec("four_corner_cantor")) == "purely_unrectifiable"
    assert ground_truth(GeneratorSpec("singular_line", {"epsilon": 0.1})) == "degenerate"
    noisy = GeneratorSpec("noisy", {"amplitude": 0.01}, GeneratorSpec("four_corner_cantor"))
    assert ground_truth(noisy) == "purely_unrectifiable"


class TestNoisy:
    def test_deterministic(self):
        spec = GeneratorSpec("noisy", {"amplitude": 0.01}, GeneratorSpec("circle", {"count": 32}), seed=5)
        a, b = generate(spec), generate(spec)
        assert np.array_equal(a.points, b.points)
        c = generate(GeneratorSpec("noisy", {"amplitude": 0.01}, GeneratorSpec("circle", {"count": 32}), seed=6))
        assert not np.array_equal(a.points, c.points)

    def test_zero_amplitude(self):
        base = GeneratorSpec("segment", {"count": 9})
        assert np.array_equal(generate(GeneratorSpec("noisy", {}, base)).points, generate(base).points)

    def test_spec_round_trip(self):
        spec = GeneratorSpec("noisy", {"amplitude": 0.1}, GeneratorSpec("segment"), seed=3)
        assert GeneratorSpec.from_dict(spec.to_dict()) == GeneratorSpec("noisy", spec.resolved(),
                                                                        GeneratorSpec("segment", GeneratorSpec("segment").resolved()), 3)


@pytest.mark.parametrize("spec", [
    ("bogus", {}), ("circle", {"count": 0}), ("circle", {"count": 2.5}), ("circle", {"wobble": 1}),
    ("four_corner_cantor", {"depth": -1}), ("singular_line", {}), ("singular_line", {"epsilon": 1.5}),
    ("segment", {"length": 0}),
])
def test_invalid_specs(spec):
    with pytest.raises(ValueError):
        GeneratorSpec(*spec)


def test_invalid_noisy():
    with pytest.raises(ValueError):
        GeneratorSpec("noisy", {"amplitude": 0.1})
    with pytest.raises(ValueError):
        GeneratorSpec("noisy", {"amplitude": -1}, GeneratorSpec("circle"))


@pytest.mark.parametrize("kind", [k for k in KINDS if k not in ("noisy", "singular_line")])
def test_defaults_generate(kind):
    mu = generate(GeneratorSpec(kind))
    assert len(mu) > 0 and mass(mu) > 0

import math

import numpy as np
import pytest
from scipy import integrate, optimize

from conflab.special import (
    TRIANGLE_A,
    TRIANGLE_B,
    TRIANGLE_C,
    RectangleShape,
    cardy_F,
    gamma_ln,
    hyp2f1_113,
    rectangle_cross_ratio,
    triangle_map,
)


def density_integral(a: float, b: float) -> float:
    # integral of (t(1-t))^(-2/3) over [a, b]: split at 1/2, substitute t = u^3
    # near 0 and mirror (t -> 1-t) near 1 to remove the endpoint singularities;
    # independent quadrature oracle for the crossing-function identities
    total = 0.0
    if a < min(b, 0.5):
        hi = min(b, 0.5)
        val, _ = integrate.quad(
            lambda u: 3.0 * (1.0 - u**3) ** (-2.0 / 3.0), a ** (1.0 / 3.0), hi ** (1.0 / 3.0)
        )
        total += val
    if b > max(a, 0.5):
        lo = max(a, 0.5)
        val, _ = integrate.quad(
            lambda u: 3.0 * (1.0 - u**3) ** (-2.0 / 3.0),
            (1.0 - b) ** (1.0 / 3.0),
            (1.0 - lo) ** (1.0 / 3.0),
        )
        total += val
    return total


class TestGammaLn:
    def test_gamma_one_is_zero(self):
        assert gamma_ln(1.0) == 0.0

    @pytest.mark.parametrize("x", [0.5, 1.5, 7.0])
    def test_recurrence(self, x):
        assert gamma_ln(x + 1.0) - gamma_ln(x) == pytest.approx(math.log(x), abs=1e-12)

    def test_gamma_half_quadrature(self):
        # Gamma(1/2) = int t^(-1/2) e^(-t) dt = 2 int e^(-s^2) ds
        val, _ = integrate.quad(lambda s: 2.0 * math.exp(-s * s), 0, 40)
        assert math.exp(gamma_ln(0.5)) == pytest.approx(val, rel=1e-12)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            gamma_ln(0.0)
        with pytest.raises(ValueError):
            gamma_ln(-2.5)


class TestHyp2F1:
    def test_at_zero(self):
        assert hyp2f1_113(0.0) == 1.0

    def test_first_series_term(self):
        x = 1e-6
        expected = 1.0 + x / 6.0
        assert hyp2f1_113(x) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("x", [0.2, 0.5, 0.9])
    def test_quadrature_oracle(self, x):
        # incomplete-beta identity: int_0^x (t(1-t))^(-2/3) dt = 3 x^(1/3) 2F1
        oracle = density_integral(0.0, x) / (3.0 * x ** (1.0 / 3.0))
        assert hyp2f1_113(x) == pytest.approx(oracle, abs=1e-10)

    def test_branch_overlap(self):
        from conflab.special import _series_113

        for x in np.linspace(0.45, 0.55, 21):
            assert hyp2f1_113(float(x)) == pytest.approx(_series_113(float(x)), abs=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            hyp2f1_113(1.0)
        with pytest.raises(ValueError):
            hyp2f1_113(-0.1)


class TestCardyF:
    def test_endpoints_exact(self):
        assert cardy_F(0.0) == 0.0
        assert cardy_F(1.0) == 1.0

    def test_half_by_quadrature(self):
        # the derivative density is symmetric about 1/2 and integrates to 1
        half = density_integral(0.0, 0.5) / density_integral(0.0, 1.0)
        assert cardy_F(0.5) == pytest.approx(half, abs=1e-10)
        assert cardy_F(0.5) == pytest.approx(0.5, abs=1e-10)

    def test_one_by_quadrature(self):
        from conflab.special import _BETA_13

        assert density_integral(0.0, 1.0) == pytest.approx(_BETA_13, rel=1e-10)

    def test_symmetry_100_random(self):
        gen = np.random.default_rng(7)
        for x in gen.uniform(0.0, 1.0, size=100):
            assert cardy_F(float(x)) + cardy_F(float(1.0 - x)) == pytest.approx(1.0, abs=1e-10)

    def test_strictly_increasing(self):
        xs = np.linspace(0.0, 1.0, 201)
        vals = [cardy_F(float(x)) for x in xs]
        assert all(b > a for a, b in zip(vals, vals[1:]))


def rectangle_aspect_oracle(x: float) -> float:
    """Aspect ratio L/l of the rectangle whose cross-ratio is x, from the
    Schwarz-Christoffel map of the half-plane with prevertices 0, 1-x, 1, inf
    (trigonometric substitutions remove the inverse-square-root endpoints)."""

    def bottom(theta):  # t = (1-x) sin^2
        t = (1.0 - x) * math.sin(theta) ** 2
        return 2.0 / math.sqrt(1.0 - t)

    def side(theta):  # t = 1 - x cos^2
        t = 1.0 - x * math.cos(theta) ** 2
        return 2.0 / math.sqrt(t)

    A, _ = integrate.quad(bottom, 0, math.pi / 2)
    B, _ = integrate.quad(side, 0, math.pi / 2)
    return A / B


class TestRectangleCrossRatio:
    def test_square_is_half(self):
        assert rectangle_cross_ratio(RectangleShape(1.0, 1.0)) == pytest.approx(0.5, abs=1e-10)

    @pytest.mark.parametrize("L,l", [(2.0, 1.0), (3.0, 1.0), (1.3, 0.7)])
    def test_swap_duality(self, L, l):
        total = rectangle_cross_ratio(RectangleShape(L, l)) + rectangle_cross_ratio(
            RectangleShape(l, L)
        )
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_sc_map_oracle(self):
        for L, l in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (3.0, 2.0)]:
            x = rectangle_cross_ratio(RectangleShape(L, l))
            x_oracle = optimize.brentq(
                lambda v: rectangle_aspect_oracle(v) - L / l, 1e-9, 1 - 1e-9, xtol=1e-13
            )
            assert x == pytest.approx(x_oracle, abs=1e-8)

    def test_monotone_limit(self):
        ratios = [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625]
        xs = [rectangle_cross_ratio(RectangleShape(r, 1.0)) for r in ratios]
        assert all(b > a for a, b in zip(xs, xs[1:]))
        assert xs[-1] > 0.99

    def test_underflow_clamp_warns(self):
        with pytest.warns(RuntimeWarning):
            x = rectangle_cross_ratio(RectangleShape(1000.0, 1.0))
        assert x == 0.0

    def test_invalid_shape(self):
        with pytest.raises(ValueError):
            RectangleShape(0.0, 1.0)


def in_triangle(p: complex, slack: float = 1e-8) -> bool:
    for a, b in ((TRIANGLE_A, TRIANGLE_C), (TRIANGLE_C, TRIANGLE_B), (TRIANGLE_B, TRIANGLE_A)):
        # interior lies to the left of each directed side
        if ((b - a).conjugate() * (p - a)).imag < -slack:
            return False
    return True


class TestTriangleMap:
    def test_vertex_normalization(self):
        assert triangle_map(0.0) == TRIANGLE_A
        assert abs(triangle_map(1.0) - TRIANGLE_C) < 1e-8

    @pytest.mark.parametrize("x", [0.25, 0.5, 0.75])
    def test_interval_maps_to_AC_side(self, x):
        p = triangle_map(x)
        # on the segment [A, C]: p = C * s with s in (0, 1)
        s = p / TRIANGLE_C
        assert abs(s.imag) < 1e-8
        assert 0.0 < s.real < 1.0

    def test_images_inside_triangle(self):
        gen = np.random.default_rng(11)
        for _ in range(1000):
            z = complex(gen.uniform(-40, 40), gen.uniform(0, 40) ** 2 / 40)
            assert in_triangle(triangle_map(z))

    def test_matches_crossing_function_on_sides(self):
        # [0,1] -> [A,C] at parameter F(x); [1,inf) -> [C,B] at parameter F(1-1/x)
        for x in (0.1, 0.3, 0.8):
            assert abs(triangle_map(x) - TRIANGLE_C * cardy_F(x)) < 1e-10
        for x in (1.5, 3.0, 20.0):
            ref = TRIANGLE_C + (TRIANGLE_B - TRIANGLE_C) * cardy_F(1.0 - 1.0 / x)
            assert abs(triangle_map(x) - ref) < 1e-10

    def test_anchor_consistency(self):
        # values must agree across the internal anchor-switch thresholds
        import cmath

        for z1, z2 in [
            (0.5 - 1e-12 + 0.8j, 0.5 + 1e-12 + 0.8j),
            (cmath.rect(4.0 - 1e-12, 1.1), cmath.rect(4.0 + 1e-12, 1.1)),
        ]:
            assert abs(triangle_map(z1) - triangle_map(z2)) < 1e-9

    def test_lower_half_plane_rejected(self):
        with pytest.raises(ValueError):
            triangle_map(1.0 - 1.0j)

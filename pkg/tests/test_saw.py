import math
from fractions import Fraction

import numpy as np
import pytest

from conflab.saw import (
    ENUMERATION_CAPS,
    DiameterDistribution,
    SawCountTable,
    connectivity_bounds,
    diameter_distribution,
    enumerate_saws,
    nonintersection_exact,
    paired_disjoint_count,
)

SQUARE_MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1))
TRI_MOVES = ((1, 0), (-1, 0), (0, 1), (-1, 1), (0, -1), (1, -1))


def brute_force_counts(nmax, moves):
    """Plain recursive enumeration, no pruning, no shared state with the
    package kernels."""
    counts = [0] * (nmax + 1)

    def extend(x, y, occupied, depth):
        counts[depth] += 1
        if depth == nmax:
            return
        for dx, dy in moves:
            nxt = (x + dx, y + dy)
            if nxt in occupied:
                continue
            occupied.add(nxt)
            extend(nxt[0], nxt[1], occupied, depth + 1)
            occupied.remove(nxt)

    extend(0, 0, {(0, 0)}, 0)
    return counts[1:]


class TestEnumeration:
    def test_square_small_values(self):
        table = enumerate_saws(4)
        assert table.counts == (4, 12, 36, 100)

    def test_square_vs_bruteforce(self):
        oracle = brute_force_counts(8, SQUARE_MOVES)
        assert list(enumerate_saws(8).counts) == oracle

    def test_triangular_first_is_six(self):
        assert enumerate_saws(1, "triangular").counts == (6,)

    def test_triangular_vs_bruteforce(self):
        oracle = brute_force_counts(6, TRI_MOVES)
        assert list(enumerate_saws(6, "triangular").counts) == oracle

    def test_pruned_matches_unpruned(self):
        pruned = enumerate_saws(10)
        plain = enumerate_saws(10, pruned=False)
        assert pruned.counts == plain.counts
        tri_p = enumerate_saws(8, "triangular")
        tri_u = enumerate_saws(8, "triangular", pruned=False)
        assert tri_p.counts == tri_u.counts

    def test_growth_bound(self):
        table = enumerate_saws(12)
        for n in range(1, 13):
            assert table.a(n) >= 2**n

    def test_cap_enforced(self):
        with pytest.raises(ValueError, match="cap"):
            enumerate_saws(ENUMERATION_CAPS["square"] + 1)
        with pytest.raises(ValueError):
            enumerate_saws(0)

    def test_submultiplicativity_validated(self):
        with pytest.raises(ValueError, match="submultiplicativity"):
            SawCountTable("square", (4, 20))


class TestConnectivityBounds:
    def test_square_window(self):
        mu_upper, ratio = connectivity_bounds(enumerate_saws(12))
        assert 2.0 <= mu_upper < 3.0
        assert ratio < mu_upper  # ratio approaches mu from below at these n

    def test_triangular_at_least_three(self):
        table = enumerate_saws(10, "triangular")
        for n in range(1, 11):
            assert table.a(n) ** (1.0 / n) >= 3.0
        mu_upper, _ = connectivity_bounds(table)
        assert mu_upper >= 3.0

    def test_running_minimum_monotone(self):
        prev = math.inf
        for n in range(2, 13):
            mu, _ = connectivity_bounds(enumerate_saws(n))
            assert mu <= prev + 1e-12
            prev = mu


class TestNonintersectionExact:
    def test_small_values(self):
        table = enumerate_saws(12)
        assert nonintersection_exact(1, table) == Fraction(3, 4)
        assert nonintersection_exact(2, table) == Fraction(100, 144)

    def test_paired_enumeration_matches(self):
        table = enumerate_saws(12)
        for n in range(1, 7):
            assert paired_disjoint_count(n) == table.a(2 * n)

    def test_nonincreasing(self):
        table = enumerate_saws(12)
        vals = [nonintersection_exact(n, table) for n in range(1, 7)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_missing_entries(self):
        table = enumerate_saws(6)
        with pytest.raises(KeyError):
            nonintersection_exact(4, table)


class TestDiameters:
    def test_n1(self):
        dist = diameter_distribution(1)
        assert dist.histogram == {1: 4}

    def test_n2_hand_enumeration(self):
        dist = diameter_distribution(2)
        assert dist.histogram == {2: 8, 4: 4}
        assert dist.total() == 12

    def test_total_is_count(self):
        table = enumerate_saws(9)
        for n in (5, 7, 9):
            assert diameter_distribution(n).total() == table.a(n)

    def test_pruned_matches_unpruned_histogram(self):
        for n in (5, 8):
            a = diameter_distribution(n, pruned=True).histogram
            b = diameter_distribution(n, pruned=False).histogram
            assert a == b
        a = diameter_distribution(6, "triangular", pruned=True).histogram
        b = diameter_distribution(6, "triangular", pruned=False).histogram
        assert a == b

    def test_triangular_scaled_keys(self):
        dist = diameter_distribution(1, "triangular")
        assert dist.histogram == {4: 6}  # 4 * d^2 with unit steps
        assert dist.mean_diameter() == pytest.approx(1.0)

    def test_slope_window(self):
        means = [(n, diameter_distribution(n).mean_diameter()) for n in range(8, 17)]
        lx = np.log([n for n, _ in means])
        ly = np.log([m for _, m in means])
        slope = np.polyfit(lx, ly, 1)[0]
        assert 0.6 <= slope <= 0.9

import itertools
import math

import numpy as np
import pytest

from conflab.percolation import (
    BondConfig,
    ExplorationPath,
    _crossed_edge,
    crossing_exists,
    crossing_probability_mc,
    dual_config,
    exploration_process,
    force_halfplane_boundary,
    halfplane_config,
    largest_cluster_boundary,
    sample_bonds,
    triangle_endpoint_mc,
)
from conflab.rng import RngStream
from conflab.special import RectangleShape


def empty_config(cols, rows, p=0.5):
    return BondConfig(
        cols, rows, np.zeros((rows + 1, cols), bool), np.zeros((rows, cols + 1), bool), p
    )


def full_config(cols, rows):
    return BondConfig(
        cols, rows, np.ones((rows + 1, cols), bool), np.ones((rows, cols + 1), bool), 1.0
    )


def bfs_crossing(config, direction):
    """Brute-force BFS oracle for crossing detection."""
    cols, rows = config.cols, config.rows
    adj = {}

    def link(a, b):
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    for j in range(rows + 1):
        for i in range(cols):
            if config.h_open[j, i]:
                link((i, j), (i + 1, j))
    for j in range(rows):
        for i in range(cols + 1):
            if config.v_open[j, i]:
                link((i, j), (i, j + 1))
    if direction == "left-right":
        sources = [(0, j) for j in range(rows + 1)]
        sinks = {(cols, j) for j in range(rows + 1)}
    else:
        sources = [(i, rows) for i in range(cols + 1)]
        sinks = {(i, 0) for i in range(cols + 1)}
    seen = set(sources)
    stack = list(sources)
    while stack:
        v = stack.pop()
        if v in sinks:
            return True
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return bool(seen & sinks)


class TestSampling:
    def test_p_zero_and_one(self):
        cfg0 = sample_bonds(10, 10, 0.0, RngStream(1))
        assert not cfg0.h_open.any() and not cfg0.v_open.any()
        cfg1 = sample_bonds(10, 10, 1.0, RngStream(1))
        assert cfg1.h_open.all() and cfg1.v_open.all()

    def test_open_fraction(self):
        cfg = sample_bonds(700, 700, 0.5, RngStream(2))
        n_edges = cfg.h_open.size + cfg.v_open.size
        assert n_edges > 900000
        frac = (cfg.h_open.sum() + cfg.v_open.sum()) / n_edges
        se = math.sqrt(0.25 / n_edges)
        assert abs(frac - 0.5) <= 3 * se


class TestCrossing:
    def test_all_open_crosses_both(self):
        cfg = full_config(5, 3)
        assert crossing_exists(cfg, "left-right")
        assert crossing_exists(cfg, "top-bottom")

    def test_all_closed_crosses_neither(self):
        cfg = empty_config(5, 3)
        assert not crossing_exists(cfg, "left-right")
        assert not crossing_exists(cfg, "top-bottom")

    def test_single_open_row(self):
        cfg = empty_config(5, 3)
        cfg.h_open[1, :] = True
        assert crossing_exists(cfg, "left-right")
        assert not crossing_exists(cfg, "top-bottom")

    def test_against_bfs_oracle(self):
        rng = RngStream(3)
        for i in range(1000):
            cfg = sample_bonds(6, 6, 0.5, rng.split(i))
            for direction in ("left-right", "top-bottom"):
                assert crossing_exists(cfg, direction) == bfs_crossing(cfg, direction)

    def test_exact_duality_exhaustive_n2(self):
        # every configuration on the 2 x 3 box: left-right open crossing and
        # top-bottom dual crossing of closed edges are complementary
        cols, rows = 2, 3
        nh = (rows + 1) * cols
        nv = rows * (cols + 1)
        for bits in range(1 << (nh + nv)):
            h = np.array([(bits >> k) & 1 for k in range(nh)], bool).reshape(rows + 1, cols)
            v = np.array([(bits >> (nh + k)) & 1 for k in range(nv)], bool).reshape(
                rows, cols + 1
            )
            cfg = BondConfig(cols, rows, h, v, 0.5)
            lr = crossing_exists(cfg, "left-right")
            tb_dual = crossing_exists(dual_config(cfg), "top-bottom")
            assert lr != tb_dual

    def test_exact_duality_sampled_n3(self):
        # 3 x 4 box has 2^31 configurations; check a large random sample
        rng = RngStream(4)
        for i in range(3000):
            cfg = sample_bonds(3, 4, 0.5, rng.split(i))
            assert crossing_exists(cfg, "left-right") != crossing_exists(
                dual_config(cfg), "top-bottom"
            )

    def test_mc_p_zero(self):
        est, err = crossing_probability_mc(RectangleShape(1, 1), 8, 0.0, 200, RngStream(5))
        assert est == 0.0

    def test_mc_monotone_in_p_coupled(self):
        # same stream => shared uniforms => open sets are nested in p
        for i in range(60):
            lo = sample_bonds(12, 12, 0.45, RngStream(6, i))
            hi = sample_bonds(12, 12, 0.55, RngStream(6, i))
            assert not (lo.h_open & ~hi.h_open).any()
            assert not (lo.v_open & ~hi.v_open).any()
            if crossing_exists(lo):
                assert crossing_exists(hi)

    def test_degenerate_rectangle(self):
        with pytest.raises(ValueError, match="degenerate"):
            crossing_probability_mc(RectangleShape(0.05, 1.0), 8, 0.5, 10, RngStream(7))


class TestLargestCluster:
    def test_single_edge(self):
        cfg = empty_config(3, 3)
        cfg.h_open[1, 1] = True
        mask, perimeter = largest_cluster_boundary(cfg)
        # half-step raster: two vertex cells plus the edge cell between them
        assert mask.count() == 3
        assert perimeter == 8

    def test_all_open_box(self):
        cfg = full_config(3, 2)
        mask, perimeter = largest_cluster_boundary(cfg)
        # filled (2*3+1) x (2*2+1) block of half-step cells
        assert mask.count() == 7 * 5
        assert perimeter == 2 * (7 + 5)

    def test_empty_errors(self):
        with pytest.raises(ValueError, match="empty"):
            largest_cluster_boundary(empty_config(4, 4))

    def test_largest_by_diameter_wins(self):
        cfg = empty_config(10, 10)
        # small dense blob (bigger vertex count)
        cfg.h_open[1:4, 1:3] = True
        cfg.v_open[1:3, 1:4] = True
        # long thin path (bigger diameter)
        cfg.h_open[8, 0:9] = True
        mask, perimeter = largest_cluster_boundary(cfg)
        assert perimeter == 2 * (2 * 9 + 1) + 2  # domino row of 19 half-cells
        ys, xs = np.nonzero(mask.bits)
        assert set(np.unique(ys)) == {16}  # row y=8 doubled


class TestExploration:
    def test_all_closed_hand_trace(self):
        cfg = empty_config(8, 4)
        force_halfplane_boundary(cfg, 4)
        path = exploration_process(cfg, 4, 7)
        expected = [
            0.25 + 0.25j,
            -0.25 + 0.25j,
            -0.25 + 0.75j,
            -0.75 + 0.75j,
            -0.75 + 0.25j,
            -1.25 + 0.25j,
            -1.25 + 0.75j,
            -1.75 + 0.75j,
        ]
        assert np.allclose(path.vertices[:8], expected)
        assert path.turns[:7] == ["left", "right", "left", "left", "right", "right", "left"]

    def test_all_open_hand_trace(self):
        # the mirrored deterministic path: an eastward square-wave weaving
        # through the dips below the erased boundary edges
        cfg = full_config(8, 4)
        force_halfplane_boundary(cfg, 4)
        path = exploration_process(cfg, 4, 9)
        expected = [
            0.25 + 0.25j,
            0.75 + 0.25j,
            0.75 - 0.25j,
            1.25 - 0.25j,
            1.25 + 0.25j,
            1.75 + 0.25j,
            1.75 - 0.25j,
            2.25 - 0.25j,
            2.25 + 0.25j,
            2.75 + 0.25j,
        ]
        assert np.allclose(path.vertices, expected)
        assert path.turns[:4] == ["right", "right", "left", "left"]

    def test_deterministic(self):
        cfg, origin = halfplane_config(24, 12, 0.5, RngStream(8))
        p1 = exploration_process(cfg, origin, 500)
        p2 = exploration_process(cfg, origin, 500)
        assert (p1.vertices == p2.vertices).all()
        assert p1.turns == p2.turns

    def test_never_crosses_walls(self):
        # re-derive every crossed edge and check it is closed (erased)
        cfg, origin = halfplane_config(24, 12, 0.5, RngStream(9))
        path = exploration_process(cfg, origin, 2000)
        for z0, z1 in zip(path.vertices[:-1], path.vertices[1:]):
            k = int(round((z0.real - 0.25) * 2))
            m = int(round((z0.imag - 0.25) * 2))
            dk = int(round((z1.real - z0.real) * 2))
            dm = int(round((z1.imag - z0.imag) * 2))
            kind, x, y = _crossed_edge(k, m, dk, dm)
            i = x + origin
            if kind == "h" and 0 <= y <= cfg.rows and 0 <= i < cfg.cols:
                assert not cfg.h_open[y, i]
            elif kind == "v" and 0 <= y < cfg.rows and 0 <= i <= cfg.cols:
                assert not cfg.v_open[y, i]

    def test_length_bounded_by_edges(self):
        cfg, origin = halfplane_config(16, 8, 0.5, RngStream(10))
        n_edges = cfg.h_open.size + cfg.v_open.size
        path = exploration_process(cfg, origin, 10 ** 6)
        assert len(path) - 1 <= 4 * n_edges

    def test_no_directed_edge_revisit_validated(self):
        with pytest.raises(ValueError, match="revisits"):
            ExplorationPath(
                np.array([0.25 + 0.25j, 0.75 + 0.25j, 0.25 + 0.25j, 0.75 + 0.25j]),
                ["left", "left", "left"],
            )


class TestTriangleEndpoint:
    def test_smoke_cdf_valid(self):
        samples = triangle_endpoint_mc(8, 200, 0.5, RngStream(11))
        assert len(samples) == 200
        assert (np.diff(samples) >= 0).all()
        assert samples[0] >= 0.0 and samples[-1] <= 1.0

    def test_p_one_degenerate_at_B(self):
        samples = triangle_endpoint_mc(8, 50, 1.0, RngStream(12))
        assert (samples == 0.0).all()

    def test_side_too_small(self):
        with pytest.raises(ValueError):
            triangle_endpoint_mc(4, 10, 0.5, RngStream(13))

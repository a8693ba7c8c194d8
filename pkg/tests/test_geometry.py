import math

import numpy as np
import pytest
from scipy import ndimage

from conflab.geometry import (
    GridBoundsError,
    GridMask,
    GridSpec,
    PlanarPath,
    boundary_edge_count,
    box_counting_dimension,
    fill_hull,
    frontier_cells,
    harmonic_measure_estimate,
    load_mask,
    outer_boundary,
    rasterize_path,
    save_mask,
)
from conflab.rng import RngStream

CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def spec8():
    return GridSpec(0j, 1.0, 8, 8)


def flood_fill_oracle(bits):
    """Plain BFS flood fill from the border through unset cells."""
    rows, cols = bits.shape
    outside = np.zeros_like(bits)
    stack = [
        (y, x)
        for y in range(rows)
        for x in range(cols)
        if (y in (0, rows - 1) or x in (0, cols - 1)) and not bits[y, x]
    ]
    for y, x in stack:
        outside[y, x] = True
    while stack:
        y, x = stack.pop()
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            yy, xx = y + dy, x + dx
            if 0 <= yy < rows and 0 <= xx < cols and not bits[yy, xx] and not outside[yy, xx]:
                outside[yy, xx] = True
                stack.append((yy, xx))
    return ~outside


class TestRasterize:
    def test_horizontal_three_cells(self):
        path = PlanarPath(np.array([1.5 + 4.5j, 3.5 + 4.5j]), kind="interface")
        mask = rasterize_path(path, spec8())
        assert mask.count() == 3
        ys, xs = np.nonzero(mask.bits)
        assert set(zip(xs.tolist(), ys.tolist())) == {(1, 4), (2, 4), (3, 4)}

    def test_single_point(self):
        mask = rasterize_path(PlanarPath(np.array([2.2 + 3.7j]), kind="interface"), spec8())
        assert mask.count() == 1
        assert mask.bits[3, 2]

    def test_diagonal_four_cells_connected(self):
        path = PlanarPath(np.array([0.5 + 0.5j, 3.5 + 3.5j]), kind="interface")
        mask = rasterize_path(path, spec8())
        for k in range(4):
            assert mask.bits[k, k]
        _, n = ndimage.label(mask.bits, structure=CROSS)
        assert n == 1

    def test_out_of_bounds_names_point(self):
        path = PlanarPath(np.array([2.0 + 2.0j, 11.0 + 2.0j]), kind="interface")
        with pytest.raises(GridBoundsError, match="11"):
            rasterize_path(path, spec8())

    def test_empty_path(self):
        mask = rasterize_path(PlanarPath(np.empty(0, dtype=complex), kind="interface"), spec8())
        assert mask.count() == 0


class TestFillHull:
    def test_ring_fills_center(self):
        mask = GridMask.empty(spec8())
        for ix in range(2, 5):
            for iy in range(2, 5):
                if (ix, iy) != (3, 3):
                    mask.bits[iy, ix] = True
        filled = fill_hull(mask)
        assert filled.count() == 9
        assert filled.bits[3, 3]

    def test_single_cell_unchanged(self):
        mask = GridMask.empty(spec8())
        mask.bits[4, 4] = True
        assert (fill_hull(mask).bits == mask.bits).all()

    def test_u_shape_oracle(self):
        # open on one side: flood-fill oracle must agree and nothing is filled
        mask = GridMask.empty(GridSpec(0j, 1.0, 5, 5))
        mask.bits[1, 1:4] = True
        mask.bits[2, 1] = True
        mask.bits[2, 3] = True
        mask.bits[3, 1] = True
        mask.bits[3, 3] = True
        filled = fill_hull(mask)
        assert (filled.bits == mask.bits).all()
        assert (filled.bits == flood_fill_oracle(mask.bits)).all()

    def test_idempotent_monotone_random(self):
        gen = np.random.default_rng(5)
        for _ in range(25):
            bits = gen.random((12, 12)) < 0.4
            mask = GridMask(GridSpec(0j, 1.0, 12, 12), bits)
            filled = fill_hull(mask)
            assert (filled.bits & ~mask.bits).sum() >= 0
            assert (mask.bits & ~filled.bits).sum() == 0  # monotone
            assert (fill_hull(filled).bits == filled.bits).all()  # idempotent
            assert (filled.bits == flood_fill_oracle(mask.bits)).all()

    def test_empty_returns_empty(self):
        mask = GridMask.empty(spec8())
        assert fill_hull(mask).count() == 0


class TestOuterBoundary:
    def test_single_cell_four_edges(self):
        mask = GridMask.empty(spec8())
        mask.bits[3, 3] = True
        path = outer_boundary(mask)
        assert len(path) - 1 == 4

    def test_two_by_two_eight_edges(self):
        mask = GridMask.empty(spec8())
        mask.bits[3:5, 3:5] = True
        assert len(outer_boundary(mask)) - 1 == 8

    def test_l_tromino_eight_edges(self):
        mask = GridMask.empty(spec8())
        mask.bits[2, 2] = True
        mask.bits[2, 3] = True
        mask.bits[3, 2] = True
        assert len(outer_boundary(mask)) - 1 == 8

    def test_counterclockwise(self):
        mask = GridMask.empty(spec8())
        mask.bits[2:5, 3:5] = True
        pts = outer_boundary(mask).points
        area = 0.5 * np.sum(pts[:-1].real * pts[1:].imag - pts[1:].real * pts[:-1].imag)
        assert area > 0

    def test_rectangle_perimeter_formula(self):
        gen = np.random.default_rng(3)
        for _ in range(10):
            a = int(gen.integers(1, 6))
            b = int(gen.integers(1, 6))
            mask = GridMask.empty(GridSpec(0j, 1.0, 10, 10))
            mask.bits[1 : 1 + b, 1 : 1 + a] = True
            assert len(outer_boundary(mask)) - 1 == 2 * (a + b)
            assert boundary_edge_count(mask) == 2 * (a + b)

    def test_disconnected_warns_traces_largest(self):
        mask = GridMask.empty(spec8())
        mask.bits[1, 1] = True
        mask.bits[4:6, 4:6] = True
        with pytest.warns(RuntimeWarning, match="2 components"):
            path = outer_boundary(mask)
        assert len(path) - 1 == 8

    def test_enclosed_cell_growth_keeps_perimeter(self):
        # adding a cell strictly inside the filled hull leaves the boundary alone
        mask = GridMask.empty(spec8())
        for ix in range(2, 6):
            for iy in range(2, 6):
                if (ix, iy) not in ((3, 3), (4, 4)):
                    mask.bits[iy, ix] = True
        base = fill_hull(mask)
        p0 = len(outer_boundary(base)) - 1
        grown = mask.copy()
        grown.bits[3, 3] = True
        p1 = len(outer_boundary(fill_hull(grown))) - 1
        assert p1 >= p0
        assert p1 == p0

    def test_empty_mask_empty_path(self):
        path = outer_boundary(GridMask.empty(spec8()))
        assert len(path) == 0


class TestBoxCounting:
    def _spec(self, n):
        return GridSpec(0j, 1.0 / n, n, n)

    def test_line_slope_one(self):
        n = 256
        mask = GridMask.empty(self._spec(n))
        mask.bits[128, :] = True
        slope, err = box_counting_dimension(mask, [2, 4, 8, 16, 32])
        assert slope == pytest.approx(1.0, abs=0.05)

    def test_full_square_slope_two(self):
        n = 256
        mask = GridMask(self._spec(n), np.ones((n, n), dtype=bool))
        slope, err = box_counting_dimension(mask, [2, 4, 8, 16, 32])
        assert slope == pytest.approx(2.0, abs=0.05)

    def test_random_masks_slope_in_range(self):
        gen = np.random.default_rng(9)
        for density in (0.02, 0.2, 0.8):
            bits = gen.random((128, 128)) < density
            mask = GridMask(self._spec(128), bits)
            slope, err = box_counting_dimension(mask, [2, 4, 8, 16])
            assert 0.0 - err <= slope <= 2.0 + err

    def test_too_few_scales(self):
        mask = GridMask.empty(self._spec(64))
        with pytest.raises(ValueError):
            box_counting_dimension(mask, [2, 4])
        with pytest.raises(ValueError):
            box_counting_dimension(mask, [2, 4, 32])  # 64/32 = 2 boxes < 4

    def test_empty_mask(self):
        mask = GridMask.empty(self._spec(64))
        assert box_counting_dimension(mask, [2, 4, 8]) == (0.0, 0.0)


def disc_setup(n=64, radius=1.0):
    h = 2.4 * radius / n
    spec = GridSpec(complex(-1.2 * radius, -1.2 * radius), h, n, n)
    iy, ix = np.mgrid[0:n, 0:n]
    centers = spec.center(ix, iy)
    disc = GridMask(spec, np.abs(centers) < radius)
    pad = np.pad(disc.bits, 1)
    ring = (pad[2:, 1:-1] | pad[:-2, 1:-1] | pad[1:-1, 2:] | pad[1:-1, :-2]) & ~disc.bits
    return spec, disc, ring, centers


class TestHarmonicMeasure:
    def test_full_circle_is_one_exactly(self):
        spec, disc, ring, _ = disc_setup()
        ys, xs = np.nonzero(ring)
        target = list(zip(xs.tolist(), ys.tolist()))
        est, err = harmonic_measure_estimate(disc, None, target, 0j, 500, RngStream(1))
        assert est == 1.0

    def test_half_circle_symmetry(self):
        spec, disc, ring, centers = disc_setup()
        ys, xs = np.nonzero(ring & (centers.imag > 0))
        target = list(zip(xs.tolist(), ys.tolist()))
        est, err = harmonic_measure_estimate(disc, None, target, 0j, 4000, RngStream(2))
        assert abs(est - 0.5) <= 3 * err

    def test_partition_sums_to_one_exactly(self):
        spec, disc, ring, centers = disc_setup(48)
        angles = np.angle(centers)
        total = 0.0
        stream = RngStream(3)
        for k in range(4):
            sel = ring & (angles >= -math.pi + k * math.pi / 2) & (
                angles < -math.pi + (k + 1) * math.pi / 2
            )
            ys, xs = np.nonzero(sel)
            target = list(zip(xs.tolist(), ys.tolist()))
            est, _ = harmonic_measure_estimate(disc, None, target, 0j, 800, stream)
            total += est
        assert total == 1.0  # same stream: per-trial absorption is total

    def test_arc_from_offcenter_matches_mobius_formula(self):
        spec, disc, ring, centers = disc_setup(96)
        z0 = 0.4 + 0.15j
        # arc = boundary with angle in [0, pi/2]
        angles = np.angle(centers)
        sel = ring & (angles >= 0) & (angles <= math.pi / 2)
        ys, xs = np.nonzero(sel)
        target = list(zip(xs.tolist(), ys.tolist()))
        est, err = harmonic_measure_estimate(disc, None, target, z0, 6000, RngStream(4))
        # harmonic measure of the arc from z0: angular span after the disc
        # automorphism sending z0 to 0
        def mob(w):
            return (w - z0) / (1 - np.conj(z0) * w)

        a0 = np.angle(mob(np.exp(0j)))
        a1 = np.angle(mob(np.exp(1j * math.pi / 2)))
        span = (a1 - a0) % (2 * math.pi)
        expected = span / (2 * math.pi)
        assert abs(est - expected) <= 3 * err + 3.0 * spec.spacing

    def test_start_inside_obstacle_errors(self):
        spec, disc, ring, _ = disc_setup()
        obstacle = GridMask.empty(spec)
        sx, sy = spec.cell_of(0j)
        obstacle.bits[int(sy), int(sx)] = True
        ys, xs = np.nonzero(ring)
        with pytest.raises(ValueError, match="obstacle"):
            harmonic_measure_estimate(
                disc, obstacle, list(zip(xs.tolist(), ys.tolist())), 0j, 10, RngStream(5)
            )


class TestFrontierCells:
    def test_full_block_frontier_is_border(self):
        mask = GridMask.empty(spec8())
        mask.bits[2:6, 2:6] = True
        frontier = frontier_cells(mask)
        assert frontier.count() == 12  # 4x4 block: 16 cells minus 4 interior

    def test_frontier_excludes_filled_pocket_boundary(self):
        mask = GridMask.empty(spec8())
        for ix in range(2, 5):
            for iy in range(2, 5):
                if (ix, iy) != (3, 3):
                    mask.bits[iy, ix] = True
        frontier = frontier_cells(fill_hull(mask))
        assert frontier.count() == 8  # the center cell is not on the frontier


class TestBitmapIO:
    def test_roundtrip(self, tmp_path):
        gen = np.random.default_rng(12)
        spec = GridSpec(complex(-0.75, 1.5), 0.03125, 37, 21)
        mask = GridMask(spec, gen.random((21, 37)) < 0.3)
        file = tmp_path / "mask.bitmap"
        save_mask(mask, file)
        back = load_mask(file)
        assert back.spec == spec
        assert (back.bits == mask.bits).all()

    def test_bad_magic(self, tmp_path):
        file = tmp_path / "bad.bitmap"
        file.write_bytes(b"not a mask\n")
        with pytest.raises(ValueError):
            load_mask(file)


class TestGridSpecValidation:
    def test_memory_cap(self):
        with pytest.raises(ValueError, match="cap"):
            GridSpec(0j, 1.0, 1 << 15, 1 << 15)

    def test_lattice_walk_unit_steps(self):
        with pytest.raises(ValueError, match="unit"):
            PlanarPath(np.array([0j, 2.0 + 0j]), kind="lattice-walk")

"""Planar geometry on square grids.

Conventions used across the package:

* A grid cell (ix, iy) covers the square
  [origin + ix*spacing, origin + (ix+1)*spacing) x [.. iy ..); cell centers
  sit at origin + spacing*(ix + 0.5 + (iy + 0.5)j).  Masks are stored
  row-major as bits[iy, ix] with iy increasing upward.
* Connectivity of cells is 4-connectivity everywhere (sets and their
  complements alike); 8-connectivity is never used.
* Empty masks are legal inputs and produce empty/zero outputs.

Points of the plane are plain Python/numpy complex numbers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .rng import RngStream

MAX_GRID_CELLS = 1 << 28

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)  # 4-connectivity

PATH_KINDS = ("lattice-walk", "diffusion-sample", "interface")


class GridBoundsError(ValueError):
    """A point fell outside the grid rectangle."""


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a rectangular cell grid."""

    origin: complex
    spacing: float
    cols: int
    rows: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.cols < 1 or self.rows < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.cols}x{self.rows}")
        if self.cols * self.rows > MAX_GRID_CELLS:
            raise ValueError(
                f"grid of {self.cols}x{self.rows} cells exceeds the "
                f"{MAX_GRID_CELLS}-cell memory cap"
            )

    def cell_of(self, z) -> tuple:
        """Column/row indices of the cell containing z (arrays allowed)."""
        z = np.asarray(z)
        ix = np.floor((z.real - self.origin.real) / self.spacing).astype(np.int64)
        iy = np.floor((z.imag - self.origin.imag) / self.spacing).astype(np.int64)
        return ix, iy

    def center(self, ix, iy):
        """Center point(s) of cell(s) (ix, iy)."""
        return (
            self.origin
            + self.spacing * (np.asarray(ix) + 0.5)
            + 1j * self.spacing * (np.asarray(iy) + 0.5)
        )

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        x = z.real - self.origin.real
        y = z.imag - self.origin.imag
        w = self.cols * self.spacing
        h = self.rows * self.spacing
        return (x >= 0) & (x <= w) & (y >= 0) & (y <= h)


@dataclass
class GridMask:
    """Boolean raster over a GridSpec (set cells form the represented set)."""

    spec: GridSpec
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.spec.rows, self.spec.cols):
            raise ValueError(
                f"bits shape {self.bits.shape} does not match grid "
                f"{self.spec.rows}x{self.spec.cols}"
            )

    @classmethod
    def empty(cls, spec: GridSpec) -> "GridMask":
        return cls(spec, np.zeros((spec.rows, spec.cols), dtype=bool))

    def count(self) -> int:
        return int(self.bits.sum())

    def copy(self) -> "GridMask":
        return GridMask(self.spec, self.bits.copy())


@dataclass
class PlanarPath:
    """Sequence of plane points with step metadata.

    kind is one of 'lattice-walk' (unit steps on a lattice), 'diffusion-sample'
    (Euler samples of a diffusion at fixed time step) or 'interface' (traced
    boundary/exploration curves).  Samplers always produce at least one point;
    an empty point array only arises as the degenerate boundary of an empty
    mask.
    """

    points: np.ndarray
    kind: str = "lattice-walk"
    time_step: float = 0.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        if self.kind not in PATH_KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.time_step < 0:
            raise ValueError("time_step must be >= 0")
        if self.points.size and not np.isfinite(self.points).all():
            raise ValueError("path contains non-finite points")
        if self.kind == "lattice-walk" and len(self.points) > 1:
            steps = np.abs(np.diff(self.points))
            if not np.allclose(steps, 1.0, atol=1e-9):
                raise ValueError("lattice-walk steps must have unit length")

    def __len__(self) -> int:
        return len(self.points)


# --- rasterization ---


def _segment_dist2(c, p0, p1):
    # Squared distance from points c to segments [p0, p1] (all arrays).
    w = p1 - p0
    l2 = w.real * w.real + w.imag * w.imag
    d = c - p0
    t = d.real * w.real + d.imag * w.imag
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(l2 > 0, t / np.where(l2 > 0, l2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = p0 + t * w
    r = c - proj
    return r.real * r.real + r.imag * r.imag


def rasterize_path(path: PlanarPath, spec: GridSpec, chunk_segments: int = 200_000) -> GridMask:
    """Rasterize a path onto a grid.

    Sets every cell whose center lies within spacing/2 of some path segment,
    plus the cells needed to keep consecutive samples 4-connected (at exact
    diagonal corner crossings the connector cell is chosen by stepping in x
    first).  Raises GridBoundsError if any path point is outside the grid.
    """
    pts = path.points
    bits = np.zeros((spec.rows, spec.cols), dtype=bool)
    if pts.size == 0:
        return GridMask(spec, bits)
    inside = spec.contains(pts)
    if not inside.all():
        bad = pts[~inside][0]
        raise GridBoundsError(f"path point {bad} lies outside the grid rectangle")
    h = spec.spacing
    if pts.size == 1:
        ix, iy = spec.cell_of(pts[0])
        bits[_clip_cell(iy, spec.rows), _clip_cell(ix, spec.cols)] = True
        return GridMask(spec, bits)

    r2 = (0.5 * h) ** 2 * (1.0 + 1e-12)
    for lo in range(0, len(pts) - 1, chunk_segments):
        hi = min(lo + chunk_segments, len(pts) - 1)
        p0 = pts[lo:hi]
        p1 = pts[lo + 1 : hi + 1]
        seg_len = np.abs(p1 - p0)
        nsub = np.maximum(1, np.ceil(seg_len / (0.5 * h)).astype(np.int64))
        counts = nsub + 1
        total = int(counts.sum())
        sid = np.repeat(np.arange(hi - lo), counts)
        # in-segment sample index 0..nsub
        offs = np.arange(total) - np.repeat(np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
        t = offs / nsub[sid]
        samples = p0[sid] + t * (p1[sid] - p0[sid])
        ix, iy = spec.cell_of(samples)
        ix = _clip_cell(ix, spec.cols)
        iy = _clip_cell(iy, spec.rows)
        a0 = p0[sid]
        a1 = p1[sid]
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                cx = ix + dx
                cy = iy + dy
                ok = (cx >= 0) & (cx < spec.cols) & (cy >= 0) & (cy < spec.rows)
                if not ok.any():
                    continue
                centers = spec.center(cx[ok], cy[ok])
                sel = _segment_dist2(centers, a0[ok], a1[ok]) <= r2
                bits[cy[ok][sel], cx[ok][sel]] = True
        # connectivity repair between consecutive samples
        dix = np.diff(ix)
        diy = np.diff(iy)
        diag = (np.abs(dix) == 1) & (np.abs(diy) == 1)
        if diag.any():
            k = np.nonzero(diag)[0]
            bits[iy[k], ix[k + 1]] = True  # step in x first
    return GridMask(spec, bits)


def _clip_cell(idx, n):
    # Points exactly on the far grid edge belong to the last cell.
    return np.clip(idx, 0, n - 1)


def _raster_point_stabs(points: np.ndarray, spec: GridSpec) -> GridMask:
    """Cheap raster: cells stabbed by half-spacing samples along the polyline,
    plus 4-connectivity repair.  Statistically equivalent to rasterize_path
    for dense diffusion paths at a fraction of the cost; used by experiment
    drivers that only need hull-scale fidelity."""
    bits = np.zeros((spec.rows, spec.cols), dtype=bool)
    if points.size == 0:
        return GridMask(spec, bits)
    h = spec.spacing
    p0 = points[:-1]
    p1 = points[1:]
    if p0.size:
        nsub = np.maximum(1, np.ceil(np.abs(p1 - p0) / (0.5 * h)).astype(np.int64))
        counts = nsub + 1
        total = int(counts.sum())
        sid = np.repeat(np.arange(len(p0)), counts)
        offs = np.arange(total) - np.repeat(
            np.concatenate(([0], np.cumsum(counts)[:-1])), counts
        )
        samples = p0[sid] + (offs / nsub[sid]) * (p1[sid] - p0[sid])
    else:
        samples = points
    ix, iy = spec.cell_of(samples)
    ix = _clip_cell(ix, spec.cols)
    iy = _clip_cell(iy, spec.rows)
    bits[iy, ix] = True
    dix = np.diff(ix)
    diy = np.diff(iy)
    diag = (np.abs(dix) == 1) & (np.abs(diy) == 1)
    if diag.any():
        k = np.nonzero(diag)[0]
        bits[iy[k], ix[k + 1]] = True
    return GridMask(spec, bits)


# --- hull filling and boundaries ---


def _outside_region(bits: np.ndarray) -> np.ndarray:
    """Unset cells 4-connected to the grid border (the 'unbounded' complement)."""
    comp = ~bits
    labels, n = ndimage.label(comp, structure=_CROSS)
    if n == 0:
        return np.zeros_like(bits)
    border = np.concatenate(
        [labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]
    )
    border_ids = np.unique(border[border > 0])
    return np.isin(labels, border_ids)


def fill_hull(mask: GridMask) -> GridMask:
    """Fill every pocket not reachable from the grid border.

    Returns the union of the mask with all unset cells that cannot be reached
    from the border through unset cells by 4-connected moves.  Idempotent and
    monotone; the empty mask maps to itself.
    """
    if not mask.bits.any():
        return mask.copy()
    outside = _outside_region(mask.bits)
    return GridMask(mask.spec, ~outside)


def frontier_cells(mask: GridMask) -> GridMask:
    """Set cells 4-adjacent to the unbounded complement (the outer frontier)."""
    bits = mask.bits
    if not bits.any():
        return mask.copy()
    outside = np.pad(_outside_region(bits), 1, constant_values=True)
    touch = (
        outside[:-2, 1:-1] | outside[2:, 1:-1] | outside[1:-1, :-2] | outside[1:-1, 2:]
    )
    return GridMask(mask.spec, bits & touch)


def boundary_edge_count(mask: GridMask) -> int:
    """Number of cell edges between set cells and unset-or-outside cells."""
    b = np.pad(mask.bits, 1, constant_values=False)
    edges = 0
    edges += int((b[1:-1, 1:-1] & ~b[:-2, 1:-1]).sum())
    edges += int((b[1:-1, 1:-1] & ~b[2:, 1:-1]).sum())
    edges += int((b[1:-1, 1:-1] & ~b[1:-1, :-2]).sum())
    edges += int((b[1:-1, 1:-1] & ~b[1:-1, 2:]).sum())
    return edges


_DIRS = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}
_LEFT = {"E": "N", "N": "W", "W": "S", "S": "E"}
_RIGHT = {v: k for k, v in _LEFT.items()}


def outer_boundary(mask: GridMask) -> PlanarPath:
    """Trace the outer contour of a (hole-free) mask counterclockwise.

    Returns the closed circuit of boundary cell-edge midpoints with the set
    region kept on the left; the first midpoint is repeated at the end, so the
    discrete perimeter in edges is ``len(points) - 1``.  A disconnected mask
    triggers a warning naming the component count and only the component of
    largest area is traced.  Intended for fill_hull outputs; pinched or holed
    masks fall back to a left-turn preference at ambiguous vertices.
    """
    bits = mask.bits
    spec = mask.spec
    if not bits.any():
        return PlanarPath(np.empty(0, dtype=complex), kind="interface")
    labels, n = ndimage.label(bits, structure=_CROSS)
    if n > 1:
        warnings.warn(f"mask has {n} components; tracing the largest", RuntimeWarning)
        counts = np.bincount(labels.ravel())
        counts[0] = 0
        bits = labels == int(np.argmax(counts))

    b = np.pad(bits, 1, constant_values=False)
    iy, ix = np.nonzero(bits)
    # directed edges (vx, vy, direction) with the set cell on the left
    edges = {}

    def add(vx, vy, d):
        edges.setdefault((int(vx), int(vy)), []).append(d)

    south = ~b[iy, ix + 1]  # neighbor below unset (padded offset: rows shift)
    north = ~b[iy + 2, ix + 1]
    west = ~b[iy + 1, ix]
    east = ~b[iy + 1, ix + 2]
    for x, y in zip(ix[south], iy[south]):
        add(x, y, "E")
    for x, y in zip(ix[north] + 1, iy[north] + 1):
        add(x, y, "W")
    for x, y in zip(ix[west], iy[west] + 1):
        add(x, y, "S")
    for x, y in zip(ix[east] + 1, iy[east]):
        add(x, y, "N")

    start = min((v, d) for v, ds in edges.items() for d in ds)
    vertex, heading = start
    midpoints = []
    visited = 0
    total_edges = sum(len(ds) for ds in edges.values())
    while True:
        dx, dy = _DIRS[heading]
        mid = spec.origin + spec.spacing * (vertex[0] + 0.5 * dx + 1j * (vertex[1] + 0.5 * dy))
        midpoints.append(mid)
        edges[vertex].remove(heading)
        vertex = (vertex[0] + dx, vertex[1] + dy)
        visited += 1
        out = edges.get(vertex, [])
        if not out:
            break
        if len(out) == 1:
            heading = out[0]
        else:
            for cand in (_LEFT[heading], heading, _RIGHT[heading]):
                if cand in out:
                    heading = cand
                    break
            else:
                heading = out[0]
        if visited > total_edges:
            raise RuntimeError("boundary trace failed to close")
    midpoints.append(midpoints[0])
    return PlanarPath(np.array(midpoints), kind="interface")


# --- box counting ---


def box_counting_dimension(mask: GridMask, scales) -> tuple:
    """Least-squares box-counting slope and its standard error.

    Counts occupied s x s boxes for each box size s (grid padded up to a
    multiple of s) and fits log(count) against log(1/s).  Requires at least 3
    scales that fit >= 4 boxes along each grid side.  An empty mask yields
    (0.0, 0.0).
    """
    usable = [int(s) for s in scales if s >= 1 and min(mask.spec.cols, mask.spec.rows) // int(s) >= 4]
    if len(usable) < 3:
        raise ValueError(
            f"need >= 3 scales with at least 4 boxes per side, got {len(usable)} usable"
        )
    if not mask.bits.any():
        return 0.0, 0.0
    logn = []
    logs = []
    for s in usable:
        rows = -(-mask.spec.rows // s) * s
        cols = -(-mask.spec.cols // s) * s
        padded = np.zeros((rows, cols), dtype=bool)
        padded[: mask.spec.rows, : mask.spec.cols] = mask.bits
        boxes = padded.reshape(rows // s, s, cols // s, s).any(axis=(1, 3))
        logn.append(np.log(boxes.sum()))
        logs.append(-np.log(s))
    x = np.array(logs)
    y = np.array(logn)
    return _simple_slope(x, y)


def _simple_slope(x: np.ndarray, y: np.ndarray) -> tuple:
    n = len(x)
    xm = x.mean()
    ym = y.mean()
    sxx = ((x - xm) ** 2).sum()
    slope = ((x - xm) * (y - ym)).sum() / sxx
    resid = y - ym - slope * (x - xm)
    if n > 2:
        stderr = float(np.sqrt((resid**2).sum() / (n - 2) / sxx))
    else:
        stderr = 0.0
    return float(slope), stderr


# --- harmonic measure by lattice walk ---

_WALK_CHUNK = 4096
_DIR_BLOCK = 4096


@njit(cache=True)
def _walk_block(status, px, py, state, dirs):
    # advance each live walker (state 0) through its row of direction draws;
    # state becomes 1 (failure) or 2 (success) on absorption
    n, block = dirs.shape
    for i in range(n):
        if state[i] != 0:
            continue
        x = px[i]
        y = py[i]
        for k in range(block):
            d = dirs[i, k]
            if d == 0:
                x += 1
            elif d == 1:
                x -= 1
            elif d == 2:
                y += 1
            else:
                y -= 1
            s = status[y, x]
            if s != 0:
                state[i] = s
                break
        px[i] = x
        py[i] = y


def harmonic_measure_estimate(
    domain: GridMask,
    obstacle: GridMask | None,
    target,
    start: complex,
    trials: int,
    rng: RngStream,
    max_steps: int | None = None,
) -> tuple:
    """Hitting probability of `target` before the obstacle for lattice walks.

    Walks start at the cell containing `start` and step to uniform 4-neighbor
    cells until absorbed: on an obstacle cell (failure), on a target cell
    (success), or on any other non-domain cell (failure; target cells form
    part of the absorbing boundary).  Returns the success fraction and its
    binomial standard error.  The discretization error of the underlying
    harmonic measure is O(spacing) and is not compensated.

    Trials are processed in fixed chunks with chunk-derived substreams, so the
    returned integer success count does not depend on scheduling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = domain.spec
    status = np.ones((spec.rows + 2, spec.cols + 2), dtype=np.int8)  # 1 = failure stop
    status[1:-1, 1:-1] = np.where(domain.bits, 0, 1)
    for ix, iy in target:
        if not (0 <= ix < spec.cols and 0 <= iy < spec.rows):
            raise ValueError(f"target cell {(ix, iy)} outside the grid")
        status[iy + 1, ix + 1] = 2
    if obstacle is not None and obstacle.bits.any():
        status[1:-1, 1:-1][obstacle.bits] = 1
    sx, sy = spec.cell_of(start)
    sx, sy = int(sx), int(sy)
    if not (0 <= sx < spec.cols and 0 <= sy < spec.rows) or not domain.bits[sy, sx]:
        raise ValueError(f"start {start} is not inside the domain")
    if obstacle is not None and obstacle.bits[sy, sx]:
        raise ValueError(f"start {start} lies inside the obstacle")
    if max_steps is None:
        max_steps = 100 * (spec.cols + spec.rows) ** 2

    successes = 0
    n_chunks = -(-trials // _WALK_CHUNK)
    for chunk in range(n_chunks):
        m = min(_WALK_CHUNK, trials - chunk * _WALK_CHUNK)
        gen = rng.split(chunk).generator()
        px = np.full(m, sx + 1, dtype=np.int64)
        py = np.full(m, sy + 1, dtype=np.int64)
        state = np.zeros(m, dtype=np.int8)
        steps_done = 0
        while steps_done < max_steps and (state == 0).any():
            dirs = gen.integers(0, 4, size=(m, _DIR_BLOCK)).astype(np.int8)
            _walk_block(status, px, py, state, dirs)
            steps_done += _DIR_BLOCK
        left = int((state == 0).sum())
        if left:
            warnings.warn(
                f"{left} walks unabsorbed after {max_steps} steps; counted as failures",
                RuntimeWarning,
            )
        successes += int((state == 2).sum())
    p = successes / trials
    stderr = float(np.sqrt(p * (1.0 - p) / trials))
    return p, stderr


# --- bitmap serialization ---

_MAGIC = b"conflab-gridmask 1"


def save_mask(mask: GridMask, path) -> None:
    """Write a mask in the portable bitmap format (text header + packed bits)."""
    spec = mask.spec
    header = (
        _MAGIC
        + b"\n"
        + f"cols {spec.cols}\n".encode()
        + f"rows {spec.rows}\n".encode()
        + f"origin {spec.origin.real!r} {spec.origin.imag!r}\n".encode()
        + f"spacing {spec.spacing!r}\n".encode()
    )
    payload = np.packbits(mask.bits.ravel(), bitorder="little").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_mask(path) -> GridMask:
    with open(path, "rb") as fh:
        data = fh.read()
    lines = data.split(b"\n", 4)
    if lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a conflab gridmask file")
    fields = {}
    for line in lines[1:4]:
        key, _, val = line.partition(b" ")
        fields[key.decode()] = val.decode()
    spacing_line, _, payload = lines[4].partition(b"\n")
    key, _, val = spacing_line.partition(b" ")
    fields[key.decode()] = val.decode()
    cols = int(fields["cols"])
    rows = int(fields["rows"])
    ore, oim = fields["origin"].split()
    spec = GridSpec(complex(float(ore), float(oim)), float(fields["spacing"]), cols, rows)
    nbits = cols * rows
    raw = np.frombuffer(payload[: -(-nbits // 8)], dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")[:nbits].astype(bool).reshape(rows, cols)
    return GridMask(spec, bits)

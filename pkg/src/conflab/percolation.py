"""Critical bond percolation on the square lattice.

A BondConfig covers the vertex rectangle {0..cols} x {0..rows}; h_open[j, i]
is the edge (i,j)-(i+1,j) and v_open[j, i] the edge (i,j)-(i,j+1).  Crossing
detection is union-find over vertices with virtual side terminals; clusters
are connected components of the open subgraph.

The half-plane exploration interface walks the quarter-offset lattice: its
vertices are the points (k/2 + 1/4, m/2 + 1/4) for integers k, m, each step
has length 1/2, and every step crosses exactly one primal edge or the dual of
one primal edge.  A step is passable iff that primal edge is closed (erased),
which encodes both rules at once: the path never crosses an open primal edge
and never crosses a closed dual edge.  Conventions fixed here: the walk
starts at (1/4, 1/4) heading north (having entered through the erased
boundary edge [0,1] on the axis), and turn preference is left, straight,
right relative to the current heading.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import GridMask, GridSpec, boundary_edge_count, fill_hull
from .rng import RngStream
from .special import RectangleShape

_TRIAL_CHUNK = 512


@dataclass
class BondConfig:
    """Open/closed states of the bonds in a vertex rectangle."""

    cols: int
    rows: int
    h_open: np.ndarray
    v_open: np.ndarray
    p: float

    def __post_init__(self):
        self.h_open = np.asarray(self.h_open, dtype=bool)
        self.v_open = np.asarray(self.v_open, dtype=bool)
        if self.h_open.shape != (self.rows + 1, self.cols):
            raise ValueError(
                f"h_open shape {self.h_open.shape} != {(self.rows + 1, self.cols)}"
            )
        if self.v_open.shape != (self.rows, self.cols + 1):
            raise ValueError(
                f"v_open shape {self.v_open.shape} != {(self.rows, self.cols + 1)}"
            )
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")

    def n_vertices(self) -> int:
        return (self.cols + 1) * (self.rows + 1)


def sample_bonds(cols: int, rows: int, p: float, rng: RngStream) -> BondConfig:
    """Independent Bernoulli(p) states for every bond."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    gen = rng.generator()
    h = gen.random((rows + 1, cols)) < p
    v = gen.random((rows, cols + 1)) < p
    return BondConfig(cols, rows, h, v, p)


@njit(cache=True)
def _unite(parent, a, b):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    while parent[b] != b:
        parent[b] = parent[parent[b]]
        b = parent[b]
    if a != b:
        if a < b:
            parent[b] = a
        else:
            parent[a] = b


@njit(cache=True)
def _root(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True)
def _crossing_batch(h_open, v_open, cols, rows, term_a, term_b):
    trials = h_open.shape[0]
    stride = cols + 1
    nv = stride * (rows + 1)
    out = np.zeros(trials, dtype=np.bool_)
    for t in range(trials):
        parent = np.arange(nv + 2, dtype=np.int64)
        for j in range(rows + 1):
            base = j * stride
            for i in range(cols):
                if h_open[t, j, i]:
                    _unite(parent, base + i, base + i + 1)
        for j in range(rows):
            base = j * stride
            for i in range(stride):
                if v_open[t, j, i]:
                    _unite(parent, base + i, base + i + stride)
        for v in term_a:
            _unite(parent, nv, v)
        for v in term_b:
            _unite(parent, nv + 1, v)
        out[t] = _root(parent, nv) == _root(parent, nv + 1)
    return out


@njit(cache=True)
def _component_roots(h_open, v_open, cols, rows):
    stride = cols + 1
    nv = stride * (rows + 1)
    parent = np.arange(nv, dtype=np.int64)
    for j in range(rows + 1):
        base = j * stride
        for i in range(cols):
            if h_open[j, i]:
                _unite(parent, base + i, base + i + 1)
    for j in range(rows):
        base = j * stride
        for i in range(stride):
            if v_open[j, i]:
                _unite(parent, base + i, base + i + stride)
    roots = np.empty(nv, dtype=np.int64)
    for v in range(nv):
        roots[v] = _root(parent, v)
    return roots


def _side_vertices(config: BondConfig, direction: str) -> tuple:
    stride = config.cols + 1
    if direction == "left-right":
        a = np.arange(config.rows + 1, dtype=np.int64) * stride
        b = a + config.cols
    elif direction == "top-bottom":
        a = np.arange(stride, dtype=np.int64) + config.rows * stride  # top row
        b = np.arange(stride, dtype=np.int64)  # bottom row
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return a, b


def crossing_exists(config: BondConfig, direction: str = "left-right") -> bool:
    """True iff an open path joins the two chosen opposite sides."""
    a, b = _side_vertices(config, direction)
    out = _crossing_batch(
        config.h_open[None], config.v_open[None], config.cols, config.rows, a, b
    )
    return bool(out[0])


def dual_config(config: BondConfig) -> BondConfig:
    """Dual-lattice configuration: a dual bond is open iff the primal bond it
    crosses is closed; dual bonds crossing primal edges outside the rectangle
    count as open.  The dual of a cols x rows rectangle is (cols-1) x (rows+1),
    with top-bottom dual crossings complementary to left-right primal ones.
    """
    cols, rows = config.cols, config.rows
    if cols < 1:
        raise ValueError("dual requires cols >= 1")
    dcols = cols - 1
    drows = rows + 1
    dh = np.ones((drows + 1, dcols), dtype=bool)
    # dual h-edge at (i', j') crosses primal v-edge (i'+1, j'-1)
    if drows >= 1:
        dh[1:drows, :] = ~config.v_open[:, 1:cols]
    dv = ~config.h_open[:, :]  # dual v-edge (i', j') crosses primal h-edge (i', j')
    return BondConfig(dcols, drows, dh, dv, 1.0 - config.p)


def crossing_count(
    cols: int, rows: int, p: float, trials: int, rng: RngStream, direction: str = "left-right"
) -> int:
    """Number of sampled configurations (out of `trials`) with a crossing."""
    probe = BondConfig(
        cols, rows, np.zeros((rows + 1, cols), bool), np.zeros((rows, cols + 1), bool), p
    )
    term_a, term_b = _side_vertices(probe, direction)
    gen = rng.generator()
    hits = 0
    block = max(1, min(trials, (1 << 24) // max(cols * rows, 1)))
    done = 0
    while done < trials:
        m = min(block, trials - done)
        h = gen.random((m, rows + 1, cols)) < p
        v = gen.random((m, rows, cols + 1)) < p
        hits += int(_crossing_batch(h, v, cols, rows, term_a, term_b).sum())
        done += m
    return hits


def crossing_probability_mc(
    shape: RectangleShape,
    n: int,
    p: float,
    trials: int,
    rng: RngStream,
    direction: str = "left-right",
) -> tuple:
    """Monte Carlo crossing probability for the rectangle floor(L*n) x floor(l*n).

    Returns (estimate, binomial standard error).  Trials run in fixed chunks
    with derived substreams; the success count is schedule-independent.
    """
    cols = int(math.floor(shape.L * n))
    rows = int(math.floor(shape.l * n))
    if cols < 1 or rows < 1:
        raise ValueError(f"degenerate rectangle {cols}x{rows}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hits = 0
    n_chunks = -(-trials // _TRIAL_CHUNK)
    for chunk in range(n_chunks):
        m = min(_TRIAL_CHUNK, trials - chunk * _TRIAL_CHUNK)
        hits += crossing_count(cols, rows, p, m, rng.split(chunk), direction)
    est = hits / trials
    return est, float(math.sqrt(est * (1.0 - est) / trials))


def largest_cluster_boundary(config: BondConfig) -> tuple:
    """Filled hull and outer perimeter of the largest open cluster.

    The cluster of largest bounding-box diagonal is selected (a proxy for
    graph diameter; ties broken by vertex count, then smallest root id).  It
    is rasterized on the half-step grid: one cell per cluster vertex plus one
    cell per open cluster edge (cell size 1/2 lattice units).  This keeps the
    plane complement able to flow between diagonal cluster vertices that are
    not joined by an edge, as it can in the plane; rasterizing vertices only
    would pinch those fjords shut and measure the (smaller) accessible
    perimeter instead of the full hull boundary.  Pockets are filled and the
    perimeter is the boundary edge count of the filled hull; a single open
    edge rasterizes to 3 collinear cells with perimeter 8.
    """
    if not (config.h_open.any() or config.v_open.any()):
        raise ValueError("empty configuration: no open edge")
    cols, rows = config.cols, config.rows
    stride = cols + 1
    roots = _component_roots(config.h_open, config.v_open, cols, rows)
    has_edge = np.zeros(stride * (rows + 1), dtype=bool)
    hj, hi = np.nonzero(config.h_open)
    has_edge[hj * stride + hi] = True
    has_edge[hj * stride + hi + 1] = True
    vj, vi = np.nonzero(config.v_open)
    has_edge[vj * stride + vi] = True
    has_edge[(vj + 1) * stride + vi] = True

    verts = np.nonzero(has_edge)[0]
    vroots = roots[verts]
    vx = verts % stride
    vy = verts // stride
    order = np.argsort(vroots, kind="stable")
    vroots_s = vroots[order]
    starts = np.nonzero(np.concatenate(([True], vroots_s[1:] != vroots_s[:-1])))[0]
    ends = np.concatenate((starts[1:], [len(vroots_s)]))
    best = None
    for s, e in zip(starts, ends):
        idx = order[s:e]
        dx = int(vx[idx].max() - vx[idx].min())
        dy = int(vy[idx].max() - vy[idx].min())
        key = (dx * dx + dy * dy, e - s, -int(vroots_s[s]))
        if best is None or key > best[0]:
            best = (key, vroots_s[s])
    target_root = best[1]

    bits = np.zeros((2 * rows + 1, 2 * cols + 1), dtype=bool)
    sel = vroots == target_root
    bits[2 * vy[sel], 2 * vx[sel]] = True
    hsel = roots[hj * stride + hi] == target_root
    bits[2 * hj[hsel], 2 * hi[hsel] + 1] = True
    vsel = roots[vj * stride + vi] == target_root
    bits[2 * vj[vsel] + 1, 2 * vi[vsel]] = True
    spec = GridSpec(complex(-0.25, -0.25), 0.5, 2 * cols + 1, 2 * rows + 1)
    hull = fill_hull(GridMask(spec, bits))
    return hull, boundary_edge_count(hull)


# --- half-plane exploration interface ---


@dataclass
class ExplorationPath:
    """Quarter-offset interface walk: vertices and the turn taken at each one."""

    vertices: np.ndarray
    turns: list

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=complex)
        if len(self.vertices) > 1:
            steps = np.diff(self.vertices)
            if not np.allclose(np.abs(steps), 0.5, atol=1e-12):
                raise ValueError("exploration steps must have length 1/2")
            directed = set()
            for k in range(len(steps)):
                key = (self.vertices[k], self.vertices[k + 1])
                if key in directed:
                    raise ValueError("exploration path revisits a directed edge")
                directed.add(key)

    def __len__(self) -> int:
        return len(self.vertices)


def halfplane_config(width: int, height: int, p: float, rng: RngStream) -> tuple:
    """Critical slab configuration with the forced boundary row.

    Returns (config, origin_col): the vertex rectangle spans lattice
    x in [-origin_col, cols - origin_col], y in [0, height], and the boundary
    edges [x, x+1] at y = 0 are forced open for x < 0 and erased for x >= 0.
    """
    config = sample_bonds(2 * width, height, p, rng)
    origin_col = width
    force_halfplane_boundary(config, origin_col)
    return config, origin_col


def force_halfplane_boundary(config: BondConfig, origin_col: int) -> None:
    i = np.arange(config.cols)
    config.h_open[0, :] = i < origin_col


_HEADINGS = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}
_LEFT_OF = {"E": "N", "N": "W", "W": "S", "S": "E"}
_RIGHT_OF = {v: k for k, v in _LEFT_OF.items()}


def _crossed_edge(k: int, m: int, dk: int, dm: int) -> tuple:
    """Primal edge associated with the step from quarter-point (k, m).

    Returns ('h', x, y) for the horizontal edge [(x,y), (x+1,y)] or
    ('v', x, y) for the vertical edge [(x,y), (x,y+1)], in lattice
    coordinates relative to the quarter-point indexing (point = (k/2 + 1/4,
    m/2 + 1/4)).
    """
    if dk != 0:
        kk = k if dk > 0 else k - 1
        if kk % 2 == 0:
            return "h", kk // 2, (m + 1) // 2
        return "v", (kk + 1) // 2, m // 2
    mm = m if dm > 0 else m - 1
    if mm % 2 == 0:
        return "v", (k + 1) // 2, mm // 2
    return "h", k // 2, (mm + 1) // 2


def exploration_process(
    config: BondConfig, origin_col: int, max_steps: int
) -> ExplorationPath:
    """Deterministic left-most interface walk in a forced-boundary slab.

    Starts at the quarter-point (1/4, 1/4) heading north; at each vertex the
    walk tries to turn left, then go straight, then turn right, taking the
    first step whose associated primal edge is closed.  Stops after max_steps
    steps or upon leaving the slab.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    cols, rows = config.cols, config.rows

    def edge_open(kind, x, y):
        i = x + origin_col
        if kind == "h":
            if 0 <= y <= rows and 0 <= i < cols:
                return bool(config.h_open[y, i])
        else:
            if 0 <= y < rows and 0 <= i <= cols:
                return bool(config.v_open[y, i])
        return False  # edges outside the slab are erased

    def point(k, m):
        return complex(k / 2 + 0.25, m / 2 + 0.25)

    k, m = 0, 0
    heading = "N"
    vertices = [point(k, m)]
    turns = []
    kmin, kmax = -2 * origin_col, 2 * (cols - origin_col) - 1
    for _ in range(max_steps):
        moved = False
        for cand, turn in (
            (_LEFT_OF[heading], "left"),
            (heading, "straight"),
            (_RIGHT_OF[heading], "right"),
        ):
            dk, dm = _HEADINGS[cand]
            kind, x, y = _crossed_edge(k, m, dk, dm)
            if edge_open(kind, x, y):
                continue
            k += dk
            m += dm
            vertices.append(point(k, m))
            turns.append(turn)
            heading = cand
            moved = True
            break
        if not moved:
            # cannot happen on a proper slab (the entry edge's partner
            # crossing is always passable); guard anyway
            warnings.warn("exploration walk blocked on all sides", RuntimeWarning)
            break
        # m = -1 (y = -1/4) is the legal dip below erased boundary edges; the
        # left-most rule turns east there and pops back up, so m < -1 never
        # occurs on a proper slab
        if m < -1 or m > 2 * rows or k < kmin or k > kmax:
            break
    return ExplorationPath(np.array(vertices), turns)


# --- Cardy's formula in an equilateral triangle ---


@njit(cache=True)
def _triangle_leftmost_batch(
    edges_a, edges_b, open_bits, nv, right_ids, top_ids
):
    trials = open_bits.shape[0]
    out = np.full(trials, -1, dtype=np.int64)
    for t in range(trials):
        parent = np.arange(nv + 1, dtype=np.int64)
        for e in range(edges_a.shape[0]):
            if open_bits[t, e]:
                _unite(parent, edges_a[e], edges_b[e])
        for v in right_ids:
            _unite(parent, nv, v)  # wire the [A,C] side to a terminal
        r = _root(parent, nv)
        for pos in range(top_ids.shape[0]):
            if _root(parent, top_ids[pos]) == r:
                out[t] = pos
                break
    return out


def _triangle_region(side: int):
    # apex at (0, 0), top side [B, C] at row jmax; width grows as j/sqrt(3)
    jmax = int(round(side * math.sqrt(3.0) / 2.0))
    half = [min(int(j / math.sqrt(3.0)), side // 2) for j in range(jmax + 1)]
    ids = {}
    for j in range(jmax + 1):
        for i in range(-half[j], half[j] + 1):
            ids[(i, j)] = len(ids)
    ea, eb = [], []
    for (i, j), v in ids.items():
        if (i + 1, j) in ids:
            ea.append(v)
            eb.append(ids[(i + 1, j)])
        if (i, j + 1) in ids:
            ea.append(v)
            eb.append(ids[(i, j + 1)])
    right_ids = np.array(
        [ids[(half[j], j)] for j in range(jmax + 1)], dtype=np.int64
    )
    top_ids = np.array(
        [ids[(i, jmax)] for i in range(-half[jmax], half[jmax] + 1)], dtype=np.int64
    )
    return (
        np.array(ea, dtype=np.int64),
        np.array(eb, dtype=np.int64),
        len(ids),
        right_ids,
        top_ids,
    )


def triangle_endpoint_mc(side: int, trials: int, p: float, rng: RngStream) -> np.ndarray:
    """Normalized positions along [B, C] of the left-most top vertex connected
    to the right side [A, C] of a lattice equilateral triangle.

    Returns the sorted sample of positions in [0, 1] (0 = B, 1 = C); trials
    with no connected top vertex are recorded at 0 (the B end).  The square
    lattice only approximates the triangle, so finite-size bias decays slowly.
    """
    if side < 8:
        raise ValueError("side must be >= 8")
    ea, eb, nv, right_ids, top_ids = _triangle_region(side)
    npos = len(top_ids)
    samples = np.empty(trials, dtype=float)
    n_chunks = -(-trials // _TRIAL_CHUNK)
    for chunk in range(n_chunks):
        m = min(_TRIAL_CHUNK, trials - chunk * _TRIAL_CHUNK)
        gen = rng.split(chunk).generator()
        bits = gen.random((m, len(ea))) < p
        pos = _triangle_leftmost_batch(ea, eb, bits, nv, right_ids, top_ids)
        pos = np.where(pos < 0, 0, pos)
        samples[chunk * _TRIAL_CHUNK : chunk * _TRIAL_CHUNK + m] = pos / (npos - 1)
    return np.sort(samples)

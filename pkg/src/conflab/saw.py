"""Exact enumeration of self-avoiding walks on the square and triangular
lattices: counts, connectivity-constant bounds, the exact non-intersection
identity a_2n / a_n^2, and diameter statistics.

Enumeration is depth-first backtracking over an occupancy grid, jit-compiled,
with counts kept in 64-bit integers (all counts at the supported caps fit
comfortably) and surfaced as Python ints.  The triangular lattice uses axial
coordinates with the 6-neighbor stencil; its distances are computed on
doubled cartesian coordinates, so squared diameters are stored as the integer
4*d^2 (square-lattice squared diameters are plain integers).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

ENUMERATION_CAPS = {"square": 16, "triangular": 12}

_MOVES = {
    # first move is the pruning axis; on-axis moves have second coordinate 0
    "square": np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=np.int64),
    "triangular": np.array(
        [[1, 0], [-1, 0], [0, 1], [-1, 1], [0, -1], [1, -1]], dtype=np.int64
    ),
}

# full symmetry group order and the count of straight on-axis walks per length
_SYMMETRY = {"square": (8, 4), "triangular": (12, 6)}


@dataclass(frozen=True)
class SawCountTable:
    """Exact walk counts a_1..a_N for one lattice."""

    lattice: str
    counts: tuple

    def __post_init__(self):
        if self.lattice not in _MOVES:
            raise ValueError(f"unknown lattice {self.lattice!r}")
        n = len(self.counts)
        for i in range(n):
            if self.counts[i] < 2 ** (i + 1):
                raise ValueError(f"a_{i+1} = {self.counts[i]} violates a_n >= 2^n")
        for i in range(1, n + 1):
            for j in range(1, n + 1 - i):
                if self.a(i + j) > self.a(i) * self.a(j):
                    raise ValueError(f"submultiplicativity fails at ({i}, {j})")

    @property
    def nmax(self) -> int:
        return len(self.counts)

    def a(self, n: int) -> int:
        if not 1 <= n <= len(self.counts):
            raise KeyError(f"a_{n} not in table (have 1..{len(self.counts)})")
        return self.counts[n - 1]


@dataclass(frozen=True)
class DiameterDistribution:
    """Histogram of squared diameters over all walks of one length.

    Keys are d^2 for the square lattice and 4*d^2 for the triangular lattice
    (doubled coordinates keep them integral); counts sum to a_n.
    """

    n: int
    lattice: str
    histogram: dict

    def total(self) -> int:
        return sum(self.histogram.values())

    def mean_diameter(self) -> float:
        scale = 2.0 if self.lattice == "triangular" else 1.0
        tot = self.total()
        return sum(np.sqrt(k) / scale * c for k, c in self.histogram.items()) / tot


def _dist_weights(lattice: str) -> tuple:
    # coefficients (wa, wb, wc) of the squared displacement wa*dx^2 +
    # wb*dx*dy + wc*dy^2 in integer units: square dx^2 + dy^2; triangular in
    # axial coordinates 4*d^2 = 4*(dq^2 + dq*dr + dr^2) (doubled cartesian
    # coordinates keep it integral)
    return (1, 0, 1) if lattice == "square" else (4, 4, 4)


@njit(cache=True)
def _enumerate_kernel(nmax, moves, prune, wa, wb, wc, diam_cols):
    nm = moves.shape[0]
    off = nmax + 1
    size = 2 * nmax + 3
    visited = np.zeros((size, size), dtype=np.uint8)
    counts = np.zeros(nmax + 1, dtype=np.int64)
    hist = np.zeros((nmax + 1, diam_cols), dtype=np.int64)
    xs = np.zeros(nmax + 1, dtype=np.int64)
    ys = np.zeros(nmax + 1, dtype=np.int64)
    d2s = np.zeros(nmax + 1, dtype=np.int64)
    mis = np.zeros(nmax + 1, dtype=np.int64)
    offax = np.zeros(nmax + 1, dtype=np.uint8)
    visited[off, off] = 1
    depth = 0
    while depth >= 0:
        advanced = False
        if depth < nmax:
            while mis[depth] < nm:
                k = mis[depth]
                mis[depth] += 1
                if prune:
                    if depth == 0 and k != 0:
                        break  # only the on-axis first step survives pruning
                    if offax[depth] == 0 and moves[k, 1] < 0:
                        continue  # first off-axis move must go to positive side
                nx = xs[depth] + moves[k, 0]
                ny = ys[depth] + moves[k, 1]
                if visited[nx + off, ny + off]:
                    continue
                depth += 1
                xs[depth] = nx
                ys[depth] = ny
                visited[nx + off, ny + off] = 1
                mis[depth] = 0
                offax[depth] = offax[depth - 1] | (moves[k, 1] != 0)
                d2 = d2s[depth - 1]
                for j in range(depth):
                    dx = nx - xs[j]
                    dy = ny - ys[j]
                    v = wa * dx * dx + wb * dx * dy + wc * dy * dy
                    if v > d2:
                        d2 = v
                d2s[depth] = d2
                counts[depth] += 1
                hist[depth, d2] += 1
                advanced = True
                break
        if not advanced:
            visited[xs[depth] + off, ys[depth] + off] = 0
            depth -= 1
    return counts, hist


@njit(cache=True)
def _paired_inner(n, visited, moves, off):
    # count self-avoiding walks of length n from the origin on the partially
    # occupied grid (origin itself is already marked)
    nm = moves.shape[0]
    xs = np.zeros(n + 1, dtype=np.int64)
    ys = np.zeros(n + 1, dtype=np.int64)
    mis = np.zeros(n + 1, dtype=np.int64)
    total = 0
    depth = 0
    while depth >= 0:
        advanced = False
        if depth < n:
            while mis[depth] < nm:
                k = mis[depth]
                mis[depth] += 1
                nx = xs[depth] + moves[k, 0]
                ny = ys[depth] + moves[k, 1]
                if visited[nx + off, ny + off]:
                    continue
                depth += 1
                xs[depth] = nx
                ys[depth] = ny
                visited[nx + off, ny + off] = 1
                mis[depth] = 0
                if depth == n:
                    total += 1
                advanced = True
                break
        if not advanced:
            if depth > 0:
                visited[xs[depth] + off, ys[depth] + off] = 0
            depth -= 1
    return total


@njit(cache=True)
def _paired_kernel(n, moves):
    # ordered pairs (w, w') of length-n walks with w{1..n} disjoint from
    # w'{0..n}; enumerates w and counts compatible w' at each leaf
    nm = moves.shape[0]
    off = 2 * n + 1
    size = 4 * n + 3
    visited = np.zeros((size, size), dtype=np.uint8)
    xs = np.zeros(n + 1, dtype=np.int64)
    ys = np.zeros(n + 1, dtype=np.int64)
    mis = np.zeros(n + 1, dtype=np.int64)
    visited[off, off] = 1
    total = 0
    depth = 0
    while depth >= 0:
        advanced = False
        if depth < n:
            while mis[depth] < nm:
                k = mis[depth]
                mis[depth] += 1
                nx = xs[depth] + moves[k, 0]
                ny = ys[depth] + moves[k, 1]
                if visited[nx + off, ny + off]:
                    continue
                depth += 1
                xs[depth] = nx
                ys[depth] = ny
                visited[nx + off, ny + off] = 1
                mis[depth] = 0
                if depth == n:
                    total += _paired_inner(n, visited, moves, off)
                advanced = True
                break
        if not advanced:
            visited[xs[depth] + off, ys[depth] + off] = 0
            depth -= 1
    return total


def _check_cap(n: int, lattice: str) -> None:
    if lattice not in _MOVES:
        raise ValueError(f"unknown lattice {lattice!r}")
    cap = ENUMERATION_CAPS[lattice]
    if n > cap:
        raise ValueError(f"n = {n} exceeds the {lattice} enumeration cap {cap}")
    if n < 1:
        raise ValueError("n must be >= 1")


def _run_enumeration(n: int, lattice: str, pruned: bool):
    wa, wb, wc = _dist_weights(lattice)
    scale = 4 if lattice == "triangular" else 1
    diam_cols = scale * n * n + 1
    counts, hist = _enumerate_kernel(n, _MOVES[lattice], pruned, wa, wb, wc, diam_cols)
    if pruned:
        group, straight = _SYMMETRY[lattice]
        full = counts * group
        full_hist = hist * group
        for d in range(1, n + 1):
            # the straight on-axis walk is the unique one without off-axis
            # moves; it was counted once but has only `straight` distinct images
            full[d] -= group - straight
            full_hist[d, scale * d * d] -= group - straight
        return full, full_hist
    return counts, hist


def enumerate_saws(n: int, lattice: str = "square", pruned: bool = True) -> SawCountTable:
    """Exact counts a_1..a_n of self-avoiding walks from a fixed origin.

    `pruned` enumerates one representative per symmetry class and multiplies
    back (exact); the unpruned mode walks the full tree and must agree.
    """
    _check_cap(n, lattice)
    counts, _ = _run_enumeration(n, lattice, pruned)
    return SawCountTable(lattice, tuple(int(c) for c in counts[1:]))


def diameter_distribution(n: int, lattice: str = "square", pruned: bool = True) -> DiameterDistribution:
    """Exact histogram of squared walk diameters at length n."""
    _check_cap(n, lattice)
    _, hist = _run_enumeration(n, lattice, pruned)
    row = hist[n]
    keys = np.nonzero(row)[0]
    return DiameterDistribution(n, lattice, {int(k): int(row[k]) for k in keys})


def connectivity_bounds(table: SawCountTable) -> tuple:
    """Rigorous upper bound on the connectivity constant, plus a ratio heuristic.

    mu = inf_n a_n^(1/n), so min over the stored range bounds mu from above;
    the last count ratio a_N / a_{N-1} is reported as a (non-rigorous) point
    estimate.
    """
    if table.nmax < 2:
        raise ValueError("need at least two counts")
    mu_upper = min(table.a(n) ** (1.0 / n) for n in range(1, table.nmax + 1))
    ratio_last = table.a(table.nmax) / table.a(table.nmax - 1)
    return mu_upper, ratio_last


def nonintersection_exact(n: int, table: SawCountTable) -> Fraction:
    """Exact non-intersection probability a_2n / a_n^2 of two uniform walks."""
    a2n = table.a(2 * n)  # raises KeyError if missing
    an = table.a(n)
    return Fraction(a2n, an * an)


def paired_disjoint_count(n: int, lattice: str = "square") -> int:
    """Direct enumeration of ordered disjoint walk pairs (equals a_2n)."""
    _check_cap(2 * n, lattice)
    return int(_paired_kernel(n, _MOVES[lattice]))

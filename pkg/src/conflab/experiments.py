"""Composite experiments: exponent estimators, equality-in-law comparisons,
log-log fitting, and result serialization.

Every experiment is a deterministic function of (parameters, master seed,
worker count-independent): trials are partitioned into fixed chunks, chunk i
draws from the substream split(i) of the experiment's stream, and partial
results are reduced in chunk order.  Worker threads only change who computes
a chunk, never what it contains.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from . import geometry, loewner, paths, percolation, saw
from .geometry import GridMask, GridSpec, PlanarPath
from .rng import GENERATOR_ID, RngStream
from .special import RectangleShape, cardy_F, rectangle_cross_ratio, triangle_map
from .special import TRIANGLE_B, TRIANGLE_C


class ConfigError(ValueError):
    """Invalid experiment configuration; names the offending key."""


@dataclass(frozen=True)
class FitReport:
    slope: float
    intercept: float
    slope_stderr: float
    residual_norm: float


@dataclass
class ExperimentResult:
    experiment_id: str
    parameters: dict
    master_seed: int
    points: list
    fit: FitReport | None
    runtime_seconds: float

    def to_dict(self) -> dict:
        fit = None
        if self.fit is not None:
            fit = {
                "slope": self.fit.slope,
                "intercept": self.fit.intercept,
                "slope-stderr": self.fit.slope_stderr,
                "residual-norm": self.fit.residual_norm,
            }
        return {
            "experiment-id": self.experiment_id,
            "parameters": self.parameters,
            "master-seed": self.master_seed,
            "points": [[s, e, se] for (s, e, se) in self.points],
            "fit": fit,
            "runtime-seconds": self.runtime_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scale", "estimate", "stderr"])
            for s, e, se in self.points:
                w.writerow([repr(float(s)), repr(float(e)), repr(float(se))])

    def write_svg(self, path) -> None:
        write_loglog_svg(self, path)


def fit_exponent(points) -> FitReport:
    """Weighted least squares of log y against log x.

    `points` is a sequence of (x, y, yerr) with x, y > 0; weights come from
    the relative errors yerr/y (zero errors are floored at 1e-12, treating
    those points as exact).  The slope standard error propagates the supplied
    errors; residual_norm is the weighted RMS residual.
    """
    pts = [(float(x), float(y), float(e)) for x, y, e in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    for x, y, e in pts:
        if not (x > 0 and y > 0):
            raise ValueError(f"fit_exponent requires positive x and y, got ({x}, {y})")
        if e < 0:
            raise ValueError("negative error bar")
    lx = np.array([math.log(x) for x, _, _ in pts])
    ly = np.array([math.log(y) for _, y, _ in pts])
    sig = np.array([max(e / y, 1e-12) for _, y, e in pts])
    w = 1.0 / sig**2
    wsum = w.sum()
    xbar = (w * lx).sum() / wsum
    sxx = (w * (lx - xbar) ** 2).sum()
    slope = (w * (lx - xbar) * ly).sum() / sxx
    intercept = (w * (ly - slope * lx)).sum() / wsum
    resid = ly - slope * lx - intercept
    residual_norm = float(math.sqrt((w * resid**2).sum() / wsum))
    return FitReport(float(slope), float(intercept), float(math.sqrt(1.0 / sxx)), residual_norm)


def _run_chunks(total: int, chunk_size: int, fn, rng: RngStream, workers: int = 1) -> list:
    """fn(chunk_index, count, stream) over fixed chunks; results in chunk order."""
    jobs = []
    done = 0
    i = 0
    while done < total:
        m = min(chunk_size, total - done)
        jobs.append((i, m, rng.split(i)))
        done += m
        i += 1
    if workers <= 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda j: fn(*j), jobs))


def _binom(hits: int, trials: int) -> tuple:
    p = hits / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


# --- scaling-exponent experiments ---


def bm_frontier_dimension(
    resolution: int = 2048,
    trials: int = 20,
    rng: RngStream = RngStream(0),
    workers: int = 1,
    scales=None,
) -> dict:
    """Box-counting dimension of the outer frontier of a unit-time BM hull.

    Each trial samples planar BM on [0, 1] at dt = spacing^2 (rms step equal
    to one cell), rasterizes it at the given resolution (spacing 1/resolution),
    fills the hull, extracts the frontier cells and fits the box-counting
    slope; the dimension estimate is the mean slope across trials.
    """
    h = 1.0 / resolution
    if scales is None:
        base = max(1, resolution // 256)
        scales = [base * (1 << k) for k in range(6)]

    def one(idx, count, stream):
        out = []
        for k in range(count):
            gen = stream.split(k).generator()
            n = resolution * resolution
            inc = gen.normal(0.0, h, size=(n, 2))
            pts = np.empty(n + 1, dtype=complex)
            pts[0] = 0.0
            np.cumsum(inc[:, 0] + 1j * inc[:, 1], out=pts[1:])
            lo = complex(pts.real.min() - 2 * h, pts.imag.min() - 2 * h)
            cols = int((pts.real.max() - lo.real) / h) + 3
            rows = int((pts.imag.max() - lo.imag) / h) + 3
            spec = GridSpec(lo, h, cols, rows)
            raster = geometry.rasterize_path(
                PlanarPath(pts, kind="diffusion-sample", time_step=h * h), spec
            )
            hull = geometry.fill_hull(raster)
            frontier = geometry.frontier_cells(hull)
            out.append(geometry.box_counting_dimension(frontier, scales))
        return out

    chunks = _run_chunks(trials, 1, one, rng, workers)
    slopes = [s for chunk in chunks for (s, _) in chunk]
    errs = [e for chunk in chunks for (_, e) in chunk]
    mean = float(np.mean(slopes))
    sem = float(np.std(slopes, ddof=1) / math.sqrt(len(slopes))) if len(slopes) > 1 else 0.0
    return {
        "points": [(float(k + 1), float(s), float(e)) for k, (s, e) in enumerate(zip(slopes, errs))],
        "fit": FitReport(mean, 0.0, sem, 0.0),
        "scales": list(scales),
    }


def _disconnection_trial(t: int, gen) -> bool:
    # two SRWs of length t from 0; True if the site (1, 0) stays connected to
    # the outer boundary in the complement of their union
    steps = np.array([1, -1, 1j, -1j])
    r1 = np.concatenate(([0], np.cumsum(steps[gen.integers(0, 4, size=t)])))
    r2 = np.concatenate(([0], np.cumsum(steps[gen.integers(0, 4, size=t)])))
    pts = np.concatenate([r1, r2])
    xs = np.rint(pts.real).astype(np.int64)
    ys = np.rint(pts.imag).astype(np.int64)
    x0, y0 = xs.min() - 2, ys.min() - 2
    W = xs.max() - x0 + 3
    H = ys.max() - y0 + 3
    bits = np.zeros((H, W), dtype=bool)
    bits[ys - y0, xs - x0] = True
    mx, my = 1 - x0, -y0
    if bits[my, mx]:
        return False  # marked site covered: counted as disconnected
    comp = ~bits
    labels, _ = ndimage.label(comp, structure=geometry._CROSS)
    return labels[my, mx] == labels[0, 0]


def bm_disconnection_mc(
    scales=(1024, 4096, 16384, 65536),
    trials: int = 600,
    rng: RngStream = RngStream(0),
    workers: int = 1,
) -> dict:
    """Probability that two length-t walks from 0 leave the site at distance 1
    connected to infinity, fitted against t."""
    points = []
    for si, t in enumerate(scales):
        def one(idx, count, stream, t=t):
            gen = stream.generator()
            return sum(_disconnection_trial(t, gen) for _ in range(count))

        hits = sum(_run_chunks(trials, 64, one, rng.split(1000 + si), workers))
        est, se = _binom(hits, trials)
        points.append((float(t), est, se))
    return {"points": points, "fit": fit_exponent(points)}


def cut_point_count(walk: PlanarPath) -> int:
    """Number of interior times k in {1..n-1} with S[0..k] disjoint from S[k+1..n].

    A site visited first at time f and last at time l blocks all k in
    [f, l-1]; cut times are the uncovered interior times.  Linear time via a
    coverage difference array.
    """
    if walk.kind != "lattice-walk":
        raise ValueError("cut points are defined for lattice walks")
    pts = walk.points
    n = len(pts) - 1
    if n < 2:
        return 0
    xs = np.rint(pts.real).astype(np.int64)
    ys = np.rint(pts.imag).astype(np.int64)
    keys = (xs - xs.min()) * (ys.max() - ys.min() + 2) + (ys - ys.min())
    order = np.argsort(keys, kind="stable")
    ks = keys[order]
    firsts = np.concatenate(([True], ks[1:] != ks[:-1]))
    group_first = order[firsts]
    group_last = np.maximum.reduceat(order, np.nonzero(firsts)[0])
    cover = np.zeros(n + 2, dtype=np.int64)
    has_span = group_last > group_first
    np.add.at(cover, group_first[has_span], 1)
    np.add.at(cover, group_last[has_span], -1)
    blocked = np.cumsum(cover)[: n + 1] > 0
    return int(np.count_nonzero(~blocked[1:n]))


def cut_point_scaling(
    lengths=(1024, 2048, 4096, 8192, 16384),
    trials: int = 400,
    rng: RngStream = RngStream(0),
    workers: int = 1,
) -> dict:
    """Mean cut-point counts of SRW paths against walk length, with fit."""
    points = []
    for si, n in enumerate(lengths):
        def one(idx, count, stream, n=n):
            vals = []
            for k in range(count):
                w = paths.simple_random_walk(n, stream.split(k))
                vals.append(cut_point_count(w))
            return vals

        vals = [v for chunk in _run_chunks(trials, 64, one, rng.split(2000 + si), workers) for v in chunk]
        mean = float(np.mean(vals))
        sem = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
        points.append((float(n), mean, sem))
    return {"points": points, "fit": fit_exponent(points)}


# --- harmonic-measure identity ---


def _disc_setup(resolution: int):
    h = 1.0 / resolution
    half = resolution + 4
    spec = GridSpec(complex(-half * h, -half * h), h, 2 * half, 2 * half)
    iy, ix = np.mgrid[0 : spec.rows, 0 : spec.cols]
    centers = spec.center(ix, iy)
    disc = np.abs(centers) < 1.0
    pad = np.pad(disc, 1)
    ring = (pad[2:, 1:-1] | pad[:-2, 1:-1] | pad[1:-1, 2:] | pad[1:-1, :-2]) & ~disc
    return spec, GridMask(spec, disc), ring


def _bm_hull_in_disc(spec: GridSpec, rng: RngStream, dt: float) -> GridMask:
    gen = rng.generator()
    block = 4096
    pts = [np.zeros(1, dtype=complex)]
    z = 0.0 + 0.0j
    for _ in range(200):
        inc = gen.normal(0.0, math.sqrt(dt), size=(block, 2))
        seg = z + np.cumsum(inc[:, 0] + 1j * inc[:, 1])
        out = np.nonzero(np.abs(seg) >= 1.0)[0]
        if out.size:
            pts.append(seg[: out[0] + 1])
            break
        pts.append(seg)
        z = seg[-1]
    else:
        warnings.warn("BM failed to reach the unit circle; truncating", RuntimeWarning)
    path = np.concatenate(pts)
    # clip the final point onto the circle so the raster stays in the disc
    if abs(path[-1]) >= 1.0:
        p0, p1 = path[-2], path[-1]
        w = p1 - p0
        a = (w * w.conjugate()).real
        b = 2.0 * (p0 * w.conjugate()).real
        c = (p0 * p0.conjugate()).real - 1.0
        t = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
        path[-1] = p0 + t * w * (1.0 - 1e-9)
    return geometry.fill_hull(geometry._raster_point_stabs(path, spec))


def _status_grid(domain: GridMask, obstacle: GridMask | None, target_bits: np.ndarray):
    status = np.ones((domain.spec.rows + 2, domain.spec.cols + 2), dtype=np.int8)
    status[1:-1, 1:-1] = np.where(domain.bits, 0, 1)
    status[1:-1, 1:-1][target_bits] = 2
    if obstacle is not None:
        status[1:-1, 1:-1][obstacle.bits] = 1
    return status


def harmonic_identity_check(
    epsilons=(0.125, 0.0625, 0.03125, 0.015625),
    trials: int = 1500,
    rng: RngStream = RngStream(0),
    resolution: int = 256,
    walks_per_hull: int = 16,
    workers: int = 1,
) -> dict:
    """Two routes to P[two Brownian paths from 0 and eps stay disjoint].

    Route one samples independent (hull, walk) pairs: a BM hull from 0
    stopped on the unit circle, and a lattice walk from eps absorbed on the
    circle (success) or the hull (failure).  Route two averages, over an
    independent hull sample, the per-hull harmonic-measure estimate from eps.
    Both estimate the same discretized quantity; the report carries their
    z-scores and the log-log slope of route one across eps.
    """
    spec, disc, ring = _disc_setup(resolution)
    dt = (1.0 / resolution) ** 2
    max_steps = 60 * resolution * resolution

    def direct(idx, count, stream, eps):
        sx, sy = spec.cell_of(complex(eps, 0.0))
        block = 1 << 16
        hits = 0
        for k in range(count):
            sub = stream.split(k)
            hull = _bm_hull_in_disc(spec, sub.split(0), dt)
            if hull.bits[int(sy), int(sx)]:
                continue  # start swallowed by the hull: counted as intersecting
            status = _status_grid(disc, hull, ring)
            gen = sub.split(1).generator()
            px = np.array([int(sx) + 1], dtype=np.int64)
            py = np.array([int(sy) + 1], dtype=np.int64)
            state = np.zeros(1, dtype=np.int8)
            steps = 0
            while state[0] == 0 and steps < max_steps:
                dirs = gen.integers(0, 4, size=(1, block)).astype(np.int8)
                geometry._walk_block(status, px, py, state, dirs)
                steps += block
            hits += state[0] == 2
        return hits

    def hull_average(idx, count, stream, eps):
        vals = []
        start = complex(eps, 0.0)
        sx, sy = spec.cell_of(start)
        for k in range(count):
            sub = stream.split(k)
            hull = _bm_hull_in_disc(spec, sub.split(0), dt)
            if hull.bits[int(sy), int(sx)]:
                vals.append(0.0)
                continue
            ys, xs = np.nonzero(ring)
            est, _ = geometry.harmonic_measure_estimate(
                disc, hull, list(zip(xs.tolist(), ys.tolist())), start,
                walks_per_hull, sub.split(1), max_steps=max_steps,
            )
            vals.append(est)
        return vals

    direct_points = []
    avg_points = []
    zscores = []
    for ei, eps in enumerate(epsilons):
        hits = sum(
            _run_chunks(trials, 50, lambda i, c, s: direct(i, c, s, eps), rng.split(10 + ei), workers)
        )
        p1, s1 = _binom(hits, trials)
        n_hulls = max(20, trials // walks_per_hull)
        vals = [
            v
            for chunk in _run_chunks(
                n_hulls, 25, lambda i, c, s: hull_average(i, c, s, eps), rng.split(50 + ei), workers
            )
            for v in chunk
        ]
        p2 = float(np.mean(vals))
        s2 = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
        direct_points.append((float(eps), p1, s1))
        avg_points.append((float(eps), p2, s2))
        denom = math.sqrt(s1 * s1 + s2 * s2)
        zscores.append((p1 - p2) / denom if denom > 0 else 0.0)
    fit = fit_exponent(direct_points) if len(direct_points) >= 3 else None
    return {
        "points": direct_points,
        "hull_points": avg_points,
        "zscores": zscores,
        "fit": fit,
    }


# --- equality-in-law comparisons ---


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.abs(fa - fb).max())


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def ks_to_uniform(samples: np.ndarray) -> float:
    s = np.sort(np.asarray(samples, dtype=float))
    n = len(s)
    up = np.arange(1, n + 1) / n - s
    dn = s - np.arange(0, n) / n
    return float(max(up.max(), dn.max()))


def sle_vs_reflected_bm(
    trials: int = 2000,
    rng: RngStream = RngStream(0),
    height: float = 1.0,
    half_width: float = 2.0,
    sle_dt: float = 2e-4,
    bm_dt: float = 1e-4,
    n_probes: int = 801,
    horizon: float = 4.0,
) -> dict:
    """First-contact location on a horizontal segment: SLE_6 hulls vs hulls of
    obliquely reflected Brownian motion (one-stage marginal comparison).

    Both sides record the real coordinate of the first contact with
    J = [-half_width + i*height, half_width + i*height]; the distributions
    are compared with a two-sample KS statistic.
    """
    probes = np.linspace(-half_width, half_width, n_probes) + 1j * height
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        xs_sle = loewner.chordal_first_contact_mc(
            6.0, probes, sle_dt, horizon, trials, rng.split(0)
        )
        xs_bm = paths.reflected_hits_on_horizontal_segment(
            height, half_width, bm_dt, paths.ReflectionField(), rng.split(1), trials
        )
    a = xs_sle[~np.isnan(xs_sle)]
    b = xs_bm[~np.isnan(xs_bm)]
    unresolved = (len(xs_sle) - len(a)) + (len(xs_bm) - len(b))
    status = "ok"
    if len(a) < trials // 2 or len(b) < trials // 2:
        status = "horizon-exhausted"
    ks = ks_two_sample(a, b) if status == "ok" else float("inf")
    return {
        "ks": ks,
        "critical_1pct": ks_critical(max(len(a), 1), max(len(b), 1)),
        "n_sle": int(len(a)),
        "n_bm": int(len(b)),
        "unresolved": int(unresolved),
        "status": status,
    }


def reflected_bm_cardy(
    trials: int = 10000,
    rng: RngStream = RngStream(0),
    dt: float = 1e-4,
    vertical_control: bool = False,
) -> dict:
    """Endpoint law of the triangle-mapped reflected Brownian motion.

    Reflected BM in the half-plane (oblique pi/3 field by default) is stopped
    on [1, inf); the hit is mapped by the half-plane-to-triangle map and its
    position along the far side [B, C] is compared to the uniform law by KS.
    The vertical-field variant is a negative control.
    """
    field = paths.ReflectionField.vertical() if vertical_control else paths.ReflectionField()
    xs = paths.reflected_hits_on_ray(1.0, dt, field, rng.split(0), trials)
    span = TRIANGLE_C - TRIANGLE_B
    s = np.array(
        [((triangle_map(x) - TRIANGLE_B) / span).real for x in xs]
    )
    s = np.clip(s, 0.0, 1.0)
    ks = ks_to_uniform(s)
    qs = np.quantile(s, np.linspace(0.0, 1.0, 101))
    return {
        "ks": ks,
        "samples": np.sort(s),
        "quantiles": qs,
        "on_segment": bool(np.all((s >= 0.0) & (s <= 1.0))),
    }


def exploration_vs_sle(
    trials: int = 800,
    rng: RngStream = RngStream(0),
    width: int = 192,
    height: int = 80,
    line_height: int = 48,
    sle_dt: float = 5e-4,
    workers: int = 1,
) -> dict:
    """Exploratory comparison of the percolation interface with SLE_6.

    Records where the discrete exploration path first reaches a horizontal
    line (normalized by the line height) and compares against the first
    contact of chordal SLE_6 hulls with the line Im z = 1, via two-sample KS.
    The first-contact coordinate has an infinite-mean sideways tail, so both
    sides censor contacts beyond the slab's horizontal window (paths that
    leave the slab sideways are dropped, and the SLE probe segment spans the
    same window).  No convergence threshold is asserted; the scaling-limit
    claim is a conjecture.
    """
    def explore(idx, count, stream):
        vals = []
        for k in range(count):
            config, origin = percolation.halfplane_config(width, height, 0.5, stream.split(k))
            path = percolation.exploration_process(config, origin, 16 * (width * height))
            ys = path.vertices.imag
            hit = np.nonzero(ys >= line_height)[0]
            if hit.size:
                vals.append(path.vertices[hit[0]].real / line_height)
        return vals

    xs_exp = [v for c in _run_chunks(trials, 32, explore, rng.split(0), workers) for v in c]
    half_w = width / line_height  # the slab window in line-height units
    probes = np.linspace(-half_w, half_w, 1281) + 1j
    xs_sle = loewner.chordal_first_contact_mc(6.0, probes, sle_dt, 6.0, trials, rng.split(1))
    xs_sle = xs_sle[~np.isnan(xs_sle)]
    ks = ks_two_sample(np.array(xs_exp), xs_sle)
    return {
        "ks": ks,
        "critical_1pct": ks_critical(max(len(xs_exp), 1), max(len(xs_sle), 1)),
        "n_exploration": len(xs_exp),
        "n_sle": int(len(xs_sle)),
    }


# --- experiment registry and dispatch ---


def _pts_exact(pairs):
    # exact integer estimates stay integers through serialization
    return [(float(a), int(b), 0.0) for a, b in pairs]


def _exp_saw_count(params, rng, workers):
    n = int(params.get("n", 12))
    lattice = params.get("lattice", "square")
    table = saw.enumerate_saws(n, lattice)
    points = _pts_exact((k, table.a(k)) for k in range(1, n + 1))
    return {"points": points, "fit": None}


def _exp_saw_diameter(params, rng, workers):
    n_min = int(params.get("n_min", 8))
    n_max = int(params.get("n_max", 16))
    lattice = params.get("lattice", "square")
    points = []
    for n in range(n_min, n_max + 1):
        dist = saw.diameter_distribution(n, lattice)
        points.append((float(n), dist.mean_diameter(), 0.0))
    return {"points": points, "fit": fit_exponent(points)}


def _exp_srw_nonintersection(params, rng, workers):
    lengths = [int(v) for v in params.get("lengths", (128, 256, 512, 1024, 2048, 4096, 8192))]
    trials = int(params.get("trials", 20000))
    points = []
    for si, n in enumerate(lengths):
        hits = sum(
            _run_chunks(
                trials,
                4096,
                lambda i, c, s, n=n: paths.srw_nonintersection_count(n, c, s),
                rng.split(si),
                workers,
            )
        )
        est, se = _binom(hits, trials)
        points.append((float(n), est, se))
    return {"points": points, "fit": fit_exponent(points)}


def _exp_percolation_crossing(params, rng, workers):
    shape = RectangleShape(float(params.get("L", 2.0)), float(params.get("l", 1.0)))
    n = int(params.get("n", 128))
    p = float(params.get("p", 0.5))
    trials = int(params.get("trials", 100000))
    direction = params.get("direction", "left-right")
    cols = int(math.floor(shape.L * n))
    rows = int(math.floor(shape.l * n))
    if cols < 1 or rows < 1:
        raise ConfigError(f"degenerate rectangle for n={n}: {cols}x{rows}")
    hits = sum(
        _run_chunks(
            trials,
            2048,
            lambda i, c, s: percolation.crossing_count(cols, rows, p, c, s, direction),
            rng,
            workers,
        )
    )
    est, se = _binom(hits, trials)
    x = rectangle_cross_ratio(shape)
    return {
        "points": [(float(n), est, se)],
        "fit": None,
        "extra": {"cross-ratio": x, "cardy-F": cardy_F(x)},
    }


def _exp_percolation_duality(params, rng, workers):
    n = int(params.get("n", 64))
    trials = int(params.get("trials", 100000))
    hits = sum(
        _run_chunks(
            trials,
            2048,
            lambda i, c, s: percolation.crossing_count(n, n + 1, 0.5, c, s, "top-bottom"),
            rng,
            workers,
        )
    )
    est, se = _binom(hits, trials)
    return {"points": [(float(n), est, se)], "fit": None, "extra": {"exact": 0.5}}


def _exp_cluster_perimeter(params, rng, workers):
    sizes = [int(v) for v in params.get("sizes", (64, 128, 256, 512))]
    trials = int(params.get("trials", 200))
    p = float(params.get("p", 0.5))
    points = []
    for si, n in enumerate(sizes):
        def one(idx, count, stream, n=n):
            vals = []
            for k in range(count):
                config = percolation.sample_bonds(n, n, p, stream.split(k))
                _, per = percolation.largest_cluster_boundary(config)
                vals.append(per)
            return vals

        vals = [v for c in _run_chunks(trials, 16, one, rng.split(si), workers) for v in c]
        mean = float(np.mean(vals))
        sem = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
        points.append((float(n), mean, sem))
    return {"points": points, "fit": fit_exponent(points)}


def _exp_triangle_endpoint(params, rng, workers):
    side = int(params.get("side", 256))
    trials = int(params.get("trials", 10000))
    p = float(params.get("p", 0.5))
    samples = percolation.triangle_endpoint_mc(side, trials, p, rng)
    ks = ks_to_uniform(samples)
    qs = np.quantile(samples, np.linspace(0.0, 1.0, 101))
    points = [(float(q), float(v), 0.0) for q, v in zip(np.linspace(0, 1, 101), qs)]
    return {"points": points, "fit": None, "extra": {"ks-to-uniform": ks}}


def _exp_bm_frontier(params, rng, workers):
    res = bm_frontier_dimension(
        int(params.get("resolution", 2048)),
        int(params.get("trials", 20)),
        rng,
        workers,
    )
    return {"points": res["points"], "fit": res["fit"], "extra": {"scales": res["scales"]}}


def _exp_bm_disconnection(params, rng, workers):
    res = bm_disconnection_mc(
        tuple(int(v) for v in params.get("t_values", (1024, 4096, 16384, 65536))),
        int(params.get("trials", 600)),
        rng,
        workers,
    )
    return res


def _exp_cut_points(params, rng, workers):
    res = cut_point_scaling(
        tuple(int(v) for v in params.get("lengths", (1024, 2048, 4096, 8192, 16384))),
        int(params.get("trials", 400)),
        rng,
        workers,
    )
    return res


def _exp_harmonic_identity(params, rng, workers):
    res = harmonic_identity_check(
        tuple(float(v) for v in params.get("epsilons", (0.125, 0.0625, 0.03125, 0.015625))),
        int(params.get("trials", 1500)),
        rng,
        int(params.get("resolution", 256)),
        int(params.get("walks_per_hull", 16)),
        workers,
    )
    return {
        "points": res["points"],
        "fit": res["fit"],
        "extra": {
            "hull-points": [[a, b, c] for a, b, c in res["hull_points"]],
            "z-scores": res["zscores"],
        },
    }


def _exp_sle_cardy(params, rng, workers):
    a = float(params.get("a", 2.0))
    b = float(params.get("b", 1.0))
    dt = float(params.get("dt", 2.5e-5))
    trials = int(params.get("trials", 10000))
    horizon = float(params.get("horizon", 30.0))
    est, se = loewner.swallow_race_mc(6.0, a, b, dt, horizon, trials, rng)
    x = b / (a + b)
    return {
        "points": [(x, est, se)],
        "fit": None,
        "extra": {"cardy-F": cardy_F(x)},
    }


def _exp_sle_vs_reflected(params, rng, workers):
    res = sle_vs_reflected_bm(
        int(params.get("trials", 2000)),
        rng,
        float(params.get("height", 1.0)),
        float(params.get("half_width", 2.0)),
        float(params.get("sle_dt", 2e-4)),
        float(params.get("bm_dt", 1e-4)),
        int(params.get("n_probes", 801)),
        float(params.get("horizon", 4.0)),
    )
    pts = [(float(res["n_sle"]), res["ks"], 0.0)] if res["status"] == "ok" else []
    return {"points": pts, "fit": None, "extra": res}


def _exp_reflected_cardy(params, rng, workers):
    res = reflected_bm_cardy(
        int(params.get("trials", 10000)),
        rng,
        float(params.get("dt", 1e-4)),
        bool(params.get("vertical_control", False)),
    )
    points = [
        (float(q), float(v), 0.0)
        for q, v in zip(np.linspace(0.0, 1.0, 101), res["quantiles"])
    ]
    return {"points": points, "fit": None, "extra": {"ks-to-uniform": res["ks"]}}


def _exp_exploration_vs_sle(params, rng, workers):
    res = exploration_vs_sle(
        int(params.get("trials", 800)),
        rng,
        int(params.get("width", 192)),
        int(params.get("height", 80)),
        int(params.get("line_height", 48)),
        float(params.get("sle_dt", 5e-4)),
        workers,
    )
    return {"points": [(float(res["n_exploration"]), res["ks"], 0.0)], "fit": None, "extra": res}


_REGISTRY = {
    "saw-count": _exp_saw_count,
    "saw-diameter": _exp_saw_diameter,
    "srw-nonintersection": _exp_srw_nonintersection,
    "percolation-crossing": _exp_percolation_crossing,
    "percolation-duality": _exp_percolation_duality,
    "cluster-perimeter": _exp_cluster_perimeter,
    "triangle-endpoint": _exp_triangle_endpoint,
    "bm-frontier": _exp_bm_frontier,
    "bm-disconnection": _exp_bm_disconnection,
    "cut-points": _exp_cut_points,
    "harmonic-identity": _exp_harmonic_identity,
    "sle-cardy": _exp_sle_cardy,
    "sle-vs-reflected-bm": _exp_sle_vs_reflected,
    "reflected-bm-cardy": _exp_reflected_cardy,
    "exploration-vs-sle": _exp_exploration_vs_sle,
}


def run_experiment(config: dict, seed: int | None = None, workers: int = 1) -> ExperimentResult:
    """Dispatch a configuration to the named experiment and package the result.

    `config` is a flat mapping with an 'experiment' key plus parameters; a
    'seed' key supplies the master seed unless overridden by the argument.
    """
    if "experiment" not in config:
        raise ConfigError("missing key 'experiment'")
    exp_id = config["experiment"]
    if exp_id not in _REGISTRY:
        raise ConfigError(f"unknown experiment id {exp_id!r}")
    params = {k: v for k, v in config.items() if k not in ("experiment", "seed")}
    if seed is None:
        seed = int(config.get("seed", 0))
    rng = RngStream(seed)
    t0 = time.perf_counter()
    try:
        raw = _REGISTRY[exp_id](params, rng, workers)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters for {exp_id!r}: {exc}") from exc
    elapsed = time.perf_counter() - t0
    out_params = dict(params)
    out_params["rng-generator"] = GENERATOR_ID
    for k, v in raw.get("extra", {}).items():
        out_params[k] = _jsonable(v)
    return ExperimentResult(
        experiment_id=exp_id,
        parameters=out_params,
        master_seed=seed,
        points=[(float(a), float(b) if not isinstance(b, int) else b, float(c)) for a, b, c in raw["points"]],
        fit=raw.get("fit"),
        runtime_seconds=elapsed,
    )


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [float(x) for x in v.ravel()]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def load_config(path) -> dict:
    """Read a flat key-value experiment configuration (TOML)."""
    try:
        import tomllib as toml
    except ImportError:
        import tomli as toml
    with open(path, "rb") as fh:
        try:
            return toml.load(fh)
        except toml.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc


def write_loglog_svg(result: ExperimentResult, path) -> None:
    """Minimal self-contained SVG: log-log scatter of points with fitted line."""
    pts = [(s, e) for s, e, _ in result.points if s > 0 and e > 0]
    W, H, pad = 640, 480, 60
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W//2}" y="24" text-anchor="middle" font-family="monospace" '
        f'font-size="14">{result.experiment_id} (seed {result.master_seed})</text>',
    ]
    if pts:
        xs = [math.log10(s) for s, _ in pts]
        ys = [math.log10(e) for _, e in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        xr = (x1 - x0) or 1.0
        yr = (y1 - y0) or 1.0

        def sx(v):
            return pad + (v - x0) / xr * (W - 2 * pad)

        def sy(v):
            return H - pad - (v - y0) / yr * (H - 2 * pad)

        parts.append(
            f'<rect x="{pad}" y="{pad}" width="{W-2*pad}" height="{H-2*pad}" '
            f'fill="none" stroke="black"/>'
        )
        if result.fit is not None:
            la = result.fit.slope
            lb = result.fit.intercept / math.log(10.0)
            yy0 = la * x0 + lb
            yy1 = la * x1 + lb
            parts.append(
                f'<line x1="{sx(x0):.2f}" y1="{sy(yy0):.2f}" x2="{sx(x1):.2f}" '
                f'y2="{sy(yy1):.2f}" stroke="firebrick" stroke-width="1.5"/>'
            )
            parts.append(
                f'<text x="{W-pad}" y="{H-16}" text-anchor="end" font-family="monospace" '
                f'font-size="12">slope {result.fit.slope:.4f} &#177; {result.fit.slope_stderr:.4f}</text>'
            )
        for x, y in zip(xs, ys):
            parts.append(
                f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3.5" fill="steelblue"/>'
            )
        parts.append(
            f'<text x="{W//2}" y="{H-28}" text-anchor="middle" font-family="monospace" '
            f'font-size="12">log10 scale</text>'
        )
    else:
        parts.append(
            f'<text x="{W//2}" y="{H//2}" text-anchor="middle" font-family="monospace" '
            f'font-size="12">no positive points to plot</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")

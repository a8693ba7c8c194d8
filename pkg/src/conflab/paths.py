"""Seeded samplers for planar random paths.

Simple random walks on Z^2, planar Brownian motion (Euler samples), and
Brownian motion in the closed upper half-plane with oblique reflection on the
real axis.  Reflection uses post-step projection: after each Gaussian
increment, a point pushed below the axis is moved back along the reflection
field direction until it sits exactly on the axis, and the push length is
accumulated as local time.

Besides the per-path constructors there are batch samplers (one numpy state
per trial, stepped together) for the Monte Carlo experiments; they sample the
same Euler dynamics without materializing whole paths.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import PlanarPath
from .rng import RngStream

_STEPS4 = np.array([1.0, -1.0, 1.0j, -1.0j], dtype=complex)

_TRIAL_CHUNK = 4096


class NotStoppedError(ValueError):
    """A path never reached the stopping set; carries the closest approach."""

    def __init__(self, message: str, max_abs: float):
        super().__init__(f"{message} (max attained {max_abs:.6g})")
        self.max_abs = max_abs


@dataclass(frozen=True)
class ReflectionField:
    """Boundary reflection directions for the half-plane.

    The default pushes along exp(i*pi/3) on the nonnegative axis and along
    exp(2i*pi/3) on the negative axis (x = 0 counts as nonnegative), i.e. away
    from the origin on both sides.  A custom rule mapping boundary coordinate
    to a unit vector may be supplied; directions must point into the
    half-plane (positive imaginary part).
    """

    pos_angle: float = math.pi / 3
    neg_angle: float = 2 * math.pi / 3
    rule: Callable[[float], complex] | None = None

    def __post_init__(self):
        if self.rule is None:
            if math.sin(self.pos_angle) <= 0 or math.sin(self.neg_angle) <= 0:
                raise ValueError("reflection directions must have positive imaginary part")

    @classmethod
    def vertical(cls) -> "ReflectionField":
        return cls(math.pi / 2, math.pi / 2)

    def unit_vectors(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.rule is None:
            return np.where(
                x >= 0,
                complex(math.cos(self.pos_angle), math.sin(self.pos_angle)),
                complex(math.cos(self.neg_angle), math.sin(self.neg_angle)),
            )
        vec = np.array([complex(self.rule(float(v))) for v in np.atleast_1d(x)])
        if (vec.imag <= 0).any():
            raise ValueError("reflection rule produced a vector not pointing into H")
        vec /= np.abs(vec)
        return vec if x.ndim else vec[0]


@dataclass
class ReflectedPath:
    """Reflected-diffusion samples with accumulated boundary local time."""

    points: np.ndarray
    local_time: np.ndarray
    time_step: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        self.local_time = np.asarray(self.local_time, dtype=float)
        if self.points.size == 0:
            raise ValueError("reflected path must be nonempty")
        if len(self.points) != len(self.local_time):
            raise ValueError("points and local_time must have equal length")
        if self.time_step <= 0:
            raise ValueError("time_step must be positive")
        if (self.points.imag < -1e-12).any():
            raise ValueError("reflected path left the closed upper half-plane")
        inc = np.diff(self.local_time)
        if (inc < -1e-15).any():
            raise ValueError("local time must be nondecreasing")

    def __len__(self) -> int:
        return len(self.points)


def simple_random_walk(n: int, rng: RngStream) -> PlanarPath:
    """Simple random walk on Z^2: n unit steps from the origin (n+1 points)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    pts = np.zeros(n + 1, dtype=complex)
    if n:
        gen = rng.generator()
        pts[1:] = np.cumsum(_STEPS4[gen.integers(0, 4, size=n)])
    return PlanarPath(pts, kind="lattice-walk")


def brownian_path(T: float, dt: float, rng: RngStream) -> PlanarPath:
    """Planar Brownian motion from 0 sampled at times k*dt, k <= T/dt.

    Increments are independent Gaussians with variance dt per component.
    """
    if not T > 0 or not 0 < dt <= T:
        raise ValueError("need T > 0 and 0 < dt <= T")
    n = int(math.floor(T / dt + 1e-9))
    gen = rng.generator()
    inc = gen.normal(0.0, math.sqrt(dt), size=(n, 2))
    pts = np.zeros(n + 1, dtype=complex)
    np.cumsum(inc[:, 0] + 1j * inc[:, 1], out=pts[1:])
    return PlanarPath(pts, kind="diffusion-sample", time_step=dt)


def reflected_bm_halfplane(
    T: float, dt: float, field: ReflectionField, rng: RngStream
) -> ReflectedPath:
    """Obliquely reflected Brownian motion in the closed upper half-plane.

    Euler scheme from 0: after each Gaussian increment, a point with negative
    imaginary part is pushed back along field(x) until it sits exactly on the
    axis; the push length accumulates into the local time.
    """
    if not (T > 0 and dt > 0):
        raise ValueError("need T > 0 and dt > 0")
    n = int(math.floor(T / dt + 1e-9))
    gen = rng.generator()
    inc = gen.normal(0.0, math.sqrt(dt), size=(n, 2))
    pts = np.empty(n + 1, dtype=complex)
    ell = np.empty(n + 1, dtype=float)
    pts[0] = 0.0
    ell[0] = 0.0
    z = 0.0 + 0.0j
    lt = 0.0
    for k in range(n):
        z = z + complex(inc[k, 0], inc[k, 1])
        if z.imag < 0.0:
            u = complex(field.unit_vectors(z.real))
            push = -z.imag / u.imag
            z = complex(z.real + push * u.real, 0.0)
            lt += push
        pts[k + 1] = z
        ell[k + 1] = lt
    return ReflectedPath(pts, ell, dt)


def stop_at_circle(path: PlanarPath, radius: float) -> tuple:
    """Truncate a path at its first exit from the circle of given radius.

    Returns (truncated, hit): the path up to and including the first sample
    with |z| >= radius, and the linear interpolation of the crossing segment
    onto the circle.  Raises NotStoppedError if the path never reaches it.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    pts = path.points
    if pts.size == 0:
        raise ValueError("empty path")
    mod = np.abs(pts)
    if mod[0] >= radius:
        raise ValueError("path must start strictly inside the circle")
    outside = np.nonzero(mod >= radius)[0]
    if outside.size == 0:
        raise NotStoppedError("path not stopped by the circle", float(mod.max()))
    k = int(outside[0])
    p0, p1 = pts[k - 1], pts[k]
    w = p1 - p0
    a = (w * w.conjugate()).real
    b = 2.0 * (p0 * w.conjugate()).real
    c = (p0 * p0.conjugate()).real - radius * radius
    t = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    hit = p0 + t * w
    truncated = PlanarPath(pts[: k + 1], kind=path.kind, time_step=path.time_step)
    return truncated, hit


def stop_at_segment(path: ReflectedPath, segment: tuple) -> tuple:
    """Truncate a reflected path at its first crossing of a segment.

    Crossing is detected by a sign change of the signed distance to the
    segment's supporting line, with the interpolated crossing point required
    to fall inside the segment.  Returns (truncated, hit).
    """
    e0, e1 = complex(segment[0]), complex(segment[1])
    if e0 == e1:
        raise ValueError("segment endpoints must differ")
    u = (e1 - e0) / abs(e1 - e0)
    rel = (path.points - e0) / u
    s = rel.imag  # signed distance to the line
    prev = s[:-1]
    nxt = s[1:]
    crossing = (np.sign(prev) != np.sign(nxt)) | (nxt == 0.0)
    best = None
    for k in np.nonzero(crossing)[0]:
        denom = s[k] - s[k + 1]
        t = 0.0 if denom == 0.0 else s[k] / denom
        hit = path.points[k] + t * (path.points[k + 1] - path.points[k])
        param = ((hit - e0) / u).real
        if -1e-12 <= param <= abs(e1 - e0) + 1e-12:
            best = (int(k), hit)
            break
    if best is None:
        closest = float(np.min(np.abs(rel.imag)))
        raise NotStoppedError("path never crossed the segment", closest)
    k, hit = best
    truncated = ReflectedPath(
        path.points[: k + 2], path.local_time[: k + 2], path.time_step
    )
    return truncated, hit


def srw_nonintersection_count(n: int, trials: int, rng: RngStream) -> int:
    """Number of walk pairs (out of `trials`) with S{1..n} disjoint from S'{0..n}."""
    off = n + 1
    span = 2 * n + 3
    origin_key = off * span + off
    gen = rng.generator()
    hits = 0
    block = max(1, min(trials, (1 << 22) // max(n, 1)))
    done = 0
    while done < trials:
        m = min(block, trials - done)
        dirs = gen.integers(0, 4, size=(m, 2, n))
        walks = np.cumsum(_STEPS4[dirs], axis=2)
        kx = np.rint(walks.real).astype(np.int64) + off
        ky = np.rint(walks.imag).astype(np.int64) + off
        keys = kx * span + ky
        for i in range(m):
            a = keys[i, 0]  # S{1..n}
            b = keys[i, 1]  # S'{1..n}; S'_0 is the origin, tested separately
            if np.isin(a, b).any() or (a == origin_key).any():
                continue
            hits += 1
        done += m
    return hits


def srw_nonintersection_mc(n: int, trials: int, rng: RngStream) -> tuple:
    """Fraction of independent walk pairs with S{1..n} disjoint from S'{0..n}.

    Note the asymmetric index sets: the first walk's starting point (the
    shared origin) is excluded.  Site sets are compared as sorted integer
    keys.  Returns (estimate, binomial standard error).
    """
    if n < 1 or trials < 1:
        raise ValueError("need n >= 1 and trials >= 1")
    hits = 0
    n_chunks = -(-trials // _TRIAL_CHUNK)
    for chunk in range(n_chunks):
        m = min(_TRIAL_CHUNK, trials - chunk * _TRIAL_CHUNK)
        hits += srw_nonintersection_count(n, m, rng.split(chunk))
    p = hits / trials
    return p, float(math.sqrt(p * (1.0 - p) / trials))


# --- batch samplers for experiments ---


def reflected_final_points(
    T: float, dt: float, field: ReflectionField, rng: RngStream, trials: int
) -> np.ndarray:
    """Endpoints Z_T of `trials` independent reflected paths (vectorized)."""
    n = int(math.floor(T / dt + 1e-9))
    out = np.empty(trials, dtype=complex)
    n_chunks = -(-trials // _TRIAL_CHUNK)
    for chunk in range(n_chunks):
        m = min(_TRIAL_CHUNK, trials - chunk * _TRIAL_CHUNK)
        gen = rng.split(chunk).generator()
        z = np.zeros(m, dtype=complex)
        sqdt = math.sqrt(dt)
        for _ in range(n):
            z = z + gen.normal(0.0, sqdt, size=m) + 1j * gen.normal(0.0, sqdt, size=m)
            below = z.imag < 0
            if below.any():
                u = field.unit_vectors(z.real[below])
                push = -z.imag[below] / u.imag
                z[below] = z.real[below] + push * u.real  # lands exactly on the axis
        out[chunk * _TRIAL_CHUNK : chunk * _TRIAL_CHUNK + m] = z
    return out


def reflected_hits_on_ray(
    M: float,
    base_dt: float,
    field: ReflectionField,
    rng: RngStream,
    trials: int,
    r_max: float = 1e12,
    max_steps: int = 5_000_000,
) -> np.ndarray:
    """Boundary positions where reflected paths first reach [M, infinity).

    The hitting coordinate has a heavy x^(-1/3) tail, so a fixed time step
    cannot resolve it at desk scale; instead the Euler step length is kept
    proportional to the local length scale min(max(1, |z|), 4*|z - M|):
    sqrt(base_dt) relative steps far away (the dynamics have no intrinsic
    scale away from the field discontinuity at 0), and refined near the tip
    M so the hit coordinate is resolved to a fixed multiplicative accuracy
    there (conformal maps of the hull have a cube-root singularity at the
    tip, which magnifies absolute errors).  Walks that exceed r_max are
    recorded at coordinate r_max with a warning.
    """
    out = np.empty(trials, dtype=float)
    capped = 0
    n_chunks = -(-trials // _TRIAL_CHUNK)
    for chunk in range(n_chunks):
        m = min(_TRIAL_CHUNK, trials - chunk * _TRIAL_CHUNK)
        gen = rng.split(chunk).generator()
        z = np.zeros(m, dtype=complex)
        hit = np.full(m, np.nan)
        active = np.arange(m)
        for _ in range(max_steps):
            if active.size == 0:
                break
            za = z[active]
            d_tip2 = (za.real - M) ** 2 + za.imag**2
            scale2 = np.minimum(np.maximum(1.0, za.real**2 + za.imag**2), 16.0 * d_tip2)
            scale2 = np.maximum(scale2, 1e-16)
            sig = np.sqrt(base_dt * scale2)
            znew = za + gen.normal(0.0, 1.0, size=active.size) * sig + 1j * gen.normal(
                0.0, 1.0, size=active.size
            ) * sig
            below = znew.imag < 0
            if below.any():
                zb0 = za[below]
                zb1 = znew[below]
                frac = zb0.imag / (zb0.imag - zb1.imag)
                xc = zb0.real + frac * (zb1.real - zb0.real)
                u = field.unit_vectors(znew.real[below])
                push = -znew.imag[below] / u.imag
                xp = znew.real[below] + push * u.real
                # the axis is touched first at the crossing, then at the
                # pushed-back landing point; stop at whichever reaches [M, inf)
                stop_at = np.where(xc >= M, xc, np.where(xp >= M, xp, np.nan))
                znew[below] = np.where(np.isnan(stop_at), xp, stop_at)  # on the axis
                stopped = ~np.isnan(stop_at)
                hit[active[below][stopped]] = stop_at[stopped]
            z[active] = znew
            escaped = np.abs(znew) > r_max
            if escaped.any():
                hit[active[escaped]] = r_max
                capped += int(escaped.sum())
            done = ~np.isnan(hit[active])
            if done.any():
                active = active[~done]
        if active.size:
            warnings.warn(
                f"{active.size} reflected walks unresolved after {max_steps} steps; "
                "recorded at r_max",
                RuntimeWarning,
            )
            hit[active] = r_max
            capped += active.size
        out[chunk * _TRIAL_CHUNK : chunk * _TRIAL_CHUNK + m] = hit
    if capped:
        warnings.warn(
            f"{capped}/{trials} reflected walks capped at r_max={r_max:g}", RuntimeWarning
        )
    return out


def reflected_hits_on_horizontal_segment(
    height: float,
    half_width: float,
    base_dt: float,
    field: ReflectionField,
    rng: RngStream,
    trials: int,
    max_steps: int = 5_000_000,
) -> np.ndarray:
    """First contact coordinates of reflected paths with a horizontal segment.

    The segment is {x + i*height : |x| <= half_width}.  Contact means the
    sampled path crosses the segment's line inside the segment (in either
    direction); returns the real coordinates of the interpolated crossings.
    The Euler step scales with squared distance to the segment (floored by
    proximity to the origin), as in reflected_hits_on_ray.
    """
    out = np.empty(trials, dtype=float)
    n_chunks = -(-trials // _TRIAL_CHUNK)
    for chunk in range(n_chunks):
        m = min(_TRIAL_CHUNK, trials - chunk * _TRIAL_CHUNK)
        gen = rng.split(chunk).generator()
        z = np.zeros(m, dtype=complex)
        hit = np.full(m, np.nan)
        active = np.arange(m)
        for _ in range(max_steps):
            if active.size == 0:
                break
            za = z[active]
            dseg2 = np.maximum(np.abs(za.real) - half_width, 0.0) ** 2 + (
                za.imag - height
            ) ** 2
            scale2 = np.maximum(1.0, np.minimum(dseg2, za.real**2 + za.imag**2))
            sig = np.sqrt(base_dt * scale2)
            znew = za + gen.normal(0.0, 1.0, size=active.size) * sig + 1j * gen.normal(
                0.0, 1.0, size=active.size
            ) * sig
            # crossing of the segment's line
            s0 = za.imag - height
            s1 = znew.imag - height
            crossed = (np.sign(s0) != np.sign(s1)) | (s1 == 0.0)
            if crossed.any():
                frac = s0[crossed] / (s0[crossed] - s1[crossed])
                xc = za.real[crossed] + frac * (znew.real[crossed] - za.real[crossed])
                inside = np.abs(xc) <= half_width
                hit_idx = active[crossed][inside]
                hit[hit_idx] = xc[inside]
            below = znew.imag < 0
            if below.any():
                u = field.unit_vectors(znew.real[below])
                push = -znew.imag[below] / u.imag
                znew[below] = znew.real[below] + push * u.real
            z[active] = znew
            done = ~np.isnan(hit[active])
            if done.any():
                active = active[~done]
        if active.size:
            warnings.warn(
                f"{active.size} reflected walks never reached the segment; dropped",
                RuntimeWarning,
            )
            hit[active] = np.nan
        out[chunk * _TRIAL_CHUNK : chunk * _TRIAL_CHUNK + m] = hit
    return out


def export_path_csv(path, file) -> None:
    """Write a path as CSV (index, re, im[, local_time])."""
    import csv

    reflected = isinstance(path, ReflectedPath)
    close = False
    if isinstance(file, (str, bytes)) or hasattr(file, "__fspath__"):
        file = open(file, "w", newline="")
        close = True
    try:
        writer = csv.writer(file)
        header = ["index", "re", "im"] + (["local_time"] if reflected else [])
        writer.writerow(header)
        for k, z in enumerate(path.points):
            row = [k, repr(z.real), repr(z.imag)]
            if reflected:
                row.append(repr(float(path.local_time[k])))
            writer.writerow(row)
    finally:
        if close:
            file.close()

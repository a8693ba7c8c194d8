"""Numerical radial and chordal Loewner evolutions.

Chordal flows are composed from exact constant-driving slit maps
e(w) = a + sqrt((w - a)^2 + 4*dt) (branch into the upper half-plane), which is
unconditionally stable and makes capacity exactly additive: a state of steps
(dt_k, a_k) has half-plane capacity 2 * sum dt_k, tracked in exact rational
arithmetic.  Radial flows integrate the exterior-normalized disc ODE

    df/dt = -f (f + zeta(t)) / (f - zeta(t)),   zeta = exp(i * theta(t))

with classical RK4 and per-point substepping near the singularity.  A point
is declared swallowed when its flow value comes within delta_collide of the
driving point; delta_collide defaults to collide_scale * sqrt(dt), matching
the driver's fluctuation scale over one step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from .geometry import GridMask, GridSpec
from .rng import RngStream

DT_DEFAULT = 1e-4
COLLIDE_SCALE_DEFAULT = 2.0
T_MIN_DEFAULT = -8.0


@dataclass(frozen=True)
class DrivingFunction:
    """Time-sampled Loewner driver: real-valued (chordal) or angular (radial)."""

    kind: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in ("chordal-real", "radial-angle"):
            raise ValueError(f"unknown driving kind {self.kind!r}")
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if len(self.times) < 2 or not (np.diff(self.times) > 0).all():
            raise ValueError("times must be strictly increasing with >= 2 samples")

    def export_csv(self, file) -> None:
        import csv

        close = False
        if isinstance(file, (str, bytes)) or hasattr(file, "__fspath__"):
            file = open(file, "w", newline="")
            close = True
        try:
            w = csv.writer(file)
            w.writerow(["t", "value"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])
        finally:
            if close:
                file.close()


def sle_driving(
    kappa: float, dt: float, horizon: float, kind: str, rng: RngStream
) -> DrivingFunction:
    """Brownian driver of variance parameter kappa sampled every dt.

    Chordal drivers start at 0; radial drivers start at an angle uniform on
    [0, 2*pi) and evolve the angle by the same Brownian increments.
    """
    if kappa < 0 or dt <= 0 or horizon <= 0:
        raise ValueError("need kappa >= 0, dt > 0, horizon > 0")
    n = int(math.ceil(horizon / dt - 1e-9))
    gen = rng.generator()
    vals = np.empty(n + 1)
    if kind == "chordal-real":
        vals[0] = 0.0
    elif kind == "radial-angle":
        vals[0] = gen.uniform(0.0, 2.0 * math.pi)
    else:
        raise ValueError(f"unknown driving kind {kind!r}")
    if n:
        vals[1:] = vals[0] + np.cumsum(gen.normal(0.0, math.sqrt(kappa * dt), size=n))
    return DrivingFunction(kind, np.arange(n + 1) * dt, vals)


@dataclass
class ChordalState:
    """Composition of elementary chordal slit maps (dt_k, a_k)."""

    dts: np.ndarray
    drivers: np.ndarray
    collide_scale: float = COLLIDE_SCALE_DEFAULT

    def __post_init__(self):
        self.dts = np.asarray(self.dts, dtype=float)
        self.drivers = np.asarray(self.drivers, dtype=float)
        if self.dts.shape != self.drivers.shape or self.dts.ndim != 1:
            raise ValueError("dts and drivers must be 1-d arrays of equal length")
        if (self.dts <= 0).any():
            raise ValueError("all elementary time steps must be positive")

    @classmethod
    def from_driving(
        cls, driving: DrivingFunction, collide_scale: float = COLLIDE_SCALE_DEFAULT
    ) -> "ChordalState":
        if driving.kind != "chordal-real":
            raise ValueError("chordal state needs a chordal-real driver")
        return cls(np.diff(driving.times), driving.values[:-1], collide_scale)

    @property
    def total_capacity(self) -> Fraction:
        """Half-plane capacity 2 * sum(dt), summed in exact rational arithmetic."""
        return 2 * sum((Fraction(float(dt)) for dt in self.dts), Fraction(0))

    def concatenate(self, other: "ChordalState") -> "ChordalState":
        return ChordalState(
            np.concatenate([self.dts, other.dts]),
            np.concatenate([self.drivers, other.drivers]),
            self.collide_scale,
        )

    def __len__(self) -> int:
        return len(self.dts)


def _slit_step(w: np.ndarray, a: float, dt: float) -> np.ndarray:
    # e(w) = a + sqrt((w-a)^2 + 4 dt), branch mapping H minus the slit into H:
    # Im(e) >= 0, and real inputs keep their side of the driving point.
    d = w - a
    s = np.sqrt(d * d + 4.0 * dt)
    flip = (s.imag < 0) | ((s.imag == 0) & (d.real < 0))
    return a + np.where(flip, -s, s)


def chordal_apply_batch(state: ChordalState, zs, prefix: int | None = None, dtype=complex):
    """Apply the composed map to an array of points.

    Returns (values, swallowed, swallow_step): swallowed points carry the step
    index of their collision and their last flow value; once a point collides
    it stays swallowed for every longer prefix.  Passing dtype=np.clongdouble
    evaluates in extended precision (needed to observe the far-field expansion
    coefficients below double-precision cancellation noise).
    """
    w = np.asarray(zs, dtype=dtype).copy()
    n = len(state) if prefix is None else min(prefix, len(state))
    swallowed = np.zeros(w.shape, dtype=bool)
    swallow_step = np.full(w.shape, -1, dtype=np.int64)
    for k in range(n):
        a = state.drivers[k]
        dt = state.dts[k]
        delta = state.collide_scale * math.sqrt(dt)
        alive = ~swallowed
        hit = alive & (np.abs(w - a) <= delta)
        if hit.any():
            swallowed |= hit
            swallow_step[hit] = k
            alive = ~swallowed
        if alive.any():
            w[alive] = _slit_step(w[alive], a, dt)
    return w, swallowed, swallow_step


def chordal_apply(state: ChordalState, z: complex):
    """Composed slit map at one point; None marks a swallowed point."""
    if complex(z).imag < 0:
        raise ValueError("chordal_apply requires Im z >= 0")
    w, swallowed, _ = chordal_apply_batch(state, np.array([z]))
    return None if swallowed[0] else complex(w[0])


@dataclass(frozen=True)
class SwallowReport:
    """Outcome of tracking one point through a Loewner flow."""

    point: complex
    swallow_time: float  # math.inf when not swallowed by the horizon
    terminal_value: float

    @property
    def swallowed(self) -> bool:
        return math.isfinite(self.swallow_time)


def swallow_time_real(
    driving: DrivingFunction,
    x: float,
    horizon: float,
    collide_scale: float = COLLIDE_SCALE_DEFAULT,
) -> SwallowReport:
    """Swallow time of a real point under the chordal flow.

    Tracks y_t = g_t(x) - a(t).  Within each driving sample the driver is
    constant and the flow is exact (y' = sign(y) sqrt(y^2 + 4 dt)); the driver
    increment is then subtracted.  The point is swallowed when |y| falls
    within delta_collide = collide_scale * sqrt(dt).
    """
    if driving.kind != "chordal-real":
        raise ValueError("swallow_time_real needs a chordal-real driver")
    if x == 0.0:
        raise ValueError("x = 0 is swallowed at time 0 by convention")
    y = x - driving.values[0]
    t_prev = driving.times[0]
    for k in range(len(driving.times) - 1):
        t_next = driving.times[k + 1]
        if t_prev >= horizon:
            break
        dt = min(t_next, horizon) - t_prev
        delta = collide_scale * math.sqrt(dt)
        if abs(y) <= delta:
            return SwallowReport(x, float(t_prev), float(y))
        y = math.copysign(math.sqrt(y * y + 4.0 * dt), y)
        if t_next <= horizon:
            y -= driving.values[k + 1] - driving.values[k]
        t_prev = t_next
    dt_last = float(np.diff(driving.times).min())
    if abs(y) <= collide_scale * math.sqrt(dt_last):
        return SwallowReport(x, float(min(t_prev, horizon)), float(y))
    return SwallowReport(x, math.inf, float(y))


def swallow_race_mc(
    kappa: float,
    a: float,
    b: float,
    dt: float,
    horizon: float,
    trials: int,
    rng: RngStream,
    chunk: int = 4096,
    tail_growth: float = 5e-4,
    t_max: float = 1e5,
) -> tuple:
    """Monte Carlo estimate of P(T_{-a} < T_b) for the chordal flow.

    Both real points are tracked through the same Brownian driver (variance
    parameter kappa) with the exact piecewise-constant flow; a trial ends when
    either point collides (simultaneous collisions count 1/2).  The survival
    time has a heavy polynomial tail, so past `horizon` the step grows
    geometrically up to t_max, which keeps the collision band and driver
    fluctuation fixed relative to the diffusive scale sqrt(t); the few trials
    still unresolved at t_max count 1/2 each (at that age the process has
    forgotten the initial asymmetry).  Returns (estimate, stderr).
    """
    if a <= 0 or b <= 0:
        raise ValueError("need a, b > 0")
    delta0 = COLLIDE_SCALE_DEFAULT * math.sqrt(dt)
    wins = 0.0
    unresolved = 0
    n_chunks = -(-trials // chunk)
    for c in range(n_chunks):
        m = min(chunk, trials - c * chunk)
        gen = rng.split(c).generator()
        y1 = np.full(m, -a)
        y2 = np.full(m, b)
        active = np.arange(m)
        t = 0.0
        step = dt
        while t < t_max and active.size:
            da = gen.normal(0.0, math.sqrt(kappa * step), size=active.size)
            y1a = np.copysign(np.sqrt(y1[active] ** 2 + 4.0 * step), y1[active]) - da
            y2a = np.copysign(np.sqrt(y2[active] ** 2 + 4.0 * step), y2[active]) - da
            y1[active] = y1a
            y2[active] = y2a
            delta = COLLIDE_SCALE_DEFAULT * math.sqrt(step)
            h1 = np.abs(y1a) <= delta
            h2 = np.abs(y2a) <= delta
            done = h1 | h2
            if done.any():
                wins += float(np.sum(h1[done] & ~h2[done])) + 0.5 * float(
                    np.sum(h1[done] & h2[done])
                )
                active = active[~done]
            t += step
            if t > horizon:
                step *= 1.0 + tail_growth
        unresolved += active.size
        wins += 0.5 * active.size
    if unresolved:
        warnings.warn(
            f"{unresolved} of {trials} races unresolved at t_max={t_max:g}; "
            "counted 1/2 each",
            RuntimeWarning,
        )
    p = wins / trials
    return p, float(math.sqrt(p * (1.0 - p) / trials))


def chordal_hull_extract(
    driving: DrivingFunction, grid: GridSpec, horizon: float
) -> GridMask:
    """Mask of grid cells swallowed by the chordal flow up to the horizon.

    Each cell is tested at its center and its four corners and is marked when
    any of them is swallowed.  Corner testing matters for hulls with empty
    interior (slits): the lattice lines can lie exactly on the slit while all
    cell centers keep a conformal gap much larger than the collision band.
    """
    state = ChordalState.from_driving(driving)
    if horizon < float(np.sum(state.dts)):
        n = int(np.searchsorted(np.cumsum(state.dts), horizon + 1e-12))
    else:
        n = len(state)
    h = grid.spacing
    iy, ix = np.mgrid[0 : grid.rows, 0 : grid.cols]
    centers = grid.center(ix.ravel(), iy.ravel())
    vy, vx = np.mgrid[0 : grid.rows + 1, 0 : grid.cols + 1]
    vertices = (grid.origin + h * (vx.ravel() + 1j * vy.ravel())).astype(complex)

    def swallowed_mask(points):
        out = np.zeros(points.shape, dtype=bool)
        ok = points.imag >= 0
        if ok.any():
            _, sw, _ = chordal_apply_batch(state, points[ok], prefix=n)
            out[ok] = sw
        return out

    sw_c = swallowed_mask(centers).reshape(grid.rows, grid.cols)
    sw_v = swallowed_mask(vertices).reshape(grid.rows + 1, grid.cols + 1)
    bits = sw_c | sw_v[:-1, :-1] | sw_v[:-1, 1:] | sw_v[1:, :-1] | sw_v[1:, 1:]
    return GridMask(grid, bits)


# --- radial flow ---


def _zeta(theta):
    return np.cos(theta) + 1j * np.sin(theta)


def _radial_rhs(f, zeta):
    return -f * (f + zeta) / (f - zeta)


class _RadialFlow:
    """Vectorized radial Loewner integrator with per-point substepping."""

    def __init__(self, f0: np.ndarray, collide_delta: float, rounds_cap: int = 64):
        self.f = np.asarray(f0, dtype=complex).copy()
        self.alive = np.ones(self.f.shape, dtype=bool)
        self.swallow_time = np.full(self.f.shape, math.inf)
        self.delta = collide_delta
        self.rounds_cap = rounds_cap

    def advance(self, ta: float, tb: float, tha: float, thb: float) -> None:
        """One driving interval with linear angle theta(t) on [ta, tb]."""
        dt = tb - ta
        idx = np.nonzero(self.alive)[0]
        if idx.size == 0:
            return
        f = self.f[idx]
        slope = (thb - tha) / dt
        # substep count resolves the local ODE time scale |f - zeta|^2 / 2
        gap2 = np.abs(f - _zeta(tha)) ** 2
        nsub = np.ceil(20.0 * dt / np.maximum(gap2, self.delta**2)).astype(np.int64)
        nsub = np.clip(nsub, 1, self.rounds_cap)
        h = dt / nsub
        live = np.ones(idx.size, dtype=bool)
        swall_t = np.full(idx.size, ta)
        for r in range(int(nsub.max())):
            sub = np.nonzero(live & (nsub > r))[0]
            if sub.size == 0:
                break
            t_loc = ta + r * h[sub]
            hh = h[sub]
            th0 = tha + slope * (t_loc - ta)
            fs = f[sub]
            z0 = _zeta(th0)
            hit = np.abs(fs - z0) <= self.delta
            if hit.any():
                live[sub[hit]] = False
                swall_t[sub[hit]] = t_loc[hit]
                keep = ~hit
                sub = sub[keep]
                if sub.size == 0:
                    continue
                t_loc, hh, th0, fs = t_loc[keep], hh[keep], th0[keep], fs[keep]
                z0 = z0[keep]
            thm = th0 + 0.5 * slope * hh
            th1 = th0 + slope * hh
            zm = _zeta(thm)
            z1 = _zeta(th1)
            k1 = _radial_rhs(fs, z0)
            k2 = _radial_rhs(fs + 0.5 * hh * k1, zm)
            k3 = _radial_rhs(fs + 0.5 * hh * k2, zm)
            k4 = _radial_rhs(fs + hh * k3, z1)
            f[sub] = fs + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        self.f[idx] = f
        # end-of-interval collision sweep
        fin = np.nonzero(live)[0]
        if fin.size:
            stuck = np.abs(f[fin] - _zeta(thb)) <= self.delta
            if stuck.any():
                live[fin[stuck]] = False
                swall_t[fin[stuck]] = tb
        dead = np.nonzero(~live)[0]
        if dead.size:
            self.alive[idx[dead]] = False
            self.swallow_time[idx[dead]] = swall_t[dead]


def radial_flow(
    driving: DrivingFunction,
    z: complex,
    t0: float,
    t1: float,
    collide_scale: float = COLLIDE_SCALE_DEFAULT,
):
    """Radial Loewner flow of a single value from time t0 to t1.

    z is the flow value at time t0 (for a point outside the time-t0 hull its
    modulus must exceed 1).  Returns the value at t1, or None if the point is
    swallowed on the way.  Fourth-order integration; step control subdivides
    near the singularity f = zeta(t).
    """
    if driving.kind != "radial-angle":
        raise ValueError("radial_flow needs a radial-angle driver")
    if t1 < t0:
        raise ValueError("need t1 >= t0")
    if t1 == t0:
        return complex(z)
    times = driving.times
    if t0 < times[0] - 1e-12 or t1 > times[-1] + 1e-12:
        raise ValueError("flow interval outside the driver's time range")
    dt_ref = float(np.diff(times).min())
    flow = _RadialFlow(np.array([z]), collide_scale * math.sqrt(dt_ref))
    grid_t = np.unique(np.clip(np.concatenate([times, [t0, t1]]), t0, t1))
    for ta, tb in zip(grid_t[:-1], grid_t[1:]):
        if tb <= ta:
            continue
        tha = float(np.interp(ta, times, driving.values))
        thb = float(np.interp(tb, times, driving.values))
        flow.advance(float(ta), float(tb), tha, thb)
    return None if not flow.alive[0] else complex(flow.f[0])


def radial_cci_hull(
    kappa: float,
    rng: RngStream,
    grid: GridSpec,
    dt: float = 1e-3,
    t_min: float = T_MIN_DEFAULT,
    coarse_until: float = -3.0,
    coarse_dt: float = 0.02,
    horizon: float = 0.5,
    n_probes: int = 1024,
    collide_scale: float = COLLIDE_SCALE_DEFAULT,
) -> tuple:
    """Radial SLE hull run until it first touches the unit circle.

    The evolution starts at t_min treating the initial hull as the disc of
    conformal radius exp(t_min) (error O(exp(t_min))), so a grid point z
    starts at flow value z * exp(-t_min) and cells with |z| below that scale
    count as swallowed from the start.  Probes on the unit circle detect the
    touching time T; returns (hull mask at T, touch point).  Driving intervals
    before `coarse_until` use a coarser sampling of the same Brownian driver.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    gen = rng.generator()
    theta0 = gen.uniform(0.0, 2.0 * math.pi)

    iy, ix = np.mgrid[0 : grid.rows, 0 : grid.cols]
    centers = grid.center(ix.ravel(), iy.ravel())
    r0 = math.exp(t_min)
    in_disc = np.abs(centers) <= 1.0 + 2.0 * grid.spacing
    tracked = in_disc & (np.abs(centers) > 2.0 * r0)
    seeded = in_disc & ~tracked  # inside the initial hull proxy

    probes = np.exp(2j * math.pi * np.arange(n_probes) / n_probes)
    points = np.concatenate([centers[tracked], probes])
    scale0 = math.exp(-t_min)
    delta = collide_scale * math.sqrt(dt)
    flow = _RadialFlow(points * scale0, delta)
    n_tracked = int(tracked.sum())

    theta = theta0
    t = t_min
    touch_idx = -1
    touch_time = math.nan
    while t < horizon - 1e-12:
        step = coarse_dt if t < coarse_until else dt
        step = min(step, horizon - t)
        theta_next = theta + gen.normal(0.0, math.sqrt(kappa * step))
        flow.advance(t, t + step, theta, theta_next)
        theta = theta_next
        t += step
        probe_state = flow.alive[n_tracked:]
        if not probe_state.all():
            gone = np.nonzero(~probe_state)[0]
            times = flow.swallow_time[n_tracked:][gone]
            touch_idx = int(gone[np.argmin(times)])
            touch_time = float(np.min(times))
            break
    if touch_idx < 0:
        max_r = 1.0 - float(np.min(np.abs(flow.f[n_tracked:]) - 1.0))
        raise RuntimeError(
            f"radial hull never reached the unit circle by t={horizon} "
            f"(closest probe gap {max_r - 1.0:.3g})"
        )
    bits = np.zeros(grid.rows * grid.cols, dtype=bool)
    bits[np.nonzero(tracked)[0]] = ~flow.alive[:n_tracked]
    bits[seeded] = True
    mask = GridMask(grid, bits.reshape(grid.rows, grid.cols))
    endpoint = complex(probes[touch_idx])
    return mask, endpoint


def chordal_first_contact_mc(
    kappa: float,
    probe_points: np.ndarray,
    dt: float,
    horizon: float,
    trials: int,
    rng: RngStream,
    collide_scale: float = COLLIDE_SCALE_DEFAULT,
    chunk: int = 256,
) -> np.ndarray:
    """First contact coordinates of chordal SLE hulls with a probe set.

    For each trial a fresh Brownian driver grows the hull until one of the
    probe points is swallowed; the real coordinate of that probe is recorded
    (nan if the horizon is exhausted first).  Probes should sample the target
    set J densely; the spacing limits the contact-point resolution.
    """
    probes = np.asarray(probe_points, dtype=complex)
    nsteps = int(math.ceil(horizon / dt - 1e-9))
    delta = collide_scale * math.sqrt(dt)
    sig = math.sqrt(kappa * dt)
    out = np.full(trials, np.nan)
    n_chunks = -(-trials // chunk)
    for c in range(n_chunks):
        m = min(chunk, trials - c * chunk)
        gen = rng.split(c).generator()
        da = gen.normal(0.0, sig, size=(m, nsteps))
        res = _probe_contact_kernel(probes, da, dt, delta)
        out[c * chunk : c * chunk + m] = np.where(res >= 0, probes.real[np.maximum(res, 0)], np.nan)
    bad = int(np.isnan(out).sum())
    if bad:
        warnings.warn(f"{bad}/{trials} SLE trials exhausted the horizon", RuntimeWarning)
    return out


@njit(cache=True)
def _probe_contact_kernel(probes, da, dt, delta):
    m, nsteps = da.shape
    npr = probes.shape[0]
    out = np.full(m, -1, dtype=np.int64)
    for t in range(m):
        w = probes.copy()
        a = 0.0
        for s in range(nsteps):
            best = -1
            best_gap = delta
            for j in range(npr):
                gap = abs(w[j] - a)
                if gap <= best_gap:
                    best_gap = gap
                    best = j
            if best >= 0:
                out[t] = best
                break
            for j in range(npr):
                d = w[j] - a
                s2 = np.sqrt(complex(d * d + 4.0 * dt))
                if s2.imag < 0 or (s2.imag == 0 and d.real < 0):
                    s2 = -s2
                w[j] = a + s2
            a += da[t, s]
    return out

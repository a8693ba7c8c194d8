"""Command-line interface.

`conflab run` executes a configured experiment and writes its JSON result;
`perc`, `saw`, `cardy` and `sle` expose the corresponding module operations
directly (they are also installed as standalone commands).
"""

from __future__ import annotations

import csv
import math
import sys

import click
import numpy as np

from . import experiments, loewner, percolation
from . import saw as saw_mod
from .geometry import GridSpec, save_mask
from .paths import export_path_csv
from .rng import RngStream
from .special import RectangleShape, cardy_F, rectangle_cross_ratio


@click.group()
def main():
    """Numerical laboratory for conformally invariant planar models."""


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Master seed (overrides the config).")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--svg", "svg_path", type=click.Path(), default=None)
@click.option("--workers", type=int, default=1, show_default=True)
def run_cmd(config_path, seed, out_path, csv_path, svg_path, workers):
    """Run the experiment named in a config file and write result files."""
    try:
        config = experiments.load_config(config_path)
        result = experiments.run_experiment(config, seed=seed, workers=workers)
    except experiments.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    result.write_json(out_path)
    if csv_path:
        result.write_csv(csv_path)
    if svg_path:
        result.write_svg(svg_path)
    click.echo(f"{result.experiment_id}: {len(result.points)} points", err=False)
    if result.fit is not None:
        click.echo(f"fitted slope {result.fit.slope:.6f} +- {result.fit.slope_stderr:.6f}")


# --- cardy ---


@main.command("cardy")
@click.option("--x", "x_value", type=float, default=None, help="Cross-ratio in [0, 1].")
@click.option("--rect", nargs=2, type=float, default=None, help="Rectangle sides L l.")
@click.option("--table", type=int, default=None, help="Emit CSV of N+1 values of (x, F(x)).")
def cardy(x_value, rect, table):
    """Evaluate the crossing function F to 12 digits."""
    if table is not None:
        w = csv.writer(sys.stdout)
        w.writerow(["x", "F"])
        for k in range(table + 1):
            x = k / table
            w.writerow([f"{x:.12f}", f"{cardy_F(x):.12f}"])
        return
    if rect:
        x = rectangle_cross_ratio(RectangleShape(rect[0], rect[1]))
        click.echo(f"x({rect[0]:g},{rect[1]:g}) = {x:.12f}")
        click.echo(f"F = {cardy_F(x):.12f}")
        return
    if x_value is None:
        raise click.UsageError("provide --x, --rect or --table")
    click.echo(f"F({x_value:g}) = {cardy_F(x_value):.12f}")


# --- perc ---


@main.group()
def perc():
    """Critical bond percolation experiments."""


@perc.command("cross")
@click.option("--L", "length", type=float, default=2.0, show_default=True)
@click.option("--l", "height", type=float, default=1.0, show_default=True)
@click.option("--n", type=int, default=128, show_default=True)
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--trials", type=int, default=100000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--direction", type=click.Choice(["left-right", "top-bottom"]), default="left-right")
def perc_cross(length, height, n, p, trials, seed, direction):
    """Monte Carlo crossing probability of an L x l rectangle at scale n."""
    shape = RectangleShape(length, height)
    est, se = percolation.crossing_probability_mc(
        shape, n, p, trials, RngStream(seed), direction
    )
    click.echo(f"crossing estimate {est:.6f} +- {se:.6f}")
    x = rectangle_cross_ratio(shape)
    click.echo(f"cardy F(x={x:.6f}) = {cardy_F(x):.6f}")


@perc.command("boundary")
@click.option("--n", type=int, default=256, show_default=True)
@click.option("--trials", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
def perc_boundary(n, trials, seed, workers):
    """Mean outer perimeter of the largest cluster in an n x n box."""
    sizes = [n // 4, n // 2, n]
    result = experiments.run_experiment(
        {"experiment": "cluster-perimeter", "sizes": sizes, "trials": trials},
        seed=seed,
        workers=workers,
    )
    for s, e, se in result.points:
        click.echo(f"n={int(s)}: perimeter {e:.1f} +- {se:.1f}")
    click.echo(f"slope {result.fit.slope:.4f} +- {result.fit.slope_stderr:.4f}")


@perc.command("explore")
@click.option("--width", type=int, default=512, show_default=True)
@click.option("--height", type=int, default=256, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--max-steps", type=int, default=None)
def perc_explore(width, height, seed, csv_path, max_steps):
    """Trace the half-plane exploration interface of one critical sample."""
    config, origin = percolation.halfplane_config(width, height, 0.5, RngStream(seed))
    if max_steps is None:
        max_steps = 16 * width * height
    path = percolation.exploration_process(config, origin, max_steps)
    click.echo(f"exploration path of {len(path)} vertices")
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "re", "im"])
            for k, z in enumerate(path.vertices):
                w.writerow([k, repr(z.real), repr(z.imag)])
        click.echo(f"wrote {csv_path}")


# --- saw ---


@main.group()
def saw():
    """Self-avoiding walk enumeration."""


@saw.command("count")
@click.option("--n", type=int, default=14, show_default=True)
@click.option("--lattice", type=click.Choice(["square", "triangular"]), default="square")
def saw_count(n, lattice):
    """Exact counts a_1..a_n; CSV columns n, a_n, a_n^(1/n)."""
    table = saw_mod.enumerate_saws(n, lattice)
    w = csv.writer(sys.stdout)
    w.writerow(["n", "a_n", "a_n^(1/n)"])
    for k in range(1, n + 1):
        w.writerow([k, table.a(k), f"{table.a(k) ** (1.0 / k):.9f}"])


@saw.command("diam")
@click.option("--n", type=int, default=12, show_default=True)
@click.option("--lattice", type=click.Choice(["square", "triangular"]), default="square")
def saw_diam(n, lattice):
    """Exact squared-diameter histogram at length n (CSV)."""
    dist = saw_mod.diameter_distribution(n, lattice)
    w = csv.writer(sys.stdout)
    key = "4*d^2" if lattice == "triangular" else "d^2"
    w.writerow([key, "count"])
    for d2 in sorted(dist.histogram):
        w.writerow([d2, dist.histogram[d2]])


# --- sle ---


@main.group()
def sle():
    """Loewner evolutions driven by Brownian motion."""


@sle.command("driving")
@click.option("--kappa", type=float, default=6.0, show_default=True)
@click.option("--dt", type=float, default=loewner.DT_DEFAULT, show_default=True)
@click.option("--horizon", type=float, default=1.0, show_default=True)
@click.option("--kind", type=click.Choice(["chordal-real", "radial-angle"]), default="chordal-real")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--csv", "csv_path", required=True, type=click.Path())
def sle_driving_cmd(kappa, dt, horizon, kind, seed, csv_path):
    """Sample a driving function and export it as CSV."""
    drv = loewner.sle_driving(kappa, dt, horizon, kind, RngStream(seed))
    drv.export_csv(csv_path)
    click.echo(f"wrote {len(drv.times)} samples to {csv_path}")


@sle.command("hull")
@click.option("--kappa", type=float, default=6.0, show_default=True)
@click.option("--dt", type=float, default=loewner.DT_DEFAULT, show_default=True)
@click.option("--horizon", type=float, default=0.05, show_default=True)
@click.option("--collide-scale", type=float, default=loewner.COLLIDE_SCALE_DEFAULT, show_default=True)
@click.option("--spacing", type=float, default=1 / 256, show_default=True)
@click.option("--half-width", type=float, default=0.6, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def sle_hull(kappa, dt, horizon, collide_scale, spacing, half_width, seed, out_path):
    """Extract a chordal hull mask and save it as a bitmap."""
    drv = loewner.sle_driving(kappa, dt, horizon, "chordal-real", RngStream(seed))
    cols = int(2 * half_width / spacing)
    rows = int(half_width / spacing)
    grid = GridSpec(complex(-half_width, 0.0), spacing, cols, rows)
    state_driving = loewner.DrivingFunction("chordal-real", drv.times, drv.values)
    mask = loewner.chordal_hull_extract(state_driving, grid, horizon)
    save_mask(mask, out_path)
    click.echo(f"hull of {mask.count()} cells written to {out_path}")


@sle.command("radial-hull")
@click.option("--kappa", type=float, default=6.0, show_default=True)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--tmin", type=float, default=loewner.T_MIN_DEFAULT, show_default=True)
@click.option("--collide-scale", type=float, default=loewner.COLLIDE_SCALE_DEFAULT, show_default=True)
@click.option("--spacing", type=float, default=1 / 64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def sle_radial_hull(kappa, dt, tmin, collide_scale, spacing, seed, out_path):
    """Run radial SLE to its first touch of the unit circle; save the hull."""
    half = int(math.ceil(1.05 / spacing))
    grid = GridSpec(complex(-half * spacing, -half * spacing), spacing, 2 * half, 2 * half)
    mask, endpoint = loewner.radial_cci_hull(
        kappa, RngStream(seed), grid, dt=dt, t_min=tmin, collide_scale=collide_scale
    )
    save_mask(mask, out_path)
    click.echo(f"hull of {mask.count()} cells, endpoint {endpoint:.6f}, written to {out_path}")


@sle.command("race")
@click.option("--kappa", type=float, default=6.0, show_default=True)
@click.option("--a", type=float, default=1.0, show_default=True)
@click.option("--b", type=float, default=1.0, show_default=True)
@click.option("--dt", type=float, default=2.5e-5, show_default=True)
@click.option("--horizon", type=float, default=30.0, show_default=True)
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def sle_race(kappa, a, b, dt, horizon, trials, seed):
    """Estimate P(T_-a < T_b) and compare with F(b/(a+b))."""
    est, se = loewner.swallow_race_mc(kappa, a, b, dt, horizon, trials, RngStream(seed))
    click.echo(f"P(T_-{a:g} < T_{b:g}) = {est:.6f} +- {se:.6f}")
    click.echo(f"F({b:g}/{a + b:g}) = {cardy_F(b / (a + b)):.6f}")

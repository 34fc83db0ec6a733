"""Command-line interface.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
non-convergence.  Sweep and heatmap commands write CSV, bounds and
dinkelbach write JSON; every report also renders a figure with the same
stem next to the data file.
"""

from __future__ import annotations

import functools
import math
import sys

import click
import numpy as np

from .channel import QuadratureError
from .constellation import ConfigurationError
from .estimator import (
    NonConvergenceError,
    capacity_table_for,
    dinkelbach_estimate,
    estimate_from_events,
    evaluate_events,
    generate_geometry_events,
    nonpersistent_capacity,
    persistent_capacity_mc,
    q_function,
    rand_capacity_quadrature,
    upper_bound,
)
from .geometry import GeometryError, RootNotFoundError, SatelliteInit, cap_bounds
from .handover import OPT, StrategyKind
from .plots import figure_path, save_heatmap, save_sweep, save_trace, write_csv, write_json
from .scenario import PRESETS, ConfigError, Scenario, parse_scenario
from .serving import ServingPolicy

EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3


def _handled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, ConfigurationError, ValueError) as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (NonConvergenceError, QuadratureError, RootNotFoundError, GeometryError) as exc:
            click.echo(f"numerical non-convergence: {exc}", err=True)
            sys.exit(EXIT_NONCONVERGENCE)

    return wrapper


def _common(fn):
    fn = click.option("--scenario", "scenario_path", type=click.Path(exists=True),
                      default=None, help="Scenario config file (overrides the preset).")(fn)
    fn = click.option("--preset", type=click.Choice(sorted(PRESETS)), default="melbourne",
                      show_default=True)(fn)
    fn = click.option("--seed", type=click.IntRange(0), default=None,
                      help="RNG seed (unsigned 64-bit).")(fn)
    fn = click.option("--renewals", type=click.IntRange(1), default=None,
                      help="Monte Carlo renewal count.")(fn)
    fn = click.option("--out", type=click.Path(), required=True,
                      help="Output data file; the figure lands next to it.")(fn)
    return fn


def _strategies_option(fn):
    return click.option(
        "--strategies", default="rand,msc0,msc,opt", show_default=True,
        help="Comma-separated list from rand, msc0, msc, opt (opt:<c> pins the guess).",
    )(fn)


def _load(scenario_path, preset, seed, renewals) -> Scenario:
    sc = parse_scenario(scenario_path) if scenario_path else PRESETS[preset]
    from dataclasses import replace

    if seed is not None:
        sc = replace(sc, seed=seed)
    if renewals is not None:
        sc = replace(sc, n_renewals=renewals)
    return sc


def _parse_strategies(text: str) -> list[StrategyKind]:
    kinds = [StrategyKind.parse(tok) for tok in text.split(",") if tok.strip()]
    if not kinds:
        raise ConfigError("--strategies must name at least one strategy")
    return kinds


def _estimate_kind(kind: StrategyKind, events, seed: int):
    """Value and (possibly zero) standard error; Opt runs the optimizer."""
    if kind.kind == OPT and kind.c_star == 0.0:
        trace = dinkelbach_estimate(events)
        return trace.c_star, 0.0
    est = estimate_from_events(kind, events, np.random.default_rng(seed))
    return est.value, est.std_error


def _label(kind: StrategyKind) -> str:
    if kind.kind == OPT and kind.c_star > 0.0:
        return f"opt:{kind.c_star:g}"
    return kind.kind


@click.group()
def main() -> None:
    """Persistent-capacity simulator for LEO mega-constellation handover."""


@main.command()
@_common
@click.option("--direction", type=click.Choice(["1", "-1"]), default="1",
              show_default=True, help="Ascending (1) or descending (-1) satellites.")
@click.option("--resolution", type=click.IntRange(2), default=48, show_default=True,
              help="Grid points per axis over the visibility cap.")
@_handled
def heatmap(scenario_path, preset, seed, renewals, out, direction, resolution) -> None:
    """Serving-ratio heatmap over the visibility cap for one travel direction."""
    model = _load(scenario_path, preset, seed, renewals).build()
    table = capacity_table_for(model)
    shell, cap, user = model.shell, model.cap, model.user
    a = int(direction)
    phi_lo = max(cap.phi_lo, math.pi / 2 - shell.b) + 1e-7
    phi_hi = min(cap.phi_hi, math.pi / 2 + shell.b) - 1e-7
    if phi_lo >= phi_hi:
        raise ConfigError("visibility cap does not intersect the satellite band")
    phis = np.linspace(phi_lo, phi_hi, resolution)
    taus = np.linspace(0.02, 0.98, resolution)
    values = np.zeros((resolution, resolution))
    theta_rel = np.zeros((resolution, resolution))
    from .estimator import _serving_ratio_at  # shared with upper_bound

    for i, phi in enumerate(phis):
        lo, hi = cap_bounds(phi, user, cap.sigma1)
        for j, tau in enumerate(taus):
            theta = lo + tau * (hi - lo)
            theta_rel[i, j] = math.degrees(theta - user.theta_u)
            values[i, j] = _serving_ratio_at(
                SatelliteInit(theta % (2 * math.pi), phi, a), model, table
            )
    i_max, j_max = np.unravel_index(np.argmax(values), values.shape)
    rows = []
    for i, phi in enumerate(phis):
        for j in range(resolution):
            rows.append((theta_rel[i, j], math.degrees(phi), float(values[i, j]),
                         int(i == i_max and j == j_max)))
    write_csv(out, ["theta_offset_deg", "phi_deg", "serving_capacity", "is_argmax"],
              rows)
    save_heatmap(theta_rel, np.degrees(phis)[:, None] * np.ones_like(theta_rel),
                 values, out, f"serving ratio over the cap ({model.scenario.name})")
    click.echo(f"wrote {out} and {figure_path(out)}")


@main.command("sweep-snr")
@_common
@_strategies_option
@click.option("--db-from", type=float, default=110.0, show_default=True)
@click.option("--db-to", type=float, default=130.0, show_default=True)
@click.option("--db-step", type=float, default=2.0, show_default=True)
@click.option("--with-bound", is_flag=True, help="Append an upper-bound column.")
@click.option("--with-quadrature", is_flag=True,
              help="Append a random-handover quadrature column.")
@_handled
def sweep_snr(scenario_path, preset, seed, renewals, out, strategies,
              db_from, db_to, db_step, with_bound, with_quadrature) -> None:
    """Persistent capacity versus transmit SNR on shared frozen geometry."""
    if db_step <= 0 or db_to < db_from:
        raise ConfigError("need db_from <= db_to and db_step > 0")
    sc = _load(scenario_path, preset, seed, renewals)
    model = sc.build()
    kinds = _parse_strategies(strategies)
    dbs = np.arange(db_from, db_to + db_step / 2, db_step)
    geo = generate_geometry_events(model, sc.n_renewals, sc.seed)
    table = capacity_table_for(model, 10.0 ** (db_from / 10.0), 10.0 ** (db_to / 10.0))
    series = {_label(k): np.zeros(len(dbs)) for k in kinds}
    errors = {_label(k): np.zeros(len(dbs)) for k in kinds}
    rows = []
    if with_bound or with_quadrature:
        extra_series: dict[str, np.ndarray] = {}
        if with_bound:
            extra_series["upper_bound"] = np.zeros(len(dbs))
        if with_quadrature:
            extra_series["rand_quadrature"] = np.zeros(len(dbs))
        series.update(extra_series)
    for i, db in enumerate(dbs):
        events = evaluate_events(geo, 10.0 ** (db / 10.0), model.fading, table)
        row: list = [float(db)]
        for k in kinds:
            value, se = _estimate_kind(k, events, sc.seed)
            series[_label(k)][i] = value
            errors[_label(k)][i] = se
            row += [value, se]
        point = model.with_gamma_db(float(db))
        if with_bound:
            series["upper_bound"][i] = upper_bound(point, 32, table)
            row.append(series["upper_bound"][i])
        if with_quadrature:
            series["rand_quadrature"][i] = rand_capacity_quadrature(
                point, capacity_fn=table
            )
            row.append(series["rand_quadrature"][i])
        rows.append(tuple(row))
    header = ["gamma_db"]
    for k in kinds:
        header += [_label(k), f"{_label(k)}_se"]
    if with_bound:
        header.append("upper_bound")
    if with_quadrature:
        header.append("rand_quadrature")
    write_csv(out, header, rows)
    save_sweep(dbs, series, "transmit SNR (dB)", out,
               f"capacity vs SNR ({sc.name})", errors)
    click.echo(f"wrote {out} and {figure_path(out)}")


@main.command("sweep-serving")
@_common
@_strategies_option
@click.option("--t-from", type=float, default=5.0, show_default=True,
              help="Smallest fixed serving time (s).")
@click.option("--t-to", type=float, default=60.0, show_default=True)
@click.option("--t-step", type=float, default=5.0, show_default=True)
@click.option("--with-bound", is_flag=True, help="Append an upper-bound column.")
@click.option("--with-quadrature", is_flag=True,
              help="Append a random-handover quadrature column.")
@_handled
def sweep_serving(scenario_path, preset, seed, renewals, out, strategies,
                  t_from, t_to, t_step, with_bound, with_quadrature) -> None:
    """Persistent capacity versus a fixed serving time T_min = T_max."""
    sc = _load(scenario_path, preset, seed, renewals)
    base = sc.build()
    if t_step <= 0 or t_to < t_from or t_from < base.policy.dt:
        raise ConfigError("need dt <= t_from <= t_to and t_step > 0")
    kinds = _parse_strategies(strategies)
    ts = np.arange(t_from, t_to + t_step / 2, t_step)
    series = {_label(k): np.zeros(len(ts)) for k in kinds}
    errors = {_label(k): np.zeros(len(ts)) for k in kinds}
    rows = []
    if with_bound:
        series["upper_bound"] = np.zeros(len(ts))
    if with_quadrature:
        series["rand_quadrature"] = np.zeros(len(ts))
    for i, t in enumerate(ts):
        model = base.with_policy(ServingPolicy(float(t), float(t), base.policy.dt))
        geo = generate_geometry_events(model, sc.n_renewals, sc.seed)
        table = capacity_table_for(model)
        events = evaluate_events(geo, model.gamma, model.fading, table)
        row: list = [float(t)]
        for k in kinds:
            value, se = _estimate_kind(k, events, sc.seed)
            series[_label(k)][i] = value
            errors[_label(k)][i] = se
            row += [value, se]
        if with_bound:
            series["upper_bound"][i] = upper_bound(model, 32, table)
            row.append(series["upper_bound"][i])
        if with_quadrature:
            series["rand_quadrature"][i] = rand_capacity_quadrature(
                model, capacity_fn=table
            )
            row.append(series["rand_quadrature"][i])
        rows.append(tuple(row))
    header = ["t_serv_s"]
    for k in kinds:
        header += [_label(k), f"{_label(k)}_se"]
    if with_bound:
        header.append("upper_bound")
    if with_quadrature:
        header.append("rand_quadrature")
    write_csv(out, header, rows)
    save_sweep(ts, series, "fixed serving time (s)", out,
               f"capacity vs serving time ({sc.name})", errors)
    click.echo(f"wrote {out} and {figure_path(out)}")


@main.command()
@_common
@_strategies_option
@_handled
def bounds(scenario_path, preset, seed, renewals, out, strategies) -> None:
    """Strategy estimates sandwiched between random handover and the upper bound."""
    sc = _load(scenario_path, preset, seed, renewals)
    model = sc.build()
    kinds = _parse_strategies(strategies)
    geo = generate_geometry_events(model, sc.n_renewals, sc.seed)
    table = capacity_table_for(model)
    events = evaluate_events(geo, model.gamma, model.fading, table)
    payload: dict = {
        "scenario": sc.name,
        "gamma_db": sc.gamma_db,
        "n_renewals": sc.n_renewals,
        "seed": sc.seed,
        "upper_bound": upper_bound(model, capacity_fn=table),
        "strategies": {},
    }
    for k in kinds:
        value, se = _estimate_kind(k, events, sc.seed)
        payload["strategies"][_label(k)] = {"value": value, "std_error": se}
    write_json(out, payload)
    import matplotlib.pyplot as plt

    names = list(payload["strategies"])
    vals = [payload["strategies"][n]["value"] for n in names]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, vals, color="tab:blue")
    ax.axhline(payload["upper_bound"], color="tab:red", linestyle="--",
               label="upper bound")
    ax.set_ylabel("persistent capacity (bits/use)")
    ax.set_title(f"strategy comparison ({sc.name})")
    ax.legend()
    fig.savefig(figure_path(out), dpi=150, bbox_inches="tight")
    plt.close(fig)
    click.echo(f"wrote {out} and {figure_path(out)}")


@main.command()
@_common
@click.option("--epsilon", type=float, default=None,
              help="Convergence threshold on the residual (default: relative 1e-6).")
@_handled
def dinkelbach(scenario_path, preset, seed, renewals, out, epsilon) -> None:
    """Run the optimal-capacity iteration and dump its trace."""
    sc = _load(scenario_path, preset, seed, renewals)
    model = sc.build()
    geo = generate_geometry_events(model, sc.n_renewals, sc.seed)
    table = capacity_table_for(model)
    events = evaluate_events(geo, model.gamma, model.fading, table)
    try:
        trace = dinkelbach_estimate(events, epsilon=epsilon)
    except NonConvergenceError as exc:
        write_json(out, {
            "scenario": sc.name, "converged": False,
            "iterates": [{"c": c, "q": q} for c, q in exc.trace.iterates],
        })
        raise
    write_json(out, {
        "scenario": sc.name,
        "gamma_db": sc.gamma_db,
        "n_renewals": sc.n_renewals,
        "seed": sc.seed,
        "converged": trace.converged,
        "iterations": trace.iterations,
        "c_star": trace.c_star,
        "iterates": [{"c": c, "q": q} for c, q in trace.iterates],
    })
    save_trace(trace.iterates, out, f"optimal-capacity iteration ({sc.name})")
    click.echo(f"wrote {out} and {figure_path(out)}")


@main.command()
@click.option("--seed", type=click.IntRange(0), default=7, show_default=True)
@_handled
def selftest(seed) -> None:
    """Fast internal consistency checks (no files written)."""
    from .channel import AVERAGE_SHADOWING, mgf_derivative, sample_power
    from .estimator import brute_force_optimal

    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    p = AVERAGE_SHADOWING
    check("fading mean power", abs(mgf_derivative(0.0, p) - p.mean_power) < 1e-12)

    rng = np.random.default_rng(seed)
    mc = float(np.mean(sample_power(p, rng, 200_000)))
    check("fading sampler mean", abs(mc - p.mean_power) < 0.02)

    rng = np.random.default_rng(seed + 1)
    events = [np.column_stack([rng.uniform(1, 5, 4), rng.integers(1, 9, 4)])
              for _ in range(6)]
    trace = dinkelbach_estimate(events)
    exact, _ = brute_force_optimal(events)
    check("optimizer equals brute force",
          trace.converged and abs(trace.c_star - exact) < 1e-9)

    model = PRESETS["melbourne"].build()
    est = persistent_capacity_mc(StrategyKind.parse("msc"), model, 20, seed)
    check("end-to-end pipeline runs", est.value > 0 and est.n_renewals == 20)

    ub = upper_bound(model, grid_resolution=32)
    check("bound above a sample estimate", ub > est.value - 3 * est.std_error)

    if failures:
        click.echo(f"{failures} check(s) failed", err=True)
        sys.exit(1)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()

"""Command-line entry point: ``muskat run | diagnose | sweep``."""
from __future__ import annotations

import csv
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .curve import arc_chord_field, beta_lattice, read_snapshot, tangent_speed_sq
from .diagnostics import energy_report, sigma_field
from .dynamics import SolverOptions, make_state
from .experiment import SpecError, emit_plot_data, execute, load_spec, parse_spec, sweep as run_sweep

OVERRIDES = {"n": "N", "dt": "dt", "t_end": "t_end", "eps": "eps", "delta": "delta", "scheme": "scheme"}


def _spec_from(config, **flags):
    data = {}
    if config:
        data = load_spec(config).model_dump(mode="json")
    for flag, key in OVERRIDES.items():
        if flags.get(flag) is not None:
            data[key] = flags[flag]
    return parse_spec(data)


def _common(f):
    opts = [
        click.option("--config", type=click.Path(dir_okay=False), help="JSON experiment description."),
        click.option("--n", type=int, help="Grid size N (even)."),
        click.option("--dt", type=float, help="Time step."),
        click.option("--t-end", "t_end", type=float, help="Final time."),
        click.option("--eps", type=float, help="Mollification width (0 = off)."),
        click.option("--delta", type=float, help="Kernel regularization (0 = off)."),
        click.option("--scheme", type=click.Choice(["rk4", "euler"]), help="Time integrator."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Periodic Muskat interface simulator."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_common
@click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--plot-data/--no-plot-data", default=False, help="Also write long-format plot CSVs.")
def run(config, out, plot_data, **flags):
    """Run one experiment and write its artifact directory."""
    try:
        spec = _spec_from(config, **flags)
    except SpecError as exc:
        raise click.UsageError(str(exc)) from None
    status, path = execute(spec, out)
    summary = json.loads((path / "summary.json").read_text())
    if plot_data and status == 0:
        emit_plot_data(path)
    click.echo(f"{summary['status']}: {path}")
    if summary.get("reason"):
        click.echo(f"reason: {summary['reason']}")
    sys.exit(status)


@main.command()
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", type=click.Path(dir_okay=False), help="Experiment JSON supplying params and solver options.")
@click.option("--out", type=click.Path(file_okay=False), help="Directory for record.json and profiles (default: stdout only).")
@click.option("--profiles", is_flag=True, help="Write per-alpha sigma and arc-chord profiles (needs --out).")
def diagnose(snapshot, config, out, profiles):
    """Evaluate every monitored quantity on a snapshot CSV."""
    try:
        spec = load_spec(config) if config else parse_spec({})
    except SpecError as exc:
        raise click.UsageError(str(exc)) from None
    if profiles and not out:
        raise click.UsageError("--profiles needs --out")
    curve, meta = read_snapshot(snapshot)
    params = spec.params.to_params()
    opts = SolverOptions(spec.solver, spec.solver_tol, spec.max_iter)
    state = make_state(curve, params, float(meta.get("time", 0.0)), spec.eps, spec.delta, opts)
    rec = energy_report(curve, state.w, params, state.t, br=state.br, residual=state.residual,
                        probe_offset=spec.probe_offset)
    text = json.dumps(rec.to_dict(), indent=2)
    click.echo(text)
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "record.json").write_text(text + "\n")
        if profiles:
            sig = sigma_field(curve, state.w, params, br=state.br)
            F = arc_chord_field(curve, beta_lattice(curve.N)).max(axis=0)
            F = np.maximum(F, 1.0 / tangent_speed_sq(curve))
            with (out / "profiles.csv").open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["alpha", "sigma", "F_max"])
                for row in zip(curve.alpha, sig, F):
                    writer.writerow([format(float(x), ".17g") for x in row])


@main.command()
@_common
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Directory for the run subdirectories.")
@click.option("--param", "param", required=True,
              help="FIELD=v1,v2,... with FIELD a config key or params.<name>, e.g. eps=0,1e-3.")
@click.option("--workers", type=int, default=None, help="Parallel processes (default: MUSKAT_THREADS, 0 = all CPUs).")
def sweep(config, out, param, workers, **flags):
    """Run the same experiment over a list of values of one field."""
    if "=" not in param:
        raise click.UsageError("--param must look like FIELD=v1,v2,...")
    field, raw = param.split("=", 1)
    values = [json.loads(v) for v in raw.split(",") if v.strip()]
    try:
        base = _spec_from(config, **flags)
        rows = run_sweep(base, field.strip(), values, out, workers)
    except SpecError as exc:
        raise click.UsageError(str(exc)) from None
    for row in rows:
        click.echo(f"{field}={row[field.strip()]}: {row['status']} ({row['dir']})")
    sys.exit(max(r["exit"] for r in rows))


if __name__ == "__main__":
    main()

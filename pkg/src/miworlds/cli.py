"""CLI interface for miworlds using Click."""

from pathlib import Path
from typing import Any, Dict, Optional

import click
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from miworlds import __version__
from miworlds.config import (
    DEFAULTS,
    apply_overrides,
    build_density_model,
    build_potential_spec,
    build_scenario_overrides,
    build_simulation_config,
    load_config,
    output_params,
    resolve_config,
)
from miworlds.core import PhysicalParams
from miworlds.density import DensityKind, DensityModel, equal_area_masses, sample_worlds
from miworlds.exceptions import MiwError
from miworlds.output import (
    FORCES_FILE,
    samples_frame,
    write_csv,
    write_report,
)
from miworlds.scenarios import (
    SCENARIOS,
    Outcome,
    amplitude_dt_sweep,
    evaluate_run,
    force_oracle_table,
    oracle_rms_error,
    planned_steps,
    run_scenario,
)
from miworlds.stencil import build_stencil, default_offsets, stencil_residual
from miworlds.utils import parse_float_list, parse_offsets, run_output_dir

console = Console()


def _progress() -> Progress:
    return Progress(
        TextColumn("[cyan]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed:.0f}/{task.total:.0f} steps"),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    )


def _handle_errors(ctx: click.Context, func, *args, **kwargs):
    """Run a command body, turning library errors into a red message and exit 1."""
    verbose = ctx.obj.get("verbose", False) if ctx.obj else False
    try:
        return func(*args, **kwargs)
    except MiwError as e:
        console.print(f"[red]Error:[/red] {e}")
        raise click.Abort()
    except click.Abort:
        raise
    except Exception as e:
        console.print(f"[red]Unexpected error:[/red] {e}")
        if verbose:
            console.print_exception()
        raise click.Abort()


def _global_overrides(obj: Dict[str, Any], config: Dict[str, Any]) -> Dict[str, Any]:
    """Apply --dt, --steps, --full, --physical and --out-dir to a resolved config."""
    overrides = {
        "output.directory": str(obj["out_dir"]) if obj.get("out_dir") else None,
        "units.mode": "physical" if obj.get("physical") else None,
    }
    if config["scenario"]["name"]:
        scenario_overrides = dict(config["scenario"]["overrides"])
        for key in ("dt", "steps"):
            if obj.get(key) is not None:
                scenario_overrides[key] = obj[key]
        if obj.get("full"):
            scenario_overrides["full"] = True
        overrides["scenario.overrides"] = scenario_overrides
    else:
        overrides["integration.dt"] = obj.get("dt")
        overrides["integration.steps"] = obj.get("steps")
    return apply_overrides(config, overrides)


def _report_outcome(report, out_dir: Path, written) -> None:
    table = Table(title=f"{report.name}: {report.outcome.value}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    for key in (
        "steps_run", "T_final", "gap_width_initial", "gap_width_min", "gap_width_final",
        "amplitude_max", "inner_displacement_ratio", "energy_drift_rel", "collapse_time",
        "refined_outcome",
    ):
        if key in report.metrics:
            value = report.metrics[key]
            table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    console.print(table)
    console.print(f"[green]SUCCESS: wrote {len(written)} file(s) to {out_dir}[/green]")


class StepCounter:
    """Steps completed over consecutive runs sharing one record callback.

    A scenario and its refined variant report through the same callback;
    a new run is detected when the step count goes back down.
    """

    def __init__(self, total: int):
        self.total = total
        self.offset = 0
        self.last = 0

    def update(self, step: int) -> int:
        if step < self.last:
            self.offset += self.last
        self.last = step
        return min(self.offset + step, self.total)


def _run_with_progress(func, total_steps: int, description: str):
    with _progress() as progress:
        task = progress.add_task(description, total=total_steps)
        counter = StepCounter(total_steps)

        def on_record(step: int, time: float, state) -> None:
            progress.update(task, completed=counter.update(step))

        return func(on_record)


@click.group()
@click.option(
    "--out-dir",
    "-o",
    type=click.Path(path_type=Path),
    default=None,
    help="Output directory (default: 'results' or output.directory from the config)",
)
@click.option("--dt", type=float, default=None, help="Override the time step (dimensionless T)")
@click.option("--steps", type=int, default=None, help="Override the number of steps")
@click.option("--full", is_flag=True, help="Use the full one-period horizon for scenarios")
@click.option("--physical", is_flag=True, help="Write positions, momenta and energies in physical units")
@click.option("--verbose", is_flag=True, help="Verbose output")
@click.version_option(version=__version__, prog_name="miworlds")
@click.pass_context
def main(ctx, out_dir, dt, steps, full, physical, verbose):
    """Many-interacting-worlds simulation of a particle in a 1D harmonic trap.

    Examples:

        \b
        # Rational-smoothing coefficients for L=4
        miworlds coeffs --L 4

        \b
        # Sample 40 worlds from the first excited state
        miworlds sample excited 40

        \b
        # Reproduce the toy-model node collapse
        miworlds --dt 1e-6 scenario fig3_truncated_toy
    """
    ctx.ensure_object(dict)
    ctx.obj.update(
        out_dir=out_dir, dt=dt, steps=steps, full=full, physical=physical, verbose=verbose
    )


# =============================================================================
# COEFFS
# =============================================================================

@main.command()
@click.option("-L", "--L", "order", type=int, default=4, help="Stencil order L (default: 4)")
@click.option("--offsets", help="Comma-separated offsets (default: +-1 .. +-ceil(L/2))")
@click.option("--float", "use_float", is_flag=True, help="Solve in floating point instead of exactly")
@click.pass_context
def coeffs(ctx, order, offsets, use_float):
    """Print the rational-smoothing coefficient matrix alpha[c, l]."""

    def body():
        offset_list = parse_offsets(offsets) or list(default_offsets(max(order, 2)))
        stencil = build_stencil(offset_list, order, exact=not use_float)
        table = Table(title=f"Stencil coefficients, L={stencil.order}")
        table.add_column("c", justify="right", style="cyan")
        for l in range(1, stencil.order + 1):
            table.add_column(f"l={l}", justify="right")
        for row, c in enumerate(stencil.offsets):
            cells = []
            for col in range(stencil.order):
                value = stencil.alpha[row, col]
                if stencil.rational is not None:
                    cells.append(f"{stencil.rational[row, col]} ({value:.12g})")
                else:
                    cells.append(f"{value:.12g}")
            table.add_row(str(c), *cells)
        console.print(table)
        console.print(f"[green]Moment residual: {stencil_residual(stencil):.3g}[/green]")

    _handle_errors(ctx, body)


# =============================================================================
# SAMPLE
# =============================================================================

@main.command()
@click.argument("model", type=click.Choice([k.value for k in DensityKind]))
@click.argument("n_worlds", type=int)
@click.option("--out", type=click.Path(path_type=Path), help="Output CSV (default: <out-dir>/samples_<model>_<N>.csv)")
@click.option("--check", is_flag=True, help="Report the largest deviation of the interval masses from 1/N")
@click.option("--mass", type=float, default=1.0, show_default=True, help="Particle mass for --physical output")
@click.option("--hbar", type=float, default=1.0, show_default=True, help="Reduced Planck constant for --physical output")
@click.option("--omega", type=float, default=1.0, show_default=True, help="Trap frequency for --physical output")
@click.pass_context
def sample(ctx, model, n_worlds, out, check, mass, hbar, omega):
    """Write N equal-area worlds for MODEL as index,position_dimensionless.

    With --physical a position_physical column is added, converted with
    --mass, --hbar and --omega.
    """

    def body():
        density = DensityModel(model)
        ensemble = sample_worlds(density, n_worlds)
        out_dir = ctx.obj.get("out_dir") or Path(DEFAULTS["output"]["directory"])
        path = out or out_dir / f"samples_{model}_{n_worlds}.csv"
        physical = None
        if ctx.obj.get("physical"):
            physical = PhysicalParams(mass=mass, hbar=hbar, omega=omega)
        write_csv(samples_frame(ensemble, physical), path)
        console.print(f"[green]SUCCESS: wrote {n_worlds} worlds to {path}[/green]")
        if check and n_worlds > 1:
            masses = equal_area_masses(density, ensemble.positions)
            deviation = float(abs(masses * n_worlds - 1.0).max())
            console.print(f"[cyan]Max relative interval-mass deviation: {deviation:.3g}[/cyan]")

    _handle_errors(ctx, body)


# =============================================================================
# RUN
# =============================================================================

def _load_resolved(ctx, config_path: Path) -> Dict[str, Any]:
    config = resolve_config(load_config(config_path))
    if ctx.obj.get("verbose"):
        console.print(f"[cyan]Loaded configuration from: {config_path}[/cyan]")
    return _global_overrides(ctx.obj, config)


@main.command("run")
@click.argument("config_path", type=click.Path(path_type=Path))
@click.pass_context
def run_command(ctx, config_path):
    """Run the simulation described by a YAML configuration file.

    A config naming a scenario runs that scenario; otherwise the density,
    potential and integration sections describe the run. Node collapse is
    a result and exits 0; only configuration errors and singular
    potentials exit nonzero.
    """

    def body():
        config = _load_resolved(ctx, config_path)
        out_base = Path(config["output"]["directory"])
        physical = output_params(config)
        frame = PhysicalParams.dimensionless()

        name = config["scenario"]["name"]
        if name:
            overrides = build_scenario_overrides(config)
            report = _run_with_progress(
                lambda on_record: run_scenario(name, overrides, frame, on_record),
                planned_steps(name, overrides, include_variants=True),
                name,
            )
        else:
            name = config_path.stem
            model = build_density_model(config)
            cfg = build_simulation_config(config, frame)
            initial = sample_worlds(model, config["density"]["n_worlds"])
            collapse = config["scenario"]["overrides"].get("collapse_fraction")
            kwargs = {"collapse_fraction": collapse} if collapse is not None else {}
            report = _run_with_progress(
                lambda on_record: evaluate_run(
                    name, initial, cfg, frame, has_node=model.has_node,
                    on_record=on_record, **kwargs,
                ),
                cfg.steps,
                name,
            )
        _finish(report, run_output_dir(out_base, name), config, physical)

    _handle_errors(ctx, body)


def _finish(report, out_dir: Path, config: Dict[str, Any], physical: Optional[PhysicalParams]):
    written = write_report(report, out_dir, config, config["output"]["formats"], physical)
    _report_outcome(report, out_dir, written)
    if report.outcome is Outcome.ABORTED:
        console.print(f"[red]Error:[/red] run aborted: {report.metrics.get('abort_reason')}")
        raise click.Abort()


# =============================================================================
# FORCES
# =============================================================================

@main.command()
@click.argument("config_path", type=click.Path(path_type=Path))
@click.pass_context
def forces(ctx, config_path):
    """Compare the interworld force on the sampled ensemble with +m omega^2 x."""

    def body():
        config = _load_resolved(ctx, config_path)
        model = build_density_model(config)
        spec = build_potential_spec(config)
        n_worlds = config["density"]["n_worlds"]
        table = force_oracle_table(model, n_worlds, spec, PhysicalParams.dimensionless())

        out_dir = run_output_dir(Path(config["output"]["directory"]), config_path.stem)
        path = write_csv(table, out_dir / FORCES_FILE)
        console.print(
            f"[cyan]Relative RMS force error over the central 80% of worlds "
            f"({spec.label}, N={n_worlds}): {oracle_rms_error(table):.4g}[/cyan]"
        )
        console.print(f"[green]SUCCESS: wrote {len(table)} rows to {path}[/green]")

    _handle_errors(ctx, body)


# =============================================================================
# SCENARIO
# =============================================================================

@main.command()
@click.argument("name", type=click.Choice(list(SCENARIOS)))
@click.option("--no-refine", is_flag=True, help="Skip the refined-dt variant run")
@click.option(
    "--collapse-fraction",
    type=float,
    default=None,
    help="Node gap fraction of its initial width that counts as collapse (default: 0.5)",
)
@click.option("--horizon", type=float, default=None, help="Integration horizon in periods")
@click.option("--dt-sweep", help="Comma-separated time steps for an amplitude-versus-dt table")
@click.pass_context
def scenario(ctx, name, no_refine, collapse_fraction, horizon, dt_sweep):
    """Run a named experiment and write its trajectory and summary."""

    def body():
        obj = ctx.obj
        config = resolve_config({"scenario": {"name": name}})
        config = _global_overrides(obj, config)
        overrides_cfg = config["scenario"]["overrides"]
        if horizon is not None:
            overrides_cfg["horizon"] = horizon
        if collapse_fraction is not None:
            overrides_cfg["collapse_fraction"] = collapse_fraction
        if no_refine:
            overrides_cfg["refine"] = False
        overrides = build_scenario_overrides(config)
        out_dir = run_output_dir(Path(config["output"]["directory"]), name)
        physical = output_params(config)

        if dt_sweep:
            dts = parse_float_list(dt_sweep)
            table = amplitude_dt_sweep(name, dts, overrides)
            path = write_csv(table, out_dir / "amplitude_sweep.csv")
            console.print(f"[green]SUCCESS: wrote amplitude sweep to {path}[/green]")
            return

        report = _run_with_progress(
            lambda on_record: run_scenario(
                name, overrides, PhysicalParams.dimensionless(), on_record
            ),
            planned_steps(name, overrides, include_variants=True),
            name,
        )
        _finish(report, out_dir, config, physical)

    _handle_errors(ctx, body)


if __name__ == "__main__":
    main()

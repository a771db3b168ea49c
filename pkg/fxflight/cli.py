from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

import click

from fxflight.__metadata__ import __project__, __version__
from fxflight.lib.exceptions import ApplicationClientError, ApplicationError

if TYPE_CHECKING:
    from fxflight.domain.simharness.schemas import Scenario, TrackingMetrics

EXIT_RUNTIME_ERROR = 1
EXIT_VALIDATION_ERROR = 2


class ApplicationGroup(click.Group):
    """Maps application errors to exit codes: validation failures exit 2, runtime failures exit 1."""

    def invoke(self, ctx: click.Context) -> Any:
        from rich.console import Console

        from fxflight.lib.settings import get_settings

        try:
            return super().invoke(ctx)
        except ApplicationError as exc:
            console = Console(stderr=True)
            console.print(f"[bold red]error:[/] {exc}", highlight=False)
            if get_settings().app.DEBUG:
                console.print_exception()
            code = EXIT_VALIDATION_ERROR if isinstance(exc, ApplicationClientError) else EXIT_RUNTIME_ERROR
            raise click.exceptions.Exit(code) from exc


@click.group(
    name="fxflight",
    cls=ApplicationGroup,
    invoke_without_command=False,
    help="Fixed-point deepsets flight control: quantize policies and fly them in simulation.",
)
@click.version_option(version=__version__, prog_name=__project__)
@click.pass_context  # pyright: ignore[reportArgumentType]
def fxflight_app(_: dict[str, Any]) -> None:
    """Fixed-point flight-control toolkit."""
    from fxflight.lib.log import configure_logging

    configure_logging()


def _resolve_scenario(value: str, dt: float | None, max_duration: float | None) -> Scenario:
    """A scenario file path, or the name of a built-in scenario."""
    from fxflight.domain.artifacts.services import builtin_scenario, load_scenario

    scn = load_scenario(Path(value)) if Path(value).is_file() else builtin_scenario(value)
    changes: dict[str, float] = {}
    if dt is not None:
        changes["dt"] = dt
    if max_duration is not None:
        changes["max_duration"] = max_duration
    return scn.replace(**changes) if changes else scn


def _print_metrics(metrics: TrackingMetrics) -> None:
    from rich import get_console
    from rich.table import Table

    table = Table(title="Tracking metrics")
    table.add_column("metric")
    table.add_column("value", justify="right")
    table.add_row("rms position error [m]", f"{metrics.rms_position_error:.4f}")
    table.add_row("max deviation [m]", f"{metrics.max_deviation:.4f}")
    for index, arrival in enumerate(metrics.arrival_times):
        table.add_row(f"setpoint {index + 1} arrival [s]", "-" if arrival is None else f"{arrival:.2f}")
    table.add_row("completed", str(metrics.completed).lower())
    table.add_row("out of bounds", str(metrics.out_of_bounds).lower())
    get_console().print(table)


_weights_option = click.option(
    "--weights",
    help="Float weight file (JSON)",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=False,
    show_default=False,
)
_scenario_option = click.option(
    "--scenario",
    help="Scenario file or built-in scenario name (directions, rectangle, spiral)",
    type=click.STRING,
    default="rectangle",
    show_default=True,
)
_dt_option = click.option("--dt", help="Override the scenario time step [s]", type=click.FLOAT, required=False)
_duration_option = click.option(
    "--max-duration",
    help="Override the scenario duration limit [s]",
    type=click.FLOAT,
    required=False,
)


@fxflight_app.command(name="random-weights", help="Write a weight file with uniform [-1, 1] parameters")
@click.option("--seed", help="Generator seed", type=click.INT, default=0, show_default=True)
@click.option(
    "--out",
    help="Destination weight file",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
)
def random_weights(seed: int, out: Path) -> None:
    """Write a seeded random policy."""
    from rich import get_console

    from fxflight.domain.artifacts.services import save_weights
    from fxflight.domain.network.services import random_policy

    console = get_console()
    save_weights(random_policy(seed), out, metadata={"source": "random_policy", "seed": str(seed)})
    console.print(f"Random weights written to {out}")


@fxflight_app.command(name="calibrate", help="Select the fractional-bit count with the smallest max output error")
@click.option(
    "--weights",
    help="Float weight file (JSON)",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
)
@click.option("--seed", help="Sampler seed", type=click.INT, required=False)
@click.option("--samples", help="Random observations per sweep entry", type=click.IntRange(min=1), required=False)
@click.option("--n-min", help="First fractional-bit count", type=click.IntRange(min=1), required=False)
@click.option("--n-max", help="Last fractional-bit count", type=click.IntRange(min=1), required=False)
@click.option("--neighbors", help="Neighbor observations per sample", type=click.IntRange(min=0), required=False)
@click.option("--workers", help="Worker threads for the sweep", type=click.IntRange(min=1), required=False)
@click.option(
    "--resample-per-n",
    help="Draw a fresh sample set for every fractional-bit count",
    is_flag=True,
    default=False,
)
@click.option(
    "--saturate",
    help="Clamp word overflow instead of recording it",
    is_flag=True,
    default=False,
)
@click.option(
    "--out",
    help="Calibration report destination (JSON)",
    type=click.Path(dir_okay=False, path_type=Path),
    required=False,
)
def calibrate(
    weights: Path,
    seed: int | None,
    samples: int | None,
    n_min: int | None,
    n_max: int | None,
    neighbors: int | None,
    workers: int | None,
    resample_per_n: bool,
    saturate: bool,
    out: Path | None,
) -> None:
    """Run the calibration sweep."""
    from rich import get_console
    from rich.table import Table

    from fxflight.domain.artifacts.services import load_weights, write_document
    from fxflight.domain.quantizer.schemas import ObservationRanges
    from fxflight.domain.quantizer.services import calibrate_fraction_bits, quantize_policy
    from fxflight.lib.settings import get_settings

    console = get_console()
    settings = get_settings()
    cal = settings.calibration
    fxp = settings.fixed_point
    policy = load_weights(weights)
    console.rule("Fractional-bit calibration")
    report = calibrate_fraction_bits(
        policy,
        seed=cal.SEED if seed is None else seed,
        count=cal.SAMPLES if samples is None else samples,
        n_min=cal.N_MIN if n_min is None else n_min,
        n_max=cal.N_MAX if n_max is None else n_max,
        ranges=ObservationRanges(neighbors=cal.NEIGHBORS if neighbors is None else neighbors),
        word_bits=fxp.WORD_BITS,
        accum_bits=fxp.ACCUM_BITS,
        saturate=saturate or fxp.SATURATE,
        resample_per_n=resample_per_n or cal.RESAMPLE_PER_N,
        workers=cal.WORKERS if workers is None else workers,
    )
    table = Table(title=f"max |float - fixed| over {report.sample_count} samples (seed {report.seed})")
    table.add_column("n", justify="right")
    table.add_column("max abs error", justify="right")
    for row in report.rows:
        marker = " *" if row.frac_bits == report.selected_n else ""
        table.add_row(f"{row.frac_bits}{marker}", "overflow" if row.overflow else f"{row.max_abs_error:.6e}")
    console.print(table)
    if out is not None:
        write_document(report, out)
        console.print(f"Report written to {out}")
    qp = quantize_policy(policy, report.selected_format)
    console.print(
        f"Selected n = {report.selected_n}; {qp.mac_count(report.neighbors)} MACs per inference "
        f"with {report.neighbors} neighbors, {qp.memory_bytes} bytes of weights",
    )


@fxflight_app.command(name="quantize", help="Convert a weight file to integer raws at a fractional-bit count")
@click.option(
    "--weights",
    help="Float weight file (JSON)",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
)
@click.option("--n", "frac_bits", help="Fractional bits", type=click.IntRange(min=1), required=True)
@click.option(
    "--out",
    help="Quantized weight file destination (JSON)",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
)
def quantize(weights: Path, frac_bits: int, out: Path) -> None:
    """Quantize and verify the written document."""
    import numpy as np
    from rich import get_console

    from fxflight.domain.artifacts.services import load_quantized, load_weights, save_quantized
    from fxflight.domain.fixedpoint.schemas import QFormat
    from fxflight.domain.quantizer.services import dequantize_policy, quantize_policy
    from fxflight.lib.exceptions import WeightFileError
    from fxflight.lib.settings import get_settings

    console = get_console()
    fxp = get_settings().fixed_point
    fmt = QFormat(frac_bits=frac_bits, word_bits=fxp.WORD_BITS, accum_bits=fxp.ACCUM_BITS, saturate=fxp.SATURATE)
    qp = quantize_policy(load_weights(weights), fmt)
    save_quantized(qp, out)
    written = load_quantized(out)
    # grid values must quantize back to the same raws
    again = quantize_policy(dequantize_policy(written), written.format)
    for name, mlp in again.mlps().items():
        for index, (layer, stored) in enumerate(zip(mlp.layers, written.mlps()[name].layers, strict=True)):
            if not (np.array_equal(layer.weight, stored.weight) and np.array_equal(layer.bias, stored.bias)):
                msg = f"{name}.layers[{index}] does not round-trip"
                raise WeightFileError(msg)
    console.print(
        f"Quantized weights written to {out} (n = {frac_bits}, {qp.mac_count()} MACs per solo inference, "
        f"{qp.memory_bytes} bytes)",
    )


def _build_controller(
    scn: Scenario,
    weights: Path | None,
    frac_bits: int | None,
) -> tuple[Any, int | None]:
    from fxflight.domain.artifacts.services import load_weights
    from fxflight.domain.fixedpoint.schemas import QFormat
    from fxflight.domain.quantizer.services import quantize_policy
    from fxflight.domain.simharness.schemas import ControllerKind
    from fxflight.domain.simharness.services import make_controller
    from fxflight.lib.exceptions import MissingWeightsError
    from fxflight.lib.settings import get_settings

    if scn.controller is ControllerKind.BASELINE:
        return make_controller(scn), None
    if weights is None:
        msg = f"the {scn.controller} controller needs --weights"
        raise MissingWeightsError(msg)
    policy = load_weights(weights)
    if scn.controller is ControllerKind.FLOAT:
        return make_controller(scn, policy=policy), None
    if frac_bits is None:
        msg = "the fixed controller needs --n"
        raise MissingWeightsError(msg)
    fxp = get_settings().fixed_point
    fmt = QFormat(frac_bits=frac_bits, word_bits=fxp.WORD_BITS, accum_bits=fxp.ACCUM_BITS, saturate=fxp.SATURATE)
    return make_controller(scn, quantized=quantize_policy(policy, fmt)), frac_bits


@fxflight_app.command(name="simulate", help="Fly a scenario in closed loop and export the trajectory")
@_scenario_option
@_weights_option
@click.option(
    "--controller",
    help="Controller flying the scenario; defaults to the scenario's own",
    type=click.Choice(["baseline", "float", "fixed"]),
    required=False,
)
@click.option("--n", "frac_bits", help="Fractional bits for the fixed controller", type=click.INT, required=False)
@_dt_option
@_duration_option
@click.option(
    "--out",
    help="Trajectory CSV destination",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
)
def simulate(
    scenario: str,
    weights: Path | None,
    controller: str | None,
    frac_bits: int | None,
    dt: float | None,
    max_duration: float | None,
    out: Path,
) -> None:
    """Run one episode."""
    from rich import get_console

    from fxflight.domain.artifacts.services import export_csv
    from fxflight.domain.simharness.schemas import ControllerKind
    from fxflight.domain.simharness.services import compute_metrics, run_closed_loop
    from fxflight.lib.exceptions import EpisodeAbortedError

    console = get_console()
    scn = _resolve_scenario(scenario, dt, max_duration)
    if controller is not None:
        scn = scn.replace(controller=ControllerKind(controller))
    flight_controller, _ = _build_controller(scn, weights, frac_bits)
    console.rule(f"Simulating {scn.name} with the {scn.controller} controller")
    try:
        log = run_closed_loop(scn, flight_controller)
    except EpisodeAbortedError as exc:
        export_csv(exc.log, out)
        console.print(f"Partial trajectory ({len(exc.log)} ticks) written to {out}")
        raise
    export_csv(log, out)
    console.print(f"Trajectory ({len(log)} ticks) written to {out}")
    _print_metrics(compute_metrics(log, scn))


@fxflight_app.command(name="compare", help="Compare a candidate controller against the float policy")
@_scenario_option
@click.option(
    "--weights",
    help="Float weight file (JSON)",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
)
@click.option("--n", "frac_bits", help="Fractional bits for the fixed candidate", type=click.INT, required=False)
@click.option(
    "--candidate",
    help="Candidate path compared with the float reference",
    type=click.Choice(["fixed", "float"]),
    default="fixed",
    show_default=True,
)
@_dt_option
@_duration_option
@click.option(
    "--out",
    help="Output directory for reference.csv, candidate.csv and divergence.json",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
)
def compare(
    scenario: str,
    weights: Path,
    frac_bits: int | None,
    candidate: str,
    dt: float | None,
    max_duration: float | None,
    out: Path,
) -> None:
    """Run the reference and candidate controllers on the same scenario."""
    from rich import get_console

    from fxflight.domain.artifacts.services import export_csv, write_document
    from fxflight.domain.simharness.schemas import ControllerKind
    from fxflight.domain.simharness.services import run_comparison

    console = get_console()
    scn = _resolve_scenario(scenario, dt, max_duration)
    reference, _ = _build_controller(scn.replace(controller=ControllerKind.FLOAT), weights, None)
    contender, n = _build_controller(scn.replace(controller=ControllerKind(candidate)), weights, frac_bits)
    console.rule(f"Comparing float against {candidate} on {scn.name}")
    result = run_comparison(reference, contender, scn, frac_bits=n)
    out.mkdir(parents=True, exist_ok=True)
    export_csv(result.reference_log, out / "reference.csv")
    export_csv(result.candidate_log, out / "candidate.csv")
    write_document(result.report, out / "divergence.json")
    report = result.report
    console.print(f"max action error: {report.max_action_error:.6e}")
    console.print(f"max action error (in envelope): {report.max_action_error_in_envelope:.6e}")
    console.print(f"max position divergence [m]: {report.max_position_divergence:.6e}")
    if report.candidate_aborted:
        console.print("[yellow]candidate run aborted; divergence covers its partial log[/]")
    console.print(f"Results written to {out}")

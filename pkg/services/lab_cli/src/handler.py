"""Command line entry point for the critical wave lab."""

import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import click
from libs.common.src.exceptions import (
    UnknownSubcommandException,
    ValidationException,
    WaveLabException,
)
from libs.common.src.logger import get_logger, log_run_event
from libs.common.src.models import ErrorReport, RunLog
from pydantic import ValidationError

# Try absolute imports first (for the installed script), then relative imports (for local testing)
try:
    from models import ExperimentManifest, deep_merge, load_manifest
    from service import LabService
except ImportError:
    from .models import ExperimentManifest, deep_merge, load_manifest
    from .service import LabService

UTC = timezone.utc  # datetime.UTC alias (Python 3.11+)

logger = get_logger(__name__)

# Subcommand name -> LabService method
SUBCOMMANDS: dict[str, str] = {
    "grid-check": "grid_check",
    "spectral": "spectral",
    "energy": "energy",
    "energy-sweep": "energy_sweep",
    "modulate": "modulate",
    "evolve": "evolve",
    "fit": "fit",
    "audit": "audit",
    "trace-verify": "trace_verify",
    "plot": "plot",
    "oracle": "oracle",
    "schema": "schema",
    "verify-all": "verify_all",
}


def emit_error(
    error: str, message: str, exit_code: int, details: dict[str, Any] | None = None
) -> None:
    """Print an ErrorReport on stderr."""
    report = ErrorReport(error=error, message=message, exit_code=exit_code, details=details or None)
    click.echo(report.model_dump_json(indent=2), err=True)


def run_subcommand(
    name: str, manifest: ExperimentManifest, service: LabService | None = None
) -> int:
    """
    Run one subcommand and write its report, the resolved manifest and a run log.

    The report goes to stdout and to ``<out_dir>/<name>.json``; errors are
    printed on stderr as an ErrorReport.

    Args:
        name: Subcommand name
        manifest: Validated experiment manifest
        service: Service instance, created from the manifest when omitted

    Returns:
        int: 0 on success, 1 for an unknown subcommand, 2 on validation errors,
        3 on numerical failures and unexpected errors
    """
    service = service or LabService(manifest)
    started_at = datetime.now(UTC).isoformat()
    start = time.perf_counter()
    log_run_event(name, manifest.model_dump(mode="json"))

    exit_code = 0
    tolerances: dict[str, float] = {}
    try:
        action = SUBCOMMANDS.get(name)
        if action is None:
            raise UnknownSubcommandException(name)
        report = getattr(service, action)()
        tolerances = report.tolerances
        body = report.model_dump_json(indent=2)
        service.output(f"{name}.json").write_text(body + "\n", encoding="utf-8")
        click.echo(body)

    except ValidationError as e:
        logger.warning("Schema violation", extra={"subcommand": name, "error": str(e)})
        exit_code = 2
        emit_error("VALIDATION_ERROR", str(e), exit_code)

    except ValidationException as e:
        logger.warning("Validation error", extra={"subcommand": name, "error": e.message})
        exit_code = e.exit_code
        emit_error("VALIDATION_ERROR", e.message, exit_code, e.details)

    except WaveLabException as e:
        logger.error("Lab error", extra={"subcommand": name, "error": e.message})
        exit_code = e.exit_code
        emit_error(type(e).__name__, e.message, exit_code, e.details)

    except Exception as e:
        logger.exception("Unexpected error", extra={"subcommand": name, "error": str(e)})
        exit_code = 3
        emit_error("INTERNAL_ERROR", f"{type(e).__name__}: {e}", exit_code)

    write_run_log(
        manifest, service.outputs, name, exit_code, started_at, time.perf_counter() - start, tolerances
    )
    return exit_code


def write_run_log(
    manifest: ExperimentManifest,
    outputs: list[str],
    name: str,
    exit_code: int,
    started_at: str,
    wall_time: float,
    tolerances: dict[str, float],
) -> None:
    """Write the resolved manifest and the run log next to the outputs."""
    out_dir = Path(manifest.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        manifest.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    log = RunLog(
        subcommand=name,
        exit_code=exit_code,
        wall_time_s=wall_time,
        started_at=started_at,
        manifest=manifest.model_dump(mode="json"),
        outputs=outputs,
        tolerances=tolerances,
    )
    (out_dir / "run_log.json").write_text(log.model_dump_json(indent=2) + "\n", encoding="utf-8")


class LabGroup(click.Group):
    """Command group that reports unknown subcommands with exit code 1."""

    def get_command(self, ctx: click.Context, cmd_name: str) -> click.Command | None:
        command = super().get_command(ctx, cmd_name)
        if command is None and not ctx.resilient_parsing:
            raise UnknownSubcommandException(cmd_name)
        return command

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except UnknownSubcommandException as e:
            logger.warning("Unknown subcommand", extra={"error": e.message})
            emit_error(type(e).__name__, e.message, e.exit_code)
            ctx.exit(e.exit_code)


def dispatch(ctx: click.Context, name: str, overrides: dict[str, Any] | None = None) -> None:
    """Resolve the manifest for a subcommand, run it and exit with its code."""
    settings = ctx.obj
    try:
        manifest = load_manifest(
            settings["config"], deep_merge(settings["overrides"], overrides or {})
        )
    except ValidationError as e:
        logger.warning("Manifest rejected", extra={"error": str(e)})
        emit_error("VALIDATION_ERROR", str(e), 2)
        ctx.exit(2)
    except ValidationException as e:
        logger.warning("Manifest unreadable", extra={"error": e.message})
        emit_error("VALIDATION_ERROR", e.message, e.exit_code, e.details)
        ctx.exit(e.exit_code)
    ctx.exit(run_subcommand(name, manifest))


@click.group(cls=LabGroup)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON or YAML experiment manifest",
)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="RNG seed")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--dim", "dimension", type=click.Choice(["3", "4", "5"]), help="Space dimension")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Path | None,
    seed: int | None,
    out_dir: str | None,
    dimension: str | None,
) -> None:
    """Numerical lab for one-bubble blow-up of the radial energy-critical wave equation."""
    ctx.obj = {
        "config": config_path,
        "overrides": {
            "seed": seed,
            "out_dir": out_dir,
            "dimension": int(dimension) if dimension else None,
        },
    }


@cli.command("grid-check")
@click.pass_context
def grid_check(ctx: click.Context) -> None:
    """Grid layout, stationarity of W and the Pohozaev identity."""
    dispatch(ctx, "grid-check")


@cli.command("spectral")
@click.option("--shooting/--no-shooting", default=None, help="Cross-check nu by shooting")
@click.pass_context
def spectral(ctx: click.Context, shooting: bool | None) -> None:
    """nu, the eigenfunction Y, the test function Z and coercivity certificates."""
    dispatch(ctx, "spectral", {"spectral": {"shooting": shooting}})


@cli.command("energy")
@click.option("--lam", type=float, help="Scale lambda")
@click.pass_context
def energy(ctx: click.Context, lam: float | None) -> None:
    """Interaction energy of V(lambda) + u* at one scale."""
    dispatch(ctx, "energy", {"energy": {"lam": lam}})


@cli.command("energy-sweep")
@click.pass_context
def energy_sweep(ctx: click.Context) -> None:
    """Interaction energy over the manifest scales, written as CSV."""
    dispatch(ctx, "energy-sweep")


@cli.command("modulate")
@click.option("--state", "state_csv", type=click.Path(dir_okay=False), help="State CSV r,u,udot")
@click.option("--lam", type=float, help="Planted scale, or the guess for --state")
@click.pass_context
def modulate(ctx: click.Context, state_csv: str | None, lam: float | None) -> None:
    """Decompose a state into V(lambda) + g with <Z_lambda, g> = 0."""
    dispatch(ctx, "modulate", {"modulation": {"state_csv": state_csv, "lam": lam}})


@cli.command("evolve")
@click.option("--t-end", type=float, help="Final time")
@click.option("--lam0", type=float, help="Initial bubble scale")
@click.pass_context
def evolve(ctx: click.Context, t_end: float | None, lam0: float | None) -> None:
    """Tracked evolution, written as a trace CSV."""
    dispatch(ctx, "evolve", {"evolve": {"t_end": t_end, "lam0": lam0}})


_trace_option = click.option(
    "--trace", "trace_csv", type=click.Path(dir_okay=False), help="Trace CSV"
)


@cli.command("fit")
@_trace_option
@click.option("--window", nargs=2, type=float, default=None, help="Fit window T0 T1")
@click.pass_context
def fit(ctx: click.Context, trace_csv: str | None, window: tuple[float, float] | None) -> None:
    """Fit lambda ~ C (T+ - t)^p to a trace."""
    dispatch(ctx, "fit", {"fit": {"trace_csv": trace_csv, "window": window or None}})


@cli.command("audit")
@_trace_option
@click.option("--interaction-constant", type=float, help="C_I")
@click.pass_context
def audit(ctx: click.Context, trace_csv: str | None, interaction_constant: float | None) -> None:
    """Audit the rate inequalities along a trace."""
    dispatch(
        ctx,
        "audit",
        {
            "fit": {"trace_csv": trace_csv},
            "audit": {"interaction_constant": interaction_constant},
        },
    )


@cli.command("trace-verify")
@_trace_option
@click.pass_context
def trace_verify(ctx: click.Context, trace_csv: str | None) -> None:
    """Per-point residuals of the modulation equations."""
    dispatch(ctx, "trace-verify", {"fit": {"trace_csv": trace_csv}})


@cli.command("plot")
@click.option("--kind", type=click.Choice(["trace", "sweep", "residual"]), help="Plot kind")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Input CSV")
@click.pass_context
def plot(ctx: click.Context, kind: str | None, csv_path: str | None) -> None:
    """SVG of a trace, sweep or residual CSV."""
    dispatch(ctx, "plot", {"plot": {"kind": kind, "csv": csv_path}})


@cli.command("oracle")
@click.pass_context
def oracle(ctx: click.Context) -> None:
    """Regenerate the stored oracle values."""
    dispatch(ctx, "oracle")


@cli.command("schema")
@click.pass_context
def schema(ctx: click.Context) -> None:
    """Print the manifest JSON schema."""
    dispatch(ctx, "schema")


@cli.command("verify-all")
@click.pass_context
def verify_all(ctx: click.Context) -> None:
    """Run every invariant suite and print a summary table."""
    dispatch(ctx, "verify-all")


def main() -> None:
    """Console script entry point."""
    cli(prog_name="wavelab")


if __name__ == "__main__":
    main()

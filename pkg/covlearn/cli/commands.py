"""
Command-line interface for covlearn.
"""
import logging
import os
import sys
import time
from typing import NoReturn

import click
import structlog

from covlearn.core.config import SOLVER_NAMES, ConfigError, load_experiment_spec
from covlearn.core.engine import run_experiment, runtime_comparison
from covlearn.core.jadce import (
    MetricError,
    dump_channel_matrix,
    false_alarm_count,
    nmse,
    prob_missed_detection,
    run_jadce_on_scenario,
)
from covlearn.core.models import DetectionRule, Dims, ResultRow, ScenarioSnapshot
from covlearn.core.oracles import ORACLE_ALIASES, ORACLES, run_oracles
from covlearn.core.scenario import sample_covariance, scenario_from_snapshot
from covlearn.sinks.file import RESULT_FORMATS, emit_results

PRESET_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "presets")
PRESET_NAMES = ("fig1", "fig2", "fig3")

# exit codes
EXIT_FAILURE = 1
EXIT_USAGE = 2


def setup_logging(verbose: bool) -> None:
    """
    Set up logging configuration.

    Log records go to stderr; stdout carries only the command's report.

    Args:
        verbose: Whether to enable verbose logging
    """
    log_level = logging.DEBUG if verbose else logging.WARNING

    logging.basicConfig(
        level=log_level,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="%Y-%m-%d %H:%M:%S"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )


def preset_path(name: str) -> str:
    """Path of a bundled experiment preset."""
    return os.path.join(PRESET_DIR, f"{name}.json")


def _fail(message: str, code: int) -> NoReturn:
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def _format_metric(value: float) -> str:
    return f"{value:.9g}"


def _format_row(row: ResultRow) -> str:
    return (
        f"# cell solver={row.solver} L={row.L} M={row.M} K={row.K} "
        f"p_md={row.p_md_mean:.4f} nmse={row.nmse_mean:.4f} iters={row.mean_iterations:.1f}"
    )


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.pass_context
def cli(ctx, verbose):
    """covlearn: covariance-learning activity detection and channel estimation."""
    setup_logging(verbose)
    ctx.obj = {"verbose": verbose}


@cli.command()
@click.option("--N", "n_devices", type=int, default=300, show_default=True, help="Number of devices")
@click.option("--L", "pilot_len", type=int, default=30, show_default=True, help="Pilot length")
@click.option("--M", "antennas", type=int, default=40, show_default=True, help="Number of antennas")
@click.option("--K", "active", type=int, default=20, show_default=True, help="Number of active devices")
@click.option("--sigma2", type=float, default=1.0, show_default=True, help="Noise variance")
@click.option(
    "--solver",
    type=click.Choice(SOLVER_NAMES),
    default="cl-sca",
    show_default=True,
    help="Power-estimation solver",
)
@click.option("--seed", type=int, default=0, show_default=True, help="Scenario seed")
@click.option(
    "--rule",
    type=click.Choice(["top_k", "threshold"]),
    default="top_k",
    show_default=True,
    help="Detection rule",
)
@click.option("--gamma-th", type=float, default=None, help="Threshold for --rule threshold")
@click.option("--snapshot", type=click.Path(dir_okay=False), default=None, help="Write the scenario snapshot (JSON)")
@click.option("--x-hat", "x_hat_path", type=click.Path(dir_okay=False), default=None, help="Write the channel estimate (binary)")
@click.pass_context
def simulate(
    ctx, n_devices, pilot_len, antennas, active, sigma2, solver, seed, rule, gamma_th,
    snapshot, x_hat_path,
):
    """Simulate one scenario and run detection and channel estimation on it."""
    if rule == "threshold" and gamma_th is None:
        raise click.UsageError("--rule threshold requires --gamma-th")

    try:
        dims = Dims(N=n_devices, L=pilot_len, M=antennas, K=active)
        detection = (
            DetectionRule.threshold(gamma_th) if rule == "threshold" else DetectionRule.top_k(active)
        )
        snap = ScenarioSnapshot(dims=dims, seed=seed, noise_var=sigma2)
        scenario = scenario_from_snapshot(snap)
        S = sample_covariance(scenario.received)
        output = run_jadce_on_scenario(scenario, solver=solver, rule=detection, S=S)
    except ConfigError as e:
        _fail(str(e), EXIT_USAGE)
    except Exception as e:
        _fail(str(e), EXIT_FAILURE)

    true_support = [int(n) for n in scenario.activity.support]
    est_support = [int(n) for n in output.support_hat]
    try:
        p_md = _format_metric(prob_missed_detection(true_support, est_support))
    except MetricError:
        p_md = "n/a"
    try:
        error = _format_metric(nmse(output.x_hat, scenario.effective_channels))
    except MetricError:
        error = "n/a"

    result = output.result
    click.echo(f"solver: {solver}")
    click.echo(f"dims: N={dims.N} L={dims.L} M={dims.M} K={dims.K} sigma2={sigma2:g} seed={seed}")
    click.echo(f"true support: {true_support}")
    click.echo(f"estimated support: {est_support}")
    click.echo(f"p_md: {p_md}")
    click.echo(f"false alarms: {false_alarm_count(true_support, est_support)}")
    click.echo(f"nmse: {error}")
    click.echo(f"iterations: {result.iterations} ({'converged' if result.converged else 'not converged'})")
    click.echo(f"#time solver_s={result.wall_time:.6f}")

    try:
        if snapshot:
            snap.save(snapshot)
            click.echo(f"# snapshot written to {snapshot}")
        if x_hat_path:
            dump_channel_matrix(output.x_hat, x_hat_path)
            click.echo(f"# channel estimate written to {x_hat_path}")
    except OSError as e:
        _fail(str(e), EXIT_FAILURE)


@cli.command()
@click.option("--config", "-c", "config_path", type=click.Path(dir_okay=False), default=None, help="Experiment configuration file")
@click.option("--preset", type=click.Choice(PRESET_NAMES), default=None, help="Bundled experiment preset")
@click.option("--override", "overrides", multiple=True, help="key=value override (repeatable)")
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False), help="Result file")
@click.option("--format", "fmt", type=click.Choice(RESULT_FORMATS), default="csv", show_default=True, help="Result format")
@click.option("--workers", "-w", type=click.IntRange(min=1), default=1, show_default=True, help="Trial worker threads")
@click.option("--timing", is_flag=True, help="Runtime comparison: single worker, rows ordered by solver time")
@click.pass_context
def bench(ctx, config_path, preset, overrides, output, fmt, workers, timing):
    """Run a Monte-Carlo experiment sweep and write the result table."""
    if (config_path is None) == (preset is None):
        raise click.UsageError("exactly one of --config and --preset is required")

    try:
        spec = load_experiment_spec(config_path or preset_path(preset), overrides)
    except ConfigError as e:
        _fail(str(e), EXIT_USAGE)

    def progress(row: ResultRow) -> None:
        click.echo(_format_row(row))

    start = time.perf_counter()
    try:
        if timing:
            rows = runtime_comparison(spec, progress=progress)
        else:
            rows = run_experiment(spec, workers=workers, progress=progress)
        emit_results(rows, output, fmt)
    except ConfigError as e:
        _fail(str(e), EXIT_USAGE)
    except Exception as e:
        _fail(str(e), EXIT_FAILURE)

    click.echo(f"# wrote {len(rows)} rows to {output}")
    click.echo(f"#time total_s={time.perf_counter() - start:.3f}")


@cli.command()
@click.option("--seeds", type=click.IntRange(min=1), default=50, show_default=True, help="Random instances per oracle")
@click.option("--oracle", "oracles", type=click.Choice([*ORACLES, *ORACLE_ALIASES]), multiple=True, help="Run only these oracles (repeatable)")
@click.pass_context
def verify(ctx, seeds, oracles):
    """Check closed-form updates against independent numerical oracles."""
    start = time.perf_counter()
    reports = run_oracles(oracles or None, seeds=seeds)

    failed = 0
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        click.echo(
            f"{status} {report.name}: max_error={report.max_error:.3g} "
            f"tol={report.tolerance:.0e} cases={report.cases}"
        )
        if not report.passed:
            failed += 1
    click.echo(f"#time total_s={time.perf_counter() - start:.3f}")

    if failed:
        _fail(f"{failed} of {len(reports)} oracle(s) failed", EXIT_FAILURE)


if __name__ == "__main__":
    cli(obj={})

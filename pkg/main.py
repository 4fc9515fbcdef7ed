"""
Command-line entry point.

Exit codes: 0 success, 1 verification failure (or a numerical failure), 2 invalid
configuration. JSON and CSV go to stdout unless --output is given; logs go to stderr.
"""

import json
import math
from typing import Any, Callable, Dict, Optional

import click
from pydantic import ValidationError

from exceptions import ConfigurationError, DomainError, KeyRateError, VerificationError
from logging_config import get_logger, setup_from_settings
from models import RunConfig, field_description
from optimization_config import FIDELITY_XI_GRID, MC_DEFAULT_POINT, SWEEP_LOSS_GRID, VERIFY_DEFAULTS
from services.keyrate_service import KeyRateService
from utils.output_utils import csv_text, emit, json_text

logger = get_logger(__name__)

RANGE_KEYS = ("start", "stop", "step")


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must contain a JSON object at the top level")
    return data


def prune(values: Dict[str, Any]) -> Dict[str, Any]:
    """Drop unset flags (None) and sections left empty by them."""
    pruned = {}
    for key, value in values.items():
        if isinstance(value, dict):
            value = prune(value)
            if value:
                pruned[key] = value
        elif value is not None and value != ():
            pruned[key] = list(value) if isinstance(value, tuple) else value
    return pruned


def deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def fill_matched_beta(merged: Dict[str, Any]) -> None:
    """A dual section without beta_R targets the matched amplitude sqrt(eta)*alpha."""
    dual = merged.get("dual")
    if not isinstance(dual, dict) or "beta_R" in dual:
        return
    try:
        eta = float(merged["channel"]["eta"])
        alpha = float(merged["protocol"]["alpha"])
        if 0.0 <= eta <= 1.0:
            dual["beta_R"] = math.sqrt(eta) * alpha
    except (KeyError, TypeError, ValueError):
        pass


def build_config(config_path: Optional[str], flags: Dict[str, Any],
                 defaults: Optional[Dict[str, Any]] = None, matched_beta: bool = False) -> RunConfig:
    """defaults < config file < flags, then validated as a whole."""
    merged = deep_merge(defaults or {}, load_config_file(config_path))
    merged = deep_merge(merged, prune(flags))
    if matched_beta:
        fill_matched_beta(merged)
    return RunConfig.model_validate(merged)


def report_validation_error(e: ValidationError) -> None:
    for error in e.errors():
        loc = tuple(error.get("loc", ()))
        field = ".".join(str(part) for part in loc) or "config"
        description = field_description(RunConfig, loc)
        meaning = f" [{description}]" if description else ""
        click.echo(f"Invalid value for {field}{meaning}: {error['msg']}", err=True)


def execute(ctx: click.Context, command: str, flags: Dict[str, Any], config_path: Optional[str],
            render: Callable[[Any, RunConfig], None], defaults: Optional[Dict[str, Any]] = None,
            matched_beta: bool = False, **options) -> None:
    service: KeyRateService = ctx.obj["service"]
    try:
        cfg = build_config(config_path, flags, defaults, matched_beta)
        result = service.run(command, cfg, **options)
        render(result, cfg)
    except ValidationError as e:
        report_validation_error(e)
        ctx.exit(2)
    except (ConfigurationError, DomainError) as e:
        click.echo(f"Configuration error: {e}", err=True)
        ctx.exit(2)
    except VerificationError as e:
        click.echo(f"Verification failed: {e}", err=True)
        click.echo(json_text(e.report))
        ctx.exit(1)
    except KeyRateError as e:
        click.echo(f"Computation failed: {e}", err=True)
        ctx.exit(1)


def render_json(result: Any, cfg: RunConfig) -> None:
    emit(json_text(result) + "\n", cfg.output, echo=click.echo)


def render_table(result: Any, cfg: RunConfig) -> None:
    header, rows = result
    if (cfg.format or "csv") == "json":
        text = json_text([dict(zip(header, row)) for row in rows]) + "\n"
    else:
        text = csv_text(header, rows)
    emit(text, cfg.output, echo=click.echo)


config_option = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                             help="JSON file with parameter sections; flags override it.")
output_option = click.option("--output", "-o", default=None, help="Write to this file instead of stdout.")
fidelity_option = click.option("--fidelity-model", type=click.Choice(["homodyne", "heterodyne", "exact"]),
                               default=None, help="Fidelity term used in the phase-error bound.")


@click.group()
@click.option("--log-level", default=None, help="Console log level (overrides KEYRATE_LOG_LEVEL).")
@click.option("--workers", type=int, default=None, help="Worker count (overrides KEYRATE_WORKERS).")
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str], workers: Optional[int]) -> None:
    """Key-rate toolkit for binary-modulated coherent states with homodyne postselection."""
    setup_from_settings(log_level)
    ctx.ensure_object(dict)
    ctx.obj["service"] = KeyRateService(workers=workers)


@cli.command()
@click.option("--eta", type=float, help="Channel transmission.")
@click.option("--xi", type=float, help="Excess noise.")
@click.option("--alpha", type=float, help="Coherent amplitude.")
@click.option("--x-th", "x_th", type=float, help="Postselection threshold.")
@click.option("--f-ec", "f_ec", type=float, help="Error-correction inefficiency.")
@click.option("--kappa", type=float)
@click.option("--gamma", type=float)
@click.option("--beta", type=float, help="Real target amplitude (default sqrt(eta)*alpha).")
@click.option("--beta-i", "beta_i", type=float, help="Imaginary part of the target amplitude.")
@fidelity_option
@config_option
@output_option
@click.pass_context
def keyrate(ctx, eta, xi, alpha, x_th, f_ec, kappa, gamma, beta, beta_i, fidelity_model, config_path, output):
    """Key-rate breakdown at one parameter point."""
    flags = {
        "channel": {"eta": eta, "xi": xi},
        "protocol": {"alpha": alpha, "x_th": x_th, "f_ec": f_ec},
        "dual": {"kappa": kappa, "gamma": gamma, "beta_R": beta, "beta_I": beta_i},
        "fidelity_model": fidelity_model,
        "output": output,
    }
    execute(ctx, "keyrate", flags, config_path, render_json, matched_beta=True)


@cli.command()
@click.option("--xi", "xi", type=float, multiple=True, help="Excess noise; repeat for several curves.")
@click.option("--loss-start", type=float, default=None)
@click.option("--loss-stop", type=float, default=None)
@click.option("--loss-step", type=float, default=None)
@click.option("--f-ec", "f_ec", type=float)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None, help="Table format (default csv).")
@config_option
@output_option
@click.pass_context
def sweep(ctx, xi, loss_start, loss_stop, loss_step, f_ec, fmt, config_path, output):
    """Optimized rate against channel loss, one block of rows per excess-noise value."""
    loss = {"start": loss_start, "stop": loss_stop, "step": loss_step}
    flags = {
        "xi": xi,
        "loss": loss,
        "f_ec": f_ec,
        "format": fmt,
        "output": output,
    }
    defaults = {"loss": dict(zip(RANGE_KEYS, SWEEP_LOSS_GRID))}
    execute(ctx, "sweep", flags, config_path, render_table, defaults=defaults)


@cli.command()
@click.option("--eta", type=float)
@click.option("--xi", type=float)
@click.option("--f-ec", "f_ec", type=float)
@click.option("--compare-fixed-beta", is_flag=True, help="Also report the rate with beta pinned at sqrt(eta)*alpha.")
@fidelity_option
@config_option
@output_option
@click.pass_context
def optimize(ctx, eta, xi, f_ec, compare_fixed_beta, fidelity_model, config_path, output):
    """Best rate over the configured grids for one channel."""
    flags = {
        "channel": {"eta": eta, "xi": xi},
        "f_ec": f_ec,
        "fidelity_model": fidelity_model,
        "output": output,
    }
    execute(ctx, "optimize", flags, config_path, render_json, compare_fixed_beta=compare_fixed_beta)


@cli.command("fidelity-bounds")
@click.option("--xi-start", type=float, default=None)
@click.option("--xi-stop", type=float, default=None)
@click.option("--xi-step", type=float, default=None)
@click.option("--m", type=int, default=None, help="Order of the heterodyne bound.")
@click.option("--r", type=float, default=None, help="Shift of the heterodyne bound.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None, help="Table format (default csv).")
@config_option
@output_option
@click.pass_context
def fidelity_bounds(ctx, xi_start, xi_stop, xi_step, m, r, fmt, config_path, output):
    """Exact fidelity, heterodyne bound and moment bound over an excess-noise grid."""
    flags = {
        "xi_grid": {"start": xi_start, "stop": xi_stop, "step": xi_step},
        "lambda_params": {"m": m, "r": r},
        "format": fmt,
        "output": output,
    }
    defaults = {"xi_grid": dict(zip(RANGE_KEYS, FIDELITY_XI_GRID))}
    execute(ctx, "fidelity-bounds", flags, config_path, render_table, defaults=defaults)


@cli.command("verify-operator")
@click.option("--kappa", type=float)
@click.option("--gamma", type=float)
@click.option("--beta", type=float)
@click.option("--x-th", "x_th", type=float)
@click.option("--n-max", "n_max", type=int)
@config_option
@output_option
@click.pass_context
def verify_operator(ctx, kappa, gamma, beta, x_th, n_max, config_path, output):
    """Check the phase-error operator inequality and the moment fidelity bound in a truncated Fock space."""
    flags = {
        "dual": {"kappa": kappa, "gamma": gamma, "beta_R": beta},
        "x_th": x_th,
        "n_max": n_max,
        "output": output,
    }
    defaults = {
        "dual": {"kappa": VERIFY_DEFAULTS["kappa"], "gamma": VERIFY_DEFAULTS["gamma"],
                 "beta_R": VERIFY_DEFAULTS["beta"]},
    }
    execute(ctx, "verify-operator", flags, config_path, render_json, defaults=defaults)


@cli.command()
@click.option("--eta", type=float)
@click.option("--xi", type=float)
@click.option("--alpha", type=float)
@click.option("--x-th", "x_th", type=float)
@click.option("--n-samples", "n_samples", type=int)
@click.option("--seed", type=int)
@click.option("--block-size", "block_size", type=int)
@config_option
@output_option
@click.pass_context
def mc(ctx, eta, xi, alpha, x_th, n_samples, seed, block_size, config_path, output):
    """Sample homodyne outcomes and compare the estimates with the closed forms."""
    flags = {
        "channel": {"eta": eta, "xi": xi},
        "protocol": {"alpha": alpha, "x_th": x_th},
        "mc": {"n_samples": n_samples, "seed": seed, "block_size": block_size},
        "output": output,
    }
    defaults = {
        "channel": {"eta": MC_DEFAULT_POINT["eta"], "xi": MC_DEFAULT_POINT["xi"]},
        "protocol": {"alpha": MC_DEFAULT_POINT["alpha"], "x_th": MC_DEFAULT_POINT["x_th"]},
    }
    execute(ctx, "mc", flags, config_path, render_json, defaults=defaults)


if __name__ == "__main__":
    cli()

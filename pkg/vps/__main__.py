"""
CLI entry point for vps.

Usage:
    vps run configs/tfim_vqe.toml
    vps oracle --tfim 4x3 --pbc
    vps plot runs/tfim_vqe --render
"""

import logging
import sys
import traceback
from typing import Optional

import click

from . import __version__
from .app import configure_logging, oracle_report, run_experiment
from .errors import ConfigError, VPSError
from .hamiltonian import build_heisenberg, build_tfim, load_pauli_file
from .plotting import emit_plot_data, render_plots
from .utils import parse_lattice, validate_existing_file, validate_positive

logger = logging.getLogger(__name__)

EPILOG = """
\b
Examples:
  # Reproduce a VQE campaign from a config file
  vps run configs/tfim_vqe.toml

\b
  # Exact ground energy of the 4x3 periodic TFIM (-18.914)
  vps oracle --tfim 4x3 --pbc

\b
  # Exact Renyi-2 free energy of a 1D chain at beta = 1
  vps oracle --tfim 1x4 --pbc --one-dimensional --beta 1 --renyi2

\b
  # Long-format plot CSVs (and PNGs) from a finished run
  vps plot runs/tfim_vqe --render

\b
Exit codes:
  0  success
  1  runtime failure (numerical error, failed campaign, missing artifact)
  2  configuration error (invalid field, unparsable Hamiltonian file)
"""


def _fail(error: Exception, verbose: bool) -> None:
    code = error.exit_code if isinstance(error, VPSError) else 1
    logger.error(f"{type(error).__name__}: {error}")
    click.echo(f"Error: {error}", err=True)
    if verbose:
        logger.debug("Full traceback:", exc_info=True)
        traceback.print_exc()
    sys.exit(code)


@click.group(epilog=EPILOG)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.version_option(__version__, prog_name="vps")
@click.pass_context
def cli(ctx: click.Context, verbose: bool) -> None:
    """Post-selection VQE and neural-reweighted thermal states on a statevector simulator."""
    configure_logging()
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    ctx.obj = {"verbose": verbose}


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--threads", type=int, default=None, help="Worker threads (default: VPS_THREADS or CPU count)")
@click.pass_context
def run(ctx: click.Context, config_path: str, threads: Optional[int]) -> None:
    """Run the experiment described by CONFIG_PATH (TOML or JSON)."""
    try:
        code = run_experiment(config_path, threads)
    except (VPSError, ValueError, OSError) as e:
        _fail(e, ctx.obj["verbose"])
    else:
        sys.exit(code)


@cli.command()
@click.option("--tfim", "tfim", metavar="RxC", help="Transverse-field Ising model on an RxC lattice")
@click.option("--heisenberg", "heisenberg", metavar="RxC", help="Heisenberg model on an RxC lattice")
@click.option("--file", "path", type=click.Path(), help="Pauli-string Hamiltonian file")
@click.option("--pbc", is_flag=True, help="Periodic boundary conditions")
@click.option("--one-dimensional", is_flag=True, help="Treat the lattice as a single chain")
@click.option("--beta", type=float, default=None, help="Inverse temperature for a thermal oracle")
@click.option("--renyi2", "mode", flag_value="renyi2", help="Exact Renyi-2 free energy at --beta")
@click.option("--gibbs", "mode", flag_value="gibbs", help="Exact Gibbs free energy at --beta")
@click.pass_context
def oracle(
    ctx: click.Context,
    tfim: Optional[str],
    heisenberg: Optional[str],
    path: Optional[str],
    pbc: bool,
    one_dimensional: bool,
    beta: Optional[float],
    mode: Optional[str],
) -> None:
    """Print exact reference values for a Hamiltonian."""
    chosen = [name for name, value in (("--tfim", tfim), ("--heisenberg", heisenberg), ("--file", path)) if value]
    if len(chosen) != 1:
        click.echo("Error: pass exactly one of --tfim, --heisenberg or --file", err=True)
        sys.exit(2)
    if mode is not None and beta is None:
        click.echo("Error: --renyi2/--gibbs need --beta", err=True)
        sys.exit(2)
    try:
        if path:
            h = load_pauli_file(validate_existing_file(path))
        else:
            rows, cols = parse_lattice(tfim or heisenberg)
            builder = build_tfim if tfim else build_heisenberg
            h = builder(rows, cols, pbc, one_dimensional)
        betas = [validate_positive(beta, "beta")] if beta is not None else []
        report = oracle_report(h, betas)
    except VPSError as e:
        _fail(e, ctx.obj["verbose"])
    except ValueError as e:
        _fail(ConfigError(chosen[0], str(e)), ctx.obj["verbose"])

    click.echo(f"ground energy: {report['ground_energy']:.6f}")
    for key, values in report["thermal"].items():
        if mode in (None, "gibbs"):
            click.echo(f"gibbs free energy (beta={key}): {values['gibbs_free_energy']:.6f}")
        if mode in (None, "renyi2"):
            click.echo(f"renyi2 free energy (beta={key}): {values['renyi2_free_energy']:.6f}")


@cli.command()
@click.argument("campaign_dir", type=click.Path())
@click.option("--render", is_flag=True, help="Also write PNG figures with matplotlib")
@click.pass_context
def plot(ctx: click.Context, campaign_dir: str, render: bool) -> None:
    """Write long-format plot CSVs for the run in CAMPAIGN_DIR."""
    try:
        paths = emit_plot_data(campaign_dir)
        if render:
            paths += render_plots(paths)
    except (VPSError, ValueError) as e:
        _fail(e, ctx.obj["verbose"])
    for path in paths:
        click.echo(str(path))


def main() -> None:
    cli()


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""
measured-ising - Main CLI Entry Point
"""
import asyncio
import sys
from pathlib import Path
from typing import Optional, Tuple

import click

from ..core.config import CUTS, INIT_MODES, LATTICE_KINDS, PROPOSALS, Config
from ..core.exceptions import (
    ConfigurationError,
    LatticeError,
    MeasuredIsingError,
    OracleSizeError,
    ParameterError,
)
from ..core.logger import setup_logging
from ..utils.parsing_utils import parse_angle, parse_size_list
from .commands import ExperimentCommands
from .display import console

USAGE_ERRORS = (ConfigurationError, LatticeError, ParameterError, OracleSizeError)


def _exit_code(error: Exception) -> int:
    return 2 if isinstance(error, USAGE_ERRORS) else 1


def _fail(error: Exception):
    console.print(f"[red]Error: {error}[/red]")
    sys.exit(_exit_code(error))


def _run_options(func):
    """Options shared by sample, scan and exact."""
    options = [
        click.option('--lattice', '-l', type=click.Choice(LATTICE_KINDS), required=True,
                     help='Lattice kind'),
        click.option('--L', 'extents', required=True, help='Extents, e.g. 8, 4x7 or 2x2x2'),
        click.option('--tB', 't_B', default=None, help='Fixed t_B (radians or e.g. 0.25pi)'),
        click.option('--cut', type=click.Choice(CUTS), default=None, help='Cut through the (t_A, t_B) plane'),
        click.option('--seed', type=int, default=None, help='Master seed'),
        click.option('--out', '-o', 'output_dir', type=click.Path(file_okay=False), default=None,
                     help='Output root directory'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _chain_options(func):
    """Monte Carlo schedule options shared by sample and scan."""
    options = [
        click.option('--chains', type=int, default=None, help='Independent chains per point'),
        click.option('--sweeps', type=int, default=None, help='Sweeps per chain'),
        click.option('--discard', 'discard_fraction', type=float, default=None,
                     help='Fraction of sweeps discarded as burn-in'),
        click.option('--thin', type=int, default=None, help='Record every n-th sweep'),
        click.option('--cutoff', type=float, default=None, help='Relative singular value cutoff'),
        click.option('--chi-max', type=int, default=None, help='Maximum boundary bond dimension'),
        click.option('--proposal', type=click.Choice(PROPOSALS), default=None, help='Bond visiting order'),
        click.option('--init', 'init_mode', type=click.Choice(INIT_MODES), default=None,
                     help='Initial outcome configuration'),
        click.option('--threads', '-j', type=int, default=None, help='Worker processes'),
        click.option('--dump-profile', is_flag=True, help='Write bond_dims.json'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option('--config', '-c', type=click.Path(exists=True), help='Config file path')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose logging')
@click.pass_context
def cli(ctx, config: Optional[str], verbose: bool):
    """Weak-measurement long-range order: sampling, enumeration and scaling"""
    setup_logging(verbose)
    try:
        ctx.obj = Config(config_path=Path(config) if config else None)
    except ConfigurationError as e:
        console.print(f"[red]Error initializing: {e}[/red]")
        sys.exit(2)


@cli.command()
@_run_options
@click.option('--tA', 't_A', required=True, help='Weak-measurement time t_A')
@_chain_options
@click.pass_context
def sample(ctx, dump_profile, **options):
    """Sample one (t_A, t_B) point"""
    asyncio.run(_sample_command(ctx, options, dump_profile))


@cli.command()
@_run_options
@click.option('--tA-min', 't_A_min', required=True, help='Lower end of the t_A grid')
@click.option('--tA-max', 't_A_max', required=True, help='Upper end of the t_A grid')
@click.option('--points', type=int, required=True, help='Number of grid points')
@_chain_options
@click.pass_context
def scan(ctx, dump_profile, **options):
    """Sample a grid of t_A values along a cut"""
    asyncio.run(_sample_command(ctx, options, dump_profile))


@cli.command()
@_run_options
@click.option('--tA', 't_A', default=None, help='Weak-measurement time t_A')
@click.option('--tA-min', 't_A_min', default=None, help='Lower end of the t_A grid')
@click.option('--tA-max', 't_A_max', default=None, help='Upper end of the t_A grid')
@click.option('--points', type=int, default=None, help='Number of grid points')
@click.pass_context
def exact(ctx, **options):
    """Exact enumeration, closed forms and identity checks on small lattices"""
    asyncio.run(_exact_command(ctx, options))


@cli.command()
@click.argument('run_dirs', nargs=-1, required=True, type=click.Path(exists=True))
@click.option('--window', default=None, help='t_A window, e.g. "0.1pi,0.2pi"')
@click.option('--init', 'init', default=None, help='Starting point "t_c,nu,beta/nu"')
@click.option('--out', '-o', 'output', type=click.Path(file_okay=False), default=None,
              help='Output directory')
@click.pass_context
def collapse(ctx, run_dirs, window, init, output):
    """Finite-size-scaling collapse of aggregated runs"""
    asyncio.run(_collapse_command(ctx, run_dirs, window, init, output))


@cli.command()
@click.option('--sizes', default="4,8,16", help='Even chain lengths, e.g. 4,8,16')
@click.option('--tA', 't_A', default=None, help='Weak-measurement time t_A')
@click.option('--tA-min', 't_A_min', default=None, help='Lower end of the t_A grid')
@click.option('--tA-max', 't_A_max', default=None, help='Upper end of the t_A grid')
@click.option('--points', type=int, default=None, help='Number of grid points')
@click.option('--tB', 't_B', default=None, help='Fixed t_B')
@click.option('--cut', type=click.Choice(CUTS), default=None, help='Cut through the (t_A, t_B) plane')
@click.option('--samples', type=int, default=0, help='Direct outcome draws per point (0 to skip)')
@click.option('--seed', type=int, default=None, help='Master seed')
@click.option('--out', '-o', 'output', type=click.Path(file_okay=False), default=None,
              help='Directory for oned.csv')
@click.pass_context
def oned(ctx, sizes, output, samples, **options):
    """Closed-form chain results"""
    asyncio.run(_oned_command(ctx, sizes, options, samples, output))


async def _sample_command(ctx, options, dump_profile: bool):
    try:
        run = ctx.obj.make_run_config(**options)
        await ExperimentCommands(ctx.obj).sample(run, dump_profile)
    except MeasuredIsingError as e:
        _fail(e)


async def _exact_command(ctx, options):
    try:
        run = ctx.obj.make_run_config(**options)
        await ExperimentCommands(ctx.obj).exact(run)
    except MeasuredIsingError as e:
        _fail(e)


def _parse_window(window: Optional[str]) -> Optional[Tuple[float, float]]:
    if window is None:
        return None
    parts = [p for p in window.split(",") if p.strip()]
    if len(parts) != 2:
        raise ConfigurationError(f"A window takes two angles, got '{window}'")
    try:
        return parse_angle(parts[0]), parse_angle(parts[1])
    except ValueError as e:
        raise ConfigurationError(str(e))


def _parse_init(init: Optional[str]) -> Optional[Tuple[float, float, float]]:
    if init is None:
        return None
    parts = [p for p in init.split(",") if p.strip()]
    if len(parts) != 3:
        raise ConfigurationError(f"--init takes t_c,nu,beta/nu, got '{init}'")
    try:
        return parse_angle(parts[0]), float(parts[1]), float(parts[2])
    except ValueError as e:
        raise ConfigurationError(str(e))


async def _collapse_command(ctx, run_dirs, window, init, output):
    try:
        await ExperimentCommands(ctx.obj).collapse(
            [Path(p) for p in run_dirs], _parse_window(window), _parse_init(init),
            Path(output) if output else None)
    except MeasuredIsingError as e:
        _fail(e)


async def _oned_command(ctx, sizes, options, samples: int, output):
    try:
        try:
            size_list = parse_size_list(sizes)
        except ValueError as e:
            raise ConfigurationError(str(e))
        run = ctx.obj.make_run_config(lattice="chain", extents=max(size_list), **options)
        await ExperimentCommands(ctx.obj).oned(size_list, run.points_grid(), samples, run.seed,
                                               Path(output) if output else None)
    except MeasuredIsingError as e:
        _fail(e)


if __name__ == '__main__':
    cli()

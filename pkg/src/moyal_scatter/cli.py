"""Command line entry point: ``moyal-scatter <subcommand> --config <path>``.

Exit codes: 0 all checks pass, 1 some check failed, 2 invalid config,
3 input or output failure.
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from .config import ConfigError, bundled_config_path, load_config
from .reports import SUBCOMMANDS, run

EXIT_FAILED, EXIT_SCHEMA, EXIT_IO = 1, 2, 3
THREADS_ENV = "MOYAL_SCATTER_THREADS"
DEFAULT_OUT = "moyal-scatter-out"


def thread_budget() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"${THREADS_ENV}", f"expected a positive integer, got {raw!r}")
    return n


def resolve_config(path: str) -> Path:
    """A file path, or the name of a bundled config such as ``moyal-2d``."""
    p = Path(path)
    if p.exists() or p.suffix or os.sep in path:
        return p
    try:
        return bundled_config_path(path)
    except FileNotFoundError:
        return p


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("subcommand", type=click.Choice(SUBCOMMANDS + ["all"]))
@click.option("--config", "config_path", required=True, help="Run config (JSON file or bundled config name).")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Overrides the config's out_dir.")
@click.option("--refine", type=click.IntRange(min=2), default=None, help="Number of grid refinements for implementability.")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(subcommand: str, config_path: str, out_dir: str | None, refine: int | None, verbose: bool) -> None:
    """Run a check pipeline and write report.json plus data files."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = thread_budget()
        cfg = load_config(resolve_config(config_path))
    except ConfigError as exc:
        click.echo(f"schema error at {exc.path}: {exc.message}", err=True)
        sys.exit(EXIT_SCHEMA)
    except OSError as exc:
        click.echo(f"cannot read config: {exc}", err=True)
        sys.exit(EXIT_IO)

    target = Path(out_dir or cfg.raw.get("out_dir") or DEFAULT_OUT)
    try:
        report = run(subcommand, cfg, target, threads=threads, refine=refine)
    except OSError as exc:
        click.echo(f"cannot write results: {exc}", err=True)
        sys.exit(EXIT_IO)

    click.echo(f"{subcommand}: {report['verdict']} ({target / 'report.json'})")
    for num, entry in report["criteria"].items():
        if entry["verdict"] != "n/a":
            click.echo(f"  criterion {num} ({entry['title']}): {entry['verdict']}")
    if report["failing"]:
        click.echo("failing checks:", err=True)
        for name in report["failing"]:
            click.echo(f"  {name}", err=True)
        sys.exit(EXIT_FAILED)


if __name__ == "__main__":
    main()

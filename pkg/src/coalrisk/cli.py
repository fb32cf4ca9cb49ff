"""Command-line front end.

Subcommands: ``stats`` (summary statistics of the input returns), ``run``
(rolling attribution), ``validate`` (Monte Carlo oracle + game property
suite), ``plot`` (re-render charts from a results CSV).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure, 4 validation failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .covariance import ConvergenceError
from .gauss import DegenerateRegionError
from .measures import SolverError
from .panel import (
    PanelParseError,
    load_levels,
    log_returns,
    summary_stats,
    weekly_aggregate,
)
from .pipeline import (
    ConfigError,
    RunConfig,
    config_from_mapping,
    emit_outputs,
    load_annotations,
    load_config_file,
    parse_results_csv,
    run_rolling_attribution,
)
from .validation import run_validation

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
EXIT_VALIDATION = 4


@click.group()
def cli():
    """Coalitional systemic-risk attribution under a joint Gaussian model."""


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--weekly/--daily", default=True, show_default=True)
def stats(input_path: str, weekly: bool):
    """Summary statistics of the x100 log returns derived from INPUT levels."""
    panel = load_levels(input_path)
    returns = log_returns(panel)
    if weekly:
        returns = weekly_aggregate(returns)
    table = summary_stats(returns)
    click.echo(f"# frequency: {table.frequency}")
    click.echo("name,min,max,mean,std_dev,skewness,kurtosis,q01,jb")
    for name, s in table.stats.items():
        click.echo(
            f"{name},{s.minimum:.6g},{s.maximum:.6g},{s.mean:.6g},"
            f"{s.std_dev:.6g},{s.skewness:.6g},{s.kurtosis:.6g},"
            f"{s.q01:.6g},{s.jb:.6g}"
        )


def _merged_config(config, **flags) -> RunConfig:
    entries = load_config_file(config) if config else {}
    for key, value in flags.items():
        if value is not None:
            entries[key] = value
    return config_from_mapping(entries)


@cli.command()
@click.option("--input", "input_path", type=click.Path(), default=None)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--safe", default=None, help="comma-separated safe institutions")
@click.option("--distressed", default=None, help="comma-separated distressed institutions")
@click.option("--tau1", default=None)
@click.option("--tau2", default=None)
@click.option("--window", default=None)
@click.option("--lambda", "lam", default=None, help="penalty value or 'default'")
@click.option("--weekly/--daily", "weekly", default=None)
@click.option("--seed", default=None)
@click.option("--out", default=None, type=click.Path())
@click.option("--annotations", default=None, type=click.Path(exists=True))
@click.option("--normalize", is_flag=True, default=False,
              help="chart Shapley values as shares of the window total")
def run(input_path, config, safe, distressed, tau1, tau2, window, lam, weekly,
        seed, out, annotations, normalize):
    """Rolling attribution: fit, build the coalition game, allocate, emit."""
    cfg = _merged_config(
        config,
        input=input_path,
        safe=safe,
        distressed=distressed,
        tau1=tau1,
        tau2=tau2,
        window=window,
        **{"lambda": lam},
        frequency=(None if weekly is None else ("weekly" if weekly else "daily")),
        seed=seed,
        out=out,
        annotations=annotations,
        normalize="true" if normalize else None,
    )
    series = run_rolling_attribution(cfg)
    marks = load_annotations(cfg.annotations) if cfg.annotations else ()
    paths = emit_outputs(
        series, cfg.out_dir, annotations=marks, normalize_charts=cfg.normalize_charts
    )
    click.echo(
        f"windows: {len(series.results)} ok, {len(series.failures)} failed"
    )
    for f in series.failures:
        click.echo(f"  failed {f.window_date}: {f.reason}")
    for kind, path in paths.items():
        click.echo(f"{kind}: {path}")
    if not series.results:
        raise SolverError("every window failed; no attribution produced")


@cli.command()
@click.option("--seed", default=20_08, show_default=True)
@click.option("--draws", default=10**6, show_default=True)
@click.option("--specs", default=20, show_default=True)
@click.option("--se-mult", default=4.0, show_default=True)
@click.option("--out", default=None, type=click.Path(), help="also write the report here")
def validate(seed, draws, specs, se_mult, out):
    """Monte Carlo oracle suite: closed forms vs empirical estimators."""
    report = run_validation(
        int(seed), n_specs=int(specs), n_draws=int(draws), se_mult=float(se_mult)
    )
    text = report.to_text()
    click.echo(text, nl=False)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    if not report.passed:
        sys.exit(EXIT_VALIDATION)


@cli.command()
@click.option("--results", required=True, type=click.Path(exists=True),
              help="attribution.csv produced by `run`")
@click.option("--out", default="out", type=click.Path(), show_default=True)
@click.option("--annotations", default=None, type=click.Path(exists=True))
@click.option("--normalize", is_flag=True, default=False)
def plot(results, out, annotations, normalize):
    """Re-render the SVG charts from a previously emitted results CSV."""
    series = parse_results_csv(results)
    marks = load_annotations(annotations) if annotations else ()
    paths = emit_outputs(series, out, annotations=marks, normalize_charts=normalize)
    for kind, path in paths.items():
        click.echo(f"{kind}: {path}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        return EXIT_USAGE
    except PanelParseError as e:
        click.echo(f"data error: {e}", err=True)
        return EXIT_DATA
    except (ConvergenceError, SolverError, DegenerateRegionError) as e:
        click.echo(f"numerical failure: {e}", err=True)
        return EXIT_NUMERIC
    except SystemExit as e:
        return int(e.code or 0)
    except OSError as e:
        click.echo(f"io error: {e}", err=True)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

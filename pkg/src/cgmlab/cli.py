"""Command-line front end: analyze, gauss-bonnet, energy, catalog, selftest.

Exit codes: 0 ok, 1 error, 2 unresolved umbilic candidates.
"""
from __future__ import annotations

import csv
import functools
import inspect
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import gaussbonnet as gb
from .cgm import CSV_COLUMNS, field_table
from .jets import ExpressionError
from .surfaces import BUILTIN_DOCS, BUILTINS, SurfaceError, builtin, load_surface, to_dict
from .umbilic import detect_surface, geodesic_bb_test

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2
FIELD_GRID_MAX = 128


@dataclass
class RunConfig:
    builtin: str | None
    params: dict
    surface_file: str | None
    grid_n: int
    eps_min: float
    eps_max: float
    eps_steps: int
    threads: int
    out: Path
    seed: int

    def validate(self):
        if (self.builtin is None) == (self.surface_file is None):
            raise click.UsageError("give exactly one of --builtin and --surface")
        if self.params and self.builtin is None:
            raise click.UsageError("--params only applies to --builtin")
        if self.grid_n < 64:
            raise click.UsageError("--grid must be at least 64")
        if not (0 < self.eps_min < self.eps_max):
            raise click.UsageError("need 0 < --eps-min < --eps-max")
        if self.eps_steps < 6:
            raise click.UsageError("--eps-steps must be at least 6 for the expansion fit")
        if self.threads < 1:
            raise click.UsageError("--threads must be positive")
        return self

    def surface(self):
        if self.builtin is not None:
            return builtin(self.builtin, **self.params)
        return load_surface(self.surface_file)

    def record(self):
        return {"source": self.builtin or str(self.surface_file), "params": self.params, "grid_n": self.grid_n,
                "seed": self.seed}


class _Group(click.Group):
    """Maps every failure, usage errors included, to exit code 1."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_ERROR)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_ERROR)
        except Exception as exc:  # noqa: BLE001 - last resort, keep the exit-code contract
            click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_ERROR)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def _parse_params(values):
    out = {}
    for item in values:
        for part in item.split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise click.UsageError(f"--params expects k=v, got {part!r}")
            k, v = part.split("=", 1)
            try:
                out[k.strip()] = float(v)
            except ValueError:
                raise click.UsageError(f"--params value for {k.strip()!r} is not a number: {v!r}") from None
    return out


def _options(fn):
    opts = [
        click.option("--builtin", "builtin_name", type=click.Choice(sorted(BUILTINS)), help="built-in surface id"),
        click.option("--params", multiple=True, help="builtin parameters k=v (repeatable, or comma separated)"),
        click.option("--surface", "surface_file", type=click.Path(dir_okay=False), help="surface JSON file"),
        click.option("--grid", "grid_n", type=int, default=128, show_default=True, help="detection grid N"),
        click.option("--eps-min", type=float, default=gb.EPS_MIN, show_default=True),
        click.option("--eps-max", type=float, default=gb.EPS_MAX, show_default=True),
        click.option("--eps-steps", type=int, default=gb.EPS_STEPS, show_default=True),
        click.option("--threads", type=int, default=1, show_default=True, help="worker threads for eps sweeps"),
        click.option("--out", "out", type=click.Path(file_okay=False), default=".", show_default=True),
        click.option("--seed", type=int, default=0, show_default=True, help="seed for probe jitter"),
    ]
    for o in reversed(opts):
        fn = o(fn)

    @functools.wraps(fn)
    def wrapper(builtin_name, params, surface_file, grid_n, eps_min, eps_max, eps_steps, threads, out, seed):
        cfg = RunConfig(builtin_name, _parse_params(params), surface_file, grid_n, eps_min, eps_max, eps_steps,
                        threads, Path(out), seed).validate()
        try:
            sp = cfg.surface()
            cfg.out.mkdir(parents=True, exist_ok=True)
            return fn(cfg, sp)
        except ExpressionError as exc:
            click.echo(f"error: parse error: {exc.message} at offset {exc.offset}", err=True)
        except (SurfaceError, ValueError, ArithmeticError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
        return EXIT_ERROR

    return wrapper


def _dump(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _surface_record(sp):
    d = to_dict(sp)
    d["ambient"] = sp.ambient
    d["euler_characteristic"] = sp.euler_characteristic
    d["charts"] = [c.name for c in sp.charts]
    return d


def write_fields(path, sp, n):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("chart",) + CSV_COLUMNS)
        for ch in sp.charts:
            for row in field_table(ch, sp.ambient, n):
                w.writerow([ch.name] + [f"{x:.12g}" for x in row])


def _detect(cfg, sp):
    return detect_surface(sp, cfg.grid_n, seed=cfg.seed)


def _partial(report):
    if report.unresolved:
        click.echo(f"warning: {len(report.unresolved)} unresolved umbilic candidates", err=True)
        return EXIT_PARTIAL
    return EXIT_OK


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="cgmlab")
def main():
    """Conformal Gauss map analysis of Willmore surfaces."""


@main.command()
@_options
def analyze(cfg, sp):
    """Field dump (fields.csv) and umbilic report (umbilic.json)."""
    report = _detect(cfg, sp)
    write_fields(cfg.out / "fields.csv", sp, min(cfg.grid_n, FIELD_GRID_MAX))
    data = report.as_json()
    data.update({"surface": _surface_record(sp), "config": cfg.record()})
    if sp.ambient == "R3":
        data["bb_tests"] = [geodesic_bb_test(sp.chart_named(c.chart), c, sp.ambient).as_json()
                            for c in report.curves]
    _dump(cfg.out / "umbilic.json", data)
    click.echo(f"{sp.name}: {len(report.points)} umbilic points, {len(report.curves)} curves, "
               f"{len(report.unresolved)} unresolved; total multiplicity {report.total_multiplicity}")
    for c in report.curves:
        click.echo(f"  curve on {c.chart}: closed={c.closed} length_g={c.length_g:.10g} geodesic={c.geodesic}")
    for p in report.points:
        click.echo(f"  point on {p.chart} ({p.u:.6g}, {p.v:.6g}): type {p.kind}, m={p.m}, n={p.n}")
    return _partial(report)


@main.command("gauss-bonnet")
@_options
def gauss_bonnet(cfg, sp):
    """eps sweep of the renormalised Gauss-Bonnet integral (sweep.csv, fit.json)."""
    report = _detect(cfg, sp)
    rows, fit = gb.gauss_bonnet_sweep(sp, report, cfg.eps_min, cfg.eps_max, cfg.eps_steps, threads=cfg.threads)
    gb.write_sweep_csv(cfg.out / "sweep.csv", rows)
    fit["config"] = cfg.record()
    _dump(cfg.out / "fit.json", fit)
    click.echo(f"{sp.name}: c1={fit['c1']:.8g} (expected {fit['expected_c1']:.8g}), "
               f"c0={fit['c0']:.8g} (expected {fit['expected_c0']:.8g}), c_log={fit['c_log']:.4g}")
    click.echo(f"verdict {fit['verdict']}")
    return _partial(report)


@main.command()
@_options
def energy(cfg, sp):
    """Willmore energies and the applicable space-form identities (energy.json)."""
    from .energies import applicable_identities, energy_report

    report = _detect(cfg, sp) if applicable_identities(sp) else None
    rep = energy_report(sp, report)
    data = rep.as_json()
    data["config"] = cfg.record()
    _dump(cfg.out / "energy.json", data)
    click.echo(rep.summary())
    return _partial(report) if report is not None else EXIT_OK


@main.command()
def catalog():
    """List the built-in surfaces and their parameters."""
    for name in sorted(BUILTINS):
        sig = inspect.signature(BUILTINS[name])
        params = ", ".join(f"{p.name}={p.default}" for p in sig.parameters.values()
                           if p.default is not inspect.Parameter.empty and not isinstance(p.default, tuple))
        click.echo(f"{name:18s} {BUILTIN_DOCS.get(name, '')}")
        if params:
            click.echo(f"{'':18s} params: {params}")
    return EXIT_OK


@main.command()
@click.option("--only", type=click.IntRange(1, 6), multiple=True, help="run only these criteria")
def selftest(only):
    """Run the acceptance suite in-process."""
    from .acceptance import run_all

    checks = run_all(sorted(set(only)) or None, echo=click.echo)
    failed = [c.number for c in checks if not c.passed]
    click.echo("all criteria passed" if not failed else f"failed criteria: {failed}")
    return EXIT_OK if not failed else EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    main()

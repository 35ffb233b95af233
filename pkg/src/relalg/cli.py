"""Command-line front end; a thin client over the core engine.

Exit codes: 0 for a clean verdict, 1 for an obstructed/empty verdict or a
failed check, 2 for usage and parse errors.
"""

from __future__ import annotations

import os
import sys

import click

from .report import Report, run

_VERDICT_WORDS = ("determined", "underdetermined", "obstructed", "empty")


def _use_color() -> bool:
    setting = os.environ.get("RELALG_COLOR", "auto").lower()
    if setting == "never":
        return False
    return sys.stdout.isatty()


def _colorize(text: str) -> str:
    out = []
    for line in text.splitlines():
        for word in _VERDICT_WORDS:
            if f": {word}" in line:
                line = line.replace(f": {word}", f": \x1b[1m{word}\x1b[0m")
                break
        out.append(line)
    return "\n".join(out) + ("\n" if text.endswith("\n") else "")


def _emit(report: Report, emit: str) -> None:
    if emit == "json":
        click.echo(report.to_json(), nl=False)
    else:
        text = report.text
        if _use_color():
            text = _colorize(text)
        click.echo(text, nl=False)
    sys.exit(report.exit_code)


def _read(file) -> str:
    return file.read()


_shared = [
    click.option("--name", default=None, help="Target declaration when several exist."),
    click.option("--emit", type=click.Choice(["text", "json"]), default="text"),
    click.option("--deterministic", is_flag=True, help="Suppress the timing field."),
    click.option("--trig-rewrite", "trig", is_flag=True, help="Enable sin^2+cos^2=1."),
]


def _with_shared(fn):
    for option in reversed(_shared):
        fn = option(fn)
    return fn


@click.group()
def main():
    """Structure-equation engine for algebroids relative to submersions."""


@main.command()
@click.argument("file", type=click.File("r"))
@_with_shared
def check(file, name, emit, deterministic, trig):
    """Validate a declaration and test D^2 = 0 when no fiber level remains."""
    _emit(run(_read(file), "check", name=name, deterministic=deterministic, trig=trig), emit)


@main.command()
@click.argument("file", type=click.File("r"))
@_with_shared
def bracket(file, name, emit, deterministic, trig):
    """Print the bracket constants and anchor dual to the derivation."""
    _emit(run(_read(file), "bracket", name=name, deterministic=deterministic, trig=trig), emit)


@main.command()
@click.argument("file", type=click.File("r"))
@click.option("--adjoin", multiple=True, help="Constraint EXPR=0 to impose before solving.")
@_with_shared
def prolong(file, adjoin, name, emit, deterministic, trig):
    """Compute one prolongation step."""
    _emit(
        run(
            _read(file),
            "prolong",
            name=name,
            adjoin=list(adjoin),
            deterministic=deterministic,
            trig=trig,
        ),
        emit,
    )


@main.command()
@click.argument("file", type=click.File("r"))
@click.option("--depth", type=int, required=True, help="Number of levels to attempt.")
@click.option("--adjoin", multiple=True, help="Constraint EXPR=0 to impose before solving.")
@_with_shared
def tower(file, depth, adjoin, name, emit, deterministic, trig):
    """Iterate prolongation to a finite depth."""
    _emit(
        run(
            _read(file),
            "tower",
            name=name,
            depth=depth,
            adjoin=list(adjoin),
            deterministic=deterministic,
            trig=trig,
        ),
        emit,
    )


@main.command()
@click.argument("file", type=click.File("r"))
@click.option("--realization", default=None, help="Realization block to verify.")
@_with_shared
def realize(file, realization, name, emit, deterministic, trig):
    """Verify a realization block against its algebroid."""
    _emit(
        run(
            _read(file),
            "realize",
            realization=realization,
            deterministic=deterministic,
            trig=trig,
        ),
        emit,
    )


@main.command()
@click.argument("file", type=click.File("r"))
@_with_shared
def jets(file, name, emit, deterministic, trig):
    """Compile a jets block and print its structure equations."""
    _emit(run(_read(file), "jets", name=name, deterministic=deterministic, trig=trig), emit)


if __name__ == "__main__":
    main()

"""Command-line interface.

Exit codes: 0 success, 1 internal error, 2 invalid input, 3 violated
precondition of the requested construction.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, io, report
from .equivalence import forward_epsilon_machine, merge, predictive_partition, retrodictive_partition, reverse_epsilon_machine
from .errors import (
    BeliefCapExceeded,
    DimensionMismatch,
    EnumerationCapExceeded,
    InvalidMachine,
    InvalidPartition,
    MachineFormatError,
    NegativeProbability,
    NotEpsilonMachine,
    NotHermitian,
    NotPositive,
    NotReverseEpsilonMachine,
    NotSynchronized,
    NotUnitTrace,
    RatchetError,
    UnknownSymbol,
)
from .machine import require_valid, time_reverse
from .qmachine import build_qmachine, build_reverse_qmachine, check_forward_efficiency, check_reverse_efficiency, memory_metrics
from .quantum import SupportViolation, dpi_saturation_check, fidelity, random_channel, random_density

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_PRECONDITION = 0, 1, 2, 3

INPUT_ERRORS = (
    MachineFormatError,
    InvalidMachine,
    InvalidPartition,
    UnknownSymbol,
    NegativeProbability,
    NotHermitian,
    NotPositive,
    NotUnitTrace,
    DimensionMismatch,
)
PRECONDITION_ERRORS = (
    NotEpsilonMachine,
    NotReverseEpsilonMachine,
    NotSynchronized,
    BeliefCapExceeded,
    EnumerationCapExceeded,
    SupportViolation,
)


def _fail(code: int, err: Exception):
    click.echo(f"error: {type(err).__name__}: {err}", err=True)
    sys.exit(code)


def handled(fn):
    """Map library exceptions to exit codes and apply ``--threads``."""

    @functools.wraps(fn)
    def wrapper(*args, threads=None, **kwargs):
        try:
            with threadpool_limits(limits=threads):
                return fn(*args, **kwargs)
        except INPUT_ERRORS as e:
            _fail(EXIT_INPUT, e)
        except PRECONDITION_ERRORS as e:
            _fail(EXIT_PRECONDITION, e)
        except RatchetError as e:
            _fail(EXIT_INTERNAL, e)

    return click.option("--threads", type=click.IntRange(min=1), default=None, help="Cap on BLAS threads.")(wrapper)


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


def _load(path: str):
    return io.resolve_machine(path)


def _source_bytes(path: str) -> bytes | None:
    if path.startswith("builtin:"):
        return io.dumps_machine(io.load_builtin(path.split(":", 1)[1])).encode()
    return Path(path).read_bytes()


MACHINE = click.argument("path", metavar="MACHINE")
OUTPUT = click.option("--output", "-o", type=click.Path(dir_okay=False), default=None, help="Write to a file instead of stdout.")


@click.group()
@click.version_option(__version__, prog_name="ratchetlab")
def main():
    """Thermodynamic analysis of classical and quantum process generators.

    MACHINE is a JSON machine file or builtin:<name> for a shipped example.
    """


@main.command()
@MACHINE
@click.option("--t-max", type=click.IntRange(min=1), default=6, show_default=True)
@click.option("--t-max-quantum", type=click.IntRange(min=1), default=None, help="Quantum trace length [default: min(t-max, 4)].")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True)
@click.option("--temperature", type=click.FloatRange(min=0, min_open=True), default=None, help="Kelvin; adds joules to text output.")
@click.option("--seed", type=int, default=0, show_default=True)
@OUTPUT
@handled
def analyze(path, t_max, t_max_quantum, fmt, temperature, seed, output):
    """Full analysis report of a machine."""
    m = _load(path)
    rep = report.analyze(m, t_max=t_max, source_bytes=_source_bytes(path), seed=seed, t_max_quantum=t_max_quantum)
    report.validate_report(rep)
    _emit(report.dumps(rep) if fmt == "json" else report.render_text(rep, temperature), output)
    if not rep["validation"]["valid"]:
        click.echo("error: InvalidMachine: " + "; ".join(rep["validation"]["violations"]), err=True)
        sys.exit(EXIT_INPUT)


@main.command()
@MACHINE
@click.option("--reverse", is_flag=True, help="Build the reverse q-machine (input must be a reverse epsilon-machine).")
@click.option("--phases", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON phase table.")
@click.option("--t-max", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None, help="Write the q-machine JSON here.")
@handled
def qmachine(path, reverse, phases, t_max, output):
    """Build a q-machine and report its efficiency verdict.

    The verdict (and, without --output, the q-machine itself) goes to stdout.
    """
    m = _load(path)
    require_valid(m)
    ph = io.load_phases(phases, m) if phases else None
    if reverse:
        qm = build_reverse_qmachine(m, ph)
        verdict = check_reverse_efficiency(qm, t_max=t_max)
    else:
        qm = build_qmachine(m, ph)
        verdict = check_forward_efficiency(qm, t_max=t_max)
    classical = memory_metrics(m)
    quantum = memory_metrics(qm)
    summary = {
        "kind": qm.kind,
        "dimension": qm.dimension,
        "memory": {"classical": classical, "quantum": quantum},
        "compression_bits": classical["entropy"] - quantum["entropy"],
        "verdict": verdict.to_json(),
    }
    if output:
        Path(output).write_text(io.dumps_qmachine(qm))
    else:
        summary["qmachine"] = io.qmachine_to_dict(qm)
    click.echo(json.dumps(summary, indent=2))


def _machine_command(fn):
    return OUTPUT(handled(fn))


@main.command("merge")
@MACHINE
@click.option("--mode", type=click.Choice(["retrodictive", "predictive"]), default="retrodictive", show_default=True)
@_machine_command
def merge_cmd(path, mode, output):
    """Merge equivalent states; writes a machine file."""
    m = _load(path)
    part = retrodictive_partition(m) if mode == "retrodictive" else predictive_partition(m)
    _emit(io.dumps_machine(merge(m, part)), output)


@main.command("reverse")
@MACHINE
@_machine_command
def reverse_cmd(path, output):
    """Time-reverse a machine; writes a machine file."""
    _emit(io.dumps_machine(time_reverse(_load(path))), output)


@main.command()
@MACHINE
@click.option("--max-len", type=click.IntRange(min=1), default=4, show_default=True)
@_machine_command
def words(path, max_len, output):
    """Word probabilities up to --max-len as CSV."""
    m = _load(path)
    require_valid(m)
    _emit(io.words_csv(m, max_len), output)


@main.command()
@MACHINE
@click.option("--mode", type=click.Choice(["forward", "reverse"]), default="forward", show_default=True)
@_machine_command
def em(path, mode, output):
    """Forward or reverse epsilon-machine of the generated process."""
    m = _load(path)
    eps = forward_epsilon_machine(m) if mode == "forward" else reverse_epsilon_machine(m)
    _emit(io.dumps_machine(eps), output)


@main.command("petz-check")
@click.argument("problem", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--random", "n_random", type=click.IntRange(min=1), default=None, help="Check this many random triples instead.")
@click.option("--seed", type=int, default=0, show_default=True)
@OUTPUT
@handled
def petz_check(problem, n_random, seed, output):
    """DPI saturation versus Petz recovery.

    PROBLEM is a JSON file {"rho", "sigma", "kraus"} with complex matrices
    as nested [re, im] pairs. With --random, dims 2-4 are drawn with --seed.
    """
    if (problem is None) == (n_random is None):
        raise click.UsageError("give exactly one of PROBLEM or --random")
    if problem:
        rho, sigma, channel = io.load_operator_problem(problem)
        result = dpi_saturation_check(rho, sigma, channel)
        out = result.to_json()
        out["fidelity_in"] = fidelity(rho, sigma)
        out["fidelity_out"] = fidelity(channel(rho), channel(sigma))
    else:
        rng = np.random.default_rng(seed)
        rows = []
        for _ in range(n_random):
            d, d_out = rng.integers(2, 5, size=2)
            rho, sigma = random_density(d, rng), random_density(d, rng)
            ch = random_channel(d, d_out, int(rng.integers(1, 4)), rng)
            rows.append(dpi_saturation_check(rho, sigma, ch).to_json())
        out = {
            "seed": seed,
            "n": n_random,
            "agree": sum(r["saturated"] == r["recovered"] for r in rows),
            "min_gap": min(r["gap"] for r in rows),
            "saturated": sum(r["saturated"] for r in rows),
        }
    _emit(json.dumps(out, indent=2) + "\n", output)


if __name__ == "__main__":  # pragma: no cover
    main()

# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
The ``acon`` command line.

::

    acon run --config run.ini [--seed N]
    acon check --config run.ini
    acon compare --config run.ini multiplier penalty [mm ...]

Exit codes: 0 on success, 1 if a simulation fails or a check doesn't pass,
2 for an invalid configuration, 3 if a file can't be read or written.
"""
from typing import TYPE_CHECKING, NamedTuple, Optional
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from dataclasses import replace
from itertools import combinations
from math import isclose, nan, sqrt
import argparse
import csv
import functools
import logging
import sys

from acon import __version__
from acon.chemistry import f, volume_residual
from acon.config import load_config, output_paths, with_seed
from acon.diagnostics import (
    check_h1_bound,
    check_hls_identity,
    gradient_check,
    summarize,
)
from acon.dynamics import Scheme, run
from acon.energy import energy, variational_derivatives
from acon.errors import AconError, ConfigError, ConfigMismatch
from acon.grid import PeriodicGrid, ScalarField, inner
from acon.init_conditions import generate
from acon.runlog import RunLog, comparison_header, format_float
from acon.snapshot import snapshot_name, write_snapshot

if TYPE_CHECKING:
    import os
    from pathlib import Path
    from typing import Callable, List, Sequence, TextIO

    from acon.config import RunConfig
    from acon.diagnostics import Derivative
    from acon.dynamics import StepReport, Trajectory
    from acon.energy import PhaseState

__all__ = [
    "EXIT_OK",
    "EXIT_FAILURE",
    "EXIT_CONFIG",
    "EXIT_IO",
    "CheckRow",
    "cmd_run",
    "cmd_check",
    "cmd_compare",
    "main",
]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3

#: Largest number of points per axis `cmd_check` works with.
CHECK_POINTS = 16
#: Relative tolerance of the finite-difference gradient check.
GRADIENT_TOL = 1e-5
#: Relative tolerance of the Poisson identity check.
HLS_TOL = 1e-10


def _exit_codes(command: "Callable[..., int]") -> "Callable[..., int]":
    # Turn the errors a command can run into into exit codes.
    @functools.wraps(command)
    def wrapper(*args: "object", **kwargs: "object") -> "int":
        try:
            return command(*args, **kwargs)
        except ConfigError as e:
            print(f"acon: invalid configuration: {e}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as e:
            print(f"acon: {e}", file=sys.stderr)
            return EXIT_IO
        except AconError as e:
            print(f"acon: {type(e).__name__}: {e}", file=sys.stderr)
            return EXIT_FAILURE

    return wrapper


def _load(
    config_path: "os.PathLike[str]", seed: "Optional[int]"
) -> "RunConfig":
    cfg = load_config(config_path)
    if seed is not None:
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(
                f"--seed must be an unsigned 64-bit integer, got {seed}."
            )
        cfg = with_seed(cfg, seed)
    return cfg


@_exit_codes
def cmd_run(
    config_path: "os.PathLike[str]", seed: "Optional[int]" = None
) -> "int":
    """
    Run the simulation a configuration file describes.

    Writes one CSV row per step to the configured log and snapshots to the
    configured directory.

    :return: An exit code.
    """
    cfg = _load(config_path, seed)
    state = generate(cfg.init, cfg.grid, cfg.params, cfg.stepping.guard)
    log_path, snapshot_dir = output_paths(cfg)
    every = cfg.output.snapshot_every
    tau = cfg.stepping.tau

    with ExitStack() as stack:
        runlog = None
        if log_path is not None:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            stream = stack.enter_context(
                open(log_path, "w", newline="", encoding="utf-8")
            )
            runlog = RunLog(stream, cfg.output.precision)

        def observe(k: "int", new: "PhaseState", report: "StepReport") -> None:
            if runlog is not None:
                runlog.write(k, k * tau, report)
            if snapshot_dir is not None and every and k % every == 0:
                write_snapshot(snapshot_dir / snapshot_name(k), new)

        if snapshot_dir is not None:
            write_snapshot(snapshot_dir / snapshot_name(0), state)
        traj = run(state, cfg.stepping, cfg.horizon, every, observe)
        steps = traj.steps
        if snapshot_dir is not None and not (every and steps % every == 0):
            write_snapshot(snapshot_dir / snapshot_name(steps), traj.final)

    report = summarize(traj)
    log.info(
        "Run finished: %d steps, E=%.16g, max volume residual %.3e, "
        "energy monotone: %s",
        steps,
        traj.energies[-1],
        report.max_volume_residual,
        report.energy_monotone,
    )
    return EXIT_OK


class CheckRow(NamedTuple):
    """One line of the `cmd_check` table. ``passed`` is None if skipped."""

    check: str
    lhs: float
    rhs: float
    passed: "Optional[bool]"


def _reduced_grid(grid: "PeriodicGrid") -> "PeriodicGrid":
    points = tuple(min(n, CHECK_POINTS) for n in grid.points)
    return PeriodicGrid(points, grid.half_lengths)


def _check_rows(
    state: "PhaseState", derivative: "Derivative", seed: "int"
) -> "List[CheckRow]":
    rows = []

    error = gradient_check(state, derivative, seed=seed)
    rows.append(
        CheckRow("gradient", error, GRADIENT_TOL, error <= GRADIENT_TOL)
    )

    omega1 = state.params.omega[0]
    excess = ScalarField(state.grid, f(state.phi1.values) - omega1)
    lhs, rhs = check_hls_identity(excess)
    rows.append(
        CheckRow(
            "hls_identity",
            lhs,
            rhs,
            isclose(lhs, rhs, rel_tol=HLS_TOL, abs_tol=1e-14),
        )
    )

    residual = max(
        abs(volume_residual(state.field(i), state.params.omega[i - 1]))
        for i in (1, 2)
    )
    rows.append(CheckRow("volume", residual, 1e-12, residual <= 1e-12))

    try:
        h1 = check_h1_bound(state)
    except ConfigMismatch as e:
        log.info("H1 bound skipped: %s", e)
        rows.append(CheckRow("h1_bound", nan, nan, None))
    else:
        rows.append(CheckRow("h1_bound", h1.lhs, h1.rhs, h1.ok))
    return rows


def _print_table(rows: "Sequence[CheckRow]", out: "TextIO") -> None:
    print(f"{'check':<14}{'lhs':>26}{'rhs':>26}  pass", file=out)
    for row in rows:
        verdict = {None: "skipped", True: "yes", False: "NO"}[row.passed]
        print(
            f"{row.check:<14}{format_float(row.lhs):>26}"
            f"{format_float(row.rhs):>26}  {verdict}",
            file=out,
        )


@_exit_codes
def cmd_check(
    config_path: "os.PathLike[str]",
    seed: "Optional[int]" = None,
    derivative: "Derivative" = variational_derivatives,
    out: "Optional[TextIO]" = None,
) -> "int":
    """
    Run the diagnostics on the configured problem, at reduced size.

    The grid is cut down to at most 16 points per axis. Prints a table of
    ``(check, lhs, rhs, pass)``; the H1 bound is reported as skipped
    outside the normalised setting.

    :param derivative: The variational derivative to check against finite
                       differences of the energy.

    :return: 0 if every check that ran passed, 1 otherwise.
    """
    cfg = _load(config_path, seed)
    state = generate(
        cfg.init, _reduced_grid(cfg.grid), cfg.params, cfg.stepping.guard
    )
    rows = _check_rows(state, derivative, cfg.init.seed)
    _print_table(rows, sys.stdout if out is None else out)
    failed = [row.check for row in rows if row.passed is False]
    if failed:
        log.warning("Failed checks: %s", ", ".join(failed))
        return EXIT_FAILURE
    return EXIT_OK


def _distance(a: "PhaseState", b: "PhaseState") -> "float":
    d1 = a.phi1.values - b.phi1.values
    d2 = a.phi2.values - b.phi2.values
    return sqrt(
        inner(ScalarField(a.grid, d1), ScalarField(a.grid, d1))
        + inner(ScalarField(a.grid, d2), ScalarField(a.grid, d2))
    )


def _comparison_rows(
    trajectories: "Sequence[Trajectory]", precision: "int"
) -> "List[List[str]]":
    g = functools.partial(format_float, precision=precision)
    steps = min(t.steps for t in trajectories)
    tau = trajectories[0].tau
    rows = []
    for k in range(steps + 1):
        states = [t.snapshots[k] for t in trajectories]
        row = [g(k * tau)]
        for traj, state in zip(trajectories, states):
            if k == 0:
                e = energy(state).total
            else:
                e = traj.reports[k - 1].energy_after.total
            row += [
                g(e),
                g(volume_residual(state.phi1, state.params.omega[0])),
                g(volume_residual(state.phi2, state.params.omega[1])),
            ]
        row += [
            g(_distance(states[i], states[j]))
            for i, j in combinations(range(len(states)), 2)
        ]
        rows.append(row)
    return rows


@_exit_codes
def cmd_compare(
    config_path: "os.PathLike[str]",
    schemes: "Sequence[str]",
    seed: "Optional[int]" = None,
) -> "int":
    """
    Run several schemes from the same initial state and compare them.

    Writes a CSV with the energy and volume residuals of every run and the
    pairwise L2 distances between runs, at every step. Columns are labelled
    ``<n>_<scheme>`` so the same scheme may appear twice. The table goes
    next to the configured log as ``<log>_compare.csv``, or to standard
    output if no log is configured.

    :return: An exit code.
    """
    if len(schemes) < 2:
        raise ConfigError(
            f"compare needs at least two schemes, got {len(schemes)}."
        )
    try:
        chosen = [Scheme.from_name(name) for name in schemes]
    except ValueError as e:
        raise ConfigError(str(e)) from e

    cfg = _load(config_path, seed)
    state = generate(cfg.init, cfg.grid, cfg.params, cfg.stepping.guard)
    labels = [f"{n}_{s.value}" for n, s in enumerate(chosen, start=1)]

    def simulate(scheme: "Scheme") -> "Trajectory":
        stepping = replace(cfg.stepping, scheme=scheme)
        return run(state, stepping, cfg.horizon, snapshot_every=1)

    # Runs are independent; numpy releases the GIL inside the transforms.
    with ThreadPoolExecutor(max_workers=len(chosen)) as pool:
        trajectories = list(pool.map(simulate, chosen))

    pairs = list(combinations(labels, 2))
    header = comparison_header(labels, pairs)
    rows = _comparison_rows(trajectories, cfg.output.precision)

    log_path, _ = output_paths(cfg)
    with ExitStack() as stack:
        if log_path is None:
            stream: "TextIO" = sys.stdout
        else:
            target = _compare_path(log_path)
            target.parent.mkdir(parents=True, exist_ok=True)
            stream = stack.enter_context(
                open(target, "w", newline="", encoding="utf-8")
            )
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    for (a, b), distance in zip(pairs, rows[-1][1 + 3 * len(labels):]):
        log.info("Terminal L2 distance %s vs %s: %s", a, b, distance)
    return EXIT_OK


def _compare_path(log_path: "Path") -> "Path":
    return log_path.with_name(f"{log_path.stem}_compare.csv")


def _parser() -> "argparse.ArgumentParser":
    parser = argparse.ArgumentParser(
        prog="acon",
        description=(
            "Simulate the volume-constrained Allen-Cahn-Ohta-Nakazawa "
            "ternary system."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", required=True, help="path of the run configuration"
    )
    common.add_argument(
        "--seed", type=int, default=None, help="override the [init] seed"
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument(
        "--quiet", action="store_true", help="only log warnings and errors"
    )
    verbosity.add_argument(
        "-v", "--verbose", action="store_true", help="log debug output"
    )

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="run a simulation")
    commands.add_parser(
        "check", parents=[common], help="run the diagnostics suite"
    )
    compare = commands.add_parser(
        "compare", parents=[common], help="compare schemes"
    )
    compare.add_argument(
        "schemes",
        nargs="+",
        metavar="SCHEME",
        help="schemes to compare: multiplier, penalty, mm",
    )
    return parser


def main(argv: "Optional[Sequence[str]]" = None) -> "int":
    """Entry point of the ``acon`` command."""
    args = _parser().parse_args(argv)
    if args.quiet:
        level = logging.WARNING
    elif args.verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )

    if args.command == "run":
        return cmd_run(args.config, args.seed)
    if args.command == "check":
        return cmd_check(args.config, args.seed)
    return cmd_compare(args.config, args.schemes, args.seed)

# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
from pathlib import Path
from textwrap import dedent

import acon.config
import pytest
from acon.chemistry import ModelParams
from acon.config import (
    OUTPUT_DIR_ENV,
    default_config,
    dump_config,
    load_config,
    output_paths,
    parse_config,
    with_seed,
)
from acon.dynamics import InnerSweep, Scheme
from acon.errors import ConfigError
from acon.grid import PeriodicGrid
from acon.init_conditions import InitKind

FULL = dedent(
    """\
    [grid]
    dim = 3
    points = 16, 8, 12
    half_lengths = 1.0, 0.5, 0.75

    [model]
    epsilon = 0.05
    gamma11 = 2.0
    gamma12 = 0.3   # coupling
    gamma22 = 1.5
    omega1 = 0.2
    omega2 = 0.35
    penalty_m = 500

    [stepping]
    scheme = mm
    tau = 0.001
    horizon = 0.1
    project_each_step = no
    inner_tol_grad = 1e-10
    inner_tol_constraint = 1e-12
    inner_max_iters = 500
    beta_min = 1e-6
    inner_sweep = alternating

    [init]
    kind = spots
    seed = 18446744073709551615
    amplitude = 0.1
    base_levels = 0.3, 0.4
    stripes = 3
    spot_radius = 0.2
    spot_count = 6

    [output]
    log = results/run.csv
    snapshots = results/snaps
    snapshot_every = 10
    precision = 12
    """
)


def test_dunder_all(missing_dunder_all_names):
    assert not missing_dunder_all_names(acon.config)


def test_defaults():
    cfg = default_config()
    assert cfg.grid == PeriodicGrid((32, 32), (0.5, 0.5))
    assert cfg.params == ModelParams(
        1.0, [[1.0, 0.0], [0.0, 1.0]], (7.0 / 27.0, 7.0 / 27.0)
    )
    assert cfg.stepping.tau == 1e-3
    assert cfg.stepping.scheme is Scheme.MULTIPLIER
    assert cfg.horizon == 1e-2
    assert cfg.init.kind is InitKind.RANDOM_UNIFORM
    assert cfg.output.log == "acon_log.csv"
    assert cfg.output.snapshots is None


def test_full_configuration():
    cfg = parse_config(FULL)
    assert cfg.grid == PeriodicGrid((16, 8, 12), (1.0, 0.5, 0.75))
    assert cfg.params.epsilon == 0.05
    assert cfg.params.gamma[0, 1] == cfg.params.gamma[1, 0] == 0.3
    assert cfg.params.omega == (0.2, 0.35)
    assert cfg.params.penalty_m == 500.0
    stepping = cfg.stepping
    assert stepping.scheme is Scheme.MINIMIZING_MOVEMENT
    assert not stepping.project_each_step
    assert stepping.inner_max_iters == 500
    assert stepping.guard.beta_min == 1e-6
    assert stepping.inner_sweep is InnerSweep.ALTERNATING
    assert cfg.init.seed == 2 ** 64 - 1
    assert cfg.init.base_levels == (0.3, 0.4)
    assert cfg.init.spot_count == 6
    assert cfg.output.snapshots == "results/snaps"
    assert cfg.output.precision == 12


@pytest.mark.parametrize("text", ["", FULL])
def test_dump_and_parse_round_trip(text):
    cfg = parse_config(text)
    assert parse_config(dump_config(cfg)) == cfg


def test_dump_keeps_every_digit():
    cfg = parse_config("[stepping]\ntau = 0.1\n[model]\nomega1 = 0.1234567")
    text = dump_config(cfg)
    assert "tau = 0.10000000000000001" in text
    assert parse_config(text).params.omega[0] == 0.1234567


def test_single_values_are_broadcast():
    cfg = parse_config("[grid]\ndim = 3\npoints = 8\nhalf_lengths = 2")
    assert cfg.grid == PeriodicGrid((8, 8, 8), (2.0, 2.0, 2.0))


@pytest.mark.parametrize(
    "text,line,message",
    [
        ("[grid]\ndim = 4", 2, "must be 2 or 3"),
        ("[grid]\n\npoints = 16, 8, 8", 3, "expected 1 or 2 values"),
        ("[grid]\npoints = 2", 2, "at least 4 points"),
        ("[grid]\nhalf_lengths = 0.5, -1", 2, "positive"),
        ("[model]\nepsilon = -1", 2, "epsilon: must be positive"),
        ("[model]\nepsilon = abc", 2, "expected a number"),
        ("[model]\nomega2 = 1", 2, "leaves no room"),
        ("[model]\ngamma11 = 1\ngamma12 = 2", 3, "positive definite"),
        ("[stepping]\nscheme = euler", 2, "Unknown scheme"),
        ("[stepping]\ntau = 0", 2, "tau: must be positive"),
        ("[stepping]\ninner_max_iters = 0", 2, "at least 1"),
        ("[stepping]\nproject_each_step = maybe", 2, "true or false"),
        ("[init]\nseed = -3", 2, "unsigned 64-bit"),
        ("[init]\n\n\nbase_levels = 0.5", 4, "two numbers in"),
        ("[init]\nkind = checkerboard", 2, "Unknown initial condition"),
        ("[output]\nprecision = 18", 2, "between 1 and 17"),
        ("[output]\nsnapshot_every = -1", 2, "must not be negative"),
        ("[grid]\ndim = 2\n\n[physics]\nfoo = 1", 4, "Unknown section"),
        ("[model]\nepsilon = 1\ntemperature = 3", 3, "Unknown key"),
        ("[grid]\ndim = 2\nnonsense", 3, ""),
        ("dim = 2", 1, ""),
    ],
)
def test_errors_carry_line_numbers(text, line, message):
    with pytest.raises(ConfigError, match=message) as excinfo:
        parse_config(text)
    assert excinfo.value.line == line
    assert str(excinfo.value).startswith(f"line {line}: ")


def test_config_errors_are_value_errors():
    with pytest.raises(ValueError):
        parse_config("[model]\nepsilon = 0")


def test_load_config(write_config):
    path = write_config("[stepping]\ntau = 5e-4\n")
    assert load_config(path).stepping.tau == 5e-4


def test_load_missing_config(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.ini")


def test_with_seed():
    cfg = parse_config(FULL)
    reseeded = with_seed(cfg, 7)
    assert reseeded.init.seed == 7
    assert reseeded.init.kind is cfg.init.kind
    assert reseeded.params == cfg.params
    assert cfg.init.seed == 2 ** 64 - 1


def test_output_paths():
    cfg = parse_config(FULL)
    assert output_paths(cfg, environ={}) == (
        Path("results/run.csv"),
        Path("results/snaps"),
    )
    assert output_paths(cfg, environ={OUTPUT_DIR_ENV: "/scratch"}) == (
        Path("/scratch/results/run.csv"),
        Path("/scratch/results/snaps"),
    )


def test_output_paths_keep_absolute_paths(tmp_path):
    cfg = parse_config(f"[output]\nlog = {tmp_path / 'log.csv'}")
    log, snapshots = output_paths(cfg, environ={OUTPUT_DIR_ENV: "/scratch"})
    assert log == tmp_path / "log.csv"
    assert snapshots is None


def test_empty_log_disables_it():
    cfg = parse_config("[output]\nlog =")
    assert cfg.output.log is None
    assert output_paths(cfg, environ={}) == (None, None)

# Copyright (c) 2020 Slavfox
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
"""
Run configuration files.

A run is described by an INI file with the sections ``[grid]``,
``[model]``, ``[stepping]``, ``[init]`` and ``[output]``. Every key has a
default, so an empty file is a valid (normalised, 32x32) configuration; the
full grammar is documented in ``docs/configuration.rst``.

Invalid values raise `ConfigError` carrying the line of the offending key.
`dump_config` writes a configuration back out with 17 significant digits,
so that ``parse_config(dump_config(c)) == c``.
"""
from typing import TYPE_CHECKING, Optional, Tuple
from dataclasses import dataclass, field, replace
from pathlib import Path
from math import isfinite
import configparser
import os
import re

from acon.chemistry import DEFAULT_PENALTY_M, ModelParams
from acon.constraint import MultiplierGuard
from acon.dynamics import InnerSweep, Scheme, StepConfig
from acon.errors import ConfigError
from acon.grid import MIN_POINTS, PeriodicGrid
from acon.init_conditions import InitKind, InitSpec

if TYPE_CHECKING:
    from typing import Callable, Dict, Iterator, List, Mapping, TypeVar

    T = TypeVar("T")

__all__ = [
    "OUTPUT_DIR_ENV",
    "OutputConfig",
    "RunConfig",
    "default_config",
    "parse_config",
    "load_config",
    "dump_config",
    "with_seed",
    "output_paths",
]

#: Environment variable rebasing relative output paths.
OUTPUT_DIR_ENV = "ACON_OUTPUT_DIR"

_SECTIONS = {
    "grid": ("dim", "points", "half_lengths"),
    "model": (
        "epsilon",
        "gamma11",
        "gamma12",
        "gamma22",
        "omega1",
        "omega2",
        "penalty_m",
    ),
    "stepping": (
        "scheme",
        "tau",
        "horizon",
        "project_each_step",
        "inner_tol_grad",
        "inner_tol_constraint",
        "inner_max_iters",
        "beta_min",
        "inner_sweep",
    ),
    "init": (
        "kind",
        "seed",
        "amplitude",
        "base_levels",
        "stripes",
        "spot_radius",
        "spot_count",
    ),
    "output": ("log", "snapshots", "snapshot_every", "precision"),
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")


@dataclass(frozen=True)
class OutputConfig:
    """
    Where a run writes its results.

    :param log: Path of the CSV run log, or ``None`` for no log.
    :param snapshots: Directory for binary snapshots, or ``None`` for none.
    :param snapshot_every: Write a snapshot every this many steps; 0 writes
                           only the first and last state.
    :param precision: Significant digits of floats in the CSV log.
    """

    log: "Optional[str]" = "acon_log.csv"
    snapshots: "Optional[str]" = None
    snapshot_every: int = 0
    precision: int = 17


@dataclass(frozen=True)
class RunConfig:
    """A complete, validated run configuration."""

    grid: PeriodicGrid
    params: ModelParams
    stepping: StepConfig
    horizon: float
    init: InitSpec = field(default_factory=InitSpec)
    output: OutputConfig = field(default_factory=OutputConfig)


def default_config() -> "RunConfig":
    """The configuration an empty file describes."""
    return parse_config("")


def _message(error: "configparser.Error") -> "str":
    return str(getattr(error, "message", error)).splitlines()[0]


def _error_line(error: "configparser.Error") -> "Optional[int]":
    lineno = getattr(error, "lineno", None)
    if lineno is not None:
        return int(lineno)
    # MissingSectionHeaderError derives from ParsingError without .errors.
    errors = getattr(error, "errors", None)
    return int(errors[0][0]) if errors else None


class _Reader:
    # A ConfigParser together with the line of every section and key.

    def __init__(self, text: "str") -> None:
        self.lines: "Dict[Tuple[str, Optional[str]], int]" = {}
        section = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            header = _SECTION_RE.match(line)
            if header:
                section = header.group(1).strip()
                self.lines.setdefault((section, None), lineno)
                continue
            key = _KEY_RE.match(line)
            if key and section is not None:
                self.lines.setdefault(
                    (section, key.group(1).strip().lower()), lineno
                )

        self.parser = configparser.ConfigParser(
            interpolation=None,
            inline_comment_prefixes=("#", ";"),
            empty_lines_in_values=False,
        )
        try:
            self.parser.read_string(text)
        except configparser.Error as e:
            raise ConfigError(_message(e), _error_line(e)) from e

        for name in self.parser.sections():
            if name not in _SECTIONS:
                raise ConfigError(
                    f"Unknown section [{name}]; expected one of "
                    f"{', '.join(_SECTIONS)}.",
                    self.line(name),
                )
            for key in self.parser[name]:
                if key not in _SECTIONS[name]:
                    raise ConfigError(
                        f"Unknown key {key!r} in [{name}].",
                        self.line(name, key),
                    )

    def line(
        self, section: "str", key: "Optional[str]" = None
    ) -> "Optional[int]":
        return self.lines.get((section, key), self.lines.get((section, None)))

    def raw(self, section: "str", key: "str") -> "Optional[str]":
        if not self.parser.has_section(section):
            return None
        value = self.parser[section].get(key)
        return None if value is None else value.strip()

    def get(
        self,
        section: "str",
        key: "str",
        convert: "Callable[[str], T]",
        default: "T",
    ) -> "T":
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            return convert(text)
        except ValueError as e:
            raise ConfigError(
                f"[{section}] {key}: {e}", self.line(section, key)
            ) from e

    def check(
        self, ok: "bool", section: "str", key: "str", message: "str"
    ) -> None:
        if not ok:
            raise ConfigError(
                f"[{section}] {key}: {message}", self.line(section, key)
            )


def _float(text: "str") -> "float":
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _int(text: "str") -> "int":
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _bool(text: "str") -> "bool":
    states = configparser.ConfigParser.BOOLEAN_STATES
    try:
        return states[text.lower()]
    except KeyError:
        raise ValueError(f"expected true or false, got {text!r}") from None


def _floats(text: "str") -> "Tuple[float, ...]":
    return tuple(_float(part) for part in text.split(",") if part.strip())


def _ints(text: "str") -> "Tuple[int, ...]":
    return tuple(_int(part) for part in text.split(",") if part.strip())


def _path(text: "str") -> "Optional[str]":
    return text or None


def _broadcast(
    values: "Tuple[T, ...]", dim: "int", reader: "_Reader", key: "str"
) -> "Tuple[T, ...]":
    if len(values) == 1:
        return values * dim
    reader.check(
        len(values) == dim,
        "grid",
        key,
        f"expected 1 or {dim} values, got {len(values)}",
    )
    return values


def _read_grid(reader: "_Reader") -> "PeriodicGrid":
    dim = reader.get("grid", "dim", _int, 2)
    reader.check(dim in (2, 3), "grid", "dim", f"must be 2 or 3, got {dim}")
    points = _broadcast(
        reader.get("grid", "points", _ints, (32,)), dim, reader, "points"
    )
    half_lengths = _broadcast(
        reader.get("grid", "half_lengths", _floats, (0.5,)),
        dim,
        reader,
        "half_lengths",
    )
    reader.check(
        all(n >= MIN_POINTS for n in points),
        "grid",
        "points",
        f"need at least {MIN_POINTS} points per axis, got {points}",
    )
    try:
        return PeriodicGrid(points, half_lengths)
    except ValueError as e:
        raise ConfigError(str(e), reader.line("grid", "half_lengths")) from e


def _positive(
    reader: "_Reader", section: "str", key: "str", default: "float"
) -> "float":
    value = reader.get(section, key, _float, default)
    reader.check(
        value > 0 and isfinite(value),
        section,
        key,
        f"must be positive and finite, got {value}",
    )
    return value


def _read_model(reader: "_Reader") -> "ModelParams":
    epsilon = _positive(reader, "model", "epsilon", 1.0)
    penalty_m = _positive(reader, "model", "penalty_m", DEFAULT_PENALTY_M)
    omega = []
    for key in ("omega1", "omega2"):
        value = reader.get("model", key, _float, 7.0 / 27.0)
        reader.check(isfinite(value), "model", key, "must be finite")
        reader.check(
            value not in (0.0, 1.0),
            "model",
            key,
            f"a volume fraction of {value} leaves no room for the other "
            f"species",
        )
        omega.append(value)
    g11 = reader.get("model", "gamma11", _float, 1.0)
    g12 = reader.get("model", "gamma12", _float, 0.0)
    g22 = reader.get("model", "gamma22", _float, 1.0)
    blame = next(
        (
            k
            for k in ("gamma12", "gamma11", "gamma22")
            if reader.raw("model", k) is not None
        ),
        "gamma11",
    )
    try:
        return ModelParams(
            epsilon, [[g11, g12], [g12, g22]], (omega[0], omega[1]), penalty_m
        )
    except ValueError as e:
        raise ConfigError(str(e), reader.line("model", blame)) from e


def _read_stepping(reader: "_Reader") -> "Tuple[StepConfig, float]":
    scheme = reader.get(
        "stepping", "scheme", Scheme.from_name, Scheme.MULTIPLIER
    )
    tau = _positive(reader, "stepping", "tau", 1e-3)
    horizon = _positive(reader, "stepping", "horizon", 1e-2)
    iters = reader.get("stepping", "inner_max_iters", _int, 10000)
    reader.check(
        iters >= 1,
        "stepping",
        "inner_max_iters",
        f"must be at least 1, got {iters}",
    )
    cfg = StepConfig(
        tau=tau,
        scheme=scheme,
        project_each_step=reader.get(
            "stepping", "project_each_step", _bool, True
        ),
        inner_tol_grad=_positive(reader, "stepping", "inner_tol_grad", 1e-9),
        inner_tol_constraint=_positive(
            reader, "stepping", "inner_tol_constraint", 1e-11
        ),
        inner_max_iters=iters,
        guard=MultiplierGuard(_positive(reader, "stepping", "beta_min", 1e-8)),
        inner_sweep=reader.get(
            "stepping", "inner_sweep", InnerSweep.from_name, InnerSweep.JOINT
        ),
    )
    return cfg, horizon


def _read_init(reader: "_Reader") -> "InitSpec":
    defaults = InitSpec()
    seed = reader.get("init", "seed", _int, defaults.seed)
    reader.check(
        0 <= seed < 2 ** 64,
        "init",
        "seed",
        f"must be an unsigned 64-bit integer, got {seed}",
    )
    amplitude = reader.get("init", "amplitude", _float, defaults.amplitude)
    reader.check(
        amplitude >= 0,
        "init",
        "amplitude",
        f"must not be negative, got {amplitude}",
    )
    levels = reader.get("init", "base_levels", _floats, ())
    reader.check(
        not levels or (len(levels) == 2 and all(0 < b < 1 for b in levels)),
        "init",
        "base_levels",
        f"must be empty or two numbers in (0, 1), got {levels}",
    )
    stripes = reader.get("init", "stripes", _int, defaults.stripes)
    reader.check(stripes >= 1, "init", "stripes", "must be positive")
    spot_count = reader.get("init", "spot_count", _int, defaults.spot_count)
    reader.check(spot_count >= 1, "init", "spot_count", "must be positive")
    return InitSpec(
        kind=reader.get("init", "kind", InitKind.from_name, defaults.kind),
        seed=seed,
        amplitude=amplitude,
        base_levels=(levels[0], levels[1]) if levels else None,
        stripes=stripes,
        spot_radius=_positive(
            reader, "init", "spot_radius", defaults.spot_radius
        ),
        spot_count=spot_count,
    )


def _read_output(reader: "_Reader") -> "OutputConfig":
    defaults = OutputConfig()
    every = reader.get("output", "snapshot_every", _int, 0)
    reader.check(
        every >= 0, "output", "snapshot_every", "must not be negative"
    )
    precision = reader.get("output", "precision", _int, defaults.precision)
    reader.check(
        1 <= precision <= 17,
        "output",
        "precision",
        f"must be between 1 and 17, got {precision}",
    )
    return OutputConfig(
        log=reader.get("output", "log", _path, defaults.log),
        snapshots=reader.get("output", "snapshots", _path, defaults.snapshots),
        snapshot_every=every,
        precision=precision,
    )


def parse_config(text: "str") -> "RunConfig":
    """
    Parse the text of a run configuration.

    :param text: INI-formatted configuration.
    :type text: str

    :return: The validated configuration.
    :rtype: `RunConfig`

    :raises ConfigError: On malformed syntax, unknown sections or keys, or
                         values violating an invariant. The error carries
                         the line number of the offending key.
    """
    reader = _Reader(text)
    grid = _read_grid(reader)
    params = _read_model(reader)
    stepping, horizon = _read_stepping(reader)
    return RunConfig(
        grid=grid,
        params=params,
        stepping=stepping,
        horizon=horizon,
        init=_read_init(reader),
        output=_read_output(reader),
    )


def load_config(path: "os.PathLike[str]") -> "RunConfig":
    """
    Read and parse a configuration file.

    :raises OSError: If the file can't be read.
    :raises ConfigError: If its contents are invalid.
    """
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _g(value: "float") -> "str":
    return format(value, ".17g")


def _items(cfg: "RunConfig") -> "Iterator[Tuple[str, Mapping[str, str]]]":
    grid, params, stepping = cfg.grid, cfg.params, cfg.stepping
    yield "grid", {
        "dim": str(grid.dim),
        "points": ", ".join(str(n) for n in grid.points),
        "half_lengths": ", ".join(_g(x) for x in grid.half_lengths),
    }
    yield "model", {
        "epsilon": _g(params.epsilon),
        "gamma11": _g(params.gamma[0, 0]),
        "gamma12": _g(params.gamma[0, 1]),
        "gamma22": _g(params.gamma[1, 1]),
        "omega1": _g(params.omega[0]),
        "omega2": _g(params.omega[1]),
        "penalty_m": _g(params.penalty_m),
    }
    yield "stepping", {
        "scheme": stepping.scheme.value,
        "tau": _g(stepping.tau),
        "horizon": _g(cfg.horizon),
        "project_each_step": str(stepping.project_each_step).lower(),
        "inner_tol_grad": _g(stepping.inner_tol_grad),
        "inner_tol_constraint": _g(stepping.inner_tol_constraint),
        "inner_max_iters": str(stepping.inner_max_iters),
        "beta_min": _g(stepping.guard.beta_min),
        "inner_sweep": stepping.inner_sweep.value,
    }
    init = cfg.init
    levels = init.base_levels
    yield "init", {
        "kind": init.kind.value,
        "seed": str(init.seed),
        "amplitude": _g(init.amplitude),
        "base_levels": ", ".join(_g(b) for b in levels) if levels else "",
        "stripes": str(init.stripes),
        "spot_radius": _g(init.spot_radius),
        "spot_count": str(init.spot_count),
    }
    output = cfg.output
    yield "output", {
        "log": output.log or "",
        "snapshots": output.snapshots or "",
        "snapshot_every": str(output.snapshot_every),
        "precision": str(output.precision),
    }


def dump_config(cfg: "RunConfig") -> "str":
    """
    Serialise a configuration as INI text, floats with 17 significant
    digits.
    """
    chunks: "List[str]" = []
    for section, values in _items(cfg):
        chunks.append(f"[{section}]")
        chunks.extend(f"{key} = {value}" for key, value in values.items())
        chunks.append("")
    return "\n".join(chunks)


def with_seed(cfg: "RunConfig", seed: "int") -> "RunConfig":
    """A copy of ``cfg`` whose initial condition uses ``seed``."""
    return replace(cfg, init=replace(cfg.init, seed=seed))


def output_paths(
    cfg: "RunConfig", environ: "Optional[Mapping[str, str]]" = None
) -> "Tuple[Optional[Path], Optional[Path]]":
    """
    The log file and snapshot directory of a run.

    Relative paths are taken relative to ``$ACON_OUTPUT_DIR`` when that is
    set, and to the working directory otherwise.
    """
    env = os.environ if environ is None else environ
    base = env.get(OUTPUT_DIR_ENV)

    def resolve(path: "Optional[str]") -> "Optional[Path]":
        if path is None:
            return None
        p = Path(path)
        if base and not p.is_absolute():
            return Path(base) / p
        return p

    return resolve(cfg.output.log), resolve(cfg.output.snapshots)
